#include "relapse/cv.hpp"

#include <algorithm>

#include "relapse/error.hpp"
#include "relapse/rng.hpp"

namespace relapse {

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::span<const int> labels,
                                                    const CVConfig& config) {
    if (config.k < 2) throw Error("kfold needs k >= 2");
    if (labels.size() != n) throw Error("kfold: labels size mismatch");

    std::vector<std::vector<std::size_t>> folds(config.k);
    Rng rng(config.seed);

    if (config.stratified) {
        std::vector<std::size_t> by_class[2];
        for (std::size_t i = 0; i < n; ++i) by_class[labels[i] == 1 ? 1 : 0].push_back(i);
        for (auto& rows : by_class) {
            if (rows.size() < config.k) {
                throw Error("kfold: a class has fewer members (" + std::to_string(rows.size()) +
                            ") than folds (" + std::to_string(config.k) + ")");
            }
            rng.shuffle(rows);
            for (std::size_t i = 0; i < rows.size(); ++i) folds[i % config.k].push_back(rows[i]);
        }
    } else {
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = i;
        rng.shuffle(rows);
        for (std::size_t i = 0; i < n; ++i) folds[i % config.k].push_back(rows[i]);
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

}  // namespace relapse
