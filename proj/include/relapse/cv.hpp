#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace relapse {

struct CVConfig {
    std::size_t k = 4;
    bool stratified = true;
    std::uint64_t seed = 0;
};

// k disjoint index sets covering 0..n-1. Stratified: per class, seeded
// shuffle then round-robin, so per-class fold sizes differ by at most one.
// Errors when a class has fewer than k members.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::span<const int> labels,
                                                    const CVConfig& config);

}  // namespace relapse
