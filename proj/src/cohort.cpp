#include "relapse/cohort.hpp"

#include <algorithm>
#include <unordered_map>

#include "relapse/csv.hpp"

namespace relapse {

bool week_has_exposure(const PatientTimeline& t, int week_index, const CohortConfig& config) {
    const auto it = t.exposure.find(week_index);
    if (it == t.exposure.end()) return false;
    for (const auto& var : config.variables) {
        const auto cov = it->second.coverage.find(var);
        if (cov == it->second.coverage.end() || cov->second <= 0) return false;
    }
    return true;
}

Era era_of(int week_index) {
    static const Date boundary{std::chrono::year{2018} / std::chrono::January / 1};
    return week_start(week_index) >= boundary ? Era::Post2018 : Era::Pre2018;
}

std::optional<std::pair<int, int>> first_eligible_relapse(const PatientTimeline& t, const CohortConfig& config) {
    for (const Date relapse : t.relapse_dates) {
        if (relapse < exposure_epoch + std::chrono::days{7}) continue;  // no full previous week exists
        const int event_week = week_index_of(relapse);
        const int predictor_week = event_week - 1;
        if (predictor_week >= 0 && week_has_exposure(t, predictor_week, config)) {
            return std::make_pair(event_week, predictor_week);
        }
    }
    return std::nullopt;
}

std::vector<int> eligible_control_weeks(const PatientTimeline& t, const CohortConfig& config) {
    if (!t.relapse_dates.empty()) {
        throw DataError("patient '" + t.id + "' has relapses; not a control candidate");
    }
    std::vector<int> weeks;
    for (const auto& [week, unused] : t.exposure) {
        (void)unused;
        if (!week_has_exposure(t, week, config)) continue;
        const int target = week + 1;  // non-occurrence week predicted from `week`
        const Date start = week_start(target);
        if (start < t.follow_up_start || start + std::chrono::days{6} > t.follow_up_end) continue;
        weeks.push_back(target);
    }
    return weeks;
}

namespace {

struct MatchGraph {
    // adjacency: case -> candidate pool indices, both sides in id order
    std::vector<std::vector<std::size_t>> adjacency;
};

bool try_augment(const MatchGraph& graph, std::size_t case_idx, std::vector<int>& pool_to_case,
                 std::vector<std::uint8_t>& visited) {
    for (const std::size_t p : graph.adjacency[case_idx]) {
        if (visited[p]) continue;
        visited[p] = 1;
        if (pool_to_case[p] < 0 ||
            try_augment(graph, static_cast<std::size_t>(pool_to_case[p]), pool_to_case, visited)) {
            pool_to_case[p] = static_cast<int>(case_idx);
            return true;
        }
    }
    return false;
}

}  // namespace

MatchResult match_controls(std::span<const CohortInstance> cases, std::span<const MatchCandidate> pool,
                           [[maybe_unused]] std::uint64_t seed) {
    // Deterministic processing order on both sides.
    std::vector<std::size_t> case_order(cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) case_order[i] = i;
    std::sort(case_order.begin(), case_order.end(),
              [&](std::size_t a, std::size_t b) { return cases[a].subject_id < cases[b].subject_id; });

    std::vector<std::size_t> pool_order(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool_order[i] = i;
    std::sort(pool_order.begin(), pool_order.end(),
              [&](std::size_t a, std::size_t b) { return pool[a].patient->id < pool[b].patient->id; });

    MatchGraph graph;
    graph.adjacency.resize(cases.size());
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const CohortInstance& c = cases[case_order[ci]];
        for (std::size_t pi = 0; pi < pool.size(); ++pi) {
            const MatchCandidate& cand = pool[pool_order[pi]];
            const bool admissible = std::any_of(
                cand.eligible_weeks.begin(), cand.eligible_weeks.end(), [&](int w) {
                    return week_of_year(week_start(w)) == c.week_of_year && era_of(w) == c.era;
                });
            if (admissible) graph.adjacency[ci].push_back(pi);
        }
    }

    // Kuhn's augmenting paths in sorted order give a maximum matching with the
    // (case id, patient id) tie rule.
    std::vector<int> pool_to_case(pool.size(), -1);
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        std::vector<std::uint8_t> visited(pool.size(), 0);
        try_augment(graph, ci, pool_to_case, visited);
    }

    std::vector<int> case_to_pool(cases.size(), -1);
    for (std::size_t p = 0; p < pool.size(); ++p) {
        if (pool_to_case[p] >= 0) case_to_pool[static_cast<std::size_t>(pool_to_case[p])] = static_cast<int>(p);
    }

    MatchResult result;
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const std::size_t original_case = case_order[ci];
        const CohortInstance& c = cases[original_case];
        if (case_to_pool[ci] < 0) {
            result.unmatched_case_ids.push_back(c.subject_id);
            continue;
        }
        const MatchCandidate& cand = pool[pool_order[static_cast<std::size_t>(case_to_pool[ci])]];
        std::vector<int> weeks = cand.eligible_weeks;
        std::sort(weeks.begin(), weeks.end());
        int chosen = -1;
        for (int w : weeks) {
            if (week_of_year(week_start(w)) == c.week_of_year && era_of(w) == c.era) {
                chosen = w;
                break;  // earliest admissible week
            }
        }
        result.pairs.push_back({original_case, cand.patient->id, chosen});
    }
    return result;
}

std::vector<ColumnSpec> cohort_schema(const CohortConfig& config) {
    std::vector<ColumnSpec> schema{
        {"subject_id", ColumnKind::Categorical, ColumnCategory::Meta},
        {"pair_id", ColumnKind::Categorical, ColumnCategory::Meta},
        {"predictor_week", ColumnKind::Numeric, ColumnCategory::Meta},
        {"event_week", ColumnKind::Numeric, ColumnCategory::Meta},
        {"week_of_year", ColumnKind::Numeric, ColumnCategory::Meta},
        {"post2018", ColumnKind::Binary, ColumnCategory::Meta},
        {"relapse", ColumnKind::Binary, ColumnCategory::Outcome},
        {"sex", ColumnKind::Binary, ColumnCategory::Demographic},
        {"age_at_onset", ColumnKind::Numeric, ColumnCategory::Demographic},
        {"ethnicity", ColumnKind::Categorical, ColumnCategory::Demographic},
        {"residence_classification", ColumnKind::Categorical, ColumnCategory::Demographic},
        {"diagnostic_delay", ColumnKind::Numeric, ColumnCategory::ClinicalOnset},
        {"ms_in_pediatric_age", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"spinal_cord_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"brainstem_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"eye_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"supratentorial_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"other_symptoms_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"time_since_onset", ColumnKind::Numeric, ColumnCategory::ClinicalCurrentWeek},
        {"edss", ColumnKind::Numeric, ColumnCategory::ClinicalRecent},
    };
    for (const auto& fs : functional_system_names) {
        schema.push_back({std::string(fs), ColumnKind::Numeric, ColumnCategory::ClinicalRecent});
    }
    for (const auto& var : config.variables) {
        schema.push_back({var + "_mean", ColumnKind::Numeric, ColumnCategory::Environmental});
    }
    for (const auto& var : config.variables) {
        if (config.thresholds.count(var)) {
            schema.push_back({var + "_ratio", ColumnKind::Numeric, ColumnCategory::Environmental});
        }
    }
    schema.push_back({"season", ColumnKind::Categorical, ColumnCategory::Environmental});
    return schema;
}

void assemble_features(TableBuilder& builder, const CohortInstance& instance, const PatientTimeline& timeline,
                       const CohortConfig& config, const std::optional<std::string>& pair_id) {
    const Date predictor_start = week_start(instance.predictor_week);

    builder.begin_row();
    builder.set_category(builder.column_index("subject_id"), instance.subject_id);
    if (pair_id) builder.set_category(builder.column_index("pair_id"), *pair_id);
    builder.set_numeric(builder.column_index("predictor_week"), instance.predictor_week);
    builder.set_numeric(builder.column_index("event_week"), instance.event_week);
    builder.set_numeric(builder.column_index("week_of_year"), instance.week_of_year);
    builder.set_numeric(builder.column_index("post2018"), instance.era == Era::Post2018 ? 1.0 : 0.0);
    builder.set_numeric(builder.column_index("relapse"), instance.label);

    const auto set_opt = [&](const char* name, const std::optional<double>& v) {
        if (v) builder.set_numeric(builder.column_index(name), *v);
    };
    set_opt("sex", timeline.sex);
    set_opt("age_at_onset", timeline.age_at_onset);
    if (timeline.ethnicity) builder.set_category(builder.column_index("ethnicity"), *timeline.ethnicity);
    if (timeline.residence) {
        builder.set_category(builder.column_index("residence_classification"), *timeline.residence);
    }
    builder.set_numeric(builder.column_index("diagnostic_delay"),
                        days_between(timeline.onset_date, timeline.diagnosis_date));
    set_opt("ms_in_pediatric_age", timeline.pediatric_onset);
    set_opt("spinal_cord_onset", timeline.spinal_cord_onset);
    set_opt("brainstem_onset", timeline.brainstem_onset);
    set_opt("eye_onset", timeline.eye_onset);
    set_opt("supratentorial_onset", timeline.supratentorial_onset);
    set_opt("other_symptoms_onset", timeline.other_symptoms_onset);
    builder.set_numeric(builder.column_index("time_since_onset"),
                        days_between(timeline.onset_date, predictor_start));

    // Most recent visit up to the predictor week's end; nothing at or after
    // the event week is readable here.
    const Date cutoff = week_start(instance.predictor_week + 1);
    const Visit* last_visit = nullptr;
    for (const auto& visit : timeline.visits) {
        if (visit.date < cutoff && (last_visit == nullptr || visit.date >= last_visit->date)) {
            last_visit = &visit;
        }
    }
    if (last_visit != nullptr) {
        if (last_visit->edss) builder.set_numeric(builder.column_index("edss"), *last_visit->edss);
        for (std::size_t i = 0; i < functional_system_names.size(); ++i) {
            if (last_visit->subscores[i]) {
                builder.set_numeric(builder.column_index(std::string(functional_system_names[i])),
                                    *last_visit->subscores[i]);
            }
        }
    }

    const auto exposure_it = timeline.exposure.find(instance.predictor_week);
    if (exposure_it != timeline.exposure.end()) {
        const WeeklyExposure& week = exposure_it->second;
        for (const auto& var : config.variables) {
            const auto mean = week.means.find(var);
            if (mean != week.means.end()) {
                builder.set_numeric(builder.column_index(var + "_mean"), mean->second);
            }
            if (config.thresholds.count(var)) {
                const auto ratio = week.ratios.find(var);
                if (ratio != week.ratios.end()) {
                    builder.set_numeric(builder.column_index(var + "_ratio"), ratio->second);
                }
            }
        }
    }
    builder.set_category(builder.column_index("season"), std::string(season_name(season_of(predictor_start))));
    builder.end_row();
}

CohortBuildResult build_cohort(std::span<const PatientTimeline> patients, const CohortConfig& config,
                               std::uint64_t seed) {
    std::vector<CohortInstance> cases;
    std::vector<const PatientTimeline*> case_timelines;
    std::vector<MatchCandidate> pool;

    for (const auto& patient : patients) {
        if (patient.relapse_dates.empty()) {
            MatchCandidate cand{&patient, eligible_control_weeks(patient, config)};
            if (!cand.eligible_weeks.empty()) pool.push_back(std::move(cand));
            continue;
        }
        const auto eligible = first_eligible_relapse(patient, config);
        if (!eligible) continue;
        CohortInstance instance;
        instance.subject_id = patient.id;
        instance.label = 1;
        instance.event_week = eligible->first;
        instance.predictor_week = eligible->second;
        instance.week_of_year = week_of_year(week_start(instance.event_week));
        instance.era = era_of(instance.event_week);
        cases.push_back(std::move(instance));
        case_timelines.push_back(&patient);
    }

    const MatchResult matching = match_controls(cases, pool, seed);

    std::unordered_map<std::string, const PatientTimeline*> by_id;
    for (const auto& patient : patients) by_id[patient.id] = &patient;

    // pair ids in case-id order
    std::vector<std::size_t> pair_order(matching.pairs.size());
    for (std::size_t i = 0; i < pair_order.size(); ++i) pair_order[i] = i;
    std::sort(pair_order.begin(), pair_order.end(), [&](std::size_t a, std::size_t b) {
        return cases[matching.pairs[a].case_index].subject_id < cases[matching.pairs[b].case_index].subject_id;
    });
    std::unordered_map<std::size_t, std::string> pair_id_of_case;  // case index -> pair id
    std::vector<std::pair<std::string, int>> control_rows;         // (pair id) -> control instance info
    CohortBuildResult result;
    std::vector<std::tuple<std::string, CohortInstance, const PatientTimeline*, std::optional<std::string>>> rows;

    for (std::size_t k = 0; k < pair_order.size(); ++k) {
        const auto& pair = matching.pairs[pair_order[k]];
        char buf[32];
        std::snprintf(buf, sizeof buf, "P%04zu", k + 1);
        pair_id_of_case[pair.case_index] = buf;

        CohortInstance control;
        control.subject_id = pair.control_id;
        control.label = 0;
        control.event_week = pair.control_week;
        control.predictor_week = pair.control_week - 1;
        control.week_of_year = week_of_year(week_start(pair.control_week));
        control.era = era_of(pair.control_week);
        rows.emplace_back(control.subject_id, control, by_id.at(pair.control_id), std::string(buf));
        result.pairs.emplace_back(cases[pair.case_index].subject_id, pair.control_id);
    }
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const auto it = pair_id_of_case.find(ci);
        rows.emplace_back(cases[ci].subject_id, cases[ci], case_timelines[ci],
                          it == pair_id_of_case.end() ? std::optional<std::string>{} : it->second);
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });

    TableBuilder builder(cohort_schema(config));
    for (const auto& [id, instance, timeline, pair_id] : rows) {
        (void)id;
        assemble_features(builder, instance, *timeline, config, pair_id);
    }

    result.table = builder.build();
    result.n_cases = cases.size();
    result.n_controls = matching.pairs.size();
    result.unmatched_case_ids = matching.unmatched_case_ids;
    return result;
}

namespace {

std::vector<ColumnSpec> static_schema() {
    std::vector<ColumnSpec> schema{
        {"id", ColumnKind::Categorical, ColumnCategory::Meta},
        {"postcode", ColumnKind::Categorical, ColumnCategory::Meta},
        {"onset_date", ColumnKind::Categorical, ColumnCategory::Meta},
        {"diagnosis_date", ColumnKind::Categorical, ColumnCategory::Meta},
        {"follow_up_start", ColumnKind::Categorical, ColumnCategory::Meta},
        {"follow_up_end", ColumnKind::Categorical, ColumnCategory::Meta},
        {"sex", ColumnKind::Binary, ColumnCategory::Demographic},
        {"age_at_onset", ColumnKind::Numeric, ColumnCategory::Demographic},
        {"ethnicity", ColumnKind::Categorical, ColumnCategory::Demographic},
        {"residence_classification", ColumnKind::Categorical, ColumnCategory::Demographic},
        {"ms_in_pediatric_age", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"spinal_cord_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"brainstem_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"eye_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"supratentorial_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
        {"other_symptoms_onset", ColumnKind::Binary, ColumnCategory::ClinicalOnset},
    };
    return schema;
}

}  // namespace

std::vector<PatientTimeline> load_timelines(const std::filesystem::path& static_csv,
                                            const std::filesystem::path& relapses_csv,
                                            const std::filesystem::path& visits_csv,
                                            const DataTable& exposure, const CohortConfig& config) {
    const DataTable statics = read_csv_file(static_csv, static_schema());
    std::vector<PatientTimeline> patients;
    patients.reserve(statics.n_rows());
    std::unordered_map<std::string, std::size_t> index_of;

    const auto required_date = [&](std::size_t r, const char* col) {
        const std::size_t c = statics.column_index(col);
        if (statics.is_missing(r, c)) {
            throw DataError("static row " + std::to_string(r) + ": missing " + std::string(col));
        }
        return parse_date(statics.category_at(r, c));
    };

    for (std::size_t r = 0; r < statics.n_rows(); ++r) {
        PatientTimeline t;
        if (statics.is_missing(r, statics.column_index("id"))) {
            throw DataError("static row " + std::to_string(r) + ": missing id");
        }
        t.id = statics.category_at(r, statics.column_index("id"));
        if (!statics.is_missing(r, statics.column_index("postcode"))) {
            t.postcode = statics.category_at(r, statics.column_index("postcode"));
        }
        t.onset_date = required_date(r, "onset_date");
        t.diagnosis_date = required_date(r, "diagnosis_date");
        t.follow_up_start = required_date(r, "follow_up_start");
        t.follow_up_end = required_date(r, "follow_up_end");
        if (t.diagnosis_date < t.onset_date) {
            throw DataError("patient '" + t.id + "': diagnosis precedes onset");
        }

        const auto opt_num = [&](const char* col) -> std::optional<double> {
            const std::size_t c = statics.column_index(col);
            if (statics.is_missing(r, c)) return std::nullopt;
            return statics.numeric_at(r, c);
        };
        const auto opt_cat = [&](const char* col) -> std::optional<std::string> {
            const std::size_t c = statics.column_index(col);
            if (statics.is_missing(r, c)) return std::nullopt;
            return statics.category_at(r, c);
        };
        t.sex = opt_num("sex");
        t.age_at_onset = opt_num("age_at_onset");
        t.ethnicity = opt_cat("ethnicity");
        t.residence = opt_cat("residence_classification");
        t.pediatric_onset = opt_num("ms_in_pediatric_age");
        t.spinal_cord_onset = opt_num("spinal_cord_onset");
        t.brainstem_onset = opt_num("brainstem_onset");
        t.eye_onset = opt_num("eye_onset");
        t.supratentorial_onset = opt_num("supratentorial_onset");
        t.other_symptoms_onset = opt_num("other_symptoms_onset");

        if (index_of.count(t.id)) throw DataError("duplicate patient id '" + t.id + "'");
        index_of[t.id] = patients.size();
        patients.push_back(std::move(t));
    }

    const std::vector<ColumnSpec> relapse_schema{
        {"id", ColumnKind::Categorical, ColumnCategory::Meta},
        {"date", ColumnKind::Categorical, ColumnCategory::Meta},
    };
    const DataTable relapses = read_csv_file(relapses_csv, relapse_schema);
    for (std::size_t r = 0; r < relapses.n_rows(); ++r) {
        if (relapses.is_missing(r, 0) || relapses.is_missing(r, 1)) {
            throw DataError("relapse row " + std::to_string(r) + ": missing field");
        }
        const auto it = index_of.find(relapses.category_at(r, 0));
        if (it == index_of.end()) {
            throw DataError("relapse row " + std::to_string(r) + ": unknown patient id '" +
                            relapses.category_at(r, 0) + "'");
        }
        patients[it->second].relapse_dates.push_back(parse_date(relapses.category_at(r, 1)));
    }
    for (auto& p : patients) std::sort(p.relapse_dates.begin(), p.relapse_dates.end());

    std::vector<ColumnSpec> visit_schema{
        {"id", ColumnKind::Categorical, ColumnCategory::Meta},
        {"date", ColumnKind::Categorical, ColumnCategory::Meta},
        {"edss", ColumnKind::Numeric, ColumnCategory::ClinicalRecent},
    };
    for (const auto& fs : functional_system_names) {
        visit_schema.push_back({std::string(fs), ColumnKind::Numeric, ColumnCategory::ClinicalRecent});
    }
    const DataTable visits = read_csv_file(visits_csv, visit_schema);
    for (std::size_t r = 0; r < visits.n_rows(); ++r) {
        if (visits.is_missing(r, 0) || visits.is_missing(r, 1)) {
            throw DataError("visit row " + std::to_string(r) + ": missing id or date");
        }
        const auto it = index_of.find(visits.category_at(r, 0));
        if (it == index_of.end()) {
            throw DataError("visit row " + std::to_string(r) + ": unknown patient id '" +
                            visits.category_at(r, 0) + "'");
        }
        Visit visit;
        visit.date = parse_date(visits.category_at(r, 1));
        if (!visits.is_missing(r, 2)) visit.edss = visits.numeric_at(r, 2);
        for (std::size_t i = 0; i < functional_system_names.size(); ++i) {
            if (!visits.is_missing(r, 3 + i)) visit.subscores[i] = visits.numeric_at(r, 3 + i);
        }
        patients[it->second].visits.push_back(std::move(visit));
    }
    for (auto& p : patients) {
        std::sort(p.visits.begin(), p.visits.end(), [](const Visit& a, const Visit& b) { return a.date < b.date; });
    }

    // Attach exposure rows.
    const std::size_t c_pid = exposure.column_index("patient_id");
    const std::size_t c_week = exposure.column_index("week_index");
    for (std::size_t r = 0; r < exposure.n_rows(); ++r) {
        if (exposure.is_missing(r, c_pid) || exposure.is_missing(r, c_week)) continue;
        const auto it = index_of.find(exposure.category_at(r, c_pid));
        if (it == index_of.end()) continue;  // exposure rows for unknown patients are ignorable
        WeeklyExposure week;
        week.week_index = static_cast<int>(exposure.numeric_at(r, c_week));
        for (const auto& var : config.variables) {
            const auto mean_col = exposure.find_column(var + "_mean");
            const auto days_col = exposure.find_column(var + "_days");
            if (mean_col && !exposure.is_missing(r, *mean_col)) {
                week.means[var] = exposure.numeric_at(r, *mean_col);
                week.coverage[var] =
                    days_col && !exposure.is_missing(r, *days_col)
                        ? static_cast<int>(exposure.numeric_at(r, *days_col))
                        : 1;
            }
            const auto ratio_col = exposure.find_column(var + "_ratio");
            if (ratio_col && !exposure.is_missing(r, *ratio_col)) {
                week.ratios[var] = exposure.numeric_at(r, *ratio_col);
            }
        }
        patients[it->second].exposure[week.week_index] = std::move(week);
    }
    return patients;
}

}  // namespace relapse
