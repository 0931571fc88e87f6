#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relapse/data_table.hpp"
#include "relapse/dates.hpp"
#include "relapse/env_linkage.hpp"

namespace relapse {

inline constexpr std::array<std::string_view, 8> functional_system_names{
    "fs_pyramidal", "fs_cerebellar", "fs_brainstem",        "fs_sensory",
    "fs_bowel_bladder", "fs_visual",  "fs_cerebral", "fs_ambulation"};

struct Visit {
    Date date{};
    std::optional<double> edss;
    std::array<std::optional<double>, 8> subscores;
};

struct PatientTimeline {
    std::string id;
    std::string postcode;
    Date onset_date{};
    Date diagnosis_date{};
    Date follow_up_start{};
    Date follow_up_end{};
    std::vector<Date> relapse_dates;  // ascending
    std::optional<double> sex;        // 0/1
    std::optional<double> age_at_onset;
    std::optional<std::string> ethnicity;
    std::optional<std::string> residence;
    std::optional<double> pediatric_onset;
    std::optional<double> spinal_cord_onset;
    std::optional<double> brainstem_onset;
    std::optional<double> eye_onset;
    std::optional<double> supratentorial_onset;
    std::optional<double> other_symptoms_onset;
    std::vector<Visit> visits;                // sorted by date
    std::map<int, WeeklyExposure> exposure;   // week index -> exposure
};

enum class Era { Pre2018, Post2018 };

struct CohortInstance {
    std::string subject_id;
    int label = 0;  // 1 = case, 0 = control
    int predictor_week = -1;
    int event_week = -1;
    int week_of_year = 0;
    Era era = Era::Pre2018;
};

struct CohortConfig {
    std::vector<std::string> variables;       // all must be observed in a week to count as covered
    std::map<std::string, double> thresholds; // decides which ratio features exist
};

// A week counts as covered when every configured variable has at least one
// observed day in it.
bool week_has_exposure(const PatientTimeline& t, int week_index, const CohortConfig& config);

// post2018 iff the week starts on or after 2018-01-01.
Era era_of(int week_index);

// The earliest relapse whose preceding week is fully covered. Returns
// (event_week, predictor_week) or nothing.
std::optional<std::pair<int, int>> first_eligible_relapse(const PatientTimeline& t, const CohortConfig& config);

// Candidate non-occurrence weeks for a relapse-free patient: weeks inside the
// follow-up window whose preceding week is covered. Error if the patient has
// any relapse.
std::vector<int> eligible_control_weeks(const PatientTimeline& t, const CohortConfig& config);

struct MatchCandidate {
    const PatientTimeline* patient = nullptr;
    std::vector<int> eligible_weeks;
};

struct MatchResult {
    struct Pair {
        std::size_t case_index;      // into the cases span
        std::string control_id;
        int control_week;            // the matched non-occurrence week
    };
    std::vector<Pair> pairs;
    std::vector<std::string> unmatched_case_ids;
};

// Maximum bipartite matching between cases and control patients; a patient is
// admissible for a case when one of its eligible weeks shares the case's
// week-of-year and era. Each control patient is used at most once. The
// matched control week is the earliest admissible one. Deterministic: cases
// and candidate patients are processed in id order; the seed does not affect
// the result.
MatchResult match_controls(std::span<const CohortInstance> cases, std::span<const MatchCandidate> pool,
                           std::uint64_t seed);

// Predictor schema for the assembled cohort table.
std::vector<ColumnSpec> cohort_schema(const CohortConfig& config);

// Appends one feature row. Reads only data strictly before the event week:
// the most recent visit up to the predictor week's end and the predictor
// week's exposure.
void assemble_features(TableBuilder& builder, const CohortInstance& instance, const PatientTimeline& timeline,
                       const CohortConfig& config, const std::optional<std::string>& pair_id);

struct CohortBuildResult {
    DataTable table;
    std::size_t n_cases = 0;
    std::size_t n_controls = 0;
    std::vector<std::string> unmatched_case_ids;
    std::vector<std::pair<std::string, std::string>> pairs;  // (case id, control id)
};

// Full construction: one instance per case (first eligible relapse), one per
// matched control, emitted in subject-id order with pair ids.
CohortBuildResult build_cohort(std::span<const PatientTimeline> patients, const CohortConfig& config,
                               std::uint64_t seed);

// Loads patient timelines from the static/relapse/visit CSVs and attaches
// weekly exposure rows from an exposure table.
std::vector<PatientTimeline> load_timelines(const std::filesystem::path& static_csv,
                                            const std::filesystem::path& relapses_csv,
                                            const std::filesystem::path& visits_csv,
                                            const DataTable& exposure, const CohortConfig& config);

}  // namespace relapse
