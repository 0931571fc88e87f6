#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>

#include "oracles.hpp"
#include "relapse/cohort.hpp"
#include "relapse/rng.hpp"

using namespace relapse;

namespace {

CohortConfig two_var_config() {
    CohortConfig c;
    c.variables = {"pm10", "no2"};
    c.thresholds = {{"pm10", 45.0}};
    return c;
}

WeeklyExposure full_week(int week, double pm10 = 30.0, double no2 = 20.0) {
    WeeklyExposure w;
    w.week_index = week;
    w.means = {{"pm10", pm10}, {"no2", no2}};
    w.coverage = {{"pm10", 7}, {"no2", 7}};
    w.ratios = {{"pm10", 0.0}};
    return w;
}

PatientTimeline base_patient(std::string id) {
    PatientTimeline t;
    t.id = std::move(id);
    t.onset_date = parse_date("2013-01-01");
    t.diagnosis_date = parse_date("2013-03-01");
    t.follow_up_start = exposure_epoch;
    t.follow_up_end = parse_date("2021-01-11");
    t.sex = 1.0;
    t.age_at_onset = 30.0;
    t.ethnicity = "caucasian";
    t.residence = "towns";
    t.pediatric_onset = 0.0;
    t.spinal_cord_onset = 0.0;
    t.brainstem_onset = 0.0;
    t.eye_onset = 0.0;
    t.supratentorial_onset = 0.0;
    t.other_symptoms_onset = 0.0;
    return t;
}

void add_weeks(PatientTimeline& t, int from, int to) {
    for (int w = from; w <= to; ++w) t.exposure[w] = full_week(w);
}

}  // namespace

TEST_CASE("first_eligible_relapse basics") {
    const CohortConfig config = two_var_config();

    PatientTimeline t = base_patient("p1");
    add_weeks(t, 0, 9);
    t.relapse_dates = {week_start(10)};
    auto eligible = first_eligible_relapse(t, config);
    REQUIRE(eligible.has_value());
    CHECK(eligible->first == 10);
    CHECK(eligible->second == 9);

    // first relapse week 3 lacks week 2; second relapse week 8 qualifies
    PatientTimeline t2 = base_patient("p2");
    add_weeks(t2, 5, 9);
    t2.relapse_dates = {week_start(3), week_start(8)};
    eligible = first_eligible_relapse(t2, config);
    REQUIRE(eligible.has_value());
    CHECK(eligible->first == 8);
    CHECK(eligible->second == 7);

    PatientTimeline t3 = base_patient("p3");
    add_weeks(t3, 0, 9);
    CHECK_FALSE(first_eligible_relapse(t3, config).has_value());
}

TEST_CASE("first_eligible_relapse requires every configured variable") {
    const CohortConfig config = two_var_config();
    PatientTimeline t = base_patient("p1");
    WeeklyExposure partial;
    partial.week_index = 9;
    partial.means = {{"pm10", 30.0}};  // no no2
    partial.coverage = {{"pm10", 7}};
    t.exposure[9] = partial;
    t.relapse_dates = {week_start(10)};
    CHECK_FALSE(first_eligible_relapse(t, config).has_value());
}

TEST_CASE("era_of boundary") {
    // week starting 2017-12-26 is pre2018; the next week starts 2018-01-02
    const int pre_week = week_index_of(parse_date("2017-12-26"));
    CHECK(week_start(pre_week) == parse_date("2017-12-26"));
    CHECK(era_of(pre_week) == Era::Pre2018);
    CHECK(era_of(pre_week + 1) == Era::Post2018);
    CHECK(era_of(0) == Era::Pre2018);
}

TEST_CASE("eligible_control_weeks") {
    const CohortConfig config = two_var_config();

    PatientTimeline t = base_patient("c1");
    add_weeks(t, 0, 51);
    t.follow_up_end = week_start(52) - std::chrono::days{1};  // follow-up covers weeks 0..51
    auto weeks = eligible_control_weeks(t, config);
    CHECK(weeks.size() == 51);  // {1..51}: week 52 falls outside follow-up
    CHECK(weeks.front() == 1);
    CHECK(weeks.back() == 51);

    PatientTimeline gap = base_patient("c2");
    add_weeks(gap, 0, 10);
    gap.exposure.erase(5);
    weeks = eligible_control_weeks(gap, config);
    CHECK(std::find(weeks.begin(), weeks.end(), 6) == weeks.end());
    CHECK(std::find(weeks.begin(), weeks.end(), 5) != weeks.end());

    PatientTimeline empty = base_patient("c3");
    CHECK(eligible_control_weeks(empty, config).empty());

    PatientTimeline relapser = base_patient("c4");
    relapser.relapse_dates = {week_start(3)};
    CHECK_THROWS_AS(eligible_control_weeks(relapser, config), DataError);
}

TEST_CASE("eligible_control_weeks respects the follow-up window") {
    const CohortConfig config = two_var_config();
    PatientTimeline t = base_patient("c1");
    add_weeks(t, 0, 51);
    t.follow_up_start = week_start(10);
    t.follow_up_end = week_start(20) + std::chrono::days{6};
    const auto weeks = eligible_control_weeks(t, config);
    REQUIRE(!weeks.empty());
    CHECK(weeks.front() == 10);
    CHECK(weeks.back() == 20);
}

namespace {

CohortInstance make_case(std::string id, int event_week) {
    CohortInstance c;
    c.subject_id = std::move(id);
    c.label = 1;
    c.event_week = event_week;
    c.predictor_week = event_week - 1;
    c.week_of_year = week_of_year(week_start(event_week));
    c.era = era_of(event_week);
    return c;
}

// a pool candidate eligible exactly at the given weeks
MatchCandidate candidate(const PatientTimeline& patient, std::vector<int> weeks) {
    return {&patient, std::move(weeks)};
}

}  // namespace

TEST_CASE("match_controls basics") {
    const auto case1 = make_case("case1", 10);  // pre2018

    PatientTimeline ctrl = base_patient("ctrl1");
    SUBCASE("same week-of-year and era matches") {
        // week 10 itself: same week of year and era
        const std::vector<MatchCandidate> pool{candidate(ctrl, {10})};
        const MatchResult result = match_controls(std::vector<CohortInstance>{case1}, pool, 1);
        REQUIRE(result.pairs.size() == 1);
        CHECK(result.pairs[0].control_id == "ctrl1");
        CHECK(result.pairs[0].control_week == 10);
        CHECK(result.unmatched_case_ids.empty());
    }

    SUBCASE("era mismatch leaves the case unmatched") {
        // find a post-2018 week with the same week-of-year
        const int target_woy = case1.week_of_year;
        int post_week = week_index_of(parse_date("2018-01-10"));
        while (week_of_year(week_start(post_week)) != target_woy) ++post_week;
        const std::vector<MatchCandidate> pool{candidate(ctrl, {post_week})};
        const MatchResult result = match_controls(std::vector<CohortInstance>{case1}, pool, 1);
        CHECK(result.pairs.empty());
        REQUIRE(result.unmatched_case_ids.size() == 1);
        CHECK(result.unmatched_case_ids[0] == "case1");
    }

    SUBCASE("earliest admissible week is chosen") {
        // find a later pre2018 week sharing the case's week-of-year
        int later = 53;
        while (week_of_year(week_start(later)) != case1.week_of_year || era_of(later) != case1.era) {
            ++later;
        }
        const std::vector<MatchCandidate> pool{candidate(ctrl, {later, 10})};
        const MatchResult result = match_controls(std::vector<CohortInstance>{case1}, pool, 1);
        REQUIRE(result.pairs.size() == 1);
        CHECK(result.pairs[0].control_week == 10);
    }
}

TEST_CASE("match_controls: two cases one control, input-order independent") {
    const auto case_a = make_case("caseA", 10);
    int other = 53;  // a later week with the same week-of-year and era
    while (week_of_year(week_start(other)) != case_a.week_of_year || era_of(other) != case_a.era) {
        ++other;
    }
    const auto case_b = make_case("caseB", other);
    REQUIRE(case_a.week_of_year == case_b.week_of_year);

    PatientTimeline ctrl = base_patient("ctrl1");
    const std::vector<MatchCandidate> pool{candidate(ctrl, {10})};

    const MatchResult forward = match_controls(std::vector<CohortInstance>{case_a, case_b}, pool, 1);
    const MatchResult backward = match_controls(std::vector<CohortInstance>{case_b, case_a}, pool, 1);
    CHECK(forward.pairs.size() == 1);
    CHECK(backward.pairs.size() == 1);
    CHECK(forward.unmatched_case_ids.size() == 1);
    // deterministic tie rule: caseA (smaller id) gets the control either way
    CHECK(forward.pairs[0].control_id == "ctrl1");
    CHECK(forward.unmatched_case_ids[0] == "caseB");
    CHECK(backward.unmatched_case_ids[0] == "caseB");
}

TEST_CASE("match_controls equals brute-force maximum matching on random instances") {
    Rng rng(99);
    std::vector<PatientTimeline> keep_alive;  // stable addresses for candidates
    keep_alive.reserve(2000);

    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t n_cases = 1 + rng.below(8);
        const std::size_t n_pool = 1 + rng.below(8);

        std::vector<CohortInstance> cases;
        for (std::size_t i = 0; i < n_cases; ++i) {
            cases.push_back(make_case("case" + std::to_string(i), 2 + static_cast<int>(rng.below(400))));
        }
        std::vector<MatchCandidate> pool;
        std::vector<std::vector<std::size_t>> adjacency(n_cases);
        for (std::size_t p = 0; p < n_pool; ++p) {
            keep_alive.push_back(base_patient("ctrl" + std::to_string(p)));
            std::vector<int> weeks;
            const std::size_t n_weeks = 1 + rng.below(5);
            for (std::size_t w = 0; w < n_weeks; ++w) weeks.push_back(2 + static_cast<int>(rng.below(400)));
            pool.push_back(candidate(keep_alive.back(), weeks));
        }
        for (std::size_t ci = 0; ci < n_cases; ++ci) {
            for (std::size_t pi = 0; pi < n_pool; ++pi) {
                for (int w : pool[pi].eligible_weeks) {
                    if (week_of_year(week_start(w)) == cases[ci].week_of_year &&
                        era_of(w) == cases[ci].era) {
                        adjacency[ci].push_back(pi);
                        break;
                    }
                }
            }
        }

        const MatchResult result = match_controls(cases, pool, 7);
        CHECK(result.pairs.size() == oracles::brute_force_matching(adjacency, n_pool));
        CHECK(result.pairs.size() + result.unmatched_case_ids.size() == n_cases);

        // every pair satisfies the constraints; each side used at most once
        std::set<std::string> used_controls;
        std::set<std::size_t> used_cases;
        for (const auto& pair : result.pairs) {
            CHECK(used_controls.insert(pair.control_id).second);
            CHECK(used_cases.insert(pair.case_index).second);
            CHECK(week_of_year(week_start(pair.control_week)) == cases[pair.case_index].week_of_year);
            CHECK(era_of(pair.control_week) == cases[pair.case_index].era);
        }
    }
}

TEST_CASE("assemble_features: derived fields, visits, season") {
    const CohortConfig config = two_var_config();
    PatientTimeline t = base_patient("p1");
    add_weeks(t, 0, 20);

    // predictor week starting 2013-03-05 is week index 9
    const int predictor = week_index_of(parse_date("2013-03-05"));
    CHECK(week_start(predictor) == parse_date("2013-03-05"));

    CohortInstance instance = make_case("p1", predictor + 1);
    t.relapse_dates = {week_start(predictor + 1)};

    Visit early{parse_date("2013-02-01"), 2.5, {}};
    early.subscores[0] = 1.0;
    Visit late{parse_date("2013-03-20"), 5.0, {}};  // after the predictor week: not readable
    t.visits = {early, late};

    TableBuilder builder(cohort_schema(config));
    assemble_features(builder, instance, t, config, std::nullopt);
    const DataTable row = builder.build();

    CHECK(row.numeric_at(0, row.column_index("time_since_onset")) == 63.0);
    CHECK(row.numeric_at(0, row.column_index("diagnostic_delay")) == 59.0);
    CHECK(row.numeric_at(0, row.column_index("edss")) == 2.5);
    CHECK(row.numeric_at(0, row.column_index("fs_pyramidal")) == 1.0);
    CHECK(row.category_at(0, row.column_index("season")) == "Spring");
    CHECK(row.numeric_at(0, row.column_index("pm10_mean")) == doctest::Approx(30.0));
    CHECK(row.is_missing(0, row.column_index("pair_id")));

    // no prior visit -> EDSS missing, not an error
    t.visits.clear();
    TableBuilder builder2(cohort_schema(config));
    assemble_features(builder2, instance, t, config, std::string("P0001"));
    const DataTable row2 = builder2.build();
    CHECK(row2.is_missing(0, row2.column_index("edss")));
    CHECK(row2.category_at(0, row2.column_index("pair_id")) == "P0001");

    // July predictor week -> Summer
    CohortInstance summer = make_case("p1", week_index_of(parse_date("2013-07-20")));
    t.exposure[summer.predictor_week] = full_week(summer.predictor_week);
    TableBuilder builder3(cohort_schema(config));
    assemble_features(builder3, summer, t, config, std::nullopt);
    const DataTable row3 = builder3.build();
    CHECK(row3.category_at(0, row3.column_index("season")) == "Summer");
}

TEST_CASE("assemble_features never reads the event week (leakage check)") {
    const CohortConfig config = two_var_config();
    PatientTimeline t = base_patient("p1");
    add_weeks(t, 0, 20);
    CohortInstance instance = make_case("p1", 10);

    TableBuilder b1(cohort_schema(config));
    assemble_features(b1, instance, t, config, std::nullopt);
    const DataTable before = b1.build();

    // perturb event-week and later data: exposure and a visit inside week 10
    PatientTimeline perturbed = t;
    perturbed.exposure[10] = full_week(10, 999.0, 999.0);
    perturbed.exposure[11] = full_week(11, -999.0, -999.0);
    perturbed.visits.push_back({week_start(10), 9.0, {}});
    TableBuilder b2(cohort_schema(config));
    assemble_features(b2, instance, perturbed, config, std::nullopt);
    const DataTable after = b2.build();

    for (std::size_t c = 0; c < before.n_cols(); ++c) {
        CHECK(before.is_missing(0, c) == after.is_missing(0, c));
        if (before.is_missing(0, c)) continue;
        if (before.spec(c).kind == ColumnKind::Categorical) {
            CHECK(before.category_at(0, c) == after.category_at(0, c));
        } else {
            CHECK(before.numeric_at(0, c) == after.numeric_at(0, c));
        }
    }
}

TEST_CASE("build_cohort: counts, pairs, and pair constraints") {
    const CohortConfig config = two_var_config();
    std::vector<PatientTimeline> patients;

    // 4 relapsers, 3 relapse-free; week-of-year collisions force one unmatched
    for (int i = 0; i < 4; ++i) {
        PatientTimeline t = base_patient("case" + std::to_string(i));
        add_weeks(t, 0, 60);
        t.relapse_dates = {week_start(10)};  // all the same week-of-year
        patients.push_back(std::move(t));
    }
    for (int i = 0; i < 3; ++i) {
        PatientTimeline t = base_patient("ctrl" + std::to_string(i));
        add_weeks(t, 0, 60);
        patients.push_back(std::move(t));
    }

    const CohortBuildResult result = build_cohort(patients, config, 5);
    CHECK(result.n_cases == 4);
    CHECK(result.n_controls == 3);
    CHECK(result.unmatched_case_ids.size() == 1);
    CHECK(result.table.n_rows() == result.n_cases + result.n_controls);

    // labels match counts; matched pairs share week-of-year and era
    const std::size_t c_label = result.table.column_index("relapse");
    const std::size_t c_woy = result.table.column_index("week_of_year");
    const std::size_t c_era = result.table.column_index("post2018");
    const std::size_t c_pair = result.table.column_index("pair_id");
    std::map<std::string, std::vector<std::size_t>> by_pair;
    std::size_t positives = 0;
    for (std::size_t r = 0; r < result.table.n_rows(); ++r) {
        positives += result.table.numeric_at(r, c_label) == 1.0;
        if (!result.table.is_missing(r, c_pair)) by_pair[result.table.category_at(r, c_pair)].push_back(r);
    }
    CHECK(positives == 4);
    CHECK(by_pair.size() == 3);
    for (const auto& [pair_id, rows] : by_pair) {
        REQUIRE(rows.size() == 2);
        CHECK(result.table.numeric_at(rows[0], c_woy) == result.table.numeric_at(rows[1], c_woy));
        CHECK(result.table.numeric_at(rows[0], c_era) == result.table.numeric_at(rows[1], c_era));
        CHECK(result.table.numeric_at(rows[0], c_label) + result.table.numeric_at(rows[1], c_label) == 1.0);
    }
}
