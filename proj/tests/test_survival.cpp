#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "sepdirect/rng.hpp"
#include "sepdirect/survival.hpp"

using namespace sepdirect;

namespace {

SubjectRecord subject(std::string id, int a, Covariates cov, int month, EventType type) {
    SubjectRecord s;
    s.id = std::move(id);
    s.a = a;
    s.cov = cov;
    s.event_month = month;
    s.event_type = type;
    return s;
}

/// Cohort with a constant per-month competing hazard and no events of
/// interest.
std::vector<SubjectRecord> constant_hazard_cohort(std::size_t n, double hazard, int horizon,
                                                  std::uint64_t seed) {
    std::vector<SubjectRecord> subjects;
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i);
        SubjectRecord s;
        s.id = "c" + std::to_string(i);
        s.a = static_cast<int>(rng.next_below(2));
        s.event_month = horizon;
        s.event_type = EventType::none;
        for (int m = 1; m <= horizon; ++m) {
            if (rng.bernoulli(hazard)) {
                s.event_month = m;
                s.event_type = EventType::competing;
                break;
            }
        }
        subjects.push_back(std::move(s));
    }
    return subjects;
}

/// Two-arm cohort with competing events and events of interest driven by
/// simple constant hazards per arm.
std::vector<SubjectRecord> two_arm_cohort(std::size_t n, int horizon, std::uint64_t seed) {
    std::vector<SubjectRecord> subjects;
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i);
        SubjectRecord s;
        s.id = "t" + std::to_string(i);
        s.a = static_cast<int>(rng.next_below(2));
        s.cov.cvd_history = rng.bernoulli(0.3);
        s.cov.hgb_lt12 = rng.bernoulli(0.4);
        s.cov.age_group = static_cast<int>(rng.next_below(3));
        s.cov.activity_normal = rng.bernoulli(0.7);
        s.event_month = horizon;
        s.event_type = EventType::none;
        const double hd = s.a == 1 ? 0.02 : 0.035;
        const double hy = s.a == 1 ? 0.010 : 0.018;
        for (int m = 1; m <= horizon; ++m) {
            if (rng.bernoulli(hd)) {
                s.event_month = m;
                s.event_type = EventType::competing;
                break;
            }
            if (rng.bernoulli(hy)) {
                s.event_month = m;
                s.event_type = EventType::event_of_interest;
                break;
            }
        }
        subjects.push_back(std::move(s));
    }
    return subjects;
}

} // namespace

TEST_CASE("interpolated quantiles use order-statistic interpolation") {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    REQUIRE_THAT(quantile_sorted(x, 0.025), Catch::Matchers::WithinAbs(1.075, 1e-12));
    REQUIRE_THAT(quantile_sorted(x, 0.975), Catch::Matchers::WithinAbs(3.925, 1e-12));
    REQUIRE(quantile_sorted(x, 0.0) == 1.0);
    REQUIRE(quantile_sorted(x, 1.0) == 4.0);
    REQUIRE(quantile_sorted({5.0}, 0.3) == 5.0);
}

TEST_CASE("person-month expansion follows the event bookkeeping") {
    Covariates cov;
    const auto none = expand_to_person_months({subject("a", 1, cov, 50, EventType::none)}, 50);
    REQUIRE(none.size() == 50);
    for (const auto& r : none) {
        REQUIRE(r.d_next == 0);
        REQUIRE(r.y_next == 0);
    }

    const auto competing =
        expand_to_person_months({subject("b", 0, cov, 3, EventType::competing)}, 50);
    REQUIRE(competing.size() == 3);
    REQUIRE(competing.back().d_next == 1);
    REQUIRE(competing.back().y_next == 0);
    REQUIRE(competing[0].d_next == 0);
    REQUIRE(competing[1].d_next == 0);

    const auto eoi =
        expand_to_person_months({subject("c", 1, cov, 5, EventType::event_of_interest)}, 50);
    REQUIRE(eoi.size() == 5);
    REQUIRE(eoi.back().y_next == 1);
    REQUIRE(eoi.back().d_next == 0);

    // counting identity over a mixed cohort
    const auto cohort = two_arm_cohort(500, 50, 1);
    std::size_t expected = 0;
    for (const auto& s : cohort) expected += static_cast<std::size_t>(s.event_month);
    REQUIRE(expand_to_person_months(cohort, 50).size() == expected);

    REQUIRE_THROWS_AS(expand_to_person_months({subject("d", 1, cov, 60, EventType::competing)}, 50),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(expand_to_person_months({subject("e", 1, cov, 30, EventType::none)}, 50),
                      std::invalid_argument);
}

TEST_CASE("pooled hazard fit recovers a known constant hazard") {
    const int horizon = 50;
    const double true_logit = -3.0;
    const auto cohort = constant_hazard_cohort(4000, expit(true_logit), horizon, 77);
    const auto pm = expand_to_person_months(cohort, horizon);
    REQUIRE(pm.size() > 50000);
    const HazardModel model = fit_pooled_hazard(pm, {HazardTerm::intercept});
    REQUIRE(std::abs(model.coef[0] - true_logit) < 3.0 * model.std_err[0]);
}

TEST_CASE("pooled hazard fit requires competing events") {
    Covariates cov;
    const auto pm = expand_to_person_months({subject("a", 1, cov, 50, EventType::none)}, 50);
    REQUIRE_THROWS_AS(fit_pooled_hazard(pm, {HazardTerm::intercept}), std::invalid_argument);
}

TEST_CASE("quadratic month coefficients come back on the raw scale") {
    // simulate from logit h(m) = -3 + 0.05 m - 0.001 m^2
    const int horizon = 50;
    std::vector<SubjectRecord> subjects;
    for (std::size_t i = 0; i < 6000; ++i) {
        CounterRng rng(4321, i);
        SubjectRecord s;
        s.id = std::to_string(i);
        s.a = 0;
        s.event_month = horizon;
        s.event_type = EventType::none;
        for (int m = 1; m <= horizon; ++m) {
            const double h = expit(-3.0 + 0.05 * m - 0.001 * m * m);
            if (rng.bernoulli(h)) {
                s.event_month = m;
                s.event_type = EventType::competing;
                break;
            }
        }
        subjects.push_back(std::move(s));
    }
    const auto pm = expand_to_person_months(subjects, horizon);
    const HazardModel model =
        fit_pooled_hazard(pm, {HazardTerm::intercept, HazardTerm::month, HazardTerm::month_sq});
    REQUIRE(std::abs(model.coef[0] - (-3.0)) < 3.0 * model.std_err[0]);
    REQUIRE(std::abs(model.coef[1] - 0.05) < 3.0 * model.std_err[1]);
    REQUIRE(std::abs(model.coef[2] - (-0.001)) < 3.0 * model.std_err[2]);
    // predictions use the raw-scale polynomial directly
    Covariates cov;
    const double h7 = model.predict(0, cov, 6);
    const double lp = model.coef[0] + model.coef[1] * 7 + model.coef[2] * 49;
    REQUIRE_THAT(h7, Catch::Matchers::WithinAbs(expit(lp), 1e-12));
}

TEST_CASE("hand-traced weighted product-limit curve") {
    Covariates with_cvd;
    with_cvd.cvd_history = true;
    Covariates no_cvd;
    const std::vector<SubjectRecord> cohort = {
        subject("s1", 1, with_cvd, 2, EventType::event_of_interest),
        subject("s2", 1, with_cvd, 1, EventType::competing),
        subject("s3", 1, no_cvd, 3, EventType::none),
        subject("s4", 1, no_cvd, 3, EventType::event_of_interest),
        subject("s5", 1, no_cvd, 2, EventType::competing),
    };
    const int horizon = 3;
    const auto pm = expand_to_person_months(cohort, horizon);
    const HazardModel model =
        fit_pooled_hazard(pm, {HazardTerm::intercept, HazardTerm::cvd_history});
    // stratum hazards are the event shares: 1/3 with history, 1/8 without
    REQUIRE_THAT(expit(model.coef[0]), Catch::Matchers::WithinAbs(1.0 / 8.0, 1e-9));
    REQUIRE_THAT(expit(model.coef[0] + model.coef[1]), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-9));

    const RiskCurve curve = ipcw_risk_curve(pm, model, 1, horizon);
    REQUIRE_THAT(curve.values[0], Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(curve.values[1], Catch::Matchers::WithinAbs(441.0 / 953.0, 1e-9));
    REQUIRE_THAT(curve.values[2], Catch::Matchers::WithinAbs(697.0 / 953.0, 1e-9));
    REQUIRE_THAT(curve.max_weight, Catch::Matchers::WithinAbs(2.25, 1e-9));

    // with a_y = a_d the ratio weights are exactly one and the curve is the
    // raw cumulative incidence: events at months 2 and 3 among five subjects
    const RiskCurve raw = sde_risk_curve(pm, model, 1, 1, horizon);
    REQUIRE(raw.max_weight == 1.0);
    REQUIRE(raw.values[0] == 0.0);
    REQUIRE(raw.values[1] == 0.2);
    REQUIRE(raw.values[2] == 0.4);
}

TEST_CASE("matched component arms make the separable curve the empirical incidence") {
    const int horizon = 40;
    const auto cohort = two_arm_cohort(3000, horizon, 88);
    const auto pm = expand_to_person_months(cohort, horizon);
    const HazardModel model = fit_pooled_hazard(
        pm, {HazardTerm::intercept, HazardTerm::month, HazardTerm::treatment,
             HazardTerm::cvd_history});
    for (int arm = 0; arm < 2; ++arm) {
        const RiskCurve curve = sde_risk_curve(pm, model, arm, arm, horizon);
        // empirical cumulative incidence computed directly from the cohort
        double n_arm = 0.0;
        std::vector<double> events(static_cast<std::size_t>(horizon), 0.0);
        for (const auto& s : cohort) {
            if (s.a != arm) continue;
            n_arm += 1.0;
            if (s.event_type == EventType::event_of_interest)
                events[static_cast<std::size_t>(s.event_month - 1)] += 1.0;
        }
        double cum = 0.0;
        for (int k = 0; k < horizon; ++k) {
            cum += events[static_cast<std::size_t>(k)] / n_arm;
            REQUIRE_THAT(curve.values[static_cast<std::size_t>(k)],
                         Catch::Matchers::WithinAbs(cum, 1e-12));
        }
        REQUIRE(curve.max_weight == 1.0);
    }
}

TEST_CASE("a cohort without competing events collapses both estimators") {
    const int horizon = 30;
    std::vector<SubjectRecord> cohort;
    for (std::size_t i = 0; i < 400; ++i) {
        CounterRng rng(55, i);
        SubjectRecord s;
        s.id = std::to_string(i);
        s.a = static_cast<int>(rng.next_below(2));
        s.event_month = horizon;
        s.event_type = EventType::none;
        for (int m = 1; m <= horizon; ++m)
            if (rng.bernoulli(0.03)) {
                s.event_month = m;
                s.event_type = EventType::event_of_interest;
                break;
            }
        cohort.push_back(std::move(s));
    }
    AnalysisPlan plan;
    plan.horizon = horizon;
    plan.contrast_times = {10, 20, 30};
    const SurvivalAnalysis an = run_survival_analysis(cohort, plan);
    REQUIRE(an.model.zero);
    for (int arm = 0; arm < 2; ++arm) {
        for (int k = 0; k < horizon; ++k) {
            const double cde = an.curves.cde[arm].values[static_cast<std::size_t>(k)];
            for (int a_d = 0; a_d < 2; ++a_d)
                REQUIRE_THAT(an.curves.sde[a_d][arm].values[static_cast<std::size_t>(k)],
                             Catch::Matchers::WithinAbs(cde, 1e-9));
        }
        // no censoring at all: the product-limit complement is the
        // empirical cumulative incidence
        double n_arm = 0.0, events_by_30 = 0.0;
        for (const auto& s : cohort)
            if (s.a == arm) {
                n_arm += 1.0;
                if (s.event_type == EventType::event_of_interest) events_by_30 += 1.0;
            }
        REQUIRE_THAT(an.curves.cde[arm].values[horizon - 1],
                     Catch::Matchers::WithinAbs(events_by_30 / n_arm, 1e-12));
    }
}

TEST_CASE("sustained high hazards trip the cumulative positivity floor") {
    Covariates cov;
    const std::vector<SubjectRecord> cohort = {subject("a", 1, cov, 40, EventType::none)};
    const auto pm = expand_to_person_months(cohort, 40);
    HazardModel model;
    model.design = {HazardTerm::intercept};
    model.coef = {logit(0.45)};
    model.std_err = {0.0};
    REQUIRE_THROWS_AS(ipcw_risk_curve(pm, model, 1, 40), PositivityError);
}

TEST_CASE("bootstrap of a degenerate cohort has zero-width intervals") {
    // one identity class per arm: every curve is invariant to the resample
    // composition, so all replicates coincide
    Covariates cov;
    std::vector<SubjectRecord> cohort;
    for (int i = 0; i < 15; ++i)
        cohort.push_back(subject("a" + std::to_string(i), 0, cov, 5, EventType::competing));
    for (int i = 0; i < 15; ++i)
        cohort.push_back(subject("b" + std::to_string(i), 1, cov, 9, EventType::competing));
    AnalysisPlan plan;
    plan.horizon = 10;
    plan.design = {HazardTerm::intercept, HazardTerm::treatment};
    const BootstrapBands bands = bootstrap_percentile_ci(cohort, plan, 64, 9);
    REQUIRE(bands.failed_replicates == 0);
    for (const auto& series : bands.series)
        for (int k = 0; k < 10; ++k) REQUIRE(series.lo[k] == series.hi[k]);
}

TEST_CASE("bootstrap is deterministic and worker-count independent") {
    const int horizon = 20;
    const auto cohort = two_arm_cohort(150, horizon, 31);
    AnalysisPlan plan;
    plan.horizon = horizon;
    plan.design = {HazardTerm::intercept, HazardTerm::treatment};
    plan.jobs = 1;
    const BootstrapBands first = bootstrap_percentile_ci(cohort, plan, 60, 5);
    const BootstrapBands second = bootstrap_percentile_ci(cohort, plan, 60, 5);
    plan.jobs = 4;
    const BootstrapBands third = bootstrap_percentile_ci(cohort, plan, 60, 5);
    for (std::size_t s = 0; s < first.series.size(); ++s)
        for (int k = 0; k < horizon; ++k) {
            REQUIRE(first.series[s].lo[k] == second.series[s].lo[k]);
            REQUIRE(first.series[s].hi[k] == second.series[s].hi[k]);
            REQUIRE(first.series[s].lo[k] == third.series[s].lo[k]);
            REQUIRE(first.series[s].hi[k] == third.series[s].hi[k]);
        }
    const BootstrapBands other = bootstrap_percentile_ci(cohort, plan, 60, 6);
    bool any_diff = false;
    for (std::size_t s = 0; s < first.series.size() && !any_diff; ++s)
        for (int k = 0; k < horizon && !any_diff; ++k)
            any_diff = first.series[s].lo[k] != other.series[s].lo[k];
    REQUIRE(any_diff);
}

TEST_CASE("bootstrap fails loudly when too many replicates cannot be fit") {
    // a single arm-0 subject: resamples that omit it cannot produce the
    // arm-contrasted curves
    Covariates cov;
    std::vector<SubjectRecord> cohort;
    cohort.push_back(subject("solo", 0, cov, 10, EventType::none));
    for (int i = 0; i < 7; ++i)
        cohort.push_back(subject("n" + std::to_string(i), 1, cov, 10, EventType::none));
    for (int i = 0; i < 4; ++i)
        cohort.push_back(subject("c" + std::to_string(i), 1, cov, 3, EventType::competing));
    AnalysisPlan plan;
    plan.horizon = 10;
    plan.design = {HazardTerm::intercept, HazardTerm::treatment};
    REQUIRE_THROWS_WITH(bootstrap_percentile_ci(cohort, plan, 200, 3),
                        Catch::Matchers::ContainsSubstring("bootstrap replicates failed"));
}

TEST_CASE("contrast rows pick out the requested months") {
    const int horizon = 20;
    const auto cohort = two_arm_cohort(400, horizon, 66);
    AnalysisPlan plan;
    plan.horizon = horizon;
    plan.design = {HazardTerm::intercept, HazardTerm::treatment};
    const SurvivalAnalysis an = run_survival_analysis(cohort, plan);
    const auto rows = contrast_at({5, 20}, an.curves);
    REQUIRE(rows.size() == 6);
    REQUIRE(rows[0].month == 5);
    REQUIRE(rows[0].estimand == "CDE");
    REQUIRE_THAT(rows[0].value, Catch::Matchers::WithinAbs(an.curves.cde_contrast[4], 1e-15));
    REQUIRE(rows[5].month == 20);
    REQUIRE(rows[5].estimand == "SDE(aD=1)");
    REQUIRE_THROWS_AS(contrast_at({0}, an.curves), std::invalid_argument);
    REQUIRE_THROWS_AS(contrast_at({21}, an.curves), std::invalid_argument);

    // identical curves contrast to zero
    CurveSet same = an.curves;
    same.cde[1] = same.cde[0];
    for (int k = 0; k < horizon; ++k)
        same.cde_contrast[static_cast<std::size_t>(k)] =
            same.cde[1].values[static_cast<std::size_t>(k)] -
            same.cde[0].values[static_cast<std::size_t>(k)];
    const auto zero_rows = contrast_at({horizon}, same);
    REQUIRE(zero_rows[0].value == 0.0);
}

TEST_CASE("cohort CSV round-trips and rejects malformed rows") {
    const auto cohort = two_arm_cohort(50, 50, 12);
    std::ostringstream out;
    write_subject_csv(cohort, out);
    std::istringstream in(out.str());
    const auto back = read_subject_csv(in);
    REQUIRE(back.size() == cohort.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].id == cohort[i].id);
        REQUIRE(back[i].a == cohort[i].a);
        REQUIRE(back[i].cov.age_group == cohort[i].cov.age_group);
        REQUIRE(back[i].event_month == cohort[i].event_month);
        REQUIRE(back[i].event_type == cohort[i].event_type);
    }

    std::istringstream bad_header("id,arm\n");
    REQUIRE_THROWS_AS(read_subject_csv(bad_header), ParseError);

    std::istringstream bad_value(
        "id,arm,hgb_lt12,age_group,activity_normal,cvd_history,event_month,event_type\n"
        "x,1,0,5,0,0,10,1\n");
    try {
        read_subject_csv(bad_value);
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        REQUIRE(e.row() == 2);
        REQUIRE(e.column() == "age_group");
    }
}

TEST_CASE("risk curve export is schema-stable") {
    const int horizon = 6;
    const auto cohort = two_arm_cohort(200, horizon, 14);
    AnalysisPlan plan;
    plan.horizon = horizon;
    plan.design = {HazardTerm::intercept, HazardTerm::treatment};
    plan.contrast_times = {6};
    plan.bootstrap_b = 16;
    plan.seed = 2;
    const SurvivalAnalysis an = run_survival_analysis(cohort, plan);
    std::ostringstream out;
    write_risk_curves_csv(an, out);
    std::istringstream lines(out.str());
    std::string header;
    std::getline(lines, header);
    REQUIRE(header == "month,estimand,arm_or_contrast,value,lo,hi");
    std::size_t count = 0;
    std::string line;
    while (std::getline(lines, line)) ++count;
    REQUIRE(count == 9 * static_cast<std::size_t>(horizon));

    std::ostringstream hz;
    write_hazard_model_csv(an.model, hz);
    REQUIRE(hz.str().rfind("term,estimate,std_error\n", 0) == 0);
}
