#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sepdirect/common.hpp"
#include "sepdirect/logistic_mle.hpp"
#include "sepdirect/parallel.hpp"
#include "sepdirect/rng.hpp"

namespace sepdirect {

inline constexpr int kDefaultHorizon = 50;

/// Baseline covariates of the trial analysis: dichotomized serum hemoglobin,
/// three-level age group, activity level and cardiovascular history.
struct Covariates {
    bool hgb_lt12 = false;
    int age_group = 0; // 0: <=59, 1: 60-75, 2: >=75
    bool activity_normal = false;
    bool cvd_history = false;
};

enum class EventType : int { none = 0, event_of_interest = 1, competing = 2 };

struct SubjectRecord {
    std::string id;
    int a = 0;
    Covariates cov;
    int event_month = kDefaultHorizon; // month of the event, or the horizon when none
    EventType event_type = EventType::none;
};

/// One at-risk month of one subject; `month_k` is the 0-based risk month and
/// the outcome flags refer to month_k + 1.
struct PersonMonth {
    std::size_t subject_index = 0;
    int month_k = 0;
    int a = 0;
    Covariates cov;
    std::uint8_t d_next = 0;
    std::uint8_t y_next = 0;
};

/// Discrete-time expansion: a subject observed through month m contributes m
/// rows, the last one flagged with its event; event-free subjects contribute
/// one row per month up to the horizon.
inline std::vector<PersonMonth> expand_to_person_months(const std::vector<SubjectRecord>& subjects,
                                                        int horizon = kDefaultHorizon) {
    std::vector<PersonMonth> rows;
    std::size_t total = 0;
    for (const auto& s : subjects) total += static_cast<std::size_t>(s.event_month);
    rows.reserve(total);
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const auto& s = subjects[i];
        if (s.event_month < 1 || s.event_month > horizon)
            throw std::invalid_argument("event_month out of range for subject " + s.id);
        if (s.event_type == EventType::none && s.event_month != horizon)
            throw std::invalid_argument("event-free subject " + s.id +
                                        " must be followed through the horizon");
        for (int k = 0; k < s.event_month; ++k) {
            PersonMonth pm;
            pm.subject_index = i;
            pm.month_k = k;
            pm.a = s.a;
            pm.cov = s.cov;
            const bool last = (k == s.event_month - 1);
            pm.d_next = (last && s.event_type == EventType::competing) ? 1 : 0;
            pm.y_next = (last && s.event_type == EventType::event_of_interest) ? 1 : 0;
            rows.push_back(pm);
        }
    }
    return rows;
}

enum class HazardTerm {
    intercept,
    month,
    month_sq,
    activity_normal,
    age_60_75,
    age_ge_75,
    cvd_history,
    hgb_lt12,
    treatment,
    treatment_x_cvd
};

inline const char* hazard_term_name(HazardTerm t) {
    switch (t) {
    case HazardTerm::intercept: return "intercept";
    case HazardTerm::month: return "month";
    case HazardTerm::month_sq: return "month_sq";
    case HazardTerm::activity_normal: return "activity_normal";
    case HazardTerm::age_60_75: return "age_60_75";
    case HazardTerm::age_ge_75: return "age_ge_75";
    case HazardTerm::cvd_history: return "cvd_history";
    case HazardTerm::hgb_lt12: return "hgb_lt12";
    case HazardTerm::treatment: return "treatment";
    case HazardTerm::treatment_x_cvd: return "treatment_x_cvd";
    }
    return "?";
}

/// The trial design: quadratic time, the four baseline covariates, treatment
/// and the treatment-by-cardiovascular-history interaction.
inline std::vector<HazardTerm> default_hazard_design() {
    return {HazardTerm::intercept,       HazardTerm::month,     HazardTerm::month_sq,
            HazardTerm::activity_normal, HazardTerm::age_60_75, HazardTerm::age_ge_75,
            HazardTerm::cvd_history,     HazardTerm::hgb_lt12,  HazardTerm::treatment,
            HazardTerm::treatment_x_cvd};
}

namespace detail {

/// Month enters the model 1-based: the row for risk month k models the
/// transition into month k + 1.
inline double hazard_term_value(HazardTerm t, int a, const Covariates& cov, double month) {
    switch (t) {
    case HazardTerm::intercept: return 1.0;
    case HazardTerm::month: return month;
    case HazardTerm::month_sq: return month * month;
    case HazardTerm::activity_normal: return cov.activity_normal ? 1.0 : 0.0;
    case HazardTerm::age_60_75: return cov.age_group == 1 ? 1.0 : 0.0;
    case HazardTerm::age_ge_75: return cov.age_group == 2 ? 1.0 : 0.0;
    case HazardTerm::cvd_history: return cov.cvd_history ? 1.0 : 0.0;
    case HazardTerm::hgb_lt12: return cov.hgb_lt12 ? 1.0 : 0.0;
    case HazardTerm::treatment: return a;
    case HazardTerm::treatment_x_cvd: return a * (cov.cvd_history ? 1.0 : 0.0);
    }
    return 0.0;
}

} // namespace detail

/// Pooled logistic discrete-time hazard for the competing event.
/// Coefficients are stored on the raw (month, month^2) scale.
struct HazardModel {
    std::vector<HazardTerm> design;
    std::vector<double> coef;
    std::vector<double> std_err;
    bool zero = false; // degenerate model used when a cohort has no competing events

    double predict(int a, const Covariates& cov, int month_k) const {
        if (zero) return 0.0;
        const double month = static_cast<double>(month_k + 1);
        double lp = 0.0;
        for (std::size_t j = 0; j < design.size(); ++j)
            lp += coef[j] * detail::hazard_term_value(design[j], a, cov, month);
        return expit(lp);
    }

    static HazardModel zero_hazard() {
        HazardModel m;
        m.zero = true;
        return m;
    }
};

/// MLE over the person-month rows. The month polynomial is centered and
/// scaled internally for a well-conditioned fit; reported coefficients and
/// standard errors are mapped back to the raw month scale.
inline HazardModel fit_pooled_hazard(const std::vector<PersonMonth>& pm,
                                     const std::vector<HazardTerm>& design_spec,
                                     const MleOptions& opts = {}) {
    if (pm.empty()) throw std::invalid_argument("no person-months to fit");
    bool any_event = false;
    for (const auto& row : pm)
        if (row.d_next == 1) {
            any_event = true;
            break;
        }
    if (!any_event) throw std::invalid_argument("no competing events among person-months");

    int month_idx = -1, month_sq_idx = -1, icpt_idx = -1;
    for (std::size_t j = 0; j < design_spec.size(); ++j) {
        if (design_spec[j] == HazardTerm::month) month_idx = static_cast<int>(j);
        if (design_spec[j] == HazardTerm::month_sq) month_sq_idx = static_cast<int>(j);
        if (design_spec[j] == HazardTerm::intercept) icpt_idx = static_cast<int>(j);
    }
    double center = 0.0, scale = 1.0;
    if (month_idx >= 0 || month_sq_idx >= 0) {
        double sum = 0.0;
        for (const auto& row : pm) sum += row.month_k + 1;
        center = sum / static_cast<double>(pm.size());
        double ss = 0.0;
        for (const auto& row : pm) {
            const double d = (row.month_k + 1) - center;
            ss += d * d;
        }
        scale = std::sqrt(ss / static_cast<double>(pm.size()));
        if (!(scale > 0.0)) scale = 1.0;
    }

    const auto n = static_cast<Eigen::Index>(pm.size());
    const auto p = static_cast<Eigen::Index>(design_spec.size());
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd outcome(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = pm[static_cast<std::size_t>(i)];
        const double z = ((row.month_k + 1) - center) / scale;
        for (Eigen::Index j = 0; j < p; ++j) {
            const HazardTerm t = design_spec[static_cast<std::size_t>(j)];
            if (t == HazardTerm::month)
                design(i, j) = z;
            else if (t == HazardTerm::month_sq)
                design(i, j) = z * z;
            else
                design(i, j) = detail::hazard_term_value(t, row.a, row.cov, 0.0);
        }
        outcome[i] = row.d_next;
    }
    const MleFit fit = fit_logistic_mle(design, outcome, opts);

    // Raw coefficients are a fixed linear map of the centered ones:
    //   b0 + b1 z + b2 z^2 with z = (m - c)/s.
    Eigen::MatrixXd map = Eigen::MatrixXd::Identity(p, p);
    if (month_idx >= 0) {
        if (icpt_idx >= 0) map(icpt_idx, month_idx) = -center / scale;
        map(month_idx, month_idx) = 1.0 / scale;
    }
    if (month_sq_idx >= 0) {
        if (icpt_idx >= 0) map(icpt_idx, month_sq_idx) = center * center / (scale * scale);
        if (month_idx >= 0) map(month_idx, month_sq_idx) = -2.0 * center / (scale * scale);
        map(month_sq_idx, month_sq_idx) = 1.0 / (scale * scale);
    }
    const Eigen::VectorXd raw_coef = map * fit.coef;
    const Eigen::MatrixXd raw_cov = map * fit.cov * map.transpose();

    HazardModel model;
    model.design = design_spec;
    model.coef.assign(raw_coef.data(), raw_coef.data() + raw_coef.size());
    model.std_err.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j)
        model.std_err[static_cast<std::size_t>(j)] = std::sqrt(std::max(0.0, raw_cov(j, j)));
    return model;
}

/// Tag of one exported curve or contrast.
struct EstimandLabel {
    enum class Kind { cde, sde } kind = Kind::cde;
    int a_d = -1; // only for sde
    int arm = -1; // -1 denotes a contrast (arm 1 minus arm 0)

    std::string estimand_name() const {
        return kind == Kind::cde ? "CDE" : "SDE(aD=" + std::to_string(a_d) + ")";
    }
    std::string arm_name() const { return arm < 0 ? "contrast" : "arm" + std::to_string(arm); }
};

struct RiskCurve {
    EstimandLabel label;
    std::vector<double> values; // index k-1 holds the risk at month k
    double max_weight = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

/// Per-subject view reconstructed from the person-month rows: number of
/// at-risk months and how follow-up ended.
struct SubjectPath {
    int a = 0;
    Covariates cov;
    int months = 0;              // at-risk rows
    bool ends_event = false;     // event of interest at month `months`
    bool ends_competing = false; // competing event at month `months`
};

inline std::vector<SubjectPath> collect_paths(const std::vector<PersonMonth>& pm) {
    std::vector<SubjectPath> paths;
    for (const auto& row : pm) {
        if (row.subject_index >= paths.size()) paths.resize(row.subject_index + 1);
        auto& sp = paths[row.subject_index];
        sp.a = row.a;
        sp.cov = row.cov;
        sp.months = std::max(sp.months, row.month_k + 1);
        if (row.y_next == 1) sp.ends_event = true;
        if (row.d_next == 1) sp.ends_competing = true;
    }
    return paths;
}

inline void check_month_hazard(double hazard, double eps, std::vector<std::string>& warnings,
                               bool& warned) {
    const double surv = 1.0 - hazard;
    if (surv < kPositivityHardFloor)
        throw PositivityError("fitted competing-event hazard too close to one");
    if (surv < eps && !warned) {
        warnings.push_back("near positivity violation in a fitted month hazard");
        warned = true;
    }
}

} // namespace detail

/// Weighted product-limit risk of the event of interest in arm `a`, with
/// competing events censored and reweighted by the cumulative product of
/// fitted hazard complements.
inline RiskCurve ipcw_risk_curve(const std::vector<PersonMonth>& pm, const HazardModel& model,
                                 int a, int horizon = kDefaultHorizon,
                                 double positivity_eps = kPositivityWarnEps) {
    const auto paths = detail::collect_paths(pm);
    RiskCurve curve;
    curve.label = EstimandLabel{EstimandLabel::Kind::cde, -1, a};
    curve.values.assign(static_cast<std::size_t>(horizon), 0.0);

    std::vector<double> num(static_cast<std::size_t>(horizon), 0.0);
    std::vector<double> den(static_cast<std::size_t>(horizon), 0.0);
    bool warned = false;
    bool any_in_arm = false;
    for (const auto& sp : paths) {
        if (sp.a != a) continue;
        any_in_arm = true;
        // The competing event zeroes the weight from its own month onward;
        // every other subject keeps a positive weight through end of follow-up.
        const int weight_months = sp.ends_competing ? sp.months - 1 : sp.months;
        double cumsurv = 1.0;
        for (int k = 0; k < weight_months && k < horizon; ++k) {
            const double h = model.predict(sp.a, sp.cov, k);
            detail::check_month_hazard(h, positivity_eps, curve.warnings, warned);
            cumsurv *= 1.0 - h;
            if (cumsurv < kPositivityHardFloor)
                throw PositivityError("cumulative competing-event-free probability underflow");
            const double w = 1.0 / cumsurv;
            curve.max_weight = std::max(curve.max_weight, w);
            den[static_cast<std::size_t>(k)] += w;
            if (sp.ends_event && k == sp.months - 1) num[static_cast<std::size_t>(k)] += w;
        }
    }
    if (!any_in_arm) throw std::invalid_argument("no subjects in the requested arm");

    double surv = 1.0, risk = 0.0;
    for (int k = 0; k < horizon; ++k) {
        const double d = den[static_cast<std::size_t>(k)];
        const double q = d > 0.0 ? num[static_cast<std::size_t>(k)] / d : 0.0;
        risk += q * surv;
        surv *= 1.0 - q;
        curve.values[static_cast<std::size_t>(k)] = risk;
    }
    return curve;
}

/// Cumulative incidence of the event of interest in arm `a_y`, each event
/// reweighted by the ratio of cumulative hazard complements under a_d versus
/// a_y, normalized by the arm size.
inline RiskCurve sde_risk_curve(const std::vector<PersonMonth>& pm, const HazardModel& model,
                                int a_y, int a_d, int horizon = kDefaultHorizon,
                                double positivity_eps = kPositivityWarnEps) {
    const auto paths = detail::collect_paths(pm);
    RiskCurve curve;
    curve.label = EstimandLabel{EstimandLabel::Kind::sde, a_d, a_y};
    curve.values.assign(static_cast<std::size_t>(horizon), 0.0);

    std::vector<double> events(static_cast<std::size_t>(horizon), 0.0);
    std::size_t arm_size = 0;
    bool warned = false;
    for (const auto& sp : paths) {
        if (sp.a != a_y) continue;
        ++arm_size;
        const int weight_months = sp.ends_competing ? sp.months - 1 : sp.months;
        double cum_ratio = 1.0;
        for (int k = 0; k < weight_months && k < horizon; ++k) {
            const double h_y = model.predict(a_y, sp.cov, k);
            const double h_d = model.predict(a_d, sp.cov, k);
            // Ratio-form positivity: a month in which the reference arm is
            // itself (nearly) certain to be censored is exempt.
            if (1.0 - h_d > positivity_eps)
                detail::check_month_hazard(h_y, positivity_eps, curve.warnings, warned);
            if (1.0 - h_y <= 0.0)
                throw PositivityError("fitted competing-event hazard reached one");
            cum_ratio *= (1.0 - h_d) / (1.0 - h_y);
            curve.max_weight = std::max(curve.max_weight, cum_ratio);
            if (sp.ends_event && k == sp.months - 1)
                events[static_cast<std::size_t>(k)] += cum_ratio;
        }
    }
    if (arm_size == 0) throw std::invalid_argument("no subjects in the requested arm");

    double risk = 0.0;
    bool over_one = false;
    for (int k = 0; k < horizon; ++k) {
        risk += events[static_cast<std::size_t>(k)] / static_cast<double>(arm_size);
        curve.values[static_cast<std::size_t>(k)] = risk;
        if (risk > 1.0 && !over_one) {
            curve.warnings.push_back("weighted cumulative incidence exceeded one");
            over_one = true;
        }
    }
    return curve;
}

/// Hazard fit with the degenerate fallback shared by the point analysis and
/// every bootstrap replicate: without competing events both estimators reduce
/// to the unweighted cumulative incidence, which a zero hazard makes exact.
inline HazardModel fit_pooled_hazard_or_null(const std::vector<PersonMonth>& pm,
                                             const std::vector<HazardTerm>& design_spec) {
    for (const auto& row : pm)
        if (row.d_next == 1) return fit_pooled_hazard(pm, design_spec);
    return HazardModel::zero_hazard();
}

struct AnalysisPlan {
    int horizon = kDefaultHorizon;
    std::vector<HazardTerm> design = default_hazard_design();
    double positivity_eps = kPositivityWarnEps;
    std::vector<int> contrast_times = {12, 24, 36, 48};
    std::size_t bootstrap_b = 0; // 0 disables the bootstrap
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

/// Point curves of one cohort: censoring-based per arm, separable per
/// (a_d, arm), plus the three arm-1-minus-arm-0 contrast series.
struct CurveSet {
    std::array<RiskCurve, 2> cde;                 // by arm
    std::array<std::array<RiskCurve, 2>, 2> sde;  // [a_d][arm]
    std::vector<double> cde_contrast;
    std::array<std::vector<double>, 2> sde_contrast; // by a_d

    std::vector<const RiskCurve*> all_curves() const {
        return {&cde[0], &cde[1], &sde[0][0], &sde[0][1], &sde[1][0], &sde[1][1]};
    }
};

inline CurveSet compute_curve_set(const std::vector<PersonMonth>& pm, const HazardModel& model,
                                  int horizon, double eps = kPositivityWarnEps) {
    CurveSet cs;
    for (int arm = 0; arm < 2; ++arm) cs.cde[arm] = ipcw_risk_curve(pm, model, arm, horizon, eps);
    for (int a_d = 0; a_d < 2; ++a_d)
        for (int arm = 0; arm < 2; ++arm)
            cs.sde[a_d][arm] = sde_risk_curve(pm, model, arm, a_d, horizon, eps);
    cs.cde_contrast.resize(static_cast<std::size_t>(horizon));
    for (int k = 0; k < horizon; ++k)
        cs.cde_contrast[k] = cs.cde[1].values[k] - cs.cde[0].values[k];
    for (int a_d = 0; a_d < 2; ++a_d) {
        cs.sde_contrast[a_d].resize(static_cast<std::size_t>(horizon));
        for (int k = 0; k < horizon; ++k)
            cs.sde_contrast[a_d][k] = cs.sde[a_d][1].values[k] - cs.sde[a_d][0].values[k];
    }
    return cs;
}

struct Band {
    std::vector<double> lo, hi; // per month
};

/// Percentile bands for the nine exported series (six curves, three
/// contrasts), in the order of CurveSet::all_curves then cde/sde0/sde1
/// contrasts.
struct BootstrapBands {
    std::vector<Band> series;
    std::size_t failed_replicates = 0;
    std::size_t total_replicates = 0;
};

/// Resamples subjects with replacement, refits the hazard model inside each
/// replicate and collects 2.5th/97.5th interpolated percentiles per month.
/// Replicates whose nuisance fit fails are recorded and excluded; more than
/// 10% failures is an error.
inline BootstrapBands bootstrap_percentile_ci(const std::vector<SubjectRecord>& subjects,
                                              const AnalysisPlan& plan, std::size_t b,
                                              std::uint64_t seed) {
    if (b < 2) throw std::invalid_argument("bootstrap needs at least 2 replicates");
    if (subjects.empty()) throw std::invalid_argument("empty cohort");
    const std::size_t n = subjects.size();
    const int horizon = plan.horizon;
    constexpr std::size_t n_series = 9;
    // replicate-major storage; NaN rows mark failed replicates
    std::vector<std::vector<std::array<double, n_series>>> draws(
        b, std::vector<std::array<double, n_series>>());
    std::vector<std::uint8_t> failed(b, 0);

    parallel_for(b, plan.jobs, [&](std::size_t rep) {
        CounterRng rng(seed, rep);
        std::vector<SubjectRecord> sample;
        sample.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            sample.push_back(subjects[static_cast<std::size_t>(rng.next_below(n))]);
        try {
            const auto pm = expand_to_person_months(sample, horizon);
            const HazardModel model = fit_pooled_hazard_or_null(pm, plan.design);
            const CurveSet cs = compute_curve_set(pm, model, horizon, plan.positivity_eps);
            auto& rows = draws[rep];
            rows.resize(static_cast<std::size_t>(horizon));
            const auto curves = cs.all_curves();
            for (int k = 0; k < horizon; ++k) {
                for (std::size_t c = 0; c < curves.size(); ++c)
                    rows[k][c] = curves[c]->values[k];
                rows[k][6] = cs.cde_contrast[k];
                rows[k][7] = cs.sde_contrast[0][k];
                rows[k][8] = cs.sde_contrast[1][k];
            }
        } catch (const std::exception&) {
            failed[rep] = 1;
        }
    });

    BootstrapBands bands;
    bands.total_replicates = b;
    for (auto f : failed) bands.failed_replicates += f;
    if (bands.failed_replicates * 10 > b)
        throw std::runtime_error("more than 10% of bootstrap replicates failed (" +
                                 std::to_string(bands.failed_replicates) + "/" +
                                 std::to_string(b) + ")");
    bands.series.resize(n_series);
    for (auto& s : bands.series) {
        s.lo.assign(static_cast<std::size_t>(horizon), 0.0);
        s.hi.assign(static_cast<std::size_t>(horizon), 0.0);
    }
    std::vector<double> column;
    column.reserve(b);
    for (std::size_t c = 0; c < n_series; ++c) {
        for (int k = 0; k < horizon; ++k) {
            column.clear();
            for (std::size_t rep = 0; rep < b; ++rep)
                if (!failed[rep]) column.push_back(draws[rep][k][c]);
            std::sort(column.begin(), column.end());
            bands.series[c].lo[k] = quantile_sorted(column, 0.025);
            bands.series[c].hi[k] = quantile_sorted(column, 0.975);
        }
    }
    return bands;
}

struct ContrastRow {
    int month = 0;
    std::string estimand;
    double value = 0.0;
    double lo = 0.0, hi = 0.0;
    bool has_ci = false;
};

/// Risk differences (arm 1 minus arm 0) per estimand at the requested months.
inline std::vector<ContrastRow> contrast_at(const std::vector<int>& times, const CurveSet& cs,
                                            const BootstrapBands* bands = nullptr) {
    const int horizon = static_cast<int>(cs.cde_contrast.size());
    std::vector<ContrastRow> rows;
    for (int t : times) {
        if (t < 1 || t > horizon) throw std::invalid_argument("contrast time outside horizon");
        const std::size_t k = static_cast<std::size_t>(t - 1);
        const std::array<std::pair<std::string, double>, 3> entries = {
            std::make_pair(std::string("CDE"), cs.cde_contrast[k]),
            std::make_pair(std::string("SDE(aD=0)"), cs.sde_contrast[0][k]),
            std::make_pair(std::string("SDE(aD=1)"), cs.sde_contrast[1][k])};
        for (std::size_t e = 0; e < entries.size(); ++e) {
            ContrastRow row;
            row.month = t;
            row.estimand = entries[e].first;
            row.value = entries[e].second;
            if (bands) {
                row.lo = bands->series[6 + e].lo[k];
                row.hi = bands->series[6 + e].hi[k];
                row.has_ci = true;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

/// Whole-cohort analysis: hazard fit, curves, optional bootstrap bands.
struct SurvivalAnalysis {
    HazardModel model;
    CurveSet curves;
    BootstrapBands bands; // empty when bootstrap_b == 0
    bool has_bands = false;
};

inline SurvivalAnalysis run_survival_analysis(const std::vector<SubjectRecord>& subjects,
                                              const AnalysisPlan& plan) {
    SurvivalAnalysis out;
    const auto pm = expand_to_person_months(subjects, plan.horizon);
    out.model = fit_pooled_hazard_or_null(pm, plan.design);
    out.curves = compute_curve_set(pm, out.model, plan.horizon, plan.positivity_eps);
    if (plan.bootstrap_b > 0) {
        out.bands = bootstrap_percentile_ci(subjects, plan, plan.bootstrap_b, plan.seed);
        out.has_bands = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// File formats

/// Reads the cohort schema
/// id,arm,hgb_lt12,age_group,activity_normal,cvd_history,event_month,event_type
/// with event_type 0/1/2 = none / event of interest / competing.
inline std::vector<SubjectRecord> read_subject_csv(std::istream& in) {
    static const std::array<std::string, 8> kCols = {
        "id",          "arm",         "hgb_lt12",    "age_group",
        "activity_normal", "cvd_history", "event_month", "event_type"};
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty cohort file", 1, "header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::string expected;
        for (std::size_t i = 0; i < kCols.size(); ++i) {
            if (i) expected += ',';
            expected += kCols[i];
        }
        if (line != expected) throw ParseError("expected header " + expected, 1, "header");
    }
    std::vector<SubjectRecord> subjects;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string, 8> f;
        std::size_t pos = 0;
        for (std::size_t c = 0; c < 8; ++c) {
            const auto comma = line.find(',', pos);
            if (c < 7 && comma == std::string::npos)
                throw ParseError("expected 8 comma-separated fields", row, kCols[c]);
            f[c] = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            pos = comma + 1;
        }
        auto parse_int = [&](const std::string& s, std::size_t c, int lo, int hi) -> int {
            int v = 0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v < lo || v > hi)
                throw ParseError("invalid value '" + s + "' in column " + kCols[c], row, kCols[c]);
            return v;
        };
        SubjectRecord s;
        s.id = f[0];
        s.a = parse_int(f[1], 1, 0, 1);
        s.cov.hgb_lt12 = parse_int(f[2], 2, 0, 1) == 1;
        s.cov.age_group = parse_int(f[3], 3, 0, 2);
        s.cov.activity_normal = parse_int(f[4], 4, 0, 1) == 1;
        s.cov.cvd_history = parse_int(f[5], 5, 0, 1) == 1;
        s.event_month = parse_int(f[6], 6, 1, 1 << 20);
        s.event_type = static_cast<EventType>(parse_int(f[7], 7, 0, 2));
        subjects.push_back(std::move(s));
    }
    return subjects;
}

inline void write_subject_csv(const std::vector<SubjectRecord>& subjects, std::ostream& out) {
    out << "id,arm,hgb_lt12,age_group,activity_normal,cvd_history,event_month,event_type\n";
    for (const auto& s : subjects)
        out << s.id << ',' << s.a << ',' << int(s.cov.hgb_lt12) << ',' << s.cov.age_group << ','
            << int(s.cov.activity_normal) << ',' << int(s.cov.cvd_history) << ',' << s.event_month
            << ',' << static_cast<int>(s.event_type) << '\n';
}

/// month,estimand,arm_or_contrast,value,lo,hi (lo/hi blank without a bootstrap).
inline void write_risk_curves_csv(const SurvivalAnalysis& an, std::ostream& out) {
    out << "month,estimand,arm_or_contrast,value,lo,hi\n";
    const auto curves = an.curves.all_curves();
    const int horizon = static_cast<int>(an.curves.cde_contrast.size());
    auto emit = [&](const EstimandLabel& label, const std::vector<double>& values,
                    const Band* band) {
        for (int k = 0; k < horizon; ++k) {
            out << (k + 1) << ',' << label.estimand_name() << ',' << label.arm_name() << ','
                << format_double(values[static_cast<std::size_t>(k)]) << ',';
            if (band) out << format_double(band->lo[k]);
            out << ',';
            if (band) out << format_double(band->hi[k]);
            out << '\n';
        }
    };
    for (std::size_t c = 0; c < curves.size(); ++c)
        emit(curves[c]->label, curves[c]->values, an.has_bands ? &an.bands.series[c] : nullptr);
    emit(EstimandLabel{EstimandLabel::Kind::cde, -1, -1}, an.curves.cde_contrast,
         an.has_bands ? &an.bands.series[6] : nullptr);
    for (int a_d = 0; a_d < 2; ++a_d)
        emit(EstimandLabel{EstimandLabel::Kind::sde, a_d, -1}, an.curves.sde_contrast[a_d],
             an.has_bands ? &an.bands.series[7 + a_d] : nullptr);
}

inline void write_hazard_model_csv(const HazardModel& model, std::ostream& out) {
    out << "term,estimate,std_error\n";
    for (std::size_t j = 0; j < model.design.size(); ++j)
        out << hazard_term_name(model.design[j]) << ',' << format_double(model.coef[j]) << ','
            << format_double(model.std_err[j]) << '\n';
}

inline void write_contrasts_csv(const std::vector<ContrastRow>& rows, std::ostream& out) {
    out << "month,estimand,value,lo,hi\n";
    for (const auto& r : rows) {
        out << r.month << ',' << r.estimand << ',' << format_double(r.value) << ',';
        if (r.has_ci) out << format_double(r.lo);
        out << ',';
        if (r.has_ci) out << format_double(r.hi);
        out << '\n';
    }
}

} // namespace sepdirect
