#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sepdirect/common.hpp"
#include "sepdirect/dgp.hpp"
#include "sepdirect/logistic_mle.hpp"

#include "json.hpp"

namespace sepdirect {

/// Design terms available for the competing-event nuisance model pi(A, L).
enum class PointTerm { intercept, treatment, covariate, interaction };

struct NuisanceSpec {
    enum class Form { saturated, main_effects, custom };
    Form form = Form::saturated;
    std::vector<PointTerm> custom_terms; // used only when form == custom
    double convergence_tol = 1e-10;
    int max_iter = 100;

    std::vector<PointTerm> terms() const {
        switch (form) {
        case Form::saturated:
            return {PointTerm::intercept, PointTerm::treatment, PointTerm::covariate,
                    PointTerm::interaction};
        case Form::main_effects:
            return {PointTerm::intercept, PointTerm::treatment, PointTerm::covariate};
        case Form::custom:
            return custom_terms;
        }
        return {};
    }
};

enum class EstimandKind { cde, sde };

struct WeightSummary {
    double max = 0.0;
    double p99 = 0.0;
    double mean = 0.0;
};

struct EstimateResult {
    EstimandKind estimand = EstimandKind::cde;
    int a_d = -1; // reference treatment component; -1 for the censoring estimand
    double value = 0.0;
    std::array<double, 2> arm_means{};
    std::array<WeightSummary, 2> weight_summary{}; // by arm
    std::vector<double> nuisance_coef;
    std::vector<std::string> warnings;
};

namespace detail {

inline double term_value(PointTerm t, int a, int l) {
    switch (t) {
    case PointTerm::intercept: return 1.0;
    case PointTerm::treatment: return a;
    case PointTerm::covariate: return l;
    case PointTerm::interaction: return a * l;
    }
    return 0.0;
}

struct NuisanceFit {
    std::vector<PointTerm> terms;
    bool cell_table = false;                           // boundary MLE of the saturated form
    std::array<std::array<double, 2>, 2> cell_pi{};    // [a][l], used when cell_table
    MleFit fit;                                        // used otherwise
    std::array<std::array<bool, 2>, 2> stratum_present{};

    /// Fitted Pr(D=1 | A=a, L=l).
    double pi(int a, int l) const {
        if (cell_table) return cell_pi[a][l];
        double lp = 0.0;
        for (std::size_t j = 0; j < terms.size(); ++j)
            lp += fit.coef[static_cast<Eigen::Index>(j)] * term_value(terms[j], a, l);
        return expit(lp);
    }

    /// Coefficients on the (intercept, a, l, a*l) logit basis; boundary cell
    /// probabilities clamp the logit at +-750.
    std::vector<double> coefficients() const {
        if (!cell_table)
            return std::vector<double>(fit.coef.data(), fit.coef.data() + fit.coef.size());
        auto safe_logit = [](double p) {
            if (p <= 0.0) return -750.0;
            if (p >= 1.0) return 750.0;
            return logit(p);
        };
        const double b0 = safe_logit(cell_pi[0][0]);
        const double b1 = safe_logit(cell_pi[1][0]) - b0;
        const double b2 = safe_logit(cell_pi[0][1]) - b0;
        const double b3 = safe_logit(cell_pi[1][1]) - b0 - b1 - b2;
        return {b0, b1, b2, b3};
    }
};

/// Fits the competing-event nuisance. The saturated form delegates to the
/// Newton MLE while all four cells are interior; a cell with no events sits
/// at the boundary of the parameter space, where the exact MLE is the cell
/// frequency table itself (and a zero cell simply yields weight one).
inline NuisanceFit fit_nuisance(const ObservedView& data, const NuisanceSpec& spec) {
    const auto terms = spec.terms();
    if (terms.empty()) throw std::invalid_argument("empty nuisance design");

    NuisanceFit nf;
    nf.terms = terms;
    std::array<std::array<std::size_t, 2>, 2> count{}, events{};
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto rec = data[i];
        ++count[rec.a][rec.l];
        events[rec.a][rec.l] += rec.d;
        nf.stratum_present[rec.a][rec.l] = true;
    }

    if (spec.form == NuisanceSpec::Form::saturated) {
        bool any_cell_empty = false, all_interior = true;
        for (int a = 0; a < 2; ++a)
            for (int l = 0; l < 2; ++l) {
                if (count[a][l] == 0) any_cell_empty = true;
                else if (events[a][l] == 0 || events[a][l] == count[a][l]) all_interior = false;
            }
        if (any_cell_empty)
            throw std::invalid_argument("saturated nuisance needs every (a, l) cell populated");
        if (!all_interior) {
            nf.cell_table = true;
            for (int a = 0; a < 2; ++a)
                for (int l = 0; l < 2; ++l)
                    nf.cell_pi[a][l] = static_cast<double>(events[a][l]) /
                                       static_cast<double>(count[a][l]);
            return nf;
        }
    }

    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd design(n, static_cast<Eigen::Index>(terms.size()));
    Eigen::VectorXd outcome(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto rec = data[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < terms.size(); ++j)
            design(i, static_cast<Eigen::Index>(j)) = term_value(terms[j], rec.a, rec.l);
        outcome[i] = rec.d;
    }
    MleOptions opts;
    opts.convergence_tol = spec.convergence_tol;
    opts.max_iter = spec.max_iter;
    nf.fit = fit_logistic_mle(design, outcome, opts);
    return nf;
}

/// Positivity screening over the strata realized in the data. The censoring
/// estimand checks every stratum's fitted survival; the separable estimand
/// exempts strata whose reference-arm survival is itself below eps.
inline void check_positivity(const NuisanceFit& nf, EstimandKind kind, int a_d, double eps,
                             std::vector<std::string>& warnings) {
    bool warned = false;
    for (int a = 0; a < 2; ++a)
        for (int l = 0; l < 2; ++l) {
            if (!nf.stratum_present[a][l]) continue;
            if (kind == EstimandKind::sde && 1.0 - nf.pi(a_d, l) <= eps) continue;
            const double surv = 1.0 - nf.pi(a, l);
            if (surv < kPositivityHardFloor)
                throw PositivityError("fitted competing-event-free probability below hard floor "
                                      "in stratum a=" +
                                      std::to_string(a) + ", l=" + std::to_string(l));
            if (surv < eps && !warned) {
                warnings.push_back("near positivity violation: 1 - pi(" + std::to_string(a) +
                                   ", " + std::to_string(l) + ") < eps");
                warned = true;
            }
        }
}

inline WeightSummary summarize_weights(std::vector<double>& w) {
    WeightSummary s;
    if (w.empty()) return s;
    double total = 0.0;
    for (double v : w) {
        s.max = std::max(s.max, v);
        total += v;
    }
    s.mean = total / static_cast<double>(w.size());
    std::sort(w.begin(), w.end());
    s.p99 = quantile_sorted(w, 0.99);
    return s;
}

inline void require_both_arms(const ObservedView& data) {
    bool seen[2] = {false, false};
    for (std::size_t i = 0; i < data.size(); ++i) seen[data[i].a] = true;
    if (!seen[0] || !seen[1]) throw std::invalid_argument("both treatment arms must be present");
}

} // namespace detail

/// Inverse-probability-of-censoring-weighted risk difference: competing
/// events are treated as censoring and each arm mean reweights the
/// competing-event-free by 1 / {1 - pi(a, L)}.
inline EstimateResult ipcw_point_estimate(const ObservedView& data, const NuisanceSpec& spec,
                                          double positivity_eps = kPositivityWarnEps) {
    detail::require_both_arms(data);
    const auto nf = detail::fit_nuisance(data, spec);
    EstimateResult res;
    res.estimand = EstimandKind::cde;
    res.nuisance_coef = nf.coefficients();
    detail::check_positivity(nf, EstimandKind::cde, -1, positivity_eps, res.warnings);

    std::array<double, 2> sums{0.0, 0.0};
    std::array<std::size_t, 2> counts{0, 0};
    std::array<std::vector<double>, 2> weights;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto rec = data[i];
        ++counts[rec.a];
        if (rec.d == 1) continue; // censored by the competing event: weight zero
        const double w = 1.0 / (1.0 - nf.pi(rec.a, rec.l));
        weights[rec.a].push_back(w);
        sums[rec.a] += w * rec.y;
    }
    for (int a = 0; a < 2; ++a) {
        res.arm_means[a] = sums[a] / static_cast<double>(counts[a]);
        res.weight_summary[a] = detail::summarize_weights(weights[a]);
    }
    res.value = res.arm_means[1] - res.arm_means[0];
    return res;
}

/// Weighted estimator aimed at the separable contrast: arm a_y means are
/// reweighted by {1 - pi(a_d, L)} / {1 - pi(a_y, L)}; the arm with
/// a_y == a_d carries weight exactly one.
inline EstimateResult sde_point_estimate(const ObservedView& data, const NuisanceSpec& spec,
                                         int a_d, double positivity_eps = kPositivityWarnEps) {
    if (a_d != 0 && a_d != 1) throw std::invalid_argument("a_d must be 0 or 1");
    detail::require_both_arms(data);
    const auto nf = detail::fit_nuisance(data, spec);
    EstimateResult res;
    res.estimand = EstimandKind::sde;
    res.a_d = a_d;
    res.nuisance_coef = nf.coefficients();
    detail::check_positivity(nf, EstimandKind::sde, a_d, positivity_eps, res.warnings);

    std::array<double, 2> sums{0.0, 0.0};
    std::array<std::size_t, 2> counts{0, 0};
    std::array<std::vector<double>, 2> weights;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto rec = data[i];
        ++counts[rec.a];
        const double w = (rec.a == a_d)
                             ? 1.0
                             : (1.0 - nf.pi(a_d, rec.l)) / (1.0 - nf.pi(rec.a, rec.l));
        weights[rec.a].push_back(w);
        sums[rec.a] += w * rec.y;
    }
    for (int a = 0; a < 2; ++a) {
        res.arm_means[a] = sums[a] / static_cast<double>(counts[a]);
        res.weight_summary[a] = detail::summarize_weights(weights[a]);
    }
    res.value = res.arm_means[1] - res.arm_means[0];
    return res;
}

/// Realized-weight profile (max / p99 / mean per arm) without computing the
/// effect; same weight definitions as the two estimators above.
inline std::array<WeightSummary, 2> weight_diagnostics(const ObservedView& data,
                                                       const NuisanceSpec& spec,
                                                       EstimandKind kind, int a_d = -1,
                                                       double positivity_eps = kPositivityWarnEps) {
    detail::require_both_arms(data);
    const auto nf = detail::fit_nuisance(data, spec);
    std::vector<std::string> warnings;
    detail::check_positivity(nf, kind, a_d, positivity_eps, warnings);
    std::array<std::vector<double>, 2> weights;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto rec = data[i];
        if (kind == EstimandKind::cde) {
            if (rec.d == 1) continue;
            weights[rec.a].push_back(1.0 / (1.0 - nf.pi(rec.a, rec.l)));
        } else {
            const double w = (rec.a == a_d)
                                 ? 1.0
                                 : (1.0 - nf.pi(a_d, rec.l)) / (1.0 - nf.pi(rec.a, rec.l));
            weights[rec.a].push_back(w);
        }
    }
    std::array<WeightSummary, 2> out;
    for (int a = 0; a < 2; ++a) out[a] = detail::summarize_weights(weights[a]);
    return out;
}

/// `arm,weight` rows for histogram plotting.
inline void write_weight_profile_csv(const ObservedView& data, const NuisanceSpec& spec,
                                     EstimandKind kind, int a_d, std::ostream& out) {
    const auto nf = detail::fit_nuisance(data, spec);
    out << "arm,weight\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto rec = data[i];
        std::optional<double> w;
        if (kind == EstimandKind::cde) {
            if (rec.d == 0) w = 1.0 / (1.0 - nf.pi(rec.a, rec.l));
        } else {
            w = (rec.a == a_d) ? 1.0
                               : (1.0 - nf.pi(a_d, rec.l)) / (1.0 - nf.pi(rec.a, rec.l));
        }
        if (w) out << int(rec.a) << ',' << format_double(*w) << '\n';
    }
}

inline nlohmann::ordered_json estimate_to_json(const EstimateResult& r) {
    nlohmann::ordered_json j;
    j["estimand"] = r.estimand == EstimandKind::cde
                        ? "CDE"
                        : "SDE(aD=" + std::to_string(r.a_d) + ")";
    j["value"] = r.value;
    j["arm_mean_a0"] = r.arm_means[0];
    j["arm_mean_a1"] = r.arm_means[1];
    for (int a = 0; a < 2; ++a) {
        const std::string k = "weights_arm" + std::to_string(a);
        j[k + "_max"] = r.weight_summary[a].max;
        j[k + "_p99"] = r.weight_summary[a].p99;
        j[k + "_mean"] = r.weight_summary[a].mean;
    }
    j["nuisance_coef"] = r.nuisance_coef;
    j["warnings"] = r.warnings;
    return j;
}

} // namespace sepdirect
