#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "sepdirect/common.hpp"
#include "sepdirect/dgp.hpp"

#include "json.hpp"

namespace sepdirect {

/// Threshold diagnostics for the two competing-event positivity conditions.
/// The CDE condition requires every treatment-covariate stratum to keep
/// competing-event-free probability above eps; the SDE condition exempts
/// strata in which the reference arm a_d is itself (nearly) certain to
/// experience the competing event.
struct PositivityFlags {
    bool cde_warning = false;
    std::array<bool, 2> sde_warning{false, false}; // indexed by a_d
    double min_cell_survival = 1.0;                // min over strata of 1 - pi_tilde(a, l)
};

/// Exact population-level summary of one parameter point: counterfactual
/// risks, observed-data statistical targets, effect contrasts and the three
/// closed-form error components.
struct OracleReport {
    std::array<double, 2> psi_cde{};                  // by a
    std::array<std::array<double, 2>, 2> psi_sde{};   // [a_y][a_d]
    std::array<double, 2> target_cde{};               // by a
    std::array<std::array<double, 2>, 2> target_sde{}; // [a_y][a_d]
    double cde0 = 0.0;
    std::array<double, 2> sde0{};       // by a_d
    double cde_obs = 0.0;
    std::array<double, 2> sde_obs{};    // by a_d
    std::array<double, 2> estimand_error{};  // cde0 - sde0[a_d], closed form
    double ni_error_cde = 0.0;               // cde_obs - cde0, closed form
    std::array<double, 2> ni_error_sde{};    // sde_obs[a_d] - sde0[a_d], closed form
    PositivityFlags positivity;
};

/// Rare-event (log-linear) approximations: the approximate estimand error and,
/// when the latent factor is degenerate at zero, the approximate ratio of the
/// separable to the controlled contrast.
struct RareApproxReport {
    std::array<double, 2> approx_estimand_error{};          // by a_d
    std::array<std::optional<double>, 2> sign_ratio{};      // by a_d; needs p_u == 0
    std::array<bool, 2> sign_disagreement{false, false};    // ratio defined and negative
};

namespace detail {

/// Pr(L=l, U=u) under independent Bernoulli margins.
inline double cell_prob(const DgpParams& p, int l, int u) {
    const double pl = l ? p.p_l : 1.0 - p.p_l;
    const double pu = u ? p.p_u : 1.0 - p.p_u;
    return pl * pu;
}

/// U-marginal competing-event probability Pr(D=1 | A=a, L=l).
inline double pi_marginal(const DgpParams& p, int a, int l) {
    return competing_risk(p, a, l, 1) * p.p_u + competing_risk(p, a, l, 0) * (1.0 - p.p_u);
}

/// U-marginal event-of-interest probability Pr(Y=1 | A=a, L=l, D=0).
inline double mu_marginal(const DgpParams& p, int a, int l) {
    if (p.p_u == 0.0) return event_risk(p, a, l, 0);
    if (p.p_u == 1.0) return event_risk(p, a, l, 1);
    const double s1 = 1.0 - competing_risk(p, a, l, 1);
    const double s0 = 1.0 - competing_risk(p, a, l, 0);
    const double num = event_risk(p, a, l, 1) * s1 * p.p_u + event_risk(p, a, l, 0) * s0 * (1.0 - p.p_u);
    const double den = s1 * p.p_u + s0 * (1.0 - p.p_u);
    return num / den;
}

} // namespace detail

/// Counterfactual risk under elimination of competing events,
/// mixed over the joint covariate/latent distribution.
inline double counterfactual_risk_cde(const DgpParams& p, int a) {
    double total = 0.0;
    for (int l = 0; l < 2; ++l)
        for (int u = 0; u < 2; ++u) total += event_risk(p, a, l, u) * detail::cell_prob(p, l, u);
    return total;
}

/// Counterfactual risk under the treatment-component decomposition:
/// a_y drives the event of interest, a_d the competing event.
inline double counterfactual_risk_sde(const DgpParams& p, int a_y, int a_d) {
    double total = 0.0;
    for (int l = 0; l < 2; ++l)
        for (int u = 0; u < 2; ++u)
            total += event_risk(p, a_y, l, u) * (1.0 - competing_risk(p, a_d, l, u)) *
                     detail::cell_prob(p, l, u);
    return total;
}

/// Observed-data target of the censor-by-competing-events analysis.
inline double statistical_target_cde(const DgpParams& p, int a) {
    double total = 0.0;
    for (int l = 0; l < 2; ++l) {
        const double pl = l ? p.p_l : 1.0 - p.p_l;
        if (pl == 0.0) continue;
        total += detail::mu_marginal(p, a, l) * pl;
    }
    return total;
}

/// Observed-data target of the separable-contrast analysis.
inline double statistical_target_sde(const DgpParams& p, int a_y, int a_d) {
    double total = 0.0;
    for (int l = 0; l < 2; ++l) {
        const double pl = l ? p.p_l : 1.0 - p.p_l;
        if (pl == 0.0) continue;
        total += detail::mu_marginal(p, a_y, l) * (1.0 - detail::pi_marginal(p, a_d, l)) * pl;
    }
    return total;
}

inline PositivityFlags positivity_flags(const DgpParams& p, double eps = kPositivityWarnEps) {
    PositivityFlags flags;
    for (int a = 0; a < 2; ++a) {
        const double pa = a ? p.p_a : 1.0 - p.p_a;
        for (int l = 0; l < 2; ++l) {
            const double pl = l ? p.p_l : 1.0 - p.p_l;
            if (pa * pl == 0.0) continue;
            const double surv = 1.0 - detail::pi_marginal(p, a, l);
            flags.min_cell_survival = std::min(flags.min_cell_survival, surv);
            if (surv < eps) flags.cde_warning = true;
        }
    }
    for (int a_d = 0; a_d < 2; ++a_d) {
        for (int l = 0; l < 2; ++l) {
            const double pl = l ? p.p_l : 1.0 - p.p_l;
            if (pl == 0.0) continue;
            const double ref_surv = 1.0 - detail::pi_marginal(p, a_d, l);
            if (ref_surv <= eps) continue; // stratum exempt: reference arm is censored anyway
            for (int a = 0; a < 2; ++a) {
                const double pa = a ? p.p_a : 1.0 - p.p_a;
                if (pa == 0.0) continue;
                if (1.0 - detail::pi_marginal(p, a, l) < eps) flags.sde_warning[a_d] = true;
            }
        }
    }
    return flags;
}

/// Closed-form error decomposition at one parameter point. Both a_d arms are
/// evaluated; the error fields are the analytic expressions, which must agree
/// with the differences of the corresponding psi/target quantities.
inline OracleReport error_decomposition(const DgpParams& p,
                                        double positivity_eps = kPositivityWarnEps) {
    p.validate();
    OracleReport r;
    for (int a = 0; a < 2; ++a) {
        r.psi_cde[a] = counterfactual_risk_cde(p, a);
        r.target_cde[a] = statistical_target_cde(p, a);
        for (int a_d = 0; a_d < 2; ++a_d) {
            r.psi_sde[a][a_d] = counterfactual_risk_sde(p, a, a_d);
            r.target_sde[a][a_d] = statistical_target_sde(p, a, a_d);
        }
    }
    r.cde0 = r.psi_cde[1] - r.psi_cde[0];
    r.cde_obs = r.target_cde[1] - r.target_cde[0];
    for (int a_d = 0; a_d < 2; ++a_d) {
        r.sde0[a_d] = r.psi_sde[1][a_d] - r.psi_sde[0][a_d];
        r.sde_obs[a_d] = r.target_sde[1][a_d] - r.target_sde[0][a_d];
    }

    // Estimand error: per-(l,u) treatment contrast in the event risk, scaled
    // by the competing-event probability under the reference arm.
    for (int a_d = 0; a_d < 2; ++a_d) {
        double err = 0.0;
        for (int l = 0; l < 2; ++l)
            for (int u = 0; u < 2; ++u)
                err += (event_risk(p, 1, l, u) - event_risk(p, 0, l, u)) *
                       competing_risk(p, a_d, l, u) * detail::cell_prob(p, l, u);
        r.estimand_error[a_d] = err;
    }

    // Non-identification errors: every term carries the latent-mixing factor
    // p_u (1 - p_u) and a within-stratum latent contrast of the event risk.
    const double mix = p.p_u * (1.0 - p.p_u);
    {
        double err = 0.0;
        for (int a = 0; a < 2; ++a) {
            const double sign = a ? -1.0 : 1.0;
            for (int l = 0; l < 2; ++l) {
                const double pl = l ? p.p_l : 1.0 - p.p_l;
                const double den = (1.0 - competing_risk(p, a, l, 1)) * p.p_u +
                                   (1.0 - competing_risk(p, a, l, 0)) * (1.0 - p.p_u);
                err += sign * (competing_risk(p, a, l, 1) - competing_risk(p, a, l, 0)) / den *
                       (event_risk(p, a, l, 1) - event_risk(p, a, l, 0)) * pl * mix;
            }
        }
        r.ni_error_cde = err;
    }
    for (int a_d = 0; a_d < 2; ++a_d) {
        double err = 0.0;
        for (int a = 0; a < 2; ++a) {
            const double sign = a ? 1.0 : -1.0;
            for (int l = 0; l < 2; ++l) {
                const double pl = l ? p.p_l : 1.0 - p.p_l;
                const double den = (1.0 - competing_risk(p, a, l, 1)) * p.p_u +
                                   (1.0 - competing_risk(p, a, l, 0)) * (1.0 - p.p_u);
                const double cross =
                    (1.0 - competing_risk(p, a, l, 1)) * (1.0 - competing_risk(p, a_d, l, 0)) -
                    (1.0 - competing_risk(p, a_d, l, 1)) * (1.0 - competing_risk(p, a, l, 0));
                err += sign * cross / den * (event_risk(p, a, l, 1) - event_risk(p, a, l, 0)) *
                       pl * mix;
            }
        }
        r.ni_error_sde[a_d] = err;
    }
    r.positivity = positivity_flags(p, positivity_eps);
    return r;
}

/// Independent verification oracle: builds the 32-cell joint table over
/// (U, L, A, D, Y) and evaluates every functional by literal summation and
/// conditioning on the table, sharing no algebra with error_decomposition.
inline OracleReport brute_force_functionals(const DgpParams& p,
                                            double positivity_eps = kPositivityWarnEps) {
    p.validate();
    double joint[2][2][2][2][2] = {}; // [u][l][a][d][y]
    for (int u = 0; u < 2; ++u)
        for (int l = 0; l < 2; ++l)
            for (int a = 0; a < 2; ++a) {
                const double base = (u ? p.p_u : 1.0 - p.p_u) * (l ? p.p_l : 1.0 - p.p_l) *
                                    (a ? p.p_a : 1.0 - p.p_a);
                const double pi = competing_risk(p, a, l, u);
                const double mu = event_risk(p, a, l, u);
                joint[u][l][a][1][0] = base * pi;       // competing event forces y = 0
                joint[u][l][a][1][1] = 0.0;
                joint[u][l][a][0][1] = base * (1.0 - pi) * mu;
                joint[u][l][a][0][0] = base * (1.0 - pi) * (1.0 - mu);
            }

    auto safe_div = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
    auto p_lu = [&](int l, int u) {
        double s = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int d = 0; d < 2; ++d)
                for (int y = 0; y < 2; ++y) s += joint[u][l][a][d][y];
        return s;
    };
    auto p_l_marg = [&](int l) { return p_lu(l, 0) + p_lu(l, 1); };
    // Pr(Y=1 | A=a, D=0, L=l, U=u)
    auto mu_cell = [&](int a, int l, int u) {
        return safe_div(joint[u][l][a][0][1], joint[u][l][a][0][0] + joint[u][l][a][0][1]);
    };
    // Pr(D=0 | A=a, L=l, U=u)
    auto surv_cell = [&](int a, int l, int u) {
        const double d0 = joint[u][l][a][0][0] + joint[u][l][a][0][1];
        const double all = d0 + joint[u][l][a][1][0] + joint[u][l][a][1][1];
        return safe_div(d0, all);
    };
    // Pr(Y=1 | A=a, D=0, L=l), latent factor marginalized out
    auto mu_obs = [&](int a, int l) {
        const double num = joint[0][l][a][0][1] + joint[1][l][a][0][1];
        const double den = num + joint[0][l][a][0][0] + joint[1][l][a][0][0];
        return safe_div(num, den);
    };
    // Pr(D=0 | A=a, L=l)
    auto surv_obs = [&](int a, int l) {
        double d0 = 0.0, all = 0.0;
        for (int u = 0; u < 2; ++u)
            for (int d = 0; d < 2; ++d)
                for (int y = 0; y < 2; ++y) {
                    const double v = joint[u][l][a][d][y];
                    all += v;
                    if (d == 0) d0 += v;
                }
        return safe_div(d0, all);
    };

    OracleReport r;
    for (int a = 0; a < 2; ++a) {
        double psi = 0.0, target = 0.0;
        for (int l = 0; l < 2; ++l) {
            for (int u = 0; u < 2; ++u) psi += mu_cell(a, l, u) * p_lu(l, u);
            target += mu_obs(a, l) * p_l_marg(l);
        }
        r.psi_cde[a] = psi;
        r.target_cde[a] = target;
        for (int a_d = 0; a_d < 2; ++a_d) {
            double psi2 = 0.0, target2 = 0.0;
            for (int l = 0; l < 2; ++l) {
                for (int u = 0; u < 2; ++u)
                    psi2 += mu_cell(a, l, u) * surv_cell(a_d, l, u) * p_lu(l, u);
                target2 += mu_obs(a, l) * surv_obs(a_d, l) * p_l_marg(l);
            }
            r.psi_sde[a][a_d] = psi2;
            r.target_sde[a][a_d] = target2;
        }
    }
    r.cde0 = r.psi_cde[1] - r.psi_cde[0];
    r.cde_obs = r.target_cde[1] - r.target_cde[0];
    r.ni_error_cde = r.cde_obs - r.cde0;
    for (int a_d = 0; a_d < 2; ++a_d) {
        r.sde0[a_d] = r.psi_sde[1][a_d] - r.psi_sde[0][a_d];
        r.sde_obs[a_d] = r.target_sde[1][a_d] - r.target_sde[0][a_d];
        r.estimand_error[a_d] = r.cde0 - r.sde0[a_d];
        r.ni_error_sde[a_d] = r.sde_obs[a_d] - r.sde0[a_d];
    }
    r.positivity = positivity_flags(p, positivity_eps);
    return r;
}

/// Log-linear small-probability approximations of the estimand error and of
/// the separable-to-controlled contrast ratio (the latter requires p_u = 0).
inline RareApproxReport rare_event_approximations(const DgpParams& p) {
    p.validate();
    RareApproxReport rep;
    const auto& t = p.theta;
    const auto& b = p.beta;
    for (int a_d = 0; a_d < 2; ++a_d) {
        const double e =
            (std::exp(t[1] + t[3] + t[5]) - 1.0) *
                std::exp(t[0] + t[2] + t[4] + t[6] + b[0] + b[1] * a_d + b[2] + b[3] * a_d +
                         b[4] + b[5] * a_d + b[6]) *
                p.p_l * p.p_u +
            (std::exp(t[1] + t[3]) - 1.0) *
                std::exp(t[0] + t[2] + b[0] + b[1] * a_d + b[2] + b[3] * a_d) * p.p_l *
                (1.0 - p.p_u) +
            (std::exp(t[1] + t[5]) - 1.0) *
                std::exp(t[0] + t[4] + b[0] + b[1] * a_d + b[4] + b[5] * a_d) * (1.0 - p.p_l) *
                p.p_u +
            (std::exp(t[1]) - 1.0) * std::exp(t[0] + b[0] + b[1] * a_d) * (1.0 - p.p_l) *
                (1.0 - p.p_u);
        rep.approx_estimand_error[a_d] = e;
        if (p.p_u == 0.0) {
            const double cde_bracket = std::exp(t[2]) * (std::exp(t[1] + t[3]) - 1.0) * p.p_l +
                                       (std::exp(t[1]) - 1.0) * (1.0 - p.p_l);
            if (cde_bracket != 0.0) {
                const double num =
                    std::exp(t[2] + b[2] + b[3] * a_d) * (std::exp(t[1] + t[3]) - 1.0) * p.p_l +
                    (std::exp(t[1]) - 1.0) * (1.0 - p.p_l);
                const double ratio = 1.0 - std::exp(b[0] + b[1] * a_d) * num / cde_bracket;
                rep.sign_ratio[a_d] = ratio;
                rep.sign_disagreement[a_d] = ratio < 0.0;
            }
        }
    }
    return rep;
}

inline nlohmann::ordered_json oracle_report_to_json(const OracleReport& r) {
    nlohmann::ordered_json j;
    j["psi_cde_a0"] = r.psi_cde[0];
    j["psi_cde_a1"] = r.psi_cde[1];
    for (int a_y = 0; a_y < 2; ++a_y)
        for (int a_d = 0; a_d < 2; ++a_d)
            j["psi_sde_ay" + std::to_string(a_y) + "_ad" + std::to_string(a_d)] =
                r.psi_sde[a_y][a_d];
    j["target_cde_a0"] = r.target_cde[0];
    j["target_cde_a1"] = r.target_cde[1];
    for (int a_y = 0; a_y < 2; ++a_y)
        for (int a_d = 0; a_d < 2; ++a_d)
            j["target_sde_ay" + std::to_string(a_y) + "_ad" + std::to_string(a_d)] =
                r.target_sde[a_y][a_d];
    j["cde0"] = r.cde0;
    j["sde0_ad0"] = r.sde0[0];
    j["sde0_ad1"] = r.sde0[1];
    j["cde_obs"] = r.cde_obs;
    j["sde_obs_ad0"] = r.sde_obs[0];
    j["sde_obs_ad1"] = r.sde_obs[1];
    j["estimand_error_ad0"] = r.estimand_error[0];
    j["estimand_error_ad1"] = r.estimand_error[1];
    j["ni_error_cde"] = r.ni_error_cde;
    j["ni_error_sde_ad0"] = r.ni_error_sde[0];
    j["ni_error_sde_ad1"] = r.ni_error_sde[1];
    j["positivity_cde_warning"] = r.positivity.cde_warning;
    j["positivity_sde_warning_ad0"] = r.positivity.sde_warning[0];
    j["positivity_sde_warning_ad1"] = r.positivity.sde_warning[1];
    j["min_cell_survival"] = r.positivity.min_cell_survival;
    return j;
}

} // namespace sepdirect
