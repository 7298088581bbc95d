#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "sepdirect/common.hpp"
#include "sepdirect/dgp.hpp"
#include "sepdirect/estimators.hpp"
#include "sepdirect/oracle.hpp"
#include "sepdirect/parallel.hpp"

#include "json.hpp"

namespace sepdirect {

struct VarianceStudyConfig {
    std::string scenario_id;
    std::size_t n = 100000;   // subjects per replicate
    std::size_t reps = 20000; // replicates
    std::uint64_t seed = 0;
    int a_d = 0;
    unsigned jobs = 1;
    double positivity_eps = kPositivityWarnEps;

    /// Sized so the near-violation variance gap stays detectable in minutes.
    static VarianceStudyConfig desk_scale(std::string scenario_id, std::uint64_t seed, int a_d,
                                          unsigned jobs = 1) {
        VarianceStudyConfig c;
        c.scenario_id = std::move(scenario_id);
        c.n = 20000;
        c.reps = 2000;
        c.seed = seed;
        c.a_d = a_d;
        c.jobs = jobs;
        return c;
    }
};

struct VarianceReport {
    std::string scenario_id;
    Scenario::Labels labels;
    std::size_t n = 0, reps = 0, failed_replicates = 0;
    int a_d = 0;
    double mean_cde = 0.0, mean_sde = 0.0;
    double var_cde = 0.0, var_sde = 0.0;
    double mcse_var_cde = 0.0, mcse_var_sde = 0.0;
};

/// One replicate of the variance study: draw a population, fit the shared
/// saturated nuisance, return both weighted estimates.
inline std::pair<double, double> replicate_point_estimates(const DgpParams& params, std::size_t n,
                                                           std::uint64_t seed, int a_d,
                                                           double eps = kPositivityWarnEps) {
    const PointDataset ds = sample_point_population(params, n, seed);
    const ObservedView view = ds.observed();
    NuisanceSpec spec; // saturated
    const double cde = ipcw_point_estimate(view, spec, eps).value;
    const double sde = sde_point_estimate(view, spec, a_d, eps).value;
    return {cde, sde};
}

/// Empirical variance of both estimators across independent replicates.
/// Replicates whose nuisance fit or positivity screen fails are counted and
/// excluded. Deterministic in (config, seed) and independent of `jobs`.
inline VarianceReport run_variance_study(const VarianceStudyConfig& config) {
    const Scenario& scenario = scenario_catalog(config.scenario_id);
    if (config.n < 1 || config.reps < 1)
        throw std::invalid_argument("n and reps must be at least 1");

    struct Outcome {
        double cde = 0.0, sde = 0.0;
        bool failed = false;
    };
    std::vector<Outcome> outcomes(config.reps);
    parallel_for(config.reps, config.jobs, [&](std::size_t r) {
        const std::uint64_t rep_seed = derive_stream(config.seed, r);
        try {
            const auto [cde, sde] = replicate_point_estimates(scenario.params, config.n, rep_seed,
                                                              config.a_d, config.positivity_eps);
            outcomes[r] = Outcome{cde, sde, false};
        } catch (const FitError&) {
            outcomes[r].failed = true;
        } catch (const PositivityError&) {
            outcomes[r].failed = true;
        }
    });

    VarianceReport rep;
    rep.scenario_id = scenario.id;
    rep.labels = scenario.labels;
    rep.n = config.n;
    rep.reps = config.reps;
    rep.a_d = config.a_d;

    std::vector<double> cde, sde;
    cde.reserve(config.reps);
    sde.reserve(config.reps);
    for (const auto& o : outcomes) {
        if (o.failed) {
            ++rep.failed_replicates;
            continue;
        }
        cde.push_back(o.cde);
        sde.push_back(o.sde);
    }
    if (cde.size() < 2) throw std::runtime_error("fewer than two successful replicates");

    auto moments = [](const std::vector<double>& x, double& mean, double& var, double& mcse_var) {
        const auto m = static_cast<double>(x.size());
        double s = 0.0;
        for (double v : x) s += v;
        mean = s / m;
        double ss = 0.0;
        for (double v : x) ss += (v - mean) * (v - mean);
        var = ss / (m - 1.0);
        // spread of the squared deviations themselves
        const double d_mean = ss / m;
        double d_ss = 0.0;
        for (double v : x) {
            const double d = (v - mean) * (v - mean) - d_mean;
            d_ss += d * d;
        }
        mcse_var = std::sqrt(d_ss / (m - 1.0)) / std::sqrt(m);
    };
    moments(cde, rep.mean_cde, rep.var_cde, rep.mcse_var_cde);
    moments(sde, rep.mean_sde, rep.var_sde, rep.mcse_var_sde);
    return rep;
}

inline void write_variance_csv(const std::vector<VarianceReport>& reports, std::ostream& out) {
    out << "scenario,near_positivity_violation,u_dependence,marginally_rare,a_d,n,reps,"
           "failed_replicates,var_sde,mcse_var_sde,var_cde,mcse_var_cde,mean_sde,mean_cde\n";
    for (const auto& r : reports) {
        out << r.scenario_id << ',' << int(r.labels.near_positivity_violation) << ','
            << int(r.labels.u_dependence) << ',' << int(r.labels.marginally_rare) << ',' << r.a_d
            << ',' << r.n << ',' << r.reps << ',' << r.failed_replicates << ','
            << format_double(r.var_sde) << ',' << format_double(r.mcse_var_sde) << ','
            << format_double(r.var_cde) << ',' << format_double(r.mcse_var_cde) << ','
            << format_double(r.mean_sde) << ',' << format_double(r.mean_cde) << '\n';
    }
}

/// Cartesian coefficient grid of the sweep panels. The twelve slope lists are
/// crossed with every (beta0, p_u) panel combination.
struct SweepGrid {
    std::array<std::vector<double>, 6> theta_values; // slopes theta1..theta6
    std::array<std::vector<double>, 6> beta_values;  // slopes beta1..beta6
    double theta0 = -1.0;
    std::vector<double> beta0_values = {-1.0};
    double p_l = 0.5;
    std::vector<double> p_u_values = {0.5, 0.0};

    static SweepGrid non_rare() {
        SweepGrid g;
        const std::vector<double> values = {-1.0, -0.5, 0.5, 1.0};
        g.theta_values.fill(values);
        g.beta_values.fill(values);
        return g;
    }

    static SweepGrid rare() {
        SweepGrid g = non_rare();
        g.beta0_values = {-9.0, -6.0};
        return g;
    }

    std::size_t points_per_panel() const {
        std::size_t total = 1;
        for (const auto& v : theta_values) total *= v.size();
        for (const auto& v : beta_values) total *= v.size();
        return total;
    }
    std::size_t panel_count() const { return beta0_values.size() * p_u_values.size(); }
};

struct SweepPoint {
    DgpParams params;
    double cde0 = 0.0, cde_obs = 0.0;
    std::array<double, 2> sde0{}, sde_obs{};
    std::array<double, 2> estimand_error{};
    double ni_error_cde = 0.0;
    std::array<double, 2> ni_error_sde{};
    bool rare = false;         // competing event below 10% in every supported cell
    bool u_dependence = false; // latent factor non-degenerate in this panel
};

namespace detail {

inline bool competing_event_rare(const DgpParams& p) {
    for (int a = 0; a < 2; ++a)
        for (int l = 0; l < 2; ++l)
            for (int u = 0; u < 2; ++u) {
                if (u == 1 && p.p_u == 0.0) continue;
                if (u == 0 && p.p_u == 1.0) continue;
                if (l == 1 && p.p_l == 0.0) continue;
                if (l == 0 && p.p_l == 1.0) continue;
                if (competing_risk(p, a, l, u) >= 0.10) return false;
            }
    return true;
}

inline SweepPoint evaluate_sweep_point(const DgpParams& params) {
    const OracleReport r = error_decomposition(params);
    SweepPoint pt;
    pt.params = params;
    pt.cde0 = r.cde0;
    pt.cde_obs = r.cde_obs;
    pt.sde0 = r.sde0;
    pt.sde_obs = r.sde_obs;
    pt.estimand_error = r.estimand_error;
    pt.ni_error_cde = r.ni_error_cde;
    pt.ni_error_sde = r.ni_error_sde;
    pt.rare = competing_event_rare(params);
    pt.u_dependence = params.p_u > 0.0;
    return pt;
}

} // namespace detail

/// Evaluates the oracle over the grid. With subsample == 0 the full cartesian
/// product is enumerated; otherwise `subsample` points are drawn uniformly
/// (with replacement) from each panel's grid, seeded and order-independent.
inline std::vector<SweepPoint> run_error_sweep(const SweepGrid& grid, std::size_t subsample,
                                               std::uint64_t seed, unsigned jobs = 1) {
    for (const auto& v : grid.theta_values)
        if (v.empty()) throw std::invalid_argument("empty coefficient list in sweep grid");
    for (const auto& v : grid.beta_values)
        if (v.empty()) throw std::invalid_argument("empty coefficient list in sweep grid");
    if (grid.beta0_values.empty() || grid.p_u_values.empty())
        throw std::invalid_argument("empty panel list in sweep grid");

    const std::size_t per_panel = subsample == 0 ? grid.points_per_panel() : subsample;
    const std::size_t total = per_panel * grid.panel_count();
    std::vector<SweepPoint> points(total);

    parallel_for(total, jobs, [&](std::size_t idx) {
        const std::size_t panel = idx / per_panel;
        const std::size_t i = idx % per_panel;
        const double beta0 = grid.beta0_values[panel / grid.p_u_values.size()];
        const double p_u = grid.p_u_values[panel % grid.p_u_values.size()];

        DgpParams params;
        params.theta[0] = grid.theta0;
        params.beta[0] = beta0;
        params.p_l = grid.p_l;
        params.p_u = p_u;
        if (subsample == 0) {
            std::size_t rest = i; // odometer over the 12 slope lists
            for (int c = 0; c < 6; ++c) {
                const auto& vals = grid.theta_values[c];
                params.theta[c + 1] = vals[rest % vals.size()];
                rest /= vals.size();
            }
            for (int c = 0; c < 6; ++c) {
                const auto& vals = grid.beta_values[c];
                params.beta[c + 1] = vals[rest % vals.size()];
                rest /= vals.size();
            }
        } else {
            CounterRng rng(derive_stream(seed, panel), i);
            for (int c = 0; c < 6; ++c) {
                const auto& vals = grid.theta_values[c];
                params.theta[c + 1] = vals[rng.next_below(vals.size())];
            }
            for (int c = 0; c < 6; ++c) {
                const auto& vals = grid.beta_values[c];
                params.beta[c + 1] = vals[rng.next_below(vals.size())];
            }
        }
        points[idx] = detail::evaluate_sweep_point(params);
    });
    return points;
}

/// Per-panel tallies of sign agreement between the two causal contrasts plus
/// the extreme error magnitudes used for the cross-panel comparisons.
struct QuadrantSummary {
    struct Panel {
        bool u_dependence = false, rare = false;
        std::size_t n = 0;
        std::array<std::size_t, 2> sign_agreements{};    // by a_d
        std::array<std::size_t, 2> sign_disagreements{}; // by a_d
        std::array<double, 2> max_abs_estimand_error{};
        double max_abs_ni_error_cde = 0.0;
        std::array<double, 2> max_abs_ni_error_sde{};
    };
    std::vector<Panel> panels; // sorted by (u_dependence, rare)
};

inline QuadrantSummary classify_quadrants(const std::vector<SweepPoint>& points) {
    if (points.empty()) throw std::invalid_argument("no sweep points to classify");
    std::map<std::pair<bool, bool>, QuadrantSummary::Panel> panels;
    for (const auto& pt : points) {
        auto& panel = panels[{pt.u_dependence, pt.rare}];
        panel.u_dependence = pt.u_dependence;
        panel.rare = pt.rare;
        ++panel.n;
        for (int a_d = 0; a_d < 2; ++a_d) {
            const double prod = pt.cde0 * pt.sde0[a_d];
            if (prod < 0.0)
                ++panel.sign_disagreements[a_d];
            else if (prod > 0.0)
                ++panel.sign_agreements[a_d];
            panel.max_abs_estimand_error[a_d] =
                std::max(panel.max_abs_estimand_error[a_d], std::abs(pt.estimand_error[a_d]));
            panel.max_abs_ni_error_sde[a_d] =
                std::max(panel.max_abs_ni_error_sde[a_d], std::abs(pt.ni_error_sde[a_d]));
        }
        panel.max_abs_ni_error_cde =
            std::max(panel.max_abs_ni_error_cde, std::abs(pt.ni_error_cde));
    }
    QuadrantSummary summary;
    for (auto& [key, panel] : panels) summary.panels.push_back(panel);
    return summary;
}

inline void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& out) {
    out << "theta0,theta1,theta2,theta3,theta4,theta5,theta6,"
           "beta0,beta1,beta2,beta3,beta4,beta5,beta6,p_l,p_u,rare,u_dependence,"
           "cde0,sde0_ad0,sde0_ad1,cde_obs,sde_obs_ad0,sde_obs_ad1,"
           "estimand_error_ad0,estimand_error_ad1,ni_error_cde,ni_error_sde_ad0,ni_error_sde_ad1\n";
    for (const auto& pt : points) {
        for (double c : pt.params.theta) out << format_double(c) << ',';
        for (double c : pt.params.beta) out << format_double(c) << ',';
        out << format_double(pt.params.p_l) << ',' << format_double(pt.params.p_u) << ','
            << int(pt.rare) << ',' << int(pt.u_dependence) << ',' << format_double(pt.cde0) << ','
            << format_double(pt.sde0[0]) << ',' << format_double(pt.sde0[1]) << ','
            << format_double(pt.cde_obs) << ',' << format_double(pt.sde_obs[0]) << ','
            << format_double(pt.sde_obs[1]) << ',' << format_double(pt.estimand_error[0]) << ','
            << format_double(pt.estimand_error[1]) << ',' << format_double(pt.ni_error_cde) << ','
            << format_double(pt.ni_error_sde[0]) << ',' << format_double(pt.ni_error_sde[1])
            << '\n';
    }
}

inline nlohmann::ordered_json quadrant_summary_to_json(const QuadrantSummary& summary) {
    nlohmann::ordered_json panels = nlohmann::ordered_json::array();
    for (const auto& p : summary.panels) {
        nlohmann::ordered_json j;
        j["u_dependence"] = p.u_dependence;
        j["rare"] = p.rare;
        j["n"] = p.n;
        for (int a_d = 0; a_d < 2; ++a_d) {
            const std::string suffix = "_ad" + std::to_string(a_d);
            j["sign_agreements" + suffix] = p.sign_agreements[a_d];
            j["sign_disagreements" + suffix] = p.sign_disagreements[a_d];
            j["max_abs_estimand_error" + suffix] = p.max_abs_estimand_error[a_d];
            j["max_abs_ni_error_sde" + suffix] = p.max_abs_ni_error_sde[a_d];
        }
        j["max_abs_ni_error_cde"] = p.max_abs_ni_error_cde;
        panels.push_back(j);
    }
    nlohmann::ordered_json root;
    root["panels"] = panels;
    return root;
}

/// Grid description read from a JSON sweep-spec file. Recognized keys:
/// coef_values (default list for all twelve slopes), theta1..theta6,
/// beta1..beta6 (per-slope overrides), theta0, beta0 (list), p_l, p_u (list).
inline SweepGrid sweep_grid_from_json(const nlohmann::json& j) {
    SweepGrid g = SweepGrid::non_rare();
    auto as_list = [](const nlohmann::json& node) {
        std::vector<double> v;
        if (node.is_array())
            for (const auto& x : node) v.push_back(x.get<double>());
        else
            v.push_back(node.get<double>());
        return v;
    };
    if (j.contains("coef_values")) {
        const auto values = as_list(j.at("coef_values"));
        g.theta_values.fill(values);
        g.beta_values.fill(values);
    }
    for (int c = 1; c <= 6; ++c) {
        const std::string tk = "theta" + std::to_string(c);
        const std::string bk = "beta" + std::to_string(c);
        if (j.contains(tk)) g.theta_values[c - 1] = as_list(j.at(tk));
        if (j.contains(bk)) g.beta_values[c - 1] = as_list(j.at(bk));
    }
    if (j.contains("theta0")) g.theta0 = j.at("theta0").get<double>();
    if (j.contains("beta0")) g.beta0_values = as_list(j.at("beta0"));
    if (j.contains("p_l")) g.p_l = j.at("p_l").get<double>();
    if (j.contains("p_u")) g.p_u_values = as_list(j.at("p_u"));
    return g;
}

} // namespace sepdirect
