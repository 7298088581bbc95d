// Command-line front end: exact oracle evaluation, the variance simulation
// study, coefficient sweeps and time-varying trial analysis, all file-driven
// and fully seeded.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sepdirect/common.hpp"
#include "sepdirect/dgp.hpp"
#include "sepdirect/estimators.hpp"
#include "sepdirect/oracle.hpp"
#include "sepdirect/simharness.hpp"
#include "sepdirect/survival.hpp"

namespace fs = std::filesystem;
using namespace sepdirect;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::ofstream open_output(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t pos = 0;
    for (;;) {
        const auto comma = line.find(',', pos);
        fields.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                     : comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return fields;
}

/// Parameter rows: theta0..theta6,beta0..beta6,p_l,p_u with optional p_a.
std::vector<DgpParams> read_params_csv(std::istream& in) {
    static const std::vector<std::string> kBase = {
        "theta0", "theta1", "theta2", "theta3", "theta4", "theta5", "theta6",
        "beta0",  "beta1",  "beta2",  "beta3",  "beta4",  "beta5",  "beta6",
        "p_l",    "p_u"};
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty parameter file", 1, "header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    const bool has_pa = header.size() == kBase.size() + 1;
    if (header.size() != kBase.size() && !has_pa)
        throw ParseError("expected 16 or 17 columns", 1, "header");
    for (std::size_t c = 0; c < kBase.size(); ++c)
        if (header[c] != kBase[c])
            throw ParseError("expected column '" + kBase[c] + "'", 1, kBase[c]);
    if (has_pa && header.back() != "p_a") throw ParseError("expected column 'p_a'", 1, "p_a");

    std::vector<DgpParams> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("wrong field count", row, "record");
        auto parse = [&](std::size_t c) -> double {
            const auto& s = fields[c];
            double v = 0.0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
                throw ParseError("invalid number '" + s + "' in column " + header[c], row,
                                 header[c]);
            return v;
        };
        DgpParams p;
        for (int c = 0; c < 7; ++c) p.theta[c] = parse(static_cast<std::size_t>(c));
        for (int c = 0; c < 7; ++c) p.beta[c] = parse(static_cast<std::size_t>(7 + c));
        p.p_l = parse(14);
        p.p_u = parse(15);
        if (has_pa) p.p_a = parse(16);
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            throw ParseError(std::string(e.what()), row, "record");
        }
        rows.push_back(p);
    }
    if (rows.empty()) throw ParseError("no parameter rows", 1, "record");
    return rows;
}

struct CommonOpts {
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::string out_dir;
    double positivity_eps = kPositivityWarnEps;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool need_seed) {
    auto* seed = cmd->add_option("--seed", opts.seed, "RNG seed (u64)");
    if (need_seed) seed->required();
    cmd->add_option("--jobs", opts.jobs, "worker threads (0 = all cores)")
        ->default_val(1u);
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--positivity-eps", opts.positivity_eps,
                    "near-positivity warning threshold")
        ->default_val(kPositivityWarnEps);
}

int run_oracle(const std::string& params_csv, const CommonOpts& opts) {
    std::ifstream in(params_csv);
    if (!in) {
        std::cerr << "error: cannot open " << params_csv << '\n';
        return kExitUsage;
    }
    const auto rows = read_params_csv(in);
    std::ostringstream body;
    for (const auto& p : rows)
        body << oracle_report_to_json(error_decomposition(p, opts.positivity_eps)).dump() << '\n';
    if (opts.out_dir.empty()) {
        std::cout << body.str();
    } else {
        auto out = open_output(opts.out_dir, "oracle_reports.jsonl");
        out << body.str();
    }
    return 0;
}

int run_simulate(const std::vector<std::string>& scenarios, std::size_t n, std::size_t reps,
                 int a_d, const CommonOpts& opts) {
    std::vector<VarianceReport> reports;
    for (const auto& id : scenarios) {
        VarianceStudyConfig config;
        config.scenario_id = id;
        config.n = n;
        config.reps = reps;
        config.seed = opts.seed;
        config.a_d = a_d;
        config.jobs = opts.jobs;
        config.positivity_eps = opts.positivity_eps;
        reports.push_back(run_variance_study(config));
    }
    if (opts.out_dir.empty()) {
        write_variance_csv(reports, std::cout);
    } else {
        auto out = open_output(opts.out_dir, "variance_study.csv");
        write_variance_csv(reports, out);
    }
    return 0;
}

int run_sweep(const std::string& grid_file, const std::string& preset, std::size_t subsample,
              const CommonOpts& opts) {
    SweepGrid grid;
    if (!grid_file.empty()) {
        std::ifstream in(grid_file);
        if (!in) {
            std::cerr << "error: cannot open " << grid_file << '\n';
            return kExitUsage;
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            std::cerr << "error: invalid grid spec: " << e.what() << '\n';
            return kExitUsage;
        }
        grid = sweep_grid_from_json(j);
    } else if (preset == "rare") {
        grid = SweepGrid::rare();
    } else {
        grid = SweepGrid::non_rare();
    }
    const auto points = run_error_sweep(grid, subsample, opts.seed, opts.jobs);
    const auto summary = classify_quadrants(points);
    if (opts.out_dir.empty()) {
        write_sweep_csv(points, std::cout);
        std::cout << quadrant_summary_to_json(summary).dump(2) << '\n';
    } else {
        auto pts = open_output(opts.out_dir, "sweep_points.csv");
        write_sweep_csv(points, pts);
        auto sum = open_output(opts.out_dir, "sweep_summary.json");
        sum << quadrant_summary_to_json(summary).dump(2) << '\n';
    }
    return 0;
}

int run_analyze(const std::string& data_csv, int horizon, std::size_t bootstrap_b,
                std::vector<int> times, const CommonOpts& opts) {
    std::ifstream in(data_csv);
    if (!in) {
        std::cerr << "error: cannot open " << data_csv << '\n';
        return kExitUsage;
    }
    const auto subjects = read_subject_csv(in);

    AnalysisPlan plan;
    plan.horizon = horizon;
    plan.positivity_eps = opts.positivity_eps;
    plan.contrast_times = times;
    plan.bootstrap_b = bootstrap_b;
    plan.seed = opts.seed;
    plan.jobs = opts.jobs;
    const SurvivalAnalysis an = run_survival_analysis(subjects, plan);
    const auto contrasts =
        contrast_at(plan.contrast_times, an.curves, an.has_bands ? &an.bands : nullptr);

    nlohmann::ordered_json diag;
    diag["n_subjects"] = subjects.size();
    diag["max_weight_ipcw"] = std::max(an.curves.cde[0].max_weight, an.curves.cde[1].max_weight);
    for (int a_d = 0; a_d < 2; ++a_d)
        diag["max_weight_sde_ad" + std::to_string(a_d)] =
            std::max(an.curves.sde[a_d][0].max_weight, an.curves.sde[a_d][1].max_weight);
    if (an.has_bands) {
        diag["bootstrap_replicates"] = an.bands.total_replicates;
        diag["bootstrap_failures"] = an.bands.failed_replicates;
    }
    {
        nlohmann::ordered_json warnings = nlohmann::ordered_json::array();
        for (const auto* c : an.curves.all_curves())
            for (const auto& w : c->warnings)
                warnings.push_back(c->label.estimand_name() + " " + c->label.arm_name() + ": " + w);
        diag["warnings"] = warnings;
    }

    const fs::path dir = opts.out_dir.empty() ? fs::path(".") : fs::path(opts.out_dir);
    {
        auto out = open_output(dir, "risk_curves.csv");
        write_risk_curves_csv(an, out);
    }
    {
        auto out = open_output(dir, "contrasts.csv");
        write_contrasts_csv(contrasts, out);
    }
    {
        auto out = open_output(dir, "hazard_model.csv");
        write_hazard_model_csv(an.model, out);
    }
    {
        auto out = open_output(dir, "diagnostics.json");
        out << diag.dump(2) << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"competing-events direct-effect workbench"};
    app.require_subcommand(1);
    app.set_config("--config");

    // oracle
    auto* oracle_cmd = app.add_subcommand(
        "oracle", "closed-form estimands, targets and error decomposition per parameter row");
    std::string params_csv;
    oracle_cmd->add_option("--params", params_csv, "parameter CSV")->required();
    CommonOpts oracle_opts;
    add_common(oracle_cmd, oracle_opts, /*need_seed=*/false);

    // simulate
    auto* sim_cmd =
        app.add_subcommand("simulate", "variance study of the two weighted estimators");
    std::vector<std::string> scenarios;
    sim_cmd->add_option("--scenario", scenarios, "scenario id (repeatable)")->required();
    std::size_t sim_n = 20000, sim_reps = 2000;
    int sim_ad = 0;
    sim_cmd->add_option("--n", sim_n, "subjects per replicate")->default_val(std::size_t{20000});
    sim_cmd->add_option("--reps", sim_reps, "replicates")->default_val(std::size_t{2000});
    sim_cmd->add_option("--ad", sim_ad, "separable-effect reference arm")
        ->default_val(0)
        ->check(CLI::Range(0, 1));
    CommonOpts sim_opts;
    add_common(sim_cmd, sim_opts, /*need_seed=*/true);

    // sweep
    auto* sweep_cmd =
        app.add_subcommand("sweep", "oracle evaluation over a coefficient grid");
    std::string grid_file, preset = "nonrare";
    std::size_t subsample = 100000;
    sweep_cmd->add_option("--grid", grid_file, "grid spec JSON file");
    sweep_cmd->add_option("--preset", preset, "grid preset when no file is given")
        ->check(CLI::IsMember({"nonrare", "rare"}));
    sweep_cmd->add_option("--subsample", subsample,
                          "points drawn per panel (0 = full cartesian grid)")
        ->default_val(std::size_t{100000});
    CommonOpts sweep_opts;
    add_common(sweep_cmd, sweep_opts, /*need_seed=*/true);

    // analyze
    auto* an_cmd = app.add_subcommand(
        "analyze", "time-varying risk curves, contrasts and bootstrap intervals from a cohort");
    std::string data_csv;
    int horizon = kDefaultHorizon;
    std::size_t bootstrap_b = 0;
    std::vector<int> times = {12, 24, 36, 48};
    an_cmd->add_option("--data", data_csv, "cohort CSV")->required();
    an_cmd->add_option("--horizon", horizon, "follow-up months")->default_val(kDefaultHorizon);
    an_cmd->add_option("--bootstrap", bootstrap_b, "bootstrap replicates (0 = none)")
        ->default_val(std::size_t{0});
    an_cmd->add_option("--times", times, "contrast months")
        ->default_val(std::vector<int>{12, 24, 36, 48});
    CommonOpts an_opts;
    add_common(an_cmd, an_opts, /*need_seed=*/false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*oracle_cmd) return run_oracle(params_csv, oracle_opts);
        if (*sim_cmd) return run_simulate(scenarios, sim_n, sim_reps, sim_ad, sim_opts);
        if (*sweep_cmd) return run_sweep(grid_file, preset, subsample, sweep_opts);
        if (*an_cmd) {
            if (bootstrap_b > 0 && an_cmd->count("--seed") == 0) {
                std::cerr << "error: --seed is required when bootstrapping\n";
                return kExitUsage;
            }
            return run_analyze(data_csv, horizon, bootstrap_b, times, an_opts);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << " (row " << e.row() << ", column " << e.column()
                  << ")\n";
        return kExitUsage;
    } catch (const NotFoundError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FitError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const PositivityError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return 0;
}
