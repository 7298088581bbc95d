#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sepdirect/common.hpp"
#include "sepdirect/rng.hpp"

namespace sepdirect {

/// Full parameterization of the two logistic response models plus the
/// marginal Bernoulli probabilities of covariate, latent factor and treatment.
struct DgpParams {
    std::array<double, 7> theta{}; // event-of-interest model coefficients
    std::array<double, 7> beta{};  // competing-event model coefficients
    double p_l = 0.5;              // Pr(L = 1)
    double p_u = 0.5;              // Pr(U = 1); 0 makes the latent factor degenerate
    double p_a = 0.5;              // Pr(A = 1)

    void validate() const {
        auto check_prob = [](double p, const char* name) {
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
        };
        check_prob(p_l, "p_l");
        check_prob(p_u, "p_u");
        check_prob(p_a, "p_a");
        for (double c : theta)
            if (!std::isfinite(c)) throw std::invalid_argument("theta coefficients must be finite");
        for (double c : beta)
            if (!std::isfinite(c)) throw std::invalid_argument("beta coefficients must be finite");
    }
};

enum class ResponseKind { event_of_interest, competing_event };

/// Conditional response probability from the saturated-interaction logistic
/// linear predictor c0 + c1*a + c2*l + c3*a*l + c4*u + c5*a*u + c6*l*u.
inline double logistic_response(ResponseKind kind, int a, int l, int u, const DgpParams& params) {
    const auto& c = (kind == ResponseKind::event_of_interest) ? params.theta : params.beta;
    const double lp = c[0] + c[1] * a + c[2] * l + c[3] * (a * l) + c[4] * u + c[5] * (a * u) +
                      c[6] * (l * u);
    return expit(lp);
}

inline double event_risk(const DgpParams& p, int a, int l, int u) {
    return logistic_response(ResponseKind::event_of_interest, a, l, u, p);
}

inline double competing_risk(const DgpParams& p, int a, int l, int u) {
    return logistic_response(ResponseKind::competing_event, a, l, u, p);
}

/// One observation. `u` is latent: samplers and oracles may read it,
/// estimators only ever see the ObservedView projection below.
struct PointRecord {
    std::uint8_t u, l, a, d, y;
};

struct ObservedRecord {
    std::uint8_t l, a, d, y;
};

class PointDataset;

/// Estimator-facing projection of a PointDataset that cannot reach `u`.
class ObservedView {
  public:
    explicit ObservedView(const PointDataset& ds) : ds_(&ds) {}
    std::size_t size() const;
    ObservedRecord operator[](std::size_t i) const;

  private:
    const PointDataset* ds_;
};

class PointDataset {
  public:
    PointDataset() = default;
    PointDataset(std::vector<PointRecord> records, bool u_observed)
        : records_(std::move(records)), u_observed_(u_observed) {
        for (const auto& r : records_)
            if (r.d == 1 && r.y == 1)
                throw std::invalid_argument("competing event precludes the event of interest");
    }

    std::size_t size() const { return records_.size(); }
    const std::vector<PointRecord>& records() const { return records_; }
    bool u_observed() const { return u_observed_; }
    ObservedView observed() const { return ObservedView(*this); }

  private:
    std::vector<PointRecord> records_;
    bool u_observed_ = false;
};

inline std::size_t ObservedView::size() const { return ds_->size(); }

inline ObservedRecord ObservedView::operator[](std::size_t i) const {
    const PointRecord& r = ds_->records()[i];
    return ObservedRecord{r.l, r.a, r.d, r.y};
}

/// Draws n i.i.d. records: A, U, L independent Bernoulli, then the competing
/// event, then the event of interest among the competing-event-free.
/// Record i consumes only the (seed, i) stream, so sampling is
/// order-independent and parallelizable.
inline PointDataset sample_point_population(const DgpParams& params, std::size_t n,
                                            std::uint64_t seed) {
    params.validate();
    if (n < 1) throw std::invalid_argument("population size must be at least 1");
    std::vector<PointRecord> records(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i);
        PointRecord r{};
        r.a = rng.bernoulli(params.p_a) ? 1 : 0;
        r.u = rng.bernoulli(params.p_u) ? 1 : 0;
        r.l = rng.bernoulli(params.p_l) ? 1 : 0;
        r.d = rng.bernoulli(competing_risk(params, r.a, r.l, r.u)) ? 1 : 0;
        r.y = (r.d == 0 && rng.bernoulli(event_risk(params, r.a, r.l, r.u))) ? 1 : 0;
        records[i] = r;
    }
    return PointDataset(std::move(records), /*u_observed=*/true);
}

/// A named parameter point from the simulation-study catalog.
struct Scenario {
    std::string id;
    DgpParams params;
    struct Labels {
        bool near_positivity_violation = false;
        bool u_dependence = false;
        bool marginally_rare = false;
    } labels;
    std::string description;
};

inline const std::vector<Scenario>& scenario_list() {
    static const std::vector<Scenario> catalog = [] {
        std::vector<Scenario> v;
        auto make = [](std::string id, std::array<double, 3> theta_u, std::array<double, 7> beta,
                       bool near_pos, bool u_dep, bool rare, std::string desc) {
            Scenario s;
            s.id = std::move(id);
            s.params.theta = {-1.0, -2.0, 1.0, 3.0, theta_u[0], theta_u[1], theta_u[2]};
            s.params.beta = beta;
            s.params.p_l = 0.1;
            s.params.p_u = 0.5;
            s.params.p_a = 0.5;
            s.labels = {near_pos, u_dep, rare};
            s.description = std::move(desc);
            return s;
        };
        v.push_back(make("s1", {0, 0, 0}, {-3, 1, 1, -1, 0, 0, 0}, false, false, true,
                         "no near violation, no U dependence, rare competing events"));
        v.push_back(make("s2", {0, 0, 0}, {-1, 1, 1, -1, 0, 0, 0}, false, false, false,
                         "no near violation, no U dependence, non-rare competing events"));
        v.push_back(make("s3", {1, -2, 0}, {-3, 1, 1, -1, 3, 1, 0}, false, true, false,
                         "no near violation, U dependence, non-rare competing events"));
        v.push_back(make("s4", {0, 0, 0}, {-10, 1, 16, -1, 0, 0, 0}, true, false, true,
                         "near violation, no U dependence, rare competing events"));
        v.push_back(make("s5", {0, 0, 0}, {-1, 1, 7, -1, 0, 0, 0}, true, false, false,
                         "near violation, no U dependence, non-rare competing events"));
        v.push_back(make("s6", {1, -2, 0}, {-3, 1, 7, -1, 3, 1, 0}, true, true, false,
                         "near violation, U dependence, non-rare competing events"));
        // Base point of the coefficient sweeps: covariate prevalence 0.5 and
        // unit-magnitude intercepts; the sweep grids override the slopes.
        Scenario sweep;
        sweep.id = "sweep-base";
        sweep.params.theta = {-1, 0, 0, 0, 0, 0, 0};
        sweep.params.beta = {-1, 0, 0, 0, 0, 0, 0};
        sweep.params.p_l = 0.5;
        sweep.params.p_u = 0.5;
        sweep.params.p_a = 0.5;
        sweep.description = "base configuration of the coefficient sweep panels";
        v.push_back(sweep);
        return v;
    }();
    return catalog;
}

inline const Scenario& scenario_catalog(const std::string& id) {
    for (const auto& s : scenario_list())
        if (s.id == id) return s;
    throw NotFoundError("unknown scenario id: " + id);
}

/// CSV with header u,l,a,d,y; an empty u column marks a latent-U-omitted export.
inline void write_point_csv(const PointDataset& ds, std::ostream& out, bool include_u) {
    out << "u,l,a,d,y\n";
    for (const auto& r : ds.records()) {
        if (include_u)
            out << int(r.u);
        out << ',' << int(r.l) << ',' << int(r.a) << ',' << int(r.d) << ',' << int(r.y) << '\n';
    }
}

inline PointDataset read_point_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty dataset file", 1, "header");
    if (line == "u,l,a,d,y\r") line.pop_back();
    if (line != "u,l,a,d,y")
        throw ParseError("expected header u,l,a,d,y", 1, "header");
    std::vector<PointRecord> records;
    bool u_observed = true;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string, 5> fields;
        std::size_t pos = 0;
        for (int f = 0; f < 5; ++f) {
            const auto comma = line.find(',', pos);
            if (f < 4 && comma == std::string::npos)
                throw ParseError("expected 5 comma-separated fields", row, "record");
            fields[f] = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                    : comma - pos);
            pos = comma + 1;
        }
        auto parse_bit = [&](const std::string& s, const char* col) -> std::uint8_t {
            if (s == "0") return 0;
            if (s == "1") return 1;
            throw ParseError("expected 0 or 1 in column " + std::string(col), row, col);
        };
        PointRecord r{};
        if (fields[0].empty()) {
            u_observed = false;
            r.u = 0;
        } else {
            r.u = parse_bit(fields[0], "u");
        }
        r.l = parse_bit(fields[1], "l");
        r.a = parse_bit(fields[2], "a");
        r.d = parse_bit(fields[3], "d");
        r.y = parse_bit(fields[4], "y");
        records.push_back(r);
    }
    return PointDataset(std::move(records), u_observed);
}

} // namespace sepdirect
