#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "sepdirect/dgp.hpp"
#include "sepdirect/rng.hpp"

using namespace sepdirect;

namespace {

DgpParams zero_params() {
    DgpParams p;
    p.theta.fill(0.0);
    p.beta.fill(0.0);
    return p;
}

} // namespace

TEST_CASE("logistic response at zero coefficients is one half") {
    const DgpParams p = zero_params();
    for (int a = 0; a < 2; ++a)
        for (int l = 0; l < 2; ++l)
            for (int u = 0; u < 2; ++u) {
                REQUIRE(logistic_response(ResponseKind::event_of_interest, a, l, u, p) == 0.5);
                REQUIRE(logistic_response(ResponseKind::competing_event, a, l, u, p) == 0.5);
            }
}

TEST_CASE("logistic response reproduces fixed linear predictors") {
    DgpParams p = zero_params();
    p.theta = {-1, -2, 1, 3, 0, 0, 0};
    // linear predictor -1 - 2 + 1 + 3 = 1
    REQUIRE_THAT(logistic_response(ResponseKind::event_of_interest, 1, 1, 0, p),
                 Catch::Matchers::WithinAbs(0.7310585786300049, 1e-15));

    p.beta = {-10, 1, 16, -1, 0, 0, 0};
    // linear predictor -10 + 16 = 6: the engineered near-violation stratum
    REQUIRE_THAT(logistic_response(ResponseKind::competing_event, 0, 1, 0, p),
                 Catch::Matchers::WithinAbs(0.9975273768433653, 1e-15));
}

TEST_CASE("logistic response is monotone in an active coefficient") {
    CounterRng rng(31337, 0);
    for (int trial = 0; trial < 200; ++trial) {
        DgpParams p;
        for (auto& c : p.theta) c = rng.next_in(-2.0, 2.0);
        for (auto& c : p.beta) c = rng.next_in(-2.0, 2.0);
        const int coef = static_cast<int>(rng.next_below(7));
        // choose (a, l, u) so the bumped coefficient multiplies a 1
        int a = static_cast<int>(rng.next_below(2));
        int l = static_cast<int>(rng.next_below(2));
        int u = static_cast<int>(rng.next_below(2));
        if (coef == 1 || coef == 3 || coef == 5) a = 1;
        if (coef == 2 || coef == 3 || coef == 6) l = 1;
        if (coef >= 4) u = 1;
        const double before = logistic_response(ResponseKind::event_of_interest, a, l, u, p);
        DgpParams bumped = p;
        bumped.theta[coef] += 0.3;
        const double after = logistic_response(ResponseKind::event_of_interest, a, l, u, bumped);
        REQUIRE(after > before);
    }
}

TEST_CASE("sampling is deterministic in the seed") {
    const auto& s2 = scenario_catalog("s2");
    const PointDataset first = sample_point_population(s2.params, 5000, 99);
    const PointDataset second = sample_point_population(s2.params, 5000, 99);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        REQUIRE(first.records()[i].u == second.records()[i].u);
        REQUIRE(first.records()[i].l == second.records()[i].l);
        REQUIRE(first.records()[i].a == second.records()[i].a);
        REQUIRE(first.records()[i].d == second.records()[i].d);
        REQUIRE(first.records()[i].y == second.records()[i].y);
    }
    const PointDataset other = sample_point_population(s2.params, 5000, 100);
    bool any_diff = false;
    for (std::size_t i = 0; i < other.size() && !any_diff; ++i)
        any_diff = other.records()[i].d != first.records()[i].d ||
                   other.records()[i].y != first.records()[i].y;
    REQUIRE(any_diff);
}

TEST_CASE("an impossible competing event never occurs") {
    DgpParams p = zero_params();
    p.beta[0] = -50.0;
    const PointDataset ds = sample_point_population(p, 10000, 7);
    for (const auto& r : ds.records()) REQUIRE(r.d == 0);
}

TEST_CASE("a competing event forces the event of interest to zero") {
    DgpParams p = zero_params();
    p.beta[0] = 2.0; // frequent competing events
    const PointDataset ds = sample_point_population(p, 20000, 11);
    std::size_t n_competing = 0;
    for (const auto& r : ds.records()) {
        if (r.d == 1) {
            ++n_competing;
            REQUIRE(r.y == 0);
        }
    }
    REQUIRE(n_competing > 10000);
}

TEST_CASE("empirical competing-event share matches the enumerated marginal") {
    const auto& s2 = scenario_catalog("s2");
    const DgpParams& p = s2.params;
    // independent route: enumerate the eight (a, l, u) cells
    double exact = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int l = 0; l < 2; ++l)
            for (int u = 0; u < 2; ++u) {
                const double w = (a ? p.p_a : 1 - p.p_a) * (l ? p.p_l : 1 - p.p_l) *
                                 (u ? p.p_u : 1 - p.p_u);
                exact += w * competing_risk(p, a, l, u);
            }
    const std::size_t n = 100000;
    const PointDataset ds = sample_point_population(p, n, 2024);
    double count = 0.0;
    for (const auto& r : ds.records()) count += r.d;
    const double freq = count / static_cast<double>(n);
    const double se = std::sqrt(exact * (1 - exact) / static_cast<double>(n));
    REQUIRE(std::abs(freq - exact) < 3.0 * se);
}

TEST_CASE("cell frequencies factorize over the three margins") {
    DgpParams p = zero_params();
    p.p_a = 0.5;
    p.p_l = 0.3;
    p.p_u = 0.7;
    const std::size_t n = 100000;
    const PointDataset ds = sample_point_population(p, n, 5150);
    double counts[2][2][2] = {};
    for (const auto& r : ds.records()) counts[r.a][r.l][r.u] += 1.0;
    for (int a = 0; a < 2; ++a)
        for (int l = 0; l < 2; ++l)
            for (int u = 0; u < 2; ++u) {
                const double expected = (a ? p.p_a : 1 - p.p_a) * (l ? p.p_l : 1 - p.p_l) *
                                        (u ? p.p_u : 1 - p.p_u);
                const double freq = counts[a][l][u] / static_cast<double>(n);
                const double se = std::sqrt(expected * (1 - expected) / static_cast<double>(n));
                REQUIRE(std::abs(freq - expected) < 4.0 * se);
            }
}

TEST_CASE("scenario catalog matches the simulation-study table") {
    const auto& s4 = scenario_catalog("s4");
    REQUIRE(s4.params.theta == std::array<double, 7>{-1, -2, 1, 3, 0, 0, 0});
    REQUIRE(s4.params.beta == std::array<double, 7>{-10, 1, 16, -1, 0, 0, 0});
    REQUIRE(s4.params.p_l == 0.1);
    REQUIRE(s4.params.p_u == 0.5);
    REQUIRE(s4.labels.near_positivity_violation);
    REQUIRE_FALSE(s4.labels.u_dependence);
    REQUIRE(s4.labels.marginally_rare);

    const auto& s1 = scenario_catalog("s1");
    REQUIRE(s1.params.beta == std::array<double, 7>{-3, 1, 1, -1, 0, 0, 0});
    REQUIRE_FALSE(s1.labels.near_positivity_violation);
    REQUIRE(s1.labels.marginally_rare);

    const auto& base = scenario_catalog("sweep-base");
    REQUIRE(base.params.p_l == 0.5);
    REQUIRE(base.params.theta[0] == -1.0);
    REQUIRE(base.params.beta[0] == -1.0);

    REQUIRE_THROWS_AS(scenario_catalog("bogus"), NotFoundError);
    REQUIRE(scenario_list().size() == 7);
}

TEST_CASE("dataset CSV round-trips and supports latent omission") {
    DgpParams p = zero_params();
    const PointDataset ds = sample_point_population(p, 50, 3);

    std::ostringstream with_u;
    write_point_csv(ds, with_u, /*include_u=*/true);
    REQUIRE(with_u.str().rfind("u,l,a,d,y\n", 0) == 0);
    std::istringstream in(with_u.str());
    const PointDataset back = read_point_csv(in);
    REQUIRE(back.u_observed());
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        REQUIRE(back.records()[i].u == ds.records()[i].u);

    std::ostringstream without_u;
    write_point_csv(ds, without_u, /*include_u=*/false);
    std::istringstream in2(without_u.str());
    const PointDataset masked = read_point_csv(in2);
    REQUIRE_FALSE(masked.u_observed());
    // second line starts with the empty latent column
    REQUIRE(without_u.str().substr(10, 1) == ",");
}

TEST_CASE("the observed view hides nothing it should not") {
    const auto& s3 = scenario_catalog("s3");
    const PointDataset ds = sample_point_population(s3.params, 100, 17);
    const ObservedView view = ds.observed();
    REQUIRE(view.size() == ds.size());
    for (std::size_t i = 0; i < view.size(); ++i) {
        REQUIRE(view[i].l == ds.records()[i].l);
        REQUIRE(view[i].a == ds.records()[i].a);
        REQUIRE(view[i].d == ds.records()[i].d);
        REQUIRE(view[i].y == ds.records()[i].y);
    }
}
