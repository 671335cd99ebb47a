#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "automo/hyperopt.hpp"
#include "automo/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace automo;

namespace {

double quadratic(double mp, double lambda) {
    const double a = mp - 0.3, b = lambda - 0.7;
    return -(a * a) - (b * b);
}

}  // namespace

TEST_CASE("expected improvement closed-form values") {
    CHECK(expected_improvement(0.5, 0.0, 0.5) == 0.0);
    CHECK(expected_improvement(0.2, 0.0, 0.5) == 0.0);
    CHECK(expected_improvement(0.8, 0.0, 0.5) == doctest::Approx(0.3).epsilon(1e-12));
    // mean equal to the incumbent with unit spread: EI = phi(0)
    CHECK(expected_improvement(1.0, 1.0, 1.0) ==
          doctest::Approx(0.3989422804014327).epsilon(1e-6));
    CHECK(expected_improvement(0.0, 1e-9, 100.0) >= 0.0);
}

TEST_CASE("expected improvement grows with spread below the incumbent") {
    double prev = expected_improvement(0.0, 0.01, 1.0);
    for (double s : {0.1, 0.3, 1.0, 3.0, 10.0}) {
        const double ei = expected_improvement(0.0, s, 1.0);
        CHECK(ei >= prev);
        prev = ei;
    }
    // and never negative, even far below the incumbent
    CHECK(expected_improvement(-50.0, 0.5, 1.0) >= 0.0);
}

TEST_CASE("surrogate prior before any observation") {
    Surrogate gp;
    double mean = -1, var = -1;
    gp.predict(0.5, 0.5, mean, var);
    CHECK(mean == 0.0);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gp.size() == 0);
    CHECK_THROWS_AS(Surrogate(0.0, 1.0, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(gp.add(0.1, 0.1, std::nan("")), std::invalid_argument);
}

TEST_CASE("surrogate interpolates observations and reverts to the prior") {
    Surrogate gp(0.2, 1.0, 1e-8);
    gp.add(0.2, 0.3, 1.5);
    gp.add(0.8, 0.6, -0.5);
    gp.add(0.5, 0.9, 0.7);

    double mean = 0, var = 0;
    gp.predict(0.2, 0.3, mean, var);
    CHECK(mean == doctest::Approx(1.5).epsilon(1e-5));
    CHECK(var < 1e-4);

    // far from every observation the posterior collapses to the prior:
    // mean of the observed values, signal variance in observation units
    const double mu = (1.5 - 0.5 + 0.7) / 3.0;
    const double spread = ((1.5 - mu) * (1.5 - mu) + (-0.5 - mu) * (-0.5 - mu) +
                           (0.7 - mu) * (0.7 - mu)) /
                          3.0;
    gp.predict(37.0, -41.0, mean, var);
    CHECK(mean == doctest::Approx(mu).epsilon(1e-9));
    CHECK(var == doctest::Approx(spread).epsilon(1e-9));
}

TEST_CASE("surrogate posterior matches a dense reference solve") {
    std::vector<std::array<double, 2>> xs;
    std::vector<double> fs;
    Surrogate gp(0.2, 1.0, 1e-4);
    Rng rng(31);
    for (int i = 0; i < 9; ++i) {
        const double x = rng.uniform01(), y = rng.uniform01();
        const double f = quadratic(x, y);
        xs.push_back({x, y});
        fs.push_back(f);
        gp.add(x, y, f);
    }
    REQUIRE(gp.size() == 9);
    for (int q = 0; q < 50; ++q) {
        const double qx = rng.uniform01(), qy = rng.uniform01();
        double mean = 0, var = 0, want_mean = 0, want_var = 0;
        gp.predict(qx, qy, mean, var);
        testutil::gp_reference(xs, fs, 0.2, 1.0, 1e-4, qx, qy, want_mean, want_var);
        CAPTURE(qx);
        CAPTURE(qy);
        CHECK(mean == doctest::Approx(want_mean).epsilon(1e-7));
        CHECK(var == doctest::Approx(want_var).epsilon(1e-6));
        CHECK(var >= 0.0);
    }
}

TEST_CASE("surrogate survives duplicate observations") {
    Surrogate gp(0.2, 1.0, 1e-4);
    for (int i = 0; i < 4; ++i) gp.add(0.4, 0.4, 1.0);
    double mean = 0, var = 0;
    gp.predict(0.4, 0.4, mean, var);
    CHECK(std::isfinite(mean));
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(var >= 0.0);
}

TEST_CASE("optimizer hits a smooth optimum within grid resolution") {
    BayesBounds bounds;
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto res = bayes_optimize(quadratic, bounds, 25, seed);
        REQUIRE(res.trials.size() == 25);
        const double err = std::max(std::abs(res.best.mp - 0.3),
                                    std::abs(res.best.lambda - 0.7));
        if (err <= 0.05) ++hits;
    }
    CHECK(hits >= 4);
}

TEST_CASE("optimizer is deterministic and returns its best trial") {
    BayesBounds bounds;
    const auto a = bayes_optimize(quadratic, bounds, 12, 9);
    const auto b = bayes_optimize(quadratic, bounds, 12, 9);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        CHECK(a.trials[i].mp == b.trials[i].mp);
        CHECK(a.trials[i].lambda == b.trials[i].lambda);
        CHECK(a.trials[i].objective == b.trials[i].objective);
    }

    double best = a.trials[0].objective;
    for (const auto &t : a.trials) best = std::max(best, t.objective);
    CHECK(a.best.objective == best);

    bool found = false;
    for (const auto &t : a.trials) {
        found = found || (t.mp == a.best.mp && t.lambda == a.best.lambda &&
                          t.objective == a.best.objective);
    }
    CHECK(found);

    const auto c = bayes_optimize(quadratic, bounds, 12, 10);
    bool differs = false;
    for (std::size_t i = 0; i < c.trials.size(); ++i) {
        differs = differs || c.trials[i].mp != a.trials[i].mp;
    }
    CHECK(differs);
}

TEST_CASE("longer budgets never lose ground") {
    BayesBounds bounds;
    double prev = -1e300;
    for (int budget : {1, 3, 5, 8, 13, 21}) {
        const auto res = bayes_optimize(quadratic, bounds, budget, 4);
        CHECK(res.best.objective >= prev);
        prev = res.best.objective;
    }
}

TEST_CASE("trials stay inside the requested box") {
    BayesBounds bounds;
    bounds.mp_lo = 0.25;
    bounds.mp_hi = 0.75;
    bounds.lambda_lo = 0.6;
    bounds.lambda_hi = 0.9;
    for (bool random : {false, true}) {
        const auto res = bayes_optimize(quadratic, bounds, 15, 3, random);
        for (const auto &t : res.trials) {
            CHECK(t.mp >= bounds.mp_lo);
            CHECK(t.mp <= bounds.mp_hi);
            CHECK(t.lambda >= bounds.lambda_lo);
            CHECK(t.lambda <= bounds.lambda_hi);
        }
    }
}

TEST_CASE("random-search ablation is deterministic and keeps the budget") {
    BayesBounds bounds;
    const auto a = bayes_optimize(quadratic, bounds, 20, 6, true);
    const auto b = bayes_optimize(quadratic, bounds, 20, 6, true);
    REQUIRE(a.trials.size() == 20);
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        CHECK(a.trials[i].mp == b.trials[i].mp);
        CHECK(a.trials[i].objective == b.trials[i].objective);
    }
    double best = a.trials[0].objective;
    for (const auto &t : a.trials) best = std::max(best, t.objective);
    CHECK(a.best.objective == best);
}

TEST_CASE("a budget of one evaluates exactly one point") {
    BayesBounds bounds;
    const auto res = bayes_optimize(quadratic, bounds, 1, 2);
    CHECK(res.trials.size() == 1);
    CHECK(res.best.mp == res.trials[0].mp);
    CHECK_THROWS_AS(bayes_optimize(quadratic, bounds, 0, 2), std::invalid_argument);
}

TEST_CASE("objective failures surface with the failing point attached") {
    BayesBounds bounds;
    auto boom = [](double, double) -> double { throw std::runtime_error("boom"); };
    CHECK_THROWS_WITH_AS(bayes_optimize(boom, bounds, 5, 1),
                         doctest::Contains("objective failed at mp="),
                         std::runtime_error);

    auto nanobj = [](double, double) { return std::nan(""); };
    CHECK_THROWS_WITH_AS(bayes_optimize(nanobj, bounds, 5, 1),
                         doctest::Contains("non-finite objective"), std::runtime_error);
}
