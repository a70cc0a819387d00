#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "htb/estimators.hpp"
#include "htb/rng.hpp"

using htb::catoni_estimate;
using htb::catoni_influence;
using htb::influence_sum;
using htb::median_of_means;
using htb::Rng;
using htb::SolverConfig;

namespace {

// Grid-scan oracle: walk [-radius, radius] in steps of xi/2 and return the
// first grid point where f crosses the target from above. Independent of the
// bisection path.
double grid_scan_crossing(const std::vector<double>& samples, const std::vector<double>& lambdas,
                          double epsilon, double target, double radius, double xi) {
    double prev_m = -radius;
    for (double m = -radius; m <= radius; m += xi / 2.0) {
        if (influence_sum(samples, lambdas, epsilon, m) < target) {
            return 0.5 * (prev_m + m);
        }
        prev_m = m;
    }
    return radius;
}

}  // namespace

TEST_CASE("influence function point values") {
    CHECK(catoni_influence(0.0, 0.5) == 0.0);
    CHECK(catoni_influence(1.0, 1.0) == doctest::Approx(std::log(2.5)).epsilon(1e-12));
    CHECK(catoni_influence(-1.0, 1.0) == doctest::Approx(-std::log(2.5)).epsilon(1e-12));
}

TEST_CASE("influence is odd and nondecreasing") {
    Rng rng(1234);
    for (int i = 0; i < 10000; ++i) {
        const double x = (rng.uniform() - 0.5) * 100.0;
        const double eps = 0.05 + 0.95 * rng.uniform();
        CHECK(catoni_influence(-x, eps) == -catoni_influence(x, eps));

        const double y = (rng.uniform() - 0.5) * 100.0;
        const double lo = std::min(x, y);
        const double hi = std::max(x, y);
        CHECK(catoni_influence(lo, eps) <= catoni_influence(hi, eps));
    }
}

TEST_CASE("exponential moment inequality exp(phi(x)) <= 1 + x + |x|^(1+eps)/(1+eps)") {
    for (int ei = 1; ei <= 10; ++ei) {
        const double eps = 0.1 * ei;
        for (int xi = 0; xi <= 1000; ++xi) {
            const double x = -50.0 + 0.1 * xi;
            const double rhs = 1.0 + x + std::pow(std::abs(x), 1.0 + eps) / (1.0 + eps);
            CHECK(std::exp(catoni_influence(x, eps)) <= rhs + 1e-12);
        }
    }
}

TEST_CASE("catoni estimate solves the root equation") {
    SolverConfig solver;
    solver.tolerance_xi = 1e-10;

    SUBCASE("constant samples return the constant") {
        std::vector<double> xs(7, 3.25);
        std::vector<double> ls(7, 0.7);
        CHECK(catoni_estimate(xs, ls, 0.5, solver) == doctest::Approx(3.25).epsilon(1e-8));
    }
    SUBCASE("symmetric samples give zero") {
        std::vector<double> xs = {-2.0, 2.0, -2.0, 2.0};
        std::vector<double> ls(4, 0.3);
        CHECK(std::abs(catoni_estimate(xs, ls, 0.8, solver)) < 1e-9);
    }
    SUBCASE("agrees with the grid-scan oracle") {
        Rng rng(99);
        SolverConfig coarse;
        coarse.tolerance_xi = 1e-4;
        coarse.search_radius = 6.0;
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<double> xs;
            std::vector<double> ls;
            for (int i = 0; i < 10; ++i) {
                xs.push_back((rng.uniform() - 0.5) * 8.0);
                ls.push_back(0.1 + rng.uniform());
            }
            const double eps = 0.3 + 0.7 * rng.uniform();
            const double est = catoni_estimate(xs, ls, eps, coarse);
            const double oracle = grid_scan_crossing(xs, ls, eps, 0.0, 6.0, 1e-4);
            CHECK(std::abs(est - oracle) <= 2.0 * coarse.tolerance_xi);
        }
    }
    SUBCASE("shift equivariance") {
        Rng rng(7);
        std::vector<double> xs;
        std::vector<double> ls;
        for (int i = 0; i < 25; ++i) {
            xs.push_back(rng.normal(0.0, 1.5));
            ls.push_back(0.2 + rng.uniform());
        }
        const double base = catoni_estimate(xs, ls, 0.6, solver);
        std::vector<double> shifted = xs;
        for (auto& v : shifted) {
            v += 11.5;
        }
        const double moved = catoni_estimate(shifted, ls, 0.6, solver);
        CHECK(std::abs(moved - (base + 11.5)) <= 2.0 * solver.tolerance_xi);
    }
    SUBCASE("f is nonincreasing along a decreasing grid of m") {
        Rng rng(21);
        std::vector<double> xs;
        std::vector<double> ls;
        for (int i = 0; i < 40; ++i) {
            xs.push_back(rng.laplace(0.5, 2.0));
            ls.push_back(0.05 + rng.uniform());
        }
        double prev = -std::numeric_limits<double>::infinity();
        for (double m = 10.0; m >= -10.0; m -= 0.25) {
            const double val = influence_sum(xs, ls, 0.45, m);
            CHECK(val >= prev);
            prev = val;
        }
    }
    SUBCASE("concentration on standard normal samples") {
        Rng rng(2024);
        const int n = 10000;
        std::vector<double> xs;
        xs.reserve(n);
        for (int i = 0; i < n; ++i) {
            xs.push_back(rng.normal(0.0, 1.0));
        }
        std::vector<double> ls(n, 1.0 / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(catoni_estimate(xs, ls, 1.0, solver)) < 0.05);
    }
    SUBCASE("no sign change inside the radius is an error") {
        std::vector<double> xs = {100.0, 101.0};
        std::vector<double> ls = {1.0, 1.0};
        SolverConfig tight;
        tight.search_radius = 1.0;
        CHECK_THROWS_AS(catoni_estimate(xs, ls, 1.0, tight), htb::NoRootInRadius);
    }
    SUBCASE("empty input") {
        std::vector<double> none;
        CHECK_THROWS_AS(catoni_estimate(none, none, 1.0, solver), htb::EmptyInput);
    }
}

TEST_CASE("median of means") {
    SUBCASE("constant input") {
        std::vector<double> xs = {5.0, 5.0, 5.0, 5.0};
        CHECK(median_of_means(xs, 2) == 5.0);
    }
    SUBCASE("singleton blocks use the lower median") {
        std::vector<double> xs = {0.0, 0.0, 0.0, 100.0};
        CHECK(median_of_means(xs, 4) == 0.0);
    }
    SUBCASE("matches explicit block means") {
        Rng rng(5);
        std::vector<double> xs;
        for (int i = 0; i < 12; ++i) {
            xs.push_back(rng.uniform() * 10.0);
        }
        std::vector<double> block_means;
        for (int b = 0; b < 3; ++b) {
            double s = 0.0;
            for (int i = 0; i < 4; ++i) {
                s += xs[static_cast<std::size_t>(b * 4 + i)];
            }
            block_means.push_back(s / 4.0);
        }
        std::sort(block_means.begin(), block_means.end());
        CHECK(median_of_means(xs, 3) == block_means[1]);
    }
    SUBCASE("empty input") {
        std::vector<double> none;
        CHECK_THROWS_AS(median_of_means(none, 1), htb::EmptyInput);
    }
}
