#include "doctest.h"

#include "gridcast/optimizer.hpp"
#include "gridcast/errors.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace gridcast;

namespace {
const double inf = std::numeric_limits<double>::infinity();
}

TEST_SUITE("optimizer") {

TEST_CASE("constrained quadratic stops at the active bound") {
    auto f = [](std::span<const double> x) { return (x[0] - 2.0) * (x[0] - 2.0); };
    Bounds b{{3.0}, {inf}};
    auto res = minimize_bounded(f, {5.0}, b);
    CHECK(res.converged);
    CHECK(res.x[0] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(res.f == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("separable quadratic reaches the unconstrained minimum") {
    auto f = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += (v - 1.0) * (v - 1.0);
        return s;
    };
    auto res = minimize_bounded(f, std::vector<double>(6, 0.0), Bounds::unbounded(6));
    CHECK(res.converged);
    for (double v : res.x) CHECK(v == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(res.f < 1e-12);
}

TEST_CASE("Rosenbrock converges to (1,1)") {
    auto f = [](std::span<const double> x) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    auto res = minimize_bounded(f, {-1.2, 1.0}, Bounds::unbounded(2));
    CHECK(res.converged);
    CHECK(std::abs(res.x[0] - 1.0) < 1e-6);
    CHECK(std::abs(res.x[1] - 1.0) < 1e-6);
}

TEST_CASE("accepted iterates decrease monotonically and stay feasible") {
    auto f = [](std::span<const double> x) {
        // Banana-like objective with a box that cuts the minimum off.
        const double a = x[0] + 1.5;
        const double b = x[1] - x[0] * x[0];
        return a * a + 10.0 * b * b + 0.3 * std::sin(3.0 * x[0]);
    };
    Bounds b{{-1.0, -0.5}, {2.0, 1.5}};
    OptimOptions opts;
    opts.record_trace = true;
    auto res = minimize_bounded(f, {1.9, 1.4}, b, opts);
    REQUIRE(res.trace.size() >= 2);
    for (std::size_t i = 1; i < res.trace.size(); ++i)
        CHECK(res.trace[i] <= res.trace[i - 1] + 1e-15);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(res.x[i] >= b.lower[i]);
        CHECK(res.x[i] <= b.upper[i]);
    }
    CHECK(res.f <= f(std::vector<double>{1.9, 1.4}));
}

TEST_CASE("finite-difference gradient matches analytic gradients") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    auto f = [](std::span<const double> x) {
        return std::exp(0.3 * x[0]) + x[1] * x[1] * x[1] * 0.5 +
               std::sin(x[2]) + x[0] * x[1];
    };
    Bounds b = Bounds::unbounded(3);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x = {u(rng), u(rng), u(rng)};
        auto g = fd_gradient(f, x, b);
        const double gx[3] = {0.3 * std::exp(0.3 * x[0]) + x[1],
                              1.5 * x[1] * x[1] + x[0], std::cos(x[2])};
        for (int i = 0; i < 3; ++i) {
            const double scale = std::max(1.0, std::abs(gx[i]));
            CHECK(std::abs(g[i] - gx[i]) / scale < 1e-5);
        }
    }
}

TEST_CASE("one-sided differences are used against active bounds") {
    auto f = [](std::span<const double> x) { return x[0] * x[0]; };
    Bounds b{{1.0}, {1.0 + 1e-9}};
    // x pinned at the bound: gradient falls back without stepping outside.
    auto g = fd_gradient(f, std::vector<double>{1.0}, b);
    CHECK(g[0] == 0.0);
    Bounds b2{{1.0}, {inf}};
    auto g2 = fd_gradient(f, std::vector<double>{1.0}, b2);
    CHECK(g2[0] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("non-finite start is rejected") {
    auto f = [](std::span<const double>) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(
        minimize_bounded(f, {0.0}, Bounds::unbounded(1)), NumericalError);
}

TEST_CASE("objective evaluated only inside the box") {
    auto f = [](std::span<const double> x) {
        if (x[0] < -1e-12 || x[0] > 4.0 + 1e-12)
            throw std::logic_error("evaluated outside the box");
        return (x[0] - 10.0) * (x[0] - 10.0);
    };
    Bounds b{{0.0}, {4.0}};
    auto res = minimize_bounded(f, {1.0}, b);
    CHECK(res.x[0] == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("bound size mismatch is rejected") {
    auto f = [](std::span<const double> x) { return x[0]; };
    Bounds b{{0.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(minimize_bounded(f, {0.5}, b), InvalidArgument);
}

} // TEST_SUITE
