#ifndef GRIDCAST_OPTIMIZER_HPP
#define GRIDCAST_OPTIMIZER_HPP

// Box-constrained quasi-Newton minimizer: limited-memory BFGS search
// directions, projection onto the box, and a backtracking Armijo line
// search along the projected path.  Gradients are finite-difference,
// so objectives only need function values.

#include <functional>
#include <span>
#include <vector>

namespace gridcast {

using Objective = std::function<double(std::span<const double>)>;

// Per-coordinate bounds; use +-infinity for unbounded coordinates.
struct Bounds {
    std::vector<double> lower;
    std::vector<double> upper;

    static Bounds unbounded(std::size_t n);
};

struct OptimOptions {
    int max_iter = 500;
    double grad_tol = 1e-8; // infinity norm of the projected gradient
    int memory = 10;        // stored curvature pairs
    bool record_trace = false;
};

struct OptimResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace; // objective value per accepted iterate
};

// Central finite-difference gradient with step 1e-6 * (1 + |x_i|),
// falling back to a one-sided difference against an active bound.
std::vector<double> fd_gradient(const Objective& f, std::span<const double> x,
                                const Bounds& b);

// Minimizes f over the box.  The starting point is projected into the
// box first; every accepted iterate has an objective value no larger
// than the previous one, so result.f <= f(project(x0)).
OptimResult minimize_bounded(const Objective& f, std::vector<double> x0,
                             const Bounds& b, const OptimOptions& opts = {});

} // namespace gridcast

#endif
