#include "gridcast/optimizer.hpp"
#include "gridcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace gridcast {

namespace {

constexpr double armijo_c1 = 1e-4;
constexpr double fd_step = 1e-6;

void project(std::vector<double>& x, const Bounds& b) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], b.lower[i], b.upper[i]);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct Pair {
    std::vector<double> s, y;
    double rho;
};

// Two-loop recursion; H0 = (s.y / y.y) I from the newest pair.
std::vector<double> lbfgs_direction(const std::deque<Pair>& mem,
                                    const std::vector<double>& g) {
    std::vector<double> q = g;
    std::vector<double> alpha(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
        alpha[k] = mem[k].rho * dot(mem[k].s, q);
        for (std::size_t i = 0; i < q.size(); ++i)
            q[i] -= alpha[k] * mem[k].y[i];
    }
    if (!mem.empty()) {
        const Pair& last = mem.back();
        const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
        for (double& t : q) t *= gamma;
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
        const double beta = mem[k].rho * dot(mem[k].y, q);
        for (std::size_t i = 0; i < q.size(); ++i)
            q[i] += (alpha[k] - beta) * mem[k].s[i];
    }
    for (double& t : q) t = -t;
    return q;
}

} // namespace

Bounds Bounds::unbounded(std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    return Bounds{std::vector<double>(n, -inf), std::vector<double>(n, inf)};
}

std::vector<double> fd_gradient(const Objective& f, std::span<const double> x,
                                const Bounds& b) {
    std::vector<double> xp(x.begin(), x.end());
    std::vector<double> g(x.size(), 0.0);
    double f0 = 0.0;
    bool have_f0 = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = fd_step * (1.0 + std::abs(x[i]));
        const double lo = b.lower[i], hi = b.upper[i];
        const bool room_up = x[i] + h <= hi;
        const bool room_dn = x[i] - h >= lo;
        const double xi = xp[i];
        if (room_up && room_dn) {
            xp[i] = xi + h;
            const double fp = f(xp);
            xp[i] = xi - h;
            const double fm = f(xp);
            g[i] = (fp - fm) / (2.0 * h);
        } else if (room_up || room_dn) {
            // One-sided difference against the active bound.
            if (!have_f0) {
                xp[i] = xi;
                f0 = f(xp);
                have_f0 = true;
            }
            xp[i] = room_up ? xi + h : xi - h;
            const double f1 = f(xp);
            g[i] = room_up ? (f1 - f0) / h : (f0 - f1) / h;
        } else {
            g[i] = 0.0; // coordinate pinned by the box
        }
        xp[i] = xi;
    }
    return g;
}

OptimResult minimize_bounded(const Objective& f, std::vector<double> x0,
                             const Bounds& b, const OptimOptions& opts) {
    if (b.lower.size() != x0.size() || b.upper.size() != x0.size())
        throw InvalidArgument("minimize_bounded: bounds/point size mismatch");
    for (std::size_t i = 0; i < x0.size(); ++i)
        if (!(b.lower[i] <= b.upper[i]))
            throw InvalidArgument("minimize_bounded: lower bound exceeds upper");

    OptimResult res;
    std::vector<double> x = std::move(x0);
    project(x, b);
    double fx = f(x);
    if (!std::isfinite(fx))
        throw NumericalError("minimize_bounded: objective not finite at start");
    if (opts.record_trace) res.trace.push_back(fx);

    std::deque<Pair> mem;
    std::vector<double> g = fd_gradient(f, x, b);
    int rejected_pairs = 0;

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        // Projected-gradient convergence measure.
        double pg = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double step = std::clamp(x[i] - g[i], b.lower[i], b.upper[i]) - x[i];
            pg = std::max(pg, std::abs(step));
        }
        if (pg <= opts.grad_tol) {
            res.converged = true;
            break;
        }

        std::vector<double> d = lbfgs_direction(mem, g);

        bool accepted = false;
        std::vector<double> xn(x.size());
        double fn = fx;
        auto try_step = [&](double alpha, std::vector<double>& out) {
            for (std::size_t i = 0; i < x.size(); ++i)
                out[i] = std::clamp(x[i] + alpha * d[i], b.lower[i], b.upper[i]);
            double dderiv = 0.0;
            bool moved = false;
            for (std::size_t i = 0; i < x.size(); ++i) {
                dderiv += g[i] * (out[i] - x[i]);
                moved = moved || out[i] != x[i];
            }
            if (!moved) return std::make_pair(false, fx);
            const double fv = f(out);
            const bool ok =
                std::isfinite(fv) && fv <= fx + armijo_c1 * dderiv && fv <= fx;
            return std::make_pair(ok, fv);
        };
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1) {
                // Quasi-Newton direction failed; steepest feasible descent.
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g[i];
            }
            double alpha = 1.0;
            for (int ls = 0; ls < 50; ++ls, alpha *= 0.5) {
                auto [ok, fv] = try_step(alpha, xn);
                if (!ok) continue;
                accepted = true;
                fn = fv;
                if (ls == 0) {
                    // The unit step passed outright; the direction may be
                    // far too short (stale curvature memory).  Extend while
                    // the Armijo test keeps holding and f strictly drops.
                    std::vector<double> xe(x.size());
                    for (int grow = 0; grow < 30; ++grow) {
                        alpha *= 2.0;
                        auto [ok2, fv2] = try_step(alpha, xe);
                        if (!ok2 || fv2 >= fn) break;
                        xn.swap(xe);
                        fn = fv2;
                    }
                }
                break;
            }
        }
        if (!accepted) break; // no descent along either direction

        std::vector<double> gn = fd_gradient(f, xn, b);
        Pair p;
        p.s.resize(x.size());
        p.y.resize(x.size());
        double sn = 0.0, yn = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            p.s[i] = xn[i] - x[i];
            p.y[i] = gn[i] - g[i];
            sn += p.s[i] * p.s[i];
            yn += p.y[i] * p.y[i];
        }
        const double sy = dot(p.s, p.y);
        if (sy > 1e-10 * std::sqrt(sn) * std::sqrt(yn)) {
            p.rho = 1.0 / sy;
            mem.push_back(std::move(p));
            if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
            rejected_pairs = 0;
        } else if (++rejected_pairs >= 2) {
            // Repeated curvature failures mean the stored model no longer
            // describes the local surface; start over from gradient steps.
            mem.clear();
            rejected_pairs = 0;
        }
        x = xn;
        fx = fn;
        g = std::move(gn);
        if (opts.record_trace) res.trace.push_back(fx);
    }

    res.x = std::move(x);
    res.f = fx;
    res.iterations = it;
    return res;
}

} // namespace gridcast
