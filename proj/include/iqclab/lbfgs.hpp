#pragma once

// Limited-memory BFGS with a bracketing line search (strong Wolfe when it
// can be met, Armijo otherwise). Deterministic, allocation-light.

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include "iqclab/errors.hpp"

namespace iqclab {

struct LbfgsOptions {
    int max_iters = 500;
    double gradient_tol = 1e-8;  // on ‖g‖_∞
    double f_rel_tol = 1e-14;    // stop when relative decrease stalls
    int history = 10;
    int max_line_evals = 30;
};

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    double grad_inf = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Objective: returns f(x) and writes ∇f(x) into g (same size as x).
using Objective = std::function<double(const std::vector<double>& x, std::vector<double>& g)>;

namespace detail {
inline double dotv(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline double inf_norm(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s = std::max(s, std::abs(v));
    return s;
}
}  // namespace detail

inline LbfgsResult lbfgs_minimize(const Objective& fg, std::vector<double> x, const LbfgsOptions& opt = {}) {
    using detail::dotv;
    const std::size_t n = x.size();
    LbfgsResult res;
    std::vector<double> g(n), d(n), xt(n), gt(n);
    double f = fg(x, g);
    ++res.evaluations;
    if (!std::isfinite(f)) throw Error(ErrorKind::NonFiniteEnergy, "objective is not finite at the initial point");
    std::deque<std::vector<double>> S, Y;
    std::deque<double> R;
    std::vector<double> alpha(opt.history);
    int failures = 0;

    for (res.iterations = 0; res.iterations < opt.max_iters; ++res.iterations) {
        res.grad_inf = detail::inf_norm(g);
        if (res.grad_inf <= opt.gradient_tol || n == 0) {
            res.converged = true;
            break;
        }
        // two-loop recursion
        d = g;
        for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
            alpha[i] = R[i] * dotv(S[i], d);
            for (std::size_t k = 0; k < n; ++k) d[k] -= alpha[i] * Y[i][k];
        }
        double gamma = 1.0;
        if (!S.empty()) gamma = dotv(S.back(), Y.back()) / dotv(Y.back(), Y.back());
        else gamma = 1.0 / std::max(1.0, std::sqrt(dotv(g, g)));
        for (auto& v : d) v *= gamma;
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double beta = R[i] * dotv(Y[i], d);
            for (std::size_t k = 0; k < n; ++k) d[k] += S[i][k] * (alpha[i] - beta);
        }
        for (auto& v : d) v = -v;
        double dg0 = dotv(d, g);
        if (!(dg0 < 0.0)) {
            S.clear(), Y.clear(), R.clear();
            d = g;
            for (auto& v : d) v = -v / std::max(1.0, std::sqrt(dotv(g, g)));
            dg0 = dotv(d, g);
        }

        // line search: bracket then bisect/interpolate (strong Wolfe, c1 = 1e-4, c2 = 0.9)
        const double c1 = 1e-4, c2 = 0.9;
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double t = 1.0, f_lo = f;
        double best_t = 0.0, best_f = f;
        std::vector<double> best_g;
        bool accepted = false;
        double f_acc = f;
        for (int e = 0; e < opt.max_line_evals; ++e) {
            for (std::size_t k = 0; k < n; ++k) xt[k] = x[k] + t * d[k];
            const double ft = fg(xt, gt);
            ++res.evaluations;
            const double dgt = std::isfinite(ft) ? dotv(gt, d) : 0.0;
            if (std::isfinite(ft) && ft < best_f) {
                best_f = ft, best_t = t, best_g = gt;
            }
            if (!std::isfinite(ft) || ft > f + c1 * t * dg0 || ft >= f_lo) {
                hi = t;
            } else {
                if (std::abs(dgt) <= -c2 * dg0) {
                    accepted = true;
                    f_acc = ft;
                    break;
                }
                if (dgt > 0.0) {
                    hi = t;
                } else {
                    lo = t, f_lo = ft;
                }
            }
            if (std::isinf(hi)) t *= 2.0;
            else t = 0.5 * (lo + hi);
        }
        if (!accepted) {
            if (best_t > 0.0 && best_f < f) {
                t = best_t;
                for (std::size_t k = 0; k < n; ++k) xt[k] = x[k] + t * d[k];
                gt = best_g;
            } else {
                if (++failures >= 2 || S.empty()) break;
                S.clear(), Y.clear(), R.clear();
                continue;
            }
        }
        const double f_new = accepted ? f_acc : best_f;
        failures = 0;
        std::vector<double> s(n), y(n);
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = xt[k] - x[k];
            y[k] = gt[k] - g[k];
        }
        const double sy = dotv(s, y);
        if (sy > 1e-16 * std::sqrt(dotv(s, s) * dotv(y, y))) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            R.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opt.history) S.pop_front(), Y.pop_front(), R.pop_front();
        }
        const double decrease = f - f_new;
        x = xt;
        g = gt;
        f = f_new;
        if (decrease <= opt.f_rel_tol * std::max(1.0, std::abs(f))) {
            res.converged = detail::inf_norm(g) <= std::sqrt(opt.gradient_tol);
            ++res.iterations;
            break;
        }
    }
    if (!std::isfinite(f)) throw Error(ErrorKind::OptimizerDiverged, "objective became non-finite");
    res.x = std::move(x);
    res.f = f;
    res.grad_inf = detail::inf_norm(g);
    if (res.grad_inf <= opt.gradient_tol) res.converged = true;
    return res;
}

}  // namespace iqclab
