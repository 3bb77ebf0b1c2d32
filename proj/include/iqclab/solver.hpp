#pragma once

// Discrete energy experiments on the unit box Ω = (0,1)ⁿ.
//
// F_rel(u) = ∫ V̄(e(u)) − ℓ·u over u = g + curl ψ (MAC grid, midpoint cells).
// F_ε(u)   = ε^{-p} ∫ W_ε(∇y) − ℓ·u with y = w_ε ∘ Φ, w_ε(x) = e^{εZ}x and Φ the
//            time-ε flow of a spline velocity, so det ∇y = 1 up to the integrator.

#include <algorithm>
#include <atomic>
#include <exception>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "iqclab/cell_problem.hpp"
#include "iqclab/densities.hpp"
#include "iqclab/envelopes.hpp"
#include "iqclab/grid.hpp"
#include "iqclab/lbfgs.hpp"
#include "iqclab/spline_flow.hpp"

namespace iqclab {

inline constexpr double kDetResidualBudget = 1e-6;

template <int N>
struct ExperimentConfig {
    DensityModel<N> model = make_singlewell_dist2<N>();
    int m = 8;
    Matrix<N> Z_bc{};
    /// Box faces 2d (x_d = 0) and 2d+1 (x_d = 1) carrying u = g.
    std::array<bool, 2 * N> dirichlet = all_faces();
    /// Body load at the cell centres (row-major cell order); empty means zero.
    std::vector<std::array<double, N>> load;
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
    OptimizerOptions optimizer{};
    /// Random restarts for F_ε (the zero velocity is always tried).
    int eps_restarts = 0;
    int flow_steps = 8;
    /// MultiWell with several wells has no closed-form V̄; opt in to use V (an upper bound).
    bool allow_upper_bound = false;
    std::uint64_t seed = 0;

    static std::array<bool, 2 * N> all_faces() {
        std::array<bool, 2 * N> a;
        a.fill(true);
        return a;
    }

    bool all_dirichlet() const {
        return std::all_of(dirichlet.begin(), dirichlet.end(), [](bool b) { return b; });
    }
    bool no_dirichlet() const {
        return std::none_of(dirichlet.begin(), dirichlet.end(), [](bool b) { return b; });
    }

    void validate() const {
        if (m < 4) throw Error(ErrorKind::InvalidArgument, "m must be >= 4");
        if (std::abs(Z_bc.trace()) > 1e-12) throw Error(ErrorKind::InvalidArgument, "boundary matrix must be traceless");
        for (double e : eps_list)
            if (!(e > 0.0 && e <= 1.0)) throw Error(ErrorKind::InvalidArgument, "eps values must lie in (0, 1]");
        if (flow_steps < 4) throw Error(ErrorKind::InvalidArgument, "flow_steps must be >= 4");
        if (eps_restarts < 0 || optimizer.restarts < 0) throw Error(ErrorKind::InvalidArgument, "restarts must be >= 0");
        if (optimizer.max_iters < 0) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 0");
        if (model.is_nematic() && N != 3) throw Error(ErrorKind::DimensionMismatch, "nematic model requires n = 3");
        if (!load.empty()) {
            const auto cells = cell_lattice<N>(m);
            if (load.size() != cells.size()) throw Error(ErrorKind::DimensionMismatch, "load must have one vector per cell");
            const double vol = std::pow(1.0 / m, N);
            std::array<double, N> force{};
            Matrix<N> moment{};
            for (std::size_t c = 0; c < cells.size(); ++c) {
                const auto i = cells.unravel(c);
                for (int a = 0; a < N; ++a) {
                    if (!std::isfinite(load[c][a])) throw Error(ErrorKind::InvalidArgument, "load must be finite");
                    force[a] += vol * load[c][a];
                    for (int b = 0; b < N; ++b) moment(a, b) += vol * load[c][a] * (i[b] + 0.5) / m;
                }
            }
            for (int a = 0; a < N; ++a) {
                if (std::abs(force[a]) > 1e-8) throw Error(ErrorKind::InvalidArgument, "load has a net force");
                for (int b = 0; b < N; ++b)
                    if (std::abs(moment(a, b)) > 1e-8) throw Error(ErrorKind::InvalidArgument, "load has a first moment");
            }
        }
    }
};

template <int N>
struct RelaxedResult {
    double energy = 0.0;
    GridField<N> displacement;  // u = g + φ on the faces
    int iterations = 0;
    bool converged = false;
    bool upper_bound = false;   // V used in place of V̄
};

template <int N>
struct NonlinearResult {
    double eps = 0.0;
    double energy = 0.0;
    double det_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> coefficients;  // spline potential of the flow velocity
    NodeField<N> displacement;         // u = (y − x)/ε at the cell centres
};

template <int N>
struct EnergyReport {
    std::vector<NonlinearResult<N>> nonlinear;
    RelaxedResult<N> relaxed;
    std::vector<double> gap;  // E_ε − E_rel, signed
    double order = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// Relaxed problem
// ---------------------------------------------------------------------------

/// V̄ as a cell density. Throws NoClosedFormEnvelope for multiwell models with
/// two or more wells unless `allow_upper_bound` (then V is used).
template <int N>
CellDensity<N> relaxed_density(const DensityModel<N>& model, bool allow_upper_bound, bool* upper = nullptr) {
    if (upper) *upper = false;
    CellDensity<N> d;
    if (const auto* nm = std::get_if<Nematic>(&model.kind)) {
        if constexpr (N == 3) {
            return nematic_V_iqc_density(nm->rho);
        } else {
            throw Error(ErrorKind::DimensionMismatch, "nematic model requires n = 3");
        }
    }
    if (const auto* mw = std::get_if<MultiWell<N>>(&model.kind)) {
        if (mw->wells.size() >= 2) {
            if (!allow_upper_bound)
                throw Error(ErrorKind::NoClosedFormEnvelope,
                            "no closed-form relaxed density for several wells; set allow_upper_bound to use V");
            if (upper) *upper = true;
        }
        d.value = [wells = *mw](const Matrix<N>& X) { return detail::multiwell_V(wells, Matrix<N>(sym_part(X))); };
        return d;
    }
    const auto& sw = std::get<SingleWell<N>>(model.kind);
    if (sw.builtin == "dist2-sl") {
        d.value = [](const Matrix<N>& X) {
            const Matrix<N> s = dev_part(sym_part(X));
            return dot(s, s);
        };
        d.value_grad = [](const Matrix<N>& X, Matrix<N>& G) {
            const Matrix<N> s = dev_part(sym_part(X));
            G = 2.0 * s;
            return dot(s, s);
        };
        return d;
    }
    if (!sw.Q && !sw.fd_fallback)
        throw Error(ErrorKind::MissingQ, "single-well model has no Q and finite differences are disabled");
    d.value = [sw](const Matrix<N>& X) {
        const Matrix<N> zi = dev_part(sym_part(X));
        return 0.5 * (sw.Q ? sw.Q(zi) : eval_Q_fd(sw, IlsMatrix<N>::unchecked(zi)));
    };
    return d;
}

template <int N>
RelaxedResult<N> minimize_F_rel(const ExperimentConfig<N>& cfg) {
    cfg.validate();
    RelaxedResult<N> out;
    CellProblem<N> cp;
    cp.density = relaxed_density(cfg.model, cfg.allow_upper_bound, &out.upper_bound);
    cp.base_point = cfg.Z_bc;
    cp.m = cfg.m;
    cp.optimizer = cfg.optimizer;
    cp.optimizer.seed = cfg.seed;
    const detail::CurlSpace<N> space(cfg.m, cfg.dirichlet);

    const auto cells = cell_lattice<N>(cfg.m);
    const double h = 1.0 / cfg.m, vol = std::pow(h, N);
    auto centre = [&](std::size_t c) {
        const auto i = cells.unravel(c);
        std::array<double, N> x{};
        for (int a = 0; a < N; ++a) x[a] = h * (i[a] + 0.5);
        return x;
    };

    detail::LinearTerm lin;
    if (!cfg.load.empty()) {
        // −h^n Σ ℓ_c·u_c with u_c = g(x_c) + (two-face average of φ)
        GridField<N> w = GridField<N>::zeros(cfg.m, true);
        w.dirichlet = cfg.dirichlet;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto i = cells.unravel(c);
            const auto x = centre(c);
            const auto gx = cfg.Z_bc * x;
            for (int d = 0; d < N; ++d) {
                lin.constant -= vol * cfg.load[c][d] * gx[d];
                const auto lat = face_lattice<N>(cfg.m, d);
                const std::size_t j = lat.index(i);
                w.comp[d][j] -= 0.5 * vol * cfg.load[c][d];
                w.comp[d][j + lat.stride(d)] -= 0.5 * vol * cfg.load[c][d];
            }
        }
        std::vector<double> gpsi(space.pl.total, 0.0);
        curl_transpose(space.pl, w, gpsi.data());
        lin.coef.resize(space.size());
        for (std::size_t k = 0; k < space.free.size(); ++k) lin.coef[k] = gpsi[space.free[k]];
    }

    std::vector<double> th;
    const auto r = detail::solve_cell(cp, space, th, {}, cfg.load.empty() ? nullptr : &lin);
    out.energy = r.value;
    out.iterations = r.iterations;
    out.converged = r.converged;

    GridField<N> phi = space.field(th);
    if (cfg.no_dirichlet()) {
        // gauge: zero mean displacement (constants are curls, so φ stays admissible)
        for (int d = 0; d < N; ++d) {
            double mean = 0.0;
            for (double v : phi.comp[d]) mean += v;
            mean /= static_cast<double>(phi.comp[d].size());
            for (double& v : phi.comp[d]) v -= mean;
        }
    }
    // the full field carries g on the boundary, so no face is masked
    out.displacement = GridField<N>::zeros(cfg.m, false);
    for (int d = 0; d < N; ++d) {
        const auto lat = face_lattice<N>(cfg.m, d);
        for (std::size_t k = 0; k < lat.size(); ++k) {
            const auto x = out.displacement.face_center(d, lat.unravel(k));
            out.displacement.comp[d][k] = (cfg.Z_bc * x)[d] + phi.comp[d][k];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinear problem
// ---------------------------------------------------------------------------

namespace detail {

/// w(F) = W_ε(F / det(F)^{1/3}) and its gradient in F (chain rule through the
/// volume normalization, which only removes integrator drift from det F = 1).
template <int N>
double normalized_W(const DensityModel<N>& model, double eps, const Matrix<N>& F, Matrix<N>* grad) {
    const double det = F.det();
    if (!(det > 0.0)) return std::numeric_limits<double>::infinity();
    const double sc = std::pow(det, -1.0 / N);
    const Matrix<N> Fh = sc * F;
    const auto w = eval_W(model, eps, Fh);
    if (!w.is_finite()) return std::numeric_limits<double>::infinity();
    if (!grad) return w.value();

    Matrix<N> G;
    bool analytic = false;
    if (const auto* nm = std::get_if<Nematic>(&model.kind)) {
        if constexpr (N == 3) {
            G = nematic_W_gradient(nematic_gamma(*nm, eps), Fh);
            analytic = true;
        }
    } else if (const auto* sw = std::get_if<SingleWell<N>>(&model.kind)) {
        if (sw->dW) {
            G = sw->dW(Fh);
            analytic = true;
        }
    }
    if (analytic) {
        const Matrix<N> Finv_t = F.inverse().transpose();
        *grad = sc * G - (dot(G, Fh) / N) * Finv_t;
    } else {
        const double t = 1e-7;
        Matrix<N> Y = F;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const double a = Y(i, j);
                Y(i, j) = a + t;
                const double fp = normalized_W<N>(model, eps, Y, nullptr);
                Y(i, j) = a - t;
                const double fm = normalized_W<N>(model, eps, Y, nullptr);
                Y(i, j) = a;
                (*grad)(i, j) = (fp - fm) / (2 * t);
            }
    }
    return w.value();
}

template <int N>
struct FepsObjective {
    const ExperimentConfig<N>& cfg;
    double eps;
    SplineVelocity<N> sv;
    Matrix<N> R;  // e^{εZ}
    std::vector<std::array<double, N>> centres;
    double vol;

    FepsObjective(const ExperimentConfig<N>& c, double e) : cfg(c), eps(e), sv(c.m) {
        R = matrix_exp(Matrix<N>(eps * cfg.Z_bc));
        const auto cells = cell_lattice<N>(cfg.m);
        const double h = 1.0 / cfg.m;
        vol = std::pow(h, N);
        centres.resize(cells.size());
        for (std::size_t q = 0; q < cells.size(); ++q) {
            const auto i = cells.unravel(q);
            for (int a = 0; a < N; ++a) centres[q][a] = h * (i[a] + 0.5);
        }
    }

    /// Energy, gradient (optional), max |det ∇y − 1| and final positions.
    double operator()(const std::vector<double>& c, std::vector<double>* grad, double* residual,
                      std::vector<std::array<double, N>>* finals = nullptr) const {
        const double scale = vol / std::pow(eps, cfg.model.p);
        if (grad) grad->assign(c.size(), 0.0);
        if (finals) finals->resize(centres.size());
        double total = 0.0, res = 0.0;
        FlowTape<N> tape;
        for (std::size_t q = 0; q < centres.size(); ++q) {
            std::array<double, N> x = centres[q];
            Matrix<N> J = Matrix<N>::identity();
            spline_flow(sv, c.data(), x, J, eps, cfg.flow_steps, grad ? &tape : nullptr);
            const Matrix<N> F = R * J;
            res = std::max(res, std::abs(F.det() - 1.0));
            if (finals) (*finals)[q] = x;
            Matrix<N> G;
            const double w = normalized_W(cfg.model, eps, F, grad ? &G : nullptr);
            if (!std::isfinite(w)) {
                if (residual) *residual = res;
                return std::numeric_limits<double>::infinity();
            }
            total += scale * w;
            std::array<double, N> lx{};
            if (!cfg.load.empty()) {
                const auto y = R * x;
                const auto lR = R.transpose() * cfg.load[q];
                for (int a = 0; a < N; ++a) {
                    total -= vol * cfg.load[q][a] * (y[a] - centres[q][a]) / eps;
                    lx[a] = -vol * lR[a] / eps;
                }
            }
            if (grad) flow_vjp(sv, c.data(), tape, eps, cfg.flow_steps, lx, Matrix<N>(scale * (R.transpose() * G)), grad->data());
        }
        if (residual) *residual = res;
        return total;
    }
};

}  // namespace detail

template <int N>
NonlinearResult<N> minimize_F_eps(const ExperimentConfig<N>& cfg, double eps) {
    cfg.validate();
    if (!(eps > 0.0 && eps <= 1.0)) throw Error(ErrorKind::InvalidArgument, "eps must lie in (0, 1]");
    if (!cfg.all_dirichlet())
        throw Error(ErrorKind::InvalidArgument, "minimize_F_eps needs Dirichlet data on every box face");
    const detail::FepsObjective<N> obj(cfg, eps);

    // Trial points beyond the integrator budget are rejected (infinite energy),
    // so every accepted iterate is incompressible to within the budget.
    Objective fg = [&](const std::vector<double>& c, std::vector<double>& g) {
        double res = 0.0;
        std::vector<double> gg;
        const double e = obj(c, &gg, &res);
        if (!(res <= kDetResidualBudget) || !std::isfinite(e)) return std::numeric_limits<double>::infinity();
        g = std::move(gg);
        return e;
    };

    LbfgsOptions lo;
    lo.max_iters = cfg.optimizer.max_iters;
    lo.gradient_tol = cfg.optimizer.gradient_tol;
    lo.history = cfg.optimizer.history;

    NonlinearResult<N> out;
    out.eps = eps;
    std::vector<double> best(obj.sv.size(), 0.0);
    double best_f = std::numeric_limits<double>::infinity();
    Rng rng(cfg.seed ^ 0x5eed5eedULL);
    for (int s = 0; s <= cfg.eps_restarts; ++s) {
        std::vector<double> c0(obj.sv.size(), 0.0);
        if (s > 0) {
            const double a = 0.1 * cfg.optimizer.init_amplitude / (static_cast<double>(cfg.m) * cfg.m);
            for (auto& v : c0) v = a * rng.normal();
            std::vector<double> g;
            if (!std::isfinite(fg(c0, g))) continue;
        }
        const auto r = lbfgs_minimize(fg, c0, lo);
        if (r.f < best_f) {
            best_f = r.f;
            best = r.x;
            out.iterations = r.iterations;
            out.converged = r.converged;
        }
    }
    std::vector<std::array<double, N>> finals;
    out.energy = obj(best, nullptr, &out.det_residual, &finals);
    if (!(out.det_residual <= kDetResidualBudget))
        throw Error(ErrorKind::DetResidualExceeded, "flow determinant residual above 1e-6; increase flow_steps");
    if (!std::isfinite(out.energy)) throw Error(ErrorKind::OptimizerDiverged, "nonlinear energy is not finite");
    out.coefficients = best;
    auto& u = out.displacement;
    u.m = cfg.m;
    u.h = 1.0 / cfg.m;
    u.origin.fill(0.5 * u.h);
    u.values.resize(finals.size());
    for (std::size_t q = 0; q < finals.size(); ++q) {
        const auto y = obj.R * finals[q];
        for (int a = 0; a < N; ++a) u.values[q][a] = (y[a] - obj.centres[q][a]) / eps;
    }
    return out;
}

/// Least-squares slope of log|gap| against log ε over entries with |gap| > 1e-14.
inline double fitted_order(const std::vector<double>& eps, const std::vector<double>& gap) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < eps.size() && k < gap.size(); ++k)
        if (std::abs(gap[k]) > 1e-14) pts.emplace_back(std::log(eps[k]), std::log(std::abs(gap[k])));
    if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (const auto& [x, y] : pts) mx += x, my += y;
    mx /= pts.size(), my /= pts.size();
    double sxy = 0, sxx = 0;
    for (const auto& [x, y] : pts) sxy += (x - mx) * (y - my), sxx += (x - mx) * (x - mx);
    return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

/// F_rel once and F_ε for every ε in the ladder; up to `jobs` ladder entries
/// run concurrently (results do not depend on `jobs`).
template <int N>
EnergyReport<N> convergence_experiment(const ExperimentConfig<N>& cfg, int jobs = 1) {
    cfg.validate();
    EnergyReport<N> rep;
    rep.relaxed = minimize_F_rel(cfg);
    const std::size_t K = cfg.eps_list.size();
    rep.nonlinear.resize(K);
    std::vector<std::exception_ptr> errs(K);
    auto work = [&](std::size_t k) {
        try {
            rep.nonlinear[k] = minimize_F_eps(cfg, cfg.eps_list[k]);
        } catch (...) {
            errs[k] = std::current_exception();
        }
    };
    const std::size_t J = static_cast<std::size_t>(std::max(1, jobs));
    if (J == 1 || K <= 1) {
        for (std::size_t k = 0; k < K; ++k) work(k);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (std::size_t t = 0; t < std::min(J, K); ++t)
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < K; k = next++) work(k);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    for (std::size_t k = 0; k < K; ++k) rep.gap.push_back(rep.nonlinear[k].energy - rep.relaxed.energy);
    rep.order = fitted_order(cfg.eps_list, rep.gap);
    return rep;
}

}  // namespace iqclab
