#pragma once

// Numerical (incompressible) quasiconvexification on the unit cell.
//
// numerical_qc: nodal Q1 test field, zero on the boundary nodes.
// numerical_iqc: face field φ = curl ψ on the MAC grid, ψ zero on and next to
// the boundary, so the discrete divergence vanishes identically.
// Both minimize the cell average of density(X + ∇φ) with L-BFGS, best of a
// zero start and `restarts` seeded random starts.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "iqclab/densities.hpp"
#include "iqclab/divfree.hpp"
#include "iqclab/envelopes.hpp"
#include "iqclab/grid.hpp"
#include "iqclab/lbfgs.hpp"
#include "iqclab/matcore.hpp"
#include "iqclab/sampling.hpp"

namespace iqclab {

/// Density on the cell: value, and optionally an analytic gradient dF/dX.
/// Without `grad`, central differences with step 1e-7 are used.
template <int N>
struct CellDensity {
    std::function<double(const Matrix<N>&)> value;
    std::function<double(const Matrix<N>&, Matrix<N>&)> value_grad;

    double eval(const Matrix<N>& X, Matrix<N>* G) const {
        if (!G) return value(X);
        if (value_grad) return value_grad(X, *G);
        const double f = value(X);
        const double t = 1e-7;
        Matrix<N> Y = X;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const double a = Y(i, j);
                Y(i, j) = a + t;
                const double fp = value(Y);
                Y(i, j) = a - t;
                const double fm = value(Y);
                Y(i, j) = a;
                (*G)(i, j) = (fp - fm) / (2 * t);
            }
        return f;
    }
};

struct OptimizerOptions {
    int max_iters = 400;
    double gradient_tol = 1e-8;
    int restarts = 4;
    std::uint64_t seed = 0;
    int history = 10;
    /// Typical size of the displacement gradient in the random starts.
    double init_amplitude = 1.0;
};

/// Unconstrained test space for numerical_qc.
enum class TestSpace {
    Nodal,      // Q1 nodal field, zero boundary nodes
    Staggered,  // MAC face field, same support as the curl space of numerical_iqc
};

template <int N>
struct CellProblem {
    CellDensity<N> density;
    Matrix<N> base_point{};
    int m = 8;
    OptimizerOptions optimizer{};
    /// Potential support margin for numerical_iqc: 1 keeps ψ zero on and next to the boundary.
    int margin = 1;
    TestSpace space = TestSpace::Nodal;
};

template <int N>
struct CellProblemResult {
    double value = 0.0;
    double base_value = 0.0;  // density(X), the zero-field energy
    GridField<N> field;       // numerical_iqc: the minimizing face field
    NodeField<N> nodal;       // numerical_qc: the minimizing nodal field (values = φ)
    int iterations = 0;       // of the winning start
    int total_iterations = 0;
    int best_start = 0;       // 0 = zero field
    bool converged = false;
};

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

/// ‖X_sym‖², convex.
template <int N>
CellDensity<N> convex_sym_density() {
    CellDensity<N> d;
    d.value = [](const Matrix<N>& X) { return dot(sym_part(X), sym_part(X)); };
    d.value_grad = [](const Matrix<N>& X, Matrix<N>& G) {
        const auto S = sym_part(X);
        G = 2.0 * S;
        return dot(S, S);
    };
    return d;
}

/// min(‖X − U‖², ‖X + U‖²).
template <int N>
CellDensity<N> two_well_density(const Matrix<N>& U) {
    CellDensity<N> d;
    d.value_grad = [U](const Matrix<N>& X, Matrix<N>& G) {
        const Matrix<N> A = X - U, B = X + U;
        const double a = dot(A, A), b = dot(B, B);
        G = 2.0 * (a <= b ? A : B);
        return std::min(a, b);
    };
    d.value = [g = d.value_grad](const Matrix<N>& X) {
        Matrix<N> G;
        return g(X, G);
    };
    return d;
}

/// Nematic limit density V(Z) = 2Σ(λ_i − ρ_i)² evaluated on the symmetric
/// part; the trace is ignored, so use it on traceless arguments.
inline CellDensity<3> nematic_V_density(const std::array<double, 3>& rho) {
    CellDensity<3> d;
    d.value = [rho](const Matrix<3>& X) { return nematic_V_unchecked(rho, X); };
    d.value_grad = [rho](const Matrix<3>& X, Matrix<3>& G) { return nematic_V_grad(rho, X, G); };
    return d;
}

/// Closed-form iqc envelope as a density (used as a quasiconvex check case).
inline CellDensity<3> nematic_V_iqc_density(const std::array<double, 3>& rho) {
    CellDensity<3> d;
    d.value = [rho](const Matrix<3>& X) { return nematic_V_iqc_eval(rho, X).value.as_double(); };
    d.value_grad = [rho](const Matrix<3>& X, Matrix<3>& G) { return nematic_V_iqc_grad(rho, X, G); };
    return d;
}

/// X ↦ f(X_dev) + b·|tr X|^p.
template <int N>
CellDensity<N> penalized_density(const CellDensity<N>& f, double b, double p = 2.0) {
    if (!(b >= 0.0) || !(p >= 1.0)) throw Error(ErrorKind::InvalidArgument, "penalty needs b >= 0 and p >= 1");
    CellDensity<N> d;
    auto dev = [](const Matrix<N>& X, double& tr) {
        tr = 0.0;
        for (int i = 0; i < N; ++i) tr += X(i, i);
        Matrix<N> D = X;
        for (int i = 0; i < N; ++i) D(i, i) -= tr / N;
        return D;
    };
    d.value = [f, b, p, dev](const Matrix<N>& X) {
        double tr;
        const auto D = dev(X, tr);
        return f.value(D) + b * std::pow(std::abs(tr), p);
    };
    d.value_grad = [f, b, p, dev](const Matrix<N>& X, Matrix<N>& G) {
        double tr;
        const auto D = dev(X, tr);
        Matrix<N> Gd;
        const double v = f.eval(D, &Gd);
        double gtr = 0.0;
        for (int i = 0; i < N; ++i) gtr += Gd(i, i);
        G = Gd;
        const double dp = tr == 0.0 ? 0.0 : p * std::pow(std::abs(tr), p - 1) * (tr > 0 ? 1.0 : -1.0);
        for (int i = 0; i < N; ++i) G(i, i) += -gtr / N + b * dp;
        return v + b * std::pow(std::abs(tr), p);
    };
    return d;
}

// ---------------------------------------------------------------------------
// Discrete test-field spaces: dof vector θ → per-cell gradients and back
// ---------------------------------------------------------------------------

namespace detail {

/// Nodal Q1 space: φ_d at interior nodes; cell gradient = mean of the edge
/// differences along each axis (the Q1 gradient at the cell centre).
template <int N>
struct NodalSpace {
    int m;
    Lattice<N> nodes, cells;
    std::vector<std::size_t> interior;  // node index per interior dof (per component)
    std::vector<long> dof_of_node;      // −1 on the boundary

    explicit NodalSpace(int m_) : m(m_), nodes(node_lattice<N>(m_)), cells(cell_lattice<N>(m_)) {
        dof_of_node.assign(nodes.size(), -1);
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto i = nodes.unravel(k);
            bool inside = true;
            for (int a = 0; a < N; ++a) inside = inside && i[a] > 0 && i[a] < m;
            if (inside) {
                dof_of_node[k] = static_cast<long>(interior.size());
                interior.push_back(k);
            }
        }
    }
    std::size_t size() const { return interior.size() * N; }

    template <class Fn>
    void for_cell_corners(std::size_t cell, Fn&& fn) const {
        const auto i = cells.unravel(cell);
        for (int c = 0; c < (1 << N); ++c) {
            std::array<int, N> j = i;
            for (int a = 0; a < N; ++a) j[a] += (c >> a) & 1;
            fn(c, nodes.index(j));
        }
    }

    void apply(const std::vector<double>& th, std::vector<double>& g) const {
        g.assign(cells.size() * N * N, 0.0);
        const double w = static_cast<double>(m) / (1 << (N - 1));
        for (std::size_t cell = 0; cell < cells.size(); ++cell) {
            double* gc = &g[cell * N * N];
            for_cell_corners(cell, [&](int c, std::size_t node) {
                const long q = dof_of_node[node];
                if (q < 0) return;
                for (int a = 0; a < N; ++a) {
                    const double sgn = ((c >> a) & 1) ? w : -w;
                    for (int d = 0; d < N; ++d) gc[d * N + a] += sgn * th[q * N + d];
                }
            });
        }
    }

    void transpose(const std::vector<double>& gg, std::vector<double>& gth) const {
        gth.assign(size(), 0.0);
        const double w = static_cast<double>(m) / (1 << (N - 1));
        for (std::size_t cell = 0; cell < cells.size(); ++cell) {
            const double* gc = &gg[cell * N * N];
            for_cell_corners(cell, [&](int c, std::size_t node) {
                const long q = dof_of_node[node];
                if (q < 0) return;
                for (int a = 0; a < N; ++a) {
                    const double sgn = ((c >> a) & 1) ? w : -w;
                    for (int d = 0; d < N; ++d) gth[q * N + d] += sgn * gc[d * N + a];
                }
            });
        }
    }

    /// Random start of gradient size ~ amp.
    double init_scale() const { return 1.0 / m; }
};

/// Staggered space: free face values with the support of curl ψ for the
/// given margin k (normal index in [1+k, m−1−k], tangential in [k, m−1−k]).
template <int N>
struct FaceSpace {
    int m;
    std::array<std::vector<std::size_t>, N> free;
    mutable GridField<N> phi, gphi;

    FaceSpace(int m_, int margin) : m(m_) {
        phi = GridField<N>::zeros(m, true);
        gphi = GridField<N>::zeros(m, true);
        for (int d = 0; d < N; ++d) {
            const auto lat = face_lattice<N>(m, d);
            for (std::size_t k = 0; k < lat.size(); ++k) {
                const auto i = lat.unravel(k);
                bool ok = true;
                for (int a = 0; a < N; ++a) {
                    const int lo = a == d ? 1 + margin : margin;
                    ok = ok && i[a] >= lo && i[a] <= m - 1 - margin;
                }
                if (ok) free[d].push_back(k);
            }
        }
    }
    std::size_t size() const {
        std::size_t s = 0;
        for (const auto& f : free) s += f.size();
        return s;
    }
    const GridField<N>& field(const std::vector<double>& th) const {
        std::size_t q = 0;
        for (int d = 0; d < N; ++d) {
            std::fill(phi.comp[d].begin(), phi.comp[d].end(), 0.0);
            for (std::size_t k : free[d]) phi.comp[d][k] = th[q++];
        }
        return phi;
    }
    void apply(const std::vector<double>& th, std::vector<double>& g) const { cell_gradient_apply(field(th), g); }
    void transpose(const std::vector<double>& gg, std::vector<double>& gth) const {
        cell_gradient_transpose(gg, gphi);
        gth.resize(size());
        std::size_t q = 0;
        for (int d = 0; d < N; ++d)
            for (std::size_t k : free[d]) gth[q++] = gphi.comp[d][k];
    }
    double init_scale() const { return 1.0 / m; }
};

/// Curl space: free potential entries → φ = curl ψ → cell gradient.
template <int N>
struct CurlSpace {
    int m;
    PotentialLayout<N> pl;
    std::vector<std::size_t> free;
    mutable std::vector<double> psi, gpsi;
    mutable GridField<N> phi, gphi;

    CurlSpace(int m_, int margin) : m(m_), pl(m_), free(pl.free_indices(margin)) {
        psi.assign(pl.total, 0.0);
        phi = GridField<N>::zeros(m, true);
        gphi = GridField<N>::zeros(m, true);
    }
    /// Potential pinned only on the Dirichlet box faces; free faces get
    /// zero-normal-derivative ghosts in the cell gradient.
    CurlSpace(int m_, const std::array<bool, 2 * N>& dirichlet) : m(m_), pl(m_), free(pl.free_indices(dirichlet)) {
        psi.assign(pl.total, 0.0);
        phi = GridField<N>::zeros(m, true);
        phi.dirichlet = dirichlet;
        gphi = phi;
    }
    std::size_t size() const { return free.size(); }

    const GridField<N>& field(const std::vector<double>& th) const {
        std::fill(psi.begin(), psi.end(), 0.0);
        for (std::size_t k = 0; k < free.size(); ++k) psi[free[k]] = th[k];
        curl_apply(pl, psi.data(), phi);
        return phi;
    }
    void apply(const std::vector<double>& th, std::vector<double>& g) const {
        cell_gradient_apply(field(th), g);
    }
    void transpose(const std::vector<double>& gg, std::vector<double>& gth) const {
        cell_gradient_transpose(gg, gphi);
        gpsi.assign(pl.total, 0.0);
        curl_transpose(pl, gphi, gpsi.data());
        gth.resize(free.size());
        for (std::size_t k = 0; k < free.size(); ++k) gth[k] = gpsi[free[k]];
    }
    double init_scale() const { return 1.0 / (static_cast<double>(m) * m); }
};

/// Extra energy term ⟨coef, θ⟩ + constant (loads).
struct LinearTerm {
    std::vector<double> coef;
    double constant = 0.0;
};

template <int N, class Space>
CellProblemResult<N> solve_cell(const CellProblem<N>& p, const Space& space, std::vector<double>& best,
                                const std::vector<std::vector<double>>& extra_starts = {},
                                const LinearTerm* linear = nullptr) {
    if (p.m < 4) throw Error(ErrorKind::InvalidArgument, "cell problem needs m >= 4");
    if (!p.density.value) throw Error(ErrorKind::InvalidArgument, "cell problem needs a density");
    const auto cells = cell_lattice<N>(p.m).size();
    const double inv_cells = 1.0 / static_cast<double>(cells);
    const Matrix<N> X = p.base_point;

    std::vector<double> G, GG;
    Objective fg = [&](const std::vector<double>& th, std::vector<double>& gth) {
        space.apply(th, G);
        GG.assign(G.size(), 0.0);
        double total = 0.0;
        Matrix<N> Y, D;
        for (std::size_t c = 0; c < cells; ++c) {
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) Y(i, j) = X(i, j) + G[c * N * N + i * N + j];
            const double v = p.density.eval(Y, &D);
            if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
            total += v;
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) GG[c * N * N + i * N + j] = D(i, j) * inv_cells;
        }
        space.transpose(GG, gth);
        total *= inv_cells;
        if (linear) {
            total += linear->constant;
            for (std::size_t k = 0; k < th.size(); ++k) {
                total += linear->coef[k] * th[k];
                gth[k] += linear->coef[k];
            }
        }
        return total;
    };

    CellProblemResult<N> res;
    res.base_value = p.density.value(X) + (linear ? linear->constant : 0.0);
    if (!std::isfinite(res.base_value)) throw Error(ErrorKind::NonFiniteEnergy, "density is not finite at the base point");

    LbfgsOptions lo;
    lo.max_iters = p.optimizer.max_iters;
    lo.gradient_tol = p.optimizer.gradient_tol;
    lo.history = p.optimizer.history;

    Rng rng(p.optimizer.seed);
    best.clear();
    double best_f = std::numeric_limits<double>::infinity();
    const int starts = p.optimizer.restarts + 1 + static_cast<int>(extra_starts.size());
    for (int s = 0; s < starts; ++s) {
        std::vector<double> th(space.size(), 0.0);
        if (s > p.optimizer.restarts) {
            th = extra_starts[s - p.optimizer.restarts - 1];
        } else if (s > 0) {
            const double a = p.optimizer.init_amplitude * space.init_scale();
            for (auto& v : th) v = a * rng.normal();
        }
        std::vector<double> g0(space.size());
        if (s > 0 && !std::isfinite(fg(th, g0))) continue;  // skip starts outside the finite domain
        const auto r = lbfgs_minimize(fg, th, lo);
        res.total_iterations += r.iterations;
        if (r.f < best_f) {
            best_f = r.f;
            best = r.x;
            res.iterations = r.iterations;
            res.converged = r.converged;
            res.best_start = s;
        }
    }
    // the zero field is admissible, so the optimum never exceeds density(X)
    if (!(best_f <= res.base_value)) {
        best_f = res.base_value;
        best.assign(space.size(), 0.0);
        res.best_start = 0;
    }
    res.value = best_f;
    return res;
}

}  // namespace detail

template <int N>
CellProblemResult<N> numerical_qc(const CellProblem<N>& p) {
    std::vector<double> th;
    if (p.space == TestSpace::Staggered) {
        if (p.margin < 0 || 2 * p.margin + 2 > p.m) throw Error(ErrorKind::InvalidArgument, "support margin too large for the grid");
        const detail::FaceSpace<N> space(p.m, p.margin);
        auto res = detail::solve_cell(p, space, th);
        res.field = space.field(th);
        return res;
    }
    const detail::NodalSpace<N> space(p.m);
    auto res = detail::solve_cell(p, space, th);
    auto& nf = res.nodal;
    nf.m = p.m;
    nf.h = 1.0 / p.m;
    nf.values.assign(space.nodes.size(), {});
    for (std::size_t q = 0; q < space.interior.size(); ++q)
        for (int d = 0; d < N; ++d) nf.values[space.interior[q]][d] = th[q * N + d];
    return res;
}

template <int N>
CellProblemResult<N> numerical_iqc(const CellProblem<N>& p) {
    double tr = 0.0;
    for (int i = 0; i < N; ++i) tr += p.base_point(i, i);
    if (std::abs(tr) > kTraceTol) throw Error(ErrorKind::InvalidArgument, "numerical_iqc needs a traceless base point");
    if (p.margin < 0 || 2 * p.margin + 2 > p.m) throw Error(ErrorKind::InvalidArgument, "support margin too large for the grid");
    const detail::CurlSpace<N> space(p.m, p.margin);
    std::vector<double> th;
    auto res = detail::solve_cell(p, space, th);
    res.field = space.field(th);
    return res;
}

struct LadderRow {
    double b = 0.0;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {
template <int N, class Space>
std::vector<LadderRow> run_ladder(const CellDensity<N>& f_dev, const Matrix<N>& X, const std::vector<double>& b_list,
                                  int m, const OptimizerOptions& opt, double p, const Space& space) {
    const std::size_t J = b_list.size();
    std::vector<LadderRow> rows(J);
    std::vector<std::vector<double>> theta(J);
    std::vector<CellProblem<N>> probs(J);
    for (std::size_t j = 0; j < J; ++j) {
        probs[j].density = penalized_density(f_dev, b_list[j], p);
        probs[j].base_point = X;
        probs[j].m = m;
        probs[j].optimizer = opt;
        std::vector<std::vector<double>> extra;
        if (j > 0) extra.push_back(theta[j - 1]);
        const auto r = solve_cell(probs[j], space, theta[j], extra);
        rows[j] = {b_list[j], r.value, r.iterations, r.converged};
    }
    // The exact rung minima are ordered (f_j ≤ f_{j+1} pointwise), so a later
    // optimum is a valid start for an earlier rung; sweep back to use it.
    for (std::size_t j = J - 1; j-- > 0;) {
        auto cp = probs[j];
        cp.optimizer.restarts = 0;
        std::vector<double> th;
        const auto r = solve_cell(cp, space, th, {theta[j + 1]});
        if (r.value < rows[j].value) {
            rows[j] = {b_list[j], r.value, r.iterations, r.converged};
            theta[j] = std::move(th);
        }
    }
    return rows;
}
}  // namespace detail

/// numerical_qc of X ↦ f(X_dev) + b_j|tr X|^p for each b_j. Each rung also
/// starts from its neighbours' optima.
template <int N>
std::vector<LadderRow> penalized_iqc(const CellDensity<N>& f_dev, const Matrix<N>& X, const std::vector<double>& b_list,
                                     int m, const OptimizerOptions& opt = {}, double p = 2.0,
                                     TestSpace space = TestSpace::Staggered, int margin = 1) {
    if (b_list.empty()) throw Error(ErrorKind::InvalidArgument, "b_list must not be empty");
    for (std::size_t j = 0; j < b_list.size(); ++j) {
        if (!(b_list[j] >= 1.0)) throw Error(ErrorKind::InvalidArgument, "penalty weights must be >= 1");
        if (j > 0 && !(b_list[j] > b_list[j - 1])) throw Error(ErrorKind::InvalidArgument, "b_list must be strictly increasing");
    }
    if (m < 4) throw Error(ErrorKind::InvalidArgument, "cell problem needs m >= 4");
    if (space == TestSpace::Nodal) return detail::run_ladder(f_dev, X, b_list, m, opt, p, detail::NodalSpace<N>(m));
    if (margin < 0 || 2 * margin + 2 > m) throw Error(ErrorKind::InvalidArgument, "support margin too large for the grid");
    return detail::run_ladder(f_dev, X, b_list, m, opt, p, detail::FaceSpace<N>(m, margin));
}

}  // namespace iqclab
