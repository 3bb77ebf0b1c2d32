#pragma once

// Solenoidal fields: Bogovskii-type correction by a Neumann Poisson solve,
// random curl fields, solenoidal extension to a larger box, and the
// volume-preserving flow map.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <type_traits>
#include <vector>

#include "iqclab/grid.hpp"
#include "iqclab/matcore.hpp"
#include "iqclab/sampling.hpp"

namespace iqclab {

inline constexpr double kMeanDivTol = 1e-10;

// ---------------------------------------------------------------------------
// Neumann Poisson on a set of active cells
// ---------------------------------------------------------------------------

namespace detail {

/// −div(G p) on the active cells, where G p lives on faces joining two
/// active cells and vanishes on every other face.
template <int N>
struct CellLaplacian {
    Lattice<N> cells;
    double h;
    const std::vector<char>& active;

    void apply(const std::vector<double>& p, std::vector<double>& out) const {
        out.assign(p.size(), 0.0);
        const double ih2 = 1.0 / (h * h);
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (!active[k]) continue;
            const auto c = cells.unravel(k);
            double acc = 0.0;
            for (int a = 0; a < N; ++a) {
                const std::size_t s = cells.stride(a);
                if (c[a] + 1 < cells.dims[a] && active[k + s]) acc += p[k] - p[k + s];
                if (c[a] > 0 && active[k - s]) acc += p[k] - p[k - s];
            }
            out[k] = acc * ih2;
        }
    }
};

struct CgReport {
    int iterations = 0;
    double residual = 0.0;
};

/// CG for −Δ_h p = b on the active cells, b projected to zero mean first.
template <int N>
CgReport solve_neumann(const CellLaplacian<N>& lap, std::vector<double> b, std::vector<double>& p,
                       double rel_tol = 1e-13, int max_iter = 0) {
    const std::size_t n = b.size();
    double mean = 0.0;
    std::size_t cnt = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (lap.active[k]) mean += b[k], ++cnt;
    mean /= std::max<std::size_t>(cnt, 1);
    for (std::size_t k = 0; k < n; ++k) b[k] = lap.active[k] ? b[k] - mean : 0.0;

    p.assign(n, 0.0);
    auto dotp = [&](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += x[k] * y[k];
        return s;
    };
    std::vector<double> r = b, d = b, q;
    double rr = dotp(r, r);
    const double bnorm = std::sqrt(rr);
    CgReport rep;
    if (bnorm == 0.0) return rep;
    if (max_iter <= 0) max_iter = static_cast<int>(10 * n + 100);
    while (rep.iterations < max_iter && std::sqrt(rr) > rel_tol * bnorm) {
        lap.apply(d, q);
        const double alpha = rr / dotp(d, q);
        for (std::size_t k = 0; k < n; ++k) {
            p[k] += alpha * d[k];
            r[k] -= alpha * q[k];
        }
        const double rr_new = dotp(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < n; ++k) d[k] = r[k] + beta * d[k];
        ++rep.iterations;
    }
    rep.residual = std::sqrt(rr);
    return rep;
}

/// f − G p on faces joining active cells.
template <int N>
void subtract_gradient(GridField<N>& f, const std::vector<double>& p, const std::vector<char>& active) {
    const auto cells = cell_lattice<N>(f.m);
    for (int d = 0; d < N; ++d) {
        const auto lat = f.lattice(d);
        const std::size_t sc = cells.stride(d);
        for (std::size_t k = 0; k < lat.size(); ++k) {
            const auto i = lat.unravel(k);
            if (i[d] == 0 || i[d] == f.m) continue;
            const std::size_t hi = cells.index(i), lo = hi - sc;
            if (active[hi] && active[lo]) f.comp[d][k] -= (p[hi] - p[lo]) / f.h;
        }
    }
}

}  // namespace detail

struct BogovskiiResult {
    double max_div = 0.0;         // max |div g|
    double correction_norm = 0.0; // ‖g − f‖
    double div_norm = 0.0;        // ‖div f‖
    double constant = 0.0;        // correction_norm / div_norm (0 if div f = 0)
    int cg_iterations = 0;
};

/// g = f − ∇p with −Δp = −div f (homogeneous Neumann), masked faces zeroed.
template <int N>
GridField<N> bogovskii_correct(const GridField<N>& f, BogovskiiResult* report = nullptr) {
    if (!f.layout_ok()) throw Error(ErrorKind::DimensionMismatch, "component arrays do not match the MAC layout");
    GridField<N> g = f;
    g.apply_mask();
    auto div = discrete_div(g);
    GridField<N> f_free = f;
    f_free.dirichlet.fill(false);
    const double mean = discrete_div(f_free).sum_weighted();
    if (std::abs(mean) > kMeanDivTol)
        throw Error(ErrorKind::NonZeroMeanDivergence, "integral of div f is " + std::to_string(mean));

    const auto cells = cell_lattice<N>(f.m);
    std::vector<char> active(cells.size(), 1);
    detail::CellLaplacian<N> lap{cells, f.h, active};
    std::vector<double> p;
    std::vector<double> rhs = div.values;
    for (auto& v : rhs) v = -v;
    const auto rep = detail::solve_neumann(lap, rhs, p);
    detail::subtract_gradient(g, p, active);

    if (report) {
        GridField<N> diff = g;
        for (int d = 0; d < N; ++d)
            for (std::size_t k = 0; k < diff.comp[d].size(); ++k) diff.comp[d][k] -= f.comp[d][k];
        report->max_div = discrete_div(g).max_abs();
        report->correction_norm = diff.norm();
        report->div_norm = discrete_div(f_free).norm();
        report->constant = report->div_norm > 0 ? report->correction_norm / report->div_norm : 0.0;
        report->cg_iterations = rep.iterations;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Smooth band-limited potentials
// ---------------------------------------------------------------------------

/// A(x) = Σ_k a_k Π_i β(x_i) cos(π k_i x_i + θ_{i,k_i}) per component, with a
/// polynomial bump β supported in [margin, 1 − margin]; n = 3 uses a vector
/// potential, n = 2 a stream function.
template <int N>
class SmoothPotential {
public:
    static constexpr int kComps = (N == 3 ? 3 : 1);
    static constexpr int kPower = 6;

    SmoothPotential(double smoothness, std::uint64_t seed, double margin, int modes = 4)
        : modes_(modes), lo_(margin), hi_(1.0 - margin) {
        if (!(margin >= 0.0 && margin < 0.5)) throw Error(ErrorKind::InvalidArgument, "margin must lie in [0, 0.5)");
        if (modes < 1) throw Error(ErrorKind::InvalidArgument, "need at least one mode");
        Rng rng(seed);
        int total = 1;
        for (int i = 0; i < N; ++i) total *= modes;
        for (int c = 0; c < kComps; ++c) {
            amp_[c].resize(total);
            for (int k = 0; k < total; ++k) {
                double k2 = 0.0;
                int r = k;
                for (int i = 0; i < N; ++i) {
                    const int ki = r % modes + 1;
                    r /= modes;
                    k2 += ki * ki;
                }
                amp_[c][k] = rng.normal() * std::pow(k2, -0.5 * smoothness);
            }
            for (int i = 0; i < N; ++i) {
                phase_[c][i].resize(modes);
                for (auto& t : phase_[c][i]) t = rng.uniform(0.0, 2.0 * std::numbers::pi);
            }
        }
    }

    void set_scale(double s) { scale_ = s; }
    double scale() const { return scale_; }

    struct Jet {
        std::array<double, kComps> v{};
        std::array<std::array<double, N>, kComps> g{};
        std::array<Matrix<N>, kComps> hess{};
    };

    /// Value, gradient and Hessian of every component (scale applied).
    Jet jet(const std::array<double, N>& x) const {
        Jet out;
        for (int i = 0; i < N; ++i)
            if (x[i] <= lo_ || x[i] >= hi_) return out;
        std::array<double, 3> bump[N];
        for (int i = 0; i < N; ++i) bump[i] = bump_jet(x[i]);
        for (int c = 0; c < kComps; ++c) {
            // 1-D factors f(t) = β(t) cos(πkt + θ) and two derivatives.
            std::vector<std::array<double, 3>> fac[N];
            for (int i = 0; i < N; ++i) {
                fac[i].resize(modes_);
                for (int k = 0; k < modes_; ++k) {
                    const double w = std::numbers::pi * (k + 1);
                    const double arg = w * x[i] + phase_[c][i][k];
                    const double co = std::cos(arg), si = std::sin(arg);
                    const auto& b = bump[i];
                    fac[i][k] = {b[0] * co, b[1] * co - b[0] * w * si,
                                 b[2] * co - 2.0 * b[1] * w * si - b[0] * w * w * co};
                }
            }
            const int total = static_cast<int>(amp_[c].size());
            for (int k = 0; k < total; ++k) {
                std::array<int, N> ki{};
                int r = k;
                for (int i = 0; i < N; ++i) {
                    ki[i] = r % modes_;
                    r /= modes_;
                }
                const double a = amp_[c][k] * scale_;
                std::array<std::array<double, 3>, N> f{};
                for (int i = 0; i < N; ++i) f[i] = fac[i][ki[i]];
                double prod = a;
                for (int i = 0; i < N; ++i) prod *= f[i][0];
                out.v[c] += prod;
                for (int j = 0; j < N; ++j) {
                    double gj = a;
                    for (int i = 0; i < N; ++i) gj *= (i == j ? f[i][1] : f[i][0]);
                    out.g[c][j] += gj;
                    for (int l = j; l < N; ++l) {
                        double hjl = a;
                        for (int i = 0; i < N; ++i) {
                            const int order = (i == j) + (i == l);
                            hjl *= f[i][order];
                        }
                        out.hess[c](j, l) += hjl;
                        if (l != j) out.hess[c](l, j) += hjl;
                    }
                }
            }
        }
        return out;
    }

    /// Value of the potential entry component `c` at x.
    double value(int c, const std::array<double, N>& x) const { return jet(x).v[c]; }

    /// curl A and its Jacobian.
    void curl(const std::array<double, N>& x, std::array<double, N>& u, Matrix<N>* jac) const {
        const Jet j = jet(x);
        if constexpr (N == 3) {
            for (int d = 0; d < 3; ++d) {
                const int a = (d + 1) % 3, b = (d + 2) % 3;
                u[d] = j.g[b][a] - j.g[a][b];
                if (jac)
                    for (int k = 0; k < 3; ++k) (*jac)(d, k) = j.hess[b](a, k) - j.hess[a](b, k);
            }
        } else {
            u[0] = j.g[0][1];
            u[1] = -j.g[0][0];
            if (jac)
                for (int k = 0; k < 2; ++k) {
                    (*jac)(0, k) = j.hess[0](1, k);
                    (*jac)(1, k) = -j.hess[0](0, k);
                }
        }
    }

    double support_lo() const { return lo_; }
    double support_hi() const { return hi_; }

private:
    std::array<double, 3> bump_jet(double t) const {
        const double L = hi_ - lo_;
        const double q = 4.0 * (t - lo_) * (hi_ - t) / (L * L);
        const double q1 = 4.0 * (hi_ + lo_ - 2.0 * t) / (L * L);
        const double q2 = -8.0 / (L * L);
        const double P = kPower;
        const double qp2 = std::pow(q, P - 2);
        return {qp2 * q * q, P * qp2 * q * q1, P * (P - 1) * qp2 * q1 * q1 + P * qp2 * q * q2};
    }

    int modes_;
    double lo_, hi_;
    double scale_ = 1.0;
    std::array<std::vector<double>, kComps> amp_;
    std::array<std::array<std::vector<double>, N>, kComps> phase_;
};

/// Samples a smooth potential at the potential lattice of a unit-box grid.
template <int N>
Potential<N> sample_potential(const SmoothPotential<N>& sp, int m) {
    const PotentialLayout<N> pl(m);
    Potential<N> psi{m, std::vector<double>(pl.total, 0.0)};
    const double h = 1.0 / m;
    for (int p = 0; p < PotentialLayout<N>::num_parts(); ++p) {
        const auto& lat = pl.parts[p];
        for (std::size_t k = 0; k < lat.size(); ++k) {
            const auto i = lat.unravel(k);
            std::array<double, N> x{};
            for (int a = 0; a < N; ++a) x[a] = h * (i[a] + ((N == 3 && a == p) ? 0.5 : 0.0));
            psi.values[pl.offsets[p] + k] = sp.value(p, x);
        }
    }
    return psi;
}

/// A random smooth solenoidal field: its discrete curl samples on the MAC
/// grid and the analytic curl used for flows share one potential.
template <int N>
struct SolenoidalSample {
    SmoothPotential<N> potential;
    GridField<N> field;
};

/// Discrete curl of a band-limited random potential vanishing within 2h of
/// the boundary, scaled so that the largest face value is 1.
template <int N>
SolenoidalSample<N> random_solenoidal_sample(int m, double smoothness, std::uint64_t seed, int modes = 4) {
    if (m < 4) throw Error(ErrorKind::InvalidArgument, "m must be at least 4");
    SmoothPotential<N> sp(smoothness, seed, 2.0 / m, modes);
    GridField<N> f = discrete_curl(sample_potential(sp, m));
    double mx = 0.0;
    for (const auto& c : f.comp)
        for (double v : c) mx = std::max(mx, std::abs(v));
    if (mx > 0.0) {
        sp.set_scale(1.0 / mx);
        f = discrete_curl(sample_potential(sp, m));
    }
    return {std::move(sp), std::move(f)};
}

template <int N>
GridField<N> random_solenoidal(int m, double smoothness, std::uint64_t seed) {
    return random_solenoidal_sample<N>(m, smoothness, seed).field;
}

// ---------------------------------------------------------------------------
// Solenoidal extension
// ---------------------------------------------------------------------------

/// Zero-extends f from its box Ω to a concentric box with outer_m cells of
/// the same spacing, then corrects the divergence on the annulus only.
template <int N>
GridField<N> extend_solenoidal(const GridField<N>& f, int outer_m, BogovskiiResult* report = nullptr) {
    if (!f.layout_ok()) throw Error(ErrorKind::DimensionMismatch, "component arrays do not match the MAC layout");
    if (outer_m <= f.m || (outer_m - f.m) % 2 != 0)
        throw Error(ErrorKind::InvalidArgument, "outer_m must exceed m by a positive even number");
    GridField<N> free_f = f;
    free_f.dirichlet.fill(false);
    const auto div_in = discrete_div(free_f);
    if (div_in.max_abs() > 1e-8) throw Error(ErrorKind::InvalidArgument, "input field is not solenoidal");
    if (std::abs(div_in.sum_weighted()) > kMeanDivTol)
        throw Error(ErrorKind::NonZeroMeanDivergence, "net boundary flux of the input field is nonzero");

    const int k = (outer_m - f.m) / 2;
    GridField<N> g;
    g.m = outer_m;
    g.h = f.h;
    for (int a = 0; a < N; ++a) g.origin[a] = f.origin[a] - k * f.h;
    g.dirichlet.fill(true);
    for (int d = 0; d < N; ++d) {
        const auto outer = g.lattice(d), inner = f.lattice(d);
        g.comp[d].assign(outer.size(), 0.0);
        for (std::size_t j = 0; j < inner.size(); ++j) {
            auto i = inner.unravel(j);
            for (auto& v : i) v += k;
            g.comp[d][outer.index(i)] = f.comp[d][j];
        }
    }
    const auto cells = cell_lattice<N>(outer_m);
    std::vector<char> active(cells.size(), 0);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto i = cells.unravel(c);
        bool inside = true;
        for (int a = 0; a < N; ++a) inside = inside && i[a] >= k && i[a] < k + f.m;
        active[c] = !inside;
    }
    auto div = discrete_div(g);
    std::vector<double> rhs(cells.size(), 0.0);
    double maxr = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c)
        if (active[c]) {
            rhs[c] = -div.values[c];
            maxr = std::max(maxr, std::abs(rhs[c]));
        }
    detail::CgReport rep;
    if (maxr > 0.0) {
        detail::CellLaplacian<N> lap{cells, g.h, active};
        std::vector<double> p;
        rep = detail::solve_neumann(lap, rhs, p);
        detail::subtract_gradient(g, p, active);
    }
    if (report) {
        report->max_div = discrete_div(g).max_abs();
        report->cg_iterations = rep.iterations;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Velocity fields and the flow map
// ---------------------------------------------------------------------------

template <int N>
class VelocityField {
public:
    virtual ~VelocityField() = default;
    /// u(x) and, if requested, ∇u(x).
    virtual void eval(const std::array<double, N>& x, std::array<double, N>& u, Matrix<N>* jac) const = 0;
    /// Trajectories must stay inside the box when bounded.
    virtual bool bounded() const { return false; }
    virtual std::array<double, N> box_lo() const { return {}; }
    virtual std::array<double, N> box_hi() const {
        std::array<double, N> r;
        r.fill(1.0);
        return r;
    }
};

/// Analytic velocity and Jacobian supplied as callables.
template <int N>
class FunctionVelocity : public VelocityField<N> {
public:
    using Fn = std::function<void(const std::array<double, N>&, std::array<double, N>&, Matrix<N>*)>;
    explicit FunctionVelocity(Fn fn) : fn_(std::move(fn)) {}
    void eval(const std::array<double, N>& x, std::array<double, N>& u, Matrix<N>* jac) const override {
        fn_(x, u, jac);
    }

private:
    Fn fn_;
};

/// Analytic curl of a smooth potential.
template <int N>
class SmoothCurlVelocity : public VelocityField<N> {
public:
    explicit SmoothCurlVelocity(const SmoothPotential<N>& sp) : sp_(sp) {}
    void eval(const std::array<double, N>& x, std::array<double, N>& u, Matrix<N>* jac) const override {
        if (jac) *jac = Matrix<N>();
        u.fill(0.0);
        sp_.curl(x, u, jac);
    }
    bool bounded() const override { return true; }

private:
    const SmoothPotential<N>& sp_;
};

/// Component-wise multilinear interpolation of a MAC field, zero outside the
/// box; tangential ghost values across box faces are reflected (−φ).
template <int N>
class MacInterpolant : public VelocityField<N> {
public:
    explicit MacInterpolant(const GridField<N>& f) : f_(f) { f_.validate(); }

    void eval(const std::array<double, N>& x, std::array<double, N>& u, Matrix<N>* jac) const override {
        u.fill(0.0);
        if (jac) *jac = Matrix<N>();
        for (int a = 0; a < N; ++a) {
            const double t = (x[a] - f_.origin[a]) / f_.h;
            if (t < 0.0 || t > f_.m) return;
        }
        for (int d = 0; d < N; ++d) {
            const auto lat = f_.lattice(d);
            std::array<int, N> base{};
            std::array<double, N> w{};
            for (int a = 0; a < N; ++a) {
                double s = (x[a] - f_.origin[a]) / f_.h - (a == d ? 0.0 : 0.5);
                const int top = lat.dims[a] - 1;
                int b = static_cast<int>(std::floor(s));
                if (a == d) b = std::clamp(b, 0, top - 1);
                else b = std::clamp(b, -1, top);
                base[a] = b;
                w[a] = s - b;
            }
            double val = 0.0;
            std::array<double, N> grad{};
            for (int corner = 0; corner < (1 << N); ++corner) {
                std::array<int, N> i{};
                double wt = 1.0;
                std::array<double, N> dw{};
                dw.fill(1.0);
                for (int a = 0; a < N; ++a) {
                    const int bit = (corner >> a) & 1;
                    i[a] = base[a] + bit;
                    const double wa = bit ? w[a] : 1.0 - w[a];
                    const double da = (bit ? 1.0 : -1.0) / f_.h;
                    for (int b = 0; b < N; ++b) dw[b] *= (a == b ? da : wa);
                    wt *= wa;
                }
                const double v = sample(d, lat, i);
                val += wt * v;
                for (int b = 0; b < N; ++b) grad[b] += dw[b] * v;
            }
            u[d] = val;
            if (jac)
                for (int b = 0; b < N; ++b) (*jac)(d, b) = grad[b];
        }
    }

    bool bounded() const override { return true; }
    std::array<double, N> box_lo() const override { return f_.origin; }
    std::array<double, N> box_hi() const override {
        std::array<double, N> r;
        for (int a = 0; a < N; ++a) r[a] = f_.origin[a] + f_.m * f_.h;
        return r;
    }

private:
    double sample(int d, const Lattice<N>& lat, std::array<int, N> i) const {
        double sign = 1.0;
        for (int a = 0; a < N; ++a) {
            if (a == d) continue;
            if (i[a] < 0) i[a] = 0, sign = -sign;
            else if (i[a] >= lat.dims[a]) i[a] = lat.dims[a] - 1, sign = -sign;
        }
        return sign * f_.comp[d][lat.index(i)];
    }

    GridField<N> f_;
};

/// Node-sampled vector field on origin + h·{0..m}^n.
template <int N>
struct NodeField {
    int m = 0;
    double h = 0.0;
    std::array<double, N> origin{};
    std::vector<std::array<double, N>> values;
};

template <int N>
struct FlowResult {
    NodeField<N> displacement_map;  // y(ε, x) − x
    NodeField<N> u_eps;             // (y − x)/ε
    std::vector<Matrix<N>> jacobian;
    double det_residual = 0.0;      // max |det ∇y − 1|
};

namespace detail {
template <int N>
void check_inside(const VelocityField<N>& u, const std::type_identity_t<std::array<double, N>>& x) {
    if (!u.bounded()) return;
    const auto lo = u.box_lo(), hi = u.box_hi();
    for (int a = 0; a < N; ++a)
        if (x[a] < lo[a] - 1e-12 || x[a] > hi[a] + 1e-12)
            throw Error(ErrorKind::StepOutOfDomain, "trajectory left the interpolation box");
}
}  // namespace detail

/// Classical RK4 for y' = u(y) together with the variational equation
/// J' = ∇u(y) J, so J is the exact Jacobian of the discrete flow map.
template <int N>
void flow_point(const VelocityField<N>& u, std::type_identity_t<std::array<double, N>>& x, Matrix<N>& J, double t,
                int steps) {
    const double dt = t / steps;
    std::array<double, N> k[4], xs;
    Matrix<N> K[4], g, Js;
    for (int s = 0; s < steps; ++s) {
        for (int st = 0; st < 4; ++st) {
            const double c = (st == 0) ? 0.0 : (st == 3 ? 1.0 : 0.5);
            xs = x;
            Js = J;
            if (st > 0) {
                for (int a = 0; a < N; ++a) xs[a] += c * dt * k[st - 1][a];
                Js += (c * dt) * K[st - 1];
            }
            detail::check_inside(u, xs);
            u.eval(xs, k[st], &g);
            K[st] = g * Js;
        }
        for (int a = 0; a < N; ++a) x[a] += dt / 6.0 * (k[0][a] + 2.0 * k[1][a] + 2.0 * k[2][a] + k[3][a]);
        J += (dt / 6.0) * (K[0] + 2.0 * K[1] + 2.0 * K[2] + K[3]);
    }
}

/// Flow from t = 0 to t = ε at every node of an m-cell grid on the box of u.
template <int N>
FlowResult<N> flow_map(const VelocityField<N>& u, int m, double eps, int steps) {
    if (steps < 4) throw Error(ErrorKind::InvalidArgument, "steps must be at least 4");
    if (m < 1) throw Error(ErrorKind::InvalidArgument, "m must be positive");
    const auto lo = u.box_lo(), hi = u.box_hi();
    const auto nodes = node_lattice<N>(m);
    FlowResult<N> r;
    NodeField<N> base{m, 0.0, lo, {}};
    base.h = (hi[0] - lo[0]) / m;
    r.displacement_map = base;
    r.u_eps = base;
    r.displacement_map.values.resize(nodes.size());
    r.u_eps.values.resize(nodes.size());
    r.jacobian.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto i = nodes.unravel(k);
        std::array<double, N> x0{}, x;
        for (int a = 0; a < N; ++a) x0[a] = lo[a] + (hi[a] - lo[a]) * i[a] / m;
        x = x0;
        Matrix<N> J = Matrix<N>::identity();
        detail::check_inside(u, x);
        flow_point(u, x, J, eps, steps);
        for (int a = 0; a < N; ++a) {
            r.displacement_map.values[k][a] = x[a] - x0[a];
            r.u_eps.values[k][a] = (x[a] - x0[a]) / eps;
        }
        r.jacobian[k] = J;
        r.det_residual = std::max(r.det_residual, std::abs(J.det() - 1.0));
    }
    return r;
}

}  // namespace iqclab
