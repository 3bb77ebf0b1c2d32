#pragma once

// Nonlinear stored-energy densities W_ε, their exponential rescalings
// V_ε(Z) = ε^{-p} W_ε(e^{εZ}) and the limiting linearized densities V for
// the single-well, multiwell and nematic-elastomer models.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "iqclab/matcore.hpp"
#include "iqclab/sampling.hpp"

namespace iqclab {

/// Non-negative-ish energy value or +∞ (deformation gradients off SL(n),
/// linear strains off the traceless matrices).
class ExtendedEnergy {
public:
    static ExtendedEnergy finite(double v) { return ExtendedEnergy(v, false); }
    static ExtendedEnergy infinite() { return ExtendedEnergy(0.0, true); }

    bool is_finite() const { return !infinite_; }
    bool is_infinite() const { return infinite_; }

    double value() const {
        if (infinite_) throw Error(ErrorKind::NonFiniteEnergy, "value() on an infinite energy");
        return v_;
    }

    /// +∞ maps to std::numeric_limits<double>::infinity().
    double as_double() const { return infinite_ ? std::numeric_limits<double>::infinity() : v_; }

    friend bool operator==(const ExtendedEnergy&, const ExtendedEnergy&) = default;

private:
    ExtendedEnergy(double v, bool inf) : v_(v), infinite_(inf) {}
    double v_;
    bool infinite_;
};

inline constexpr double kDetTol = 1e-9;
inline constexpr double kTraceTol = 1e-9;

template <int N>
inline bool in_SL(const Matrix<N>& x) {
    return std::abs(x.det() - 1.0) <= kDetTol;
}

template <int N>
inline bool traceless_for_V(const Matrix<N>& z) {
    return std::abs(z.trace()) <= kTraceTol * (1.0 + norm(z));
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

template <int N>
struct SingleWell {
    /// W on all matrices; must return Infinite off SL(n).
    std::function<ExtendedEnergy(const Matrix<N>&)> W;
    /// Optional ∂W/∂X on SL(n), used by the energy minimizers.
    std::function<Matrix<N>(const Matrix<N>&)> dW;
    /// Optional closed-form Hessian quadratic form Q on ils matrices.
    std::function<double(const Matrix<N>&)> Q;
    /// Use the finite-difference Hessian when Q is absent.
    bool fd_fallback = false;
    std::string builtin;
};

template <int N>
struct Well {
    Matrix<N> a;  // SPD, acts by left multiplication
    Matrix<N> U;  // symmetric traceless
    double w = 0.0;
};

template <int N>
struct MultiWell {
    std::vector<Well<N>> wells;
};

struct Nematic {
    std::array<double, 3> rho{};
    /// ε ↦ ρ(ε); empty means the constant path ρ(ε) = ρ.
    std::function<std::array<double, 3>(double)> rho_path;
};

template <int N>
struct DensityModel {
    std::variant<SingleWell<N>, MultiWell<N>, Nematic> kind;
    double p = 2.0;

    bool is_nematic() const { return std::holds_alternative<Nematic>(kind); }
    bool is_multiwell() const { return std::holds_alternative<MultiWell<N>>(kind); }
    bool is_singlewell() const { return std::holds_alternative<SingleWell<N>>(kind); }
};

namespace detail {
inline void check_rho(const std::array<double, 3>& rho) {
    if (!(rho[0] <= rho[1] && rho[1] <= rho[2]))
        throw Error(ErrorKind::InvalidArgument, "rho must be sorted ascending");
    if (std::abs(rho[0] + rho[1] + rho[2]) > 1e-12)
        throw Error(ErrorKind::InvalidArgument, "rho must sum to zero");
}
}  // namespace detail

inline DensityModel<3> make_nematic(const std::array<double, 3>& rho,
                                    std::function<std::array<double, 3>(double)> path = {}) {
    detail::check_rho(rho);
    return DensityModel<3>{Nematic{rho, std::move(path)}, 2.0};
}

template <int N>
DensityModel<N> make_multiwell(std::vector<Well<N>> wells) {
    if (wells.empty()) throw Error(ErrorKind::InvalidArgument, "multiwell model needs at least one well");
    for (const auto& w : wells) {
        if (norm(Matrix<N>(w.a - w.a.transpose())) > 1e-12 * (1.0 + norm(w.a)))
            throw Error(ErrorKind::InvalidArgument, "well matrix a is not symmetric");
        if (!(sym_eigen_jacobi(w.a).values[0] > 0.0))
            throw Error(ErrorKind::InvalidArgument, "well matrix a is not positive definite");
        if (norm(Matrix<N>(w.U - w.U.transpose())) > 1e-12 * (1.0 + norm(w.U)) ||
            std::abs(w.U.trace()) > 1e-12)
            throw Error(ErrorKind::InvalidArgument, "well strain U must be symmetric and traceless");
        if (!(w.w >= 0.0)) throw Error(ErrorKind::InvalidArgument, "well offset w must be >= 0");
    }
    return DensityModel<N>{MultiWell<N>{std::move(wells)}, 2.0};
}

/// W(X) = |√(XᵀX) − Id|² = dist²(X, SO(n)) on SL(n); Q(Z) = 2|Z_sym|².
template <int N>
DensityModel<N> make_singlewell_dist2() {
    SingleWell<N> sw;
    sw.builtin = "dist2-sl";
    sw.W = [](const Matrix<N>& x) {
        if (!in_SL(x)) return ExtendedEnergy::infinite();
        const double d = dist_SO(x);
        return ExtendedEnergy::finite(d * d);
    };
    sw.dW = [](const Matrix<N>& x) {
        const auto p = polar_decompose(x);
        return Matrix<N>(2.0 * (x - p.rotation));
    };
    sw.Q = [](const Matrix<N>& z) {
        const Matrix<N> s = sym_part(z);
        return 2.0 * dot(s, s);
    };
    return DensityModel<N>{std::move(sw), 2.0};
}

template <int N>
DensityModel<N> make_singlewell(std::function<ExtendedEnergy(const Matrix<N>&)> w,
                                std::function<double(const Matrix<N>&)> q = {}, bool fd_fallback = false) {
    SingleWell<N> sw;
    sw.W = std::move(w);
    sw.Q = std::move(q);
    sw.fd_fallback = fd_fallback;
    return DensityModel<N>{std::move(sw), 2.0};
}

// ---------------------------------------------------------------------------
// Nematic helpers
// ---------------------------------------------------------------------------

inline std::array<double, 3> nematic_rho_at(const Nematic& nm, double eps) {
    if (!nm.rho_path) return nm.rho;
    auto r = nm.rho_path(eps);
    if (std::abs(r[0] + r[1] + r[2]) > 1e-12)
        throw Error(ErrorKind::InvariantViolation, "rho_path(eps) does not sum to zero");
    return r;
}

/// γ_{ε,i} = exp(ε ρ_i(ε)).
inline std::array<double, 3> nematic_gamma(const Nematic& nm, double eps) {
    const auto r = nematic_rho_at(nm, eps);
    return {std::exp(eps * r[0]), std::exp(eps * r[1]), std::exp(eps * r[2])};
}

/// Σ σ_i(X)²/γ_i² − 3 without the SL(3) check.
inline double nematic_W_unchecked(const std::array<double, 3>& gamma, const Matrix<3>& x) {
    const auto lam = sym_eigen_jacobi(Matrix<3>(x.transpose() * x)).values;  // σ_i² ascending
    double s = -3.0;
    for (int i = 0; i < 3; ++i) s += lam[i] / (gamma[i] * gamma[i]);
    return s;
}

/// ∂/∂X of Σ σ_i² / γ_i²  =  2 X Σ γ_i^{-2} v_i v_iᵀ.
inline Matrix<3> nematic_W_gradient(const std::array<double, 3>& gamma, const Matrix<3>& x) {
    const auto e = sym_eigen_jacobi(Matrix<3>(x.transpose() * x));
    Matrix<3> m;
    for (int k = 0; k < 3; ++k) {
        const double c = 2.0 / (gamma[k] * gamma[k]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) += c * e.vectors(i, k) * e.vectors(j, k);
    }
    return x * m;
}

/// 2 Σ (λ_i(Z_sym) − ρ_i)².
inline double nematic_V_unchecked(const std::array<double, 3>& rho, const Matrix<3>& z) {
    const auto lam = sym_eigenvalues(project_sym(z));
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (lam[i] - rho[i]) * (lam[i] - rho[i]);
    return 2.0 * s;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {
template <int N>
double multiwell_W(const MultiWell<N>& mw, double eps, const Matrix<N>& x) {
    const Matrix<N> u = stretch(x);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& w : mw.wells) {
        const Matrix<N> m = u - matrix_exp(Matrix<N>(eps * w.U));
        best = std::min(best, 0.5 * dot(Matrix<N>(w.a * m), m) + eps * eps * w.w);
    }
    return best;
}

template <int N>
double multiwell_V(const MultiWell<N>& mw, const Matrix<N>& zs) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& w : mw.wells) {
        const Matrix<N> m = zs - w.U;
        best = std::min(best, 0.5 * dot(Matrix<N>(w.a * m), m) + w.w);
    }
    return best;
}
}  // namespace detail

/// W_ε(X); Infinite iff |det X − 1| > 1e-9.
template <int N>
ExtendedEnergy eval_W(const DensityModel<N>& model, double eps, const Matrix<N>& x) {
    if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
    return std::visit(
        [&](const auto& m) -> ExtendedEnergy {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Nematic>) {
                if constexpr (N != 3) {
                    throw Error(ErrorKind::DimensionMismatch, "nematic model requires n = 3");
                } else {
                    if (!in_SL(x)) return ExtendedEnergy::infinite();
                    return ExtendedEnergy::finite(nematic_W_unchecked(nematic_gamma(m, eps), x));
                }
            } else if constexpr (std::is_same_v<T, MultiWell<N>>) {
                if (!in_SL(x)) return ExtendedEnergy::infinite();
                return ExtendedEnergy::finite(detail::multiwell_W(m, eps, x));
            } else {
                if (!m.W) throw Error(ErrorKind::InvalidArgument, "single-well model without W");
                return m.W(x);
            }
        },
        model.kind);
}

/// V_ε(Z) = ε^{-p} W_ε(e^{εZ}) for traceless Z.
template <int N>
double eval_V_eps(const DensityModel<N>& model, double eps, const DevMatrix<N>& z) {
    if (!(eps > 0.0 && eps <= 1.0)) throw Error(ErrorKind::InvalidArgument, "eps must lie in (0, 1]");
    const auto w = eval_W(model, eps, matrix_exp(Matrix<N>(eps * z.matrix())));
    if (!w.is_finite())
        throw Error(ErrorKind::InvariantViolation, "exp of a traceless matrix left SL(n)");
    return w.value() / std::pow(eps, model.p);
}

/// Central second difference of t ↦ W(e^{tZ}), Richardson-extrapolated over t, t/2.
template <int N>
double eval_Q_fd(const SingleWell<N>& sw, const IlsMatrix<N>& z, double t = 1e-3) {
    if (!(t >= 1e-5 && t <= 1e-2)) throw Error(ErrorKind::InvalidArgument, "step t must lie in [1e-5, 1e-2]");
    auto sample = [&](double s) {
        const auto w = sw.W(matrix_exp(Matrix<N>(s * z.matrix())));
        if (!w.is_finite()) throw Error(ErrorKind::NonFiniteSample, "probe left SL(n)");
        return w.value();
    };
    const double w0 = sample(0.0);
    auto d2 = [&](double s) { return (sample(s) - 2.0 * w0 + sample(-s)) / (s * s); };
    const double coarse = d2(t), fine = d2(0.5 * t);
    return (4.0 * fine - coarse) / 3.0;
}

/// Limiting density V; Infinite off the traceless matrices. Depends on Z only
/// through its symmetric part.
template <int N>
ExtendedEnergy eval_V(const DensityModel<N>& model, const Matrix<N>& z) {
    if (!traceless_for_V(z)) return ExtendedEnergy::infinite();
    return std::visit(
        [&](const auto& m) -> ExtendedEnergy {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Nematic>) {
                if constexpr (N != 3) {
                    throw Error(ErrorKind::DimensionMismatch, "nematic model requires n = 3");
                } else {
                    return ExtendedEnergy::finite(nematic_V_unchecked(m.rho, z));
                }
            } else if constexpr (std::is_same_v<T, MultiWell<N>>) {
                return ExtendedEnergy::finite(detail::multiwell_V(m, sym_part(z)));
            } else {
                const Matrix<N> zi = dev_part(sym_part(z));
                if (m.Q) return ExtendedEnergy::finite(0.5 * m.Q(zi));
                if (m.fd_fallback) return ExtendedEnergy::finite(0.5 * eval_Q_fd(m, IlsMatrix<N>::unchecked(zi)));
                throw Error(ErrorKind::MissingQ, "single-well model has no Q and finite differences are disabled");
            }
        },
        model.kind);
}

// ---------------------------------------------------------------------------
// Convergence condition (C)
// ---------------------------------------------------------------------------

struct ConditionCRow {
    double eps = 0.0;
    double sup_deviation = 0.0;
    std::size_t samples = 0;
};

/// Sampled estimate of sup_{Z ∈ dev, |Z| ≤ r} |V_ε(Z) − V_ref(Z)| for each ε,
/// over the same shifted-Halton point set for every ε.
template <int N>
std::vector<ConditionCRow> check_condition_C(const DensityModel<N>& model,
                                             const std::function<ExtendedEnergy(const Matrix<N>&)>& v_ref,
                                             double r, const std::vector<double>& eps_list,
                                             std::size_t samples, std::uint64_t seed) {
    if (!(r >= 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be non-negative");
    if (samples < 1000) throw Error(ErrorKind::InvalidArgument, "at least 1000 samples required");
    auto ref = v_ref ? v_ref : [&](const Matrix<N>& z) { return eval_V(model, z); };
    ShiftedHalton seq(N * N - 1, seed);
    std::vector<Matrix<N>> points;
    points.reserve(samples);
    for (std::size_t k = 0; k < samples; ++k) points.push_back(cube_to_traceless_ball<N>(seq.point(k), r));

    std::vector<ConditionCRow> rows;
    for (double eps : eps_list) {
        double sup = 0.0;
        for (const auto& z : points) {
            const auto vref = ref(z);
            if (!vref.is_finite()) throw Error(ErrorKind::NonFiniteSample, "reference density infinite on a dev sample");
            sup = std::max(sup, std::abs(eval_V_eps(model, eps, DevMatrix<N>::unchecked(z)) - vref.value()));
        }
        rows.push_back({eps, sup, samples});
    }
    return rows;
}

}  // namespace iqclab
