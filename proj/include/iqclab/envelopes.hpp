#pragma once

// Closed-form envelopes of the nematic model: the iqc envelope of the limit
// density V and the quasiconvex envelope of W_ε.

#include <array>
#include <cmath>
#include <vector>

#include "iqclab/densities.hpp"

namespace iqclab {

inline constexpr double kRegionTieTol = 1e-9;

struct IqcEval {
    ExtendedEnergy value = ExtendedEnergy::infinite();
    int region = 0;  // 1..4, or 0 when infinite
};

namespace detail {
inline std::array<double, 3> shifted_spectrum(const std::array<double, 3>& rho, const Matrix<3>& z) {
    const auto lam = sym_eigenvalues(project_sym(z));
    return {lam[0] - rho[0], lam[1] - rho[1], lam[2] - rho[2]};
}

inline int iqc_region(const std::array<double, 3>& d) {
    constexpr double t = kRegionTieTol;
    if (d[0] >= -t && d[2] <= t) return 1;
    if (d[0] <= t && d[2] <= d[1] + t) return 2;
    if (d[0] <= d[1] + t && d[1] <= d[2] + t) return 3;
    if (d[1] <= d[0] + t && d[2] >= -t) return 4;
    return 0;
}
}  // namespace detail

/// f^iqc for f = V of the nematic model, with the region that produced it.
inline IqcEval nematic_V_iqc_eval(const std::array<double, 3>& rho, const Matrix<3>& z) {
    detail::check_rho(rho);
    if (!traceless_for_V(z)) return {};
    const auto d = detail::shifted_spectrum(rho, z);
    const int region = detail::iqc_region(d);
    switch (region) {
        case 1: return {ExtendedEnergy::finite(0.0), 1};
        case 2: return {ExtendedEnergy::finite(3.0 * d[0] * d[0]), 2};
        case 3: return {ExtendedEnergy::finite(2.0 * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2])), 3};
        case 4: return {ExtendedEnergy::finite(3.0 * d[2] * d[2]), 4};
        default: throw Error(ErrorKind::RegionClassificationFailure, "spectrum matched no envelope region");
    }
}

inline ExtendedEnergy nematic_V_iqc(const std::array<double, 3>& rho, const Matrix<3>& z) {
    return nematic_V_iqc_eval(rho, z).value;
}

/// Second form of the same envelope, with region 1 stated as σ(Z) ⊂ [ρ1, ρ3]
/// and region values written without using Σ(λ_i − ρ_i) = 0.
inline ExtendedEnergy nematic_V_iqc_alt(const std::array<double, 3>& rho, const Matrix<3>& z) {
    detail::check_rho(rho);
    if (!traceless_for_V(z)) return ExtendedEnergy::infinite();
    const auto lam = sym_eigenvalues(project_sym(z));
    const std::array<double, 3> d{lam[0] - rho[0], lam[1] - rho[1], lam[2] - rho[2]};
    constexpr double t = kRegionTieTol;
    double half;
    if (lam[0] >= rho[0] - t && lam[2] <= rho[2] + t) {
        half = 0.0;
    } else if (lam[0] <= rho[0] + t && d[2] <= d[1] + t) {
        const double m = 0.5 * (d[1] + d[2]);
        half = d[0] * d[0] + 2.0 * m * m;
    } else if (d[0] <= d[1] + t && d[1] <= d[2] + t) {
        half = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    } else if (d[1] <= d[0] + t && lam[2] >= rho[2] - t) {
        const double m = 0.5 * (d[0] + d[1]);
        half = 2.0 * m * m + d[2] * d[2];
    } else {
        throw Error(ErrorKind::RegionClassificationFailure, "spectrum matched no envelope region");
    }
    return ExtendedEnergy::finite(2.0 * half);
}

/// Value and gradient (w.r.t. Z, valid along traceless directions) of the
/// nematic iqc envelope; no trace check.
inline double nematic_V_iqc_grad(const std::array<double, 3>& rho, const Matrix<3>& z, Matrix<3>& grad) {
    const auto e = sym_eigen_jacobi(sym_part(z));
    const std::array<double, 3> d{e.values[0] - rho[0], e.values[1] - rho[1], e.values[2] - rho[2]};
    std::array<double, 3> c{};
    double v = 0.0;
    switch (detail::iqc_region(d)) {
        case 1: break;
        case 2: v = 3.0 * d[0] * d[0]; c[0] = 6.0 * d[0]; break;
        case 3:
            v = 2.0 * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            for (int i = 0; i < 3; ++i) c[i] = 4.0 * d[i];
            break;
        case 4: v = 3.0 * d[2] * d[2]; c[2] = 6.0 * d[2]; break;
        default: throw Error(ErrorKind::RegionClassificationFailure, "spectrum matched no envelope region");
    }
    grad = Matrix<3>();
    for (int k = 0; k < 3; ++k) {
        if (c[k] == 0.0) continue;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) grad(i, j) += c[k] * e.vectors(i, k) * e.vectors(j, k);
    }
    return v;
}

/// V = 2Σ(λ_i − ρ_i)² with its gradient; no trace check.
inline double nematic_V_grad(const std::array<double, 3>& rho, const Matrix<3>& z, Matrix<3>& grad) {
    const auto e = sym_eigen_jacobi(sym_part(z));
    double v = 0.0;
    grad = Matrix<3>();
    for (int k = 0; k < 3; ++k) {
        const double d = e.values[k] - rho[k];
        v += 2.0 * d * d;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) grad(i, j) += 4.0 * d * e.vectors(i, k) * e.vectors(j, k);
    }
    return v;
}

/// Quasiconvex envelope of the nonlinear nematic density with stretches γ.
inline ExtendedEnergy nematic_W_qc(const std::array<double, 3>& gamma, const Matrix<3>& x) {
    if (!(gamma[0] <= gamma[1] && gamma[1] <= gamma[2]) || !(gamma[0] > 0.0))
        throw Error(ErrorKind::InvalidArgument, "gamma must be positive and sorted ascending");
    if (std::abs(gamma[0] * gamma[1] * gamma[2] - 1.0) > 1e-10)
        throw Error(ErrorKind::InvalidArgument, "gamma must have unit product");
    if (!in_SL(x)) return ExtendedEnergy::infinite();
    const auto sig = singular_values(x);
    const std::array<double, 3> s{sig[0] / gamma[0], sig[1] / gamma[1], sig[2] / gamma[2]};
    if (s[0] >= 1.0 && s[2] <= 1.0) return ExtendedEnergy::finite(0.0);
    if (s[0] <= 1.0 && s[2] <= s[1]) return ExtendedEnergy::finite(s[0] * s[0] + 2.0 / s[0] - 3.0);
    if (s[0] <= s[1] && s[1] <= s[2])
        return ExtendedEnergy::finite(s[0] * s[0] + s[1] * s[1] + s[2] * s[2] - 3.0);
    if (s[1] <= s[0] && s[2] >= 1.0) return ExtendedEnergy::finite(s[2] * s[2] + 2.0 / s[2] - 3.0);
    throw Error(ErrorKind::RegionClassificationFailure, "singular values matched no envelope branch");
}

struct ScaledQcRow {
    double eps = 0.0;
    double value = 0.0;
};

struct ScaledQcTable {
    std::vector<ScaledQcRow> rows;
    double limit = 0.0;
};

/// ε^{-2} W_ε^qc(e^{εZ}) along ε_list, and the limit f^iqc(Z).
inline ScaledQcTable scaled_qc_limit(const std::array<double, 3>& rho, const IlsMatrix<3>& z,
                                     const std::vector<double>& eps_list) {
    detail::check_rho(rho);
    ScaledQcTable t;
    for (double eps : eps_list) {
        if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
        const std::array<double, 3> g{std::exp(eps * rho[0]), std::exp(eps * rho[1]), std::exp(eps * rho[2])};
        const auto w = nematic_W_qc(g, matrix_exp(Matrix<3>(eps * z.matrix())));
        t.rows.push_back({eps, w.value() / (eps * eps)});
    }
    t.limit = nematic_V_iqc(rho, z.matrix()).value();
    return t;
}

}  // namespace iqclab
