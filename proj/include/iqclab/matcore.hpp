#pragma once

// Dense 2x2 / 3x3 kernels: projections, spectral decompositions,
// exponential / logarithm and distance to the rotation group.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>

#include "iqclab/errors.hpp"

namespace iqclab {

template <int N>
class Matrix {
    static_assert(N == 2 || N == 3, "only 2x2 and 3x3 matrices are supported");

public:
    static constexpr int dim = N;
    static constexpr int size = N * N;

    constexpr Matrix() = default;

    static constexpr Matrix zero() { return Matrix{}; }

    static constexpr Matrix identity() {
        Matrix m;
        for (int i = 0; i < N; ++i) m(i, i) = 1.0;
        return m;
    }

    static constexpr Matrix diag(const std::array<double, N>& d) {
        Matrix m;
        for (int i = 0; i < N; ++i) m(i, i) = d[i];
        return m;
    }

    static Matrix from_row_major(std::span<const double> values) {
        if (values.size() != static_cast<std::size_t>(size))
            throw Error(ErrorKind::DimensionMismatch,
                        "expected " + std::to_string(size) + " entries, got " +
                            std::to_string(values.size()));
        Matrix m;
        std::copy(values.begin(), values.end(), m.a_.begin());
        return m;
    }

    /// Outer product a ⊗ b.
    static constexpr Matrix outer(const std::array<double, N>& a, const std::array<double, N>& b) {
        Matrix m;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) m(i, j) = a[i] * b[j];
        return m;
    }

    constexpr double& operator()(int i, int j) { return a_[i * N + j]; }
    constexpr double operator()(int i, int j) const { return a_[i * N + j]; }

    constexpr std::span<const double, size> data() const { return std::span<const double, size>(a_); }
    constexpr std::span<double, size> data() { return std::span<double, size>(a_); }

    constexpr Matrix& operator+=(const Matrix& o) {
        for (int k = 0; k < size; ++k) a_[k] += o.a_[k];
        return *this;
    }
    constexpr Matrix& operator-=(const Matrix& o) {
        for (int k = 0; k < size; ++k) a_[k] -= o.a_[k];
        return *this;
    }
    constexpr Matrix& operator*=(double s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend constexpr Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend constexpr Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend constexpr Matrix operator-(Matrix a) { return a *= -1.0; }
    friend constexpr Matrix operator*(Matrix a, double s) { return a *= s; }
    friend constexpr Matrix operator*(double s, Matrix a) { return a *= s; }
    friend constexpr Matrix operator/(Matrix a, double s) { return a *= (1.0 / s); }

    friend constexpr Matrix operator*(const Matrix& a, const Matrix& b) {
        Matrix c;
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < N; ++k) {
                const double aik = a(i, k);
                for (int j = 0; j < N; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend constexpr std::array<double, N> operator*(const Matrix& a, const std::array<double, N>& v) {
        std::array<double, N> r{};
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) r[i] += a(i, j) * v[j];
        return r;
    }

    friend constexpr bool operator==(const Matrix&, const Matrix&) = default;

    constexpr Matrix transpose() const {
        Matrix t;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) t(i, j) = (*this)(j, i);
        return t;
    }

    constexpr double trace() const {
        double t = 0.0;
        for (int i = 0; i < N; ++i) t += (*this)(i, i);
        return t;
    }

    constexpr double det() const {
        const auto& m = *this;
        if constexpr (N == 2) {
            return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        } else {
            return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                   m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                   m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        }
    }

    /// Transposed cofactor matrix, so that adj(A)·A = det(A)·Id.
    constexpr Matrix adjugate() const {
        const auto& m = *this;
        Matrix r;
        if constexpr (N == 2) {
            r(0, 0) = m(1, 1);
            r(0, 1) = -m(0, 1);
            r(1, 0) = -m(1, 0);
            r(1, 1) = m(0, 0);
        } else {
            r(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
            r(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
            r(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
            r(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
            r(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
            r(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
            r(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
            r(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
            r(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        }
        return r;
    }

    Matrix inverse() const {
        const double d = det();
        if (d == 0.0 || !std::isfinite(d)) throw Error(ErrorKind::InvalidArgument, "singular matrix");
        return adjugate() / d;
    }

    bool is_finite() const {
        return std::all_of(a_.begin(), a_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    std::array<double, size> a_{};
};

/// Frobenius inner product.
template <int N>
constexpr double dot(const Matrix<N>& a, const Matrix<N>& b) {
    double s = 0.0;
    for (int k = 0; k < Matrix<N>::size; ++k) s += a.data()[k] * b.data()[k];
    return s;
}

template <int N>
inline double norm(const Matrix<N>& a) {
    return std::sqrt(dot(a, a));
}

template <int N>
constexpr Matrix<N> sym_part(const Matrix<N>& x) {
    return 0.5 * (x + x.transpose());
}

template <int N>
constexpr Matrix<N> skew_part(const Matrix<N>& x) {
    return 0.5 * (x - x.transpose());
}

template <int N>
constexpr Matrix<N> dev_part(const Matrix<N>& x) {
    return x - (x.trace() / N) * Matrix<N>::identity();
}

// ---------------------------------------------------------------------------
// Refinement types. They can only be obtained through a projection or a
// tolerance-checked construction, so holding one certifies the invariant.
// ---------------------------------------------------------------------------

namespace detail {
constexpr double kRefinementTol = 1e-12;

template <int N>
inline bool symmetric_within(const Matrix<N>& x, double tol) {
    return norm(Matrix<N>(x - x.transpose())) <= tol * (1.0 + norm(x));
}

template <int N>
inline bool traceless_within(const Matrix<N>& x, double tol) {
    return std::abs(x.trace()) <= tol * (1.0 + norm(x));
}
}  // namespace detail

#define IQCLAB_REFINED_MATRIX(Name, CHECK, MESSAGE)                                          \
    template <int N>                                                                         \
    class Name {                                                                             \
    public:                                                                                  \
        static Name checked(const Matrix<N>& x, double tol = detail::kRefinementTol) {       \
            if (!(CHECK)) throw Error(ErrorKind::InvariantViolation, MESSAGE);               \
            return Name(x);                                                                  \
        }                                                                                    \
        static Name unchecked(const Matrix<N>& x) { return Name(x); }                        \
        const Matrix<N>& matrix() const { return m_; }                                       \
        operator const Matrix<N>&() const { return m_; }                                     \
                                                                                             \
    private:                                                                                 \
        explicit Name(const Matrix<N>& x) : m_(x) {}                                         \
        Matrix<N> m_;                                                                        \
    };

IQCLAB_REFINED_MATRIX(SymMatrix, detail::symmetric_within(x, tol), "matrix is not symmetric")
IQCLAB_REFINED_MATRIX(DevMatrix, detail::traceless_within(x, tol), "matrix is not traceless")
IQCLAB_REFINED_MATRIX(IlsMatrix,
                      detail::symmetric_within(x, tol) && detail::traceless_within(x, tol),
                      "matrix is not symmetric and traceless")

#undef IQCLAB_REFINED_MATRIX

template <int N>
inline SymMatrix<N> project_sym(const Matrix<N>& x) {
    return SymMatrix<N>::unchecked(sym_part(x));
}

template <int N>
inline DevMatrix<N> project_dev(const Matrix<N>& x) {
    return DevMatrix<N>::unchecked(dev_part(x));
}

template <int N>
inline IlsMatrix<N> project_ils(const Matrix<N>& x) {
    return IlsMatrix<N>::unchecked(dev_part(sym_part(x)));
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

/// Scaling and squaring with a truncated Taylor series.
template <int N>
Matrix<N> matrix_exp(const Matrix<N>& z) {
    if (!z.is_finite()) throw Error(ErrorKind::InvalidArgument, "matrix_exp of non-finite matrix");
    const double nz = norm(z);
    int squarings = 0;
    if (nz > 0.25) squarings = static_cast<int>(std::ceil(std::log2(nz / 0.25)));
    const Matrix<N> a = z * std::ldexp(1.0, -squarings);

    Matrix<N> sum = Matrix<N>::identity();
    Matrix<N> term = Matrix<N>::identity();
    for (int k = 1; k <= 30; ++k) {
        term = term * a / static_cast<double>(k);
        sum += term;
        if (norm(term) <= 1e-18 * norm(sum)) break;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

// ---------------------------------------------------------------------------
// Symmetric eigenproblems
// ---------------------------------------------------------------------------

template <int N>
struct SymEigen {
    std::array<double, N> values{};  // ascending
    Matrix<N> vectors;                // column k is the eigenvector of values[k]
};

/// Cyclic Jacobi iteration; accurate for all spectra including multiple eigenvalues.
template <int N>
SymEigen<N> sym_eigen_jacobi(const Matrix<N>& s, int max_sweeps = 50) {
    Matrix<N> a = sym_part(s);
    Matrix<N> v = Matrix<N>::identity();
    const double scale = norm(a);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) off += a(p, q) * a(p, q);
        if (off <= 1e-36 * scale * scale || off == 0.0) break;
        for (int p = 0; p < N; ++p) {
            for (int q = p + 1; q < N; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < N; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < N; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (int k = 0; k < N; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    std::array<int, N> order{};
    for (int i = 0; i < N; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
    SymEigen<N> out;
    for (int k = 0; k < N; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (int r = 0; r < N; ++r) out.vectors(r, k) = v(r, order[k]);
    }
    return out;
}

template <int N>
inline SymEigen<N> sym_eigen(const SymMatrix<N>& s) {
    return sym_eigen_jacobi(s.matrix());
}

/// Eigenvalues in ascending order. Closed form (trigonometric for n = 3),
/// falling back to Jacobi when the spectrum is close to degenerate.
template <int N>
std::array<double, N> sym_eigenvalues(const SymMatrix<N>& sm) {
    const Matrix<N>& s = sm.matrix();
    if constexpr (N == 2) {
        const double mean = 0.5 * (s(0, 0) + s(1, 1));
        const double half = 0.5 * (s(0, 0) - s(1, 1));
        const double r = std::hypot(half, 0.5 * (s(0, 1) + s(1, 0)));
        return {mean - r, mean + r};
    } else {
        const double q = s.trace() / 3.0;
        const double p1 = s(0, 1) * s(0, 1) + s(0, 2) * s(0, 2) + s(1, 2) * s(1, 2);
        if (p1 == 0.0) {
            std::array<double, 3> out{s(0, 0), s(1, 1), s(2, 2)};
            std::sort(out.begin(), out.end());
            return out;
        }
        const double d0 = s(0, 0) - q, d1 = s(1, 1) - q, d2 = s(2, 2) - q;
        const double p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
        const double p = std::sqrt(p2 / 6.0);
        if (p <= 1e-14 * (std::abs(q) + 1e-300)) return {q, q, q};
        const Matrix<3> b = (s - q * Matrix<3>::identity()) / p;
        const double r = std::clamp(0.5 * b.det(), -1.0, 1.0);
        // The depressed cubic t^3 - 3t - 2r has discriminant 108 (1 - r^2).
        if (1.0 - r * r < 1e-12) return sym_eigen_jacobi(s).values;
        const double phi = std::acos(r) / 3.0;
        const double hi = q + 2.0 * p * std::cos(phi);
        const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
        const double mid = 3.0 * q - hi - lo;
        std::array<double, 3> out{lo, mid, hi};
        std::sort(out.begin(), out.end());
        return out;
    }
}

/// Singular values in ascending order, via the eigenvalues of XᵀX.
template <int N>
std::array<double, N> singular_values(const Matrix<N>& x) {
    auto lam = sym_eigen_jacobi(Matrix<N>(x.transpose() * x)).values;
    std::array<double, N> out{};
    for (int i = 0; i < N; ++i) out[i] = std::sqrt(std::max(0.0, lam[i]));
    return out;
}

/// V·diag(f(λ))·Vᵀ for a spectral decomposition.
template <int N, class F>
Matrix<N> spectral_apply(const SymEigen<N>& e, F&& f) {
    Matrix<N> out;
    for (int k = 0; k < N; ++k) {
        const double fk = f(e.values[k]);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) out(i, j) += fk * e.vectors(i, k) * e.vectors(j, k);
    }
    return out;
}

/// Matrix logarithm of an SPD matrix with spectrum in (0.1, 10).
template <int N>
SymMatrix<N> matrix_log_spd(const SymMatrix<N>& s) {
    const auto e = sym_eigen(s);
    for (double l : e.values) {
        if (!(l > 0.0)) throw Error(ErrorKind::NotSPD, "eigenvalue " + std::to_string(l) + " <= 0");
        if (!(l > 0.1 && l < 10.0))
            throw Error(ErrorKind::OutOfDomain, "eigenvalue " + std::to_string(l) + " outside (0.1, 10)");
    }
    return SymMatrix<N>::unchecked(sym_part(spectral_apply(e, [](double l) { return std::log(l); })));
}

/// √(XᵀX).
template <int N>
Matrix<N> stretch(const Matrix<N>& x) {
    const auto e = sym_eigen_jacobi(Matrix<N>(x.transpose() * x));
    return sym_part(spectral_apply(e, [](double l) { return std::sqrt(std::max(0.0, l)); }));
}

/// Frobenius distance to SO(n).
template <int N>
double dist_SO(const Matrix<N>& x) {
    const auto sigma = singular_values(x);
    double s = 0.0;
    if (x.det() > 0.0) {
        for (double v : sigma) s += (v - 1.0) * (v - 1.0);
    } else {
        // Orientation-reversing: the nearest rotation flips the smallest singular direction.
        s = (sigma[0] + 1.0) * (sigma[0] + 1.0);
        for (int i = 1; i < N; ++i) s += (sigma[i] - 1.0) * (sigma[i] - 1.0);
    }
    return std::sqrt(s);
}

template <int N>
struct Polar {
    Matrix<N> rotation;
    SymMatrix<N> stretch;
};

/// F = R·U with R ∈ SO(n) and U = √(FᵀF).
template <int N>
Polar<N> polar_decompose(const Matrix<N>& f) {
    if (!(f.det() > 0.0)) throw Error(ErrorKind::NotOrientationPreserving, "det F <= 0");
    const auto e = sym_eigen_jacobi(Matrix<N>(f.transpose() * f));
    const Matrix<N> u = sym_part(spectral_apply(e, [](double l) { return std::sqrt(l); }));
    const Matrix<N> u_inv = sym_part(spectral_apply(e, [](double l) { return 1.0 / std::sqrt(l); }));
    return {f * u_inv, SymMatrix<N>::unchecked(u)};
}

}  // namespace iqclab
