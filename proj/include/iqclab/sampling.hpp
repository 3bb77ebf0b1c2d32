#pragma once

// Seeded pseudo-random and quasi-random generators. Everything here is
// bit-for-bit reproducible for a given seed: no std:: distributions, whose
// output is implementation defined.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "iqclab/matcore.hpp"

namespace iqclab {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ull) {
        for (int i = 0; i < 4; ++i) next();
    }

    /// SplitMix64.
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box–Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

template <int N>
Matrix<N> random_matrix(Rng& rng, double scale = 1.0) {
    Matrix<N> m;
    for (auto& v : m.data()) v = scale * rng.normal();
    return m;
}

/// Haar-distributed rotation (Gram–Schmidt of a Gaussian matrix, sign fixed to det = +1).
template <int N>
Matrix<N> random_rotation(Rng& rng) {
    Matrix<N> g = random_matrix<N>(rng);
    Matrix<N> q;
    for (int c = 0; c < N; ++c) {
        std::array<double, N> v{};
        for (int r = 0; r < N; ++r) v[r] = g(r, c);
        for (int k = 0; k < c; ++k) {
            double p = 0.0;
            for (int r = 0; r < N; ++r) p += v[r] * q(r, k);
            for (int r = 0; r < N; ++r) v[r] -= p * q(r, k);
        }
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        for (int r = 0; r < N; ++r) q(r, c) = v[r] / n;
    }
    if (q.det() < 0.0)
        for (int r = 0; r < N; ++r) q(r, 0) = -q(r, 0);
    return q;
}

/// Orthonormal basis (Frobenius) of the traceless n×n matrices.
template <int N>
std::array<Matrix<N>, N * N - 1> traceless_basis() {
    std::array<Matrix<N>, N * N - 1> basis{};
    int k = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (i != j) basis[k++](i, j) = 1.0;
    if constexpr (N == 2) {
        basis[k] = Matrix<2>::diag({1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)});
    } else {
        basis[k++] = Matrix<3>::diag({1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0});
        basis[k] = Matrix<3>::diag({1.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0), -2.0 / std::sqrt(6.0)});
    }
    return basis;
}

/// Random traceless symmetric matrix with Gaussian entries.
template <int N>
Matrix<N> random_ils(Rng& rng, double scale = 1.0) {
    return dev_part(sym_part(random_matrix<N>(rng, scale)));
}

/// Random traceless matrix with Gaussian entries.
template <int N>
Matrix<N> random_dev(Rng& rng, double scale = 1.0) {
    return dev_part(random_matrix<N>(rng, scale));
}

inline constexpr std::array<int, 16> kHaltonPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

/// Radical inverse of `index` in base `base`.
inline double radical_inverse(std::uint64_t index, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

/// Halton sequence with a seeded Cranley–Patterson rotation. The first k
/// points never depend on how many points are requested later.
class ShiftedHalton {
public:
    ShiftedHalton(int dim, std::uint64_t seed) : shift_(dim) {
        if (dim > static_cast<int>(kHaltonPrimes.size()))
            throw Error(ErrorKind::InvalidArgument, "Halton dimension too large");
        Rng rng(seed);
        for (auto& s : shift_) s = rng.uniform();
    }

    int dim() const { return static_cast<int>(shift_.size()); }

    std::vector<double> point(std::uint64_t index) const {
        std::vector<double> p(shift_.size());
        for (std::size_t d = 0; d < shift_.size(); ++d) {
            double v = radical_inverse(index + 1, kHaltonPrimes[d]) + shift_[d];
            p[d] = v - std::floor(v);
        }
        return p;
    }

private:
    std::vector<double> shift_;
};

/// Maps a point of the unit cube to the closed Frobenius ball of radius r in
/// the traceless matrices: cube [-1,1]^d is stretched radially onto the ball.
template <int N>
Matrix<N> cube_to_traceless_ball(const std::vector<double>& u, double r) {
    static const auto basis = traceless_basis<N>();
    std::array<double, N * N - 1> y{};
    double inf = 0.0, two = 0.0;
    for (int k = 0; k < N * N - 1; ++k) {
        y[k] = 2.0 * u[k] - 1.0;
        inf = std::max(inf, std::abs(y[k]));
        two += y[k] * y[k];
    }
    two = std::sqrt(two);
    const double stretch = two > 0.0 ? inf / two : 0.0;
    Matrix<N> z;
    for (int k = 0; k < N * N - 1; ++k) z += (r * stretch * y[k]) * basis[k];
    return z;
}

}  // namespace iqclab
