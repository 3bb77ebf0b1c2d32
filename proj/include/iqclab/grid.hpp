#pragma once

// Staggered (MAC) grids on axis-aligned boxes: lattices, face fields, edge
// and nodal potentials, and the discrete curl / divergence stencils.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "iqclab/errors.hpp"

namespace iqclab {

/// Row-major multi-index lattice (axis 0 slowest).
template <int N>
struct Lattice {
    std::array<int, N> dims{};

    std::size_t size() const {
        std::size_t s = 1;
        for (int d : dims) s *= static_cast<std::size_t>(d);
        return s;
    }

    std::size_t index(const std::array<int, N>& i) const {
        std::size_t k = 0;
        for (int a = 0; a < N; ++a) k = k * dims[a] + i[a];
        return k;
    }

    std::array<int, N> unravel(std::size_t k) const {
        std::array<int, N> i{};
        for (int a = N - 1; a >= 0; --a) {
            i[a] = static_cast<int>(k % dims[a]);
            k /= dims[a];
        }
        return i;
    }

    bool contains(const std::array<int, N>& i) const {
        for (int a = 0; a < N; ++a)
            if (i[a] < 0 || i[a] >= dims[a]) return false;
        return true;
    }

    std::size_t stride(int axis) const {
        std::size_t s = 1;
        for (int a = axis + 1; a < N; ++a) s *= dims[a];
        return s;
    }
};

template <int N>
Lattice<N> cell_lattice(int m) {
    Lattice<N> l;
    l.dims.fill(m);
    return l;
}

template <int N>
Lattice<N> node_lattice(int m) {
    Lattice<N> l;
    l.dims.fill(m + 1);
    return l;
}

/// Faces normal to axis d: nodal along d, centred elsewhere.
template <int N>
Lattice<N> face_lattice(int m, int d) {
    Lattice<N> l;
    l.dims.fill(m);
    l.dims[d] = m + 1;
    return l;
}

/// Edges parallel to axis d (n = 3): centred along d, nodal elsewhere.
template <int N>
Lattice<N> edge_lattice(int m, int d) {
    Lattice<N> l;
    l.dims.fill(m + 1);
    l.dims[d] = m;
    return l;
}

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

/// Vector field on the faces of a uniform MAC grid over origin + [0, m·h]^n.
/// Component d is stored at the centres of faces normal to e_d.
template <int N>
struct GridField {
    int m = 0;
    double h = 0.0;
    std::array<double, N> origin{};
    std::array<std::vector<double>, N> comp;
    /// Box faces 2d (x_d = low) and 2d+1 (x_d = high) carrying Dirichlet data;
    /// normal components on those faces must be exactly zero.
    std::array<bool, 2 * N> dirichlet{};

    static GridField zeros(int m, bool dirichlet_all = true) {
        if (m < 1) throw Error(ErrorKind::InvalidArgument, "grid resolution must be positive");
        GridField f;
        f.m = m;
        f.h = 1.0 / m;
        for (int d = 0; d < N; ++d) f.comp[d].assign(face_lattice<N>(m, d).size(), 0.0);
        f.dirichlet.fill(dirichlet_all);
        return f;
    }

    Lattice<N> lattice(int d) const { return face_lattice<N>(m, d); }

    std::array<double, N> face_center(int d, const std::array<int, N>& i) const {
        std::array<double, N> x{};
        for (int a = 0; a < N; ++a) x[a] = origin[a] + h * (i[a] + (a == d ? 0.0 : 0.5));
        return x;
    }

    bool is_masked(int d, const std::array<int, N>& i) const {
        return (i[d] == 0 && dirichlet[2 * d]) || (i[d] == m && dirichlet[2 * d + 1]);
    }

    /// Samples component d of `fn` at the face centres; no Dirichlet faces.
    template <class F>
    static GridField sample(int m, F&& fn) {
        GridField f = zeros(m, false);
        for (int d = 0; d < N; ++d) {
            const auto lat = f.lattice(d);
            for (std::size_t k = 0; k < lat.size(); ++k) f.comp[d][k] = fn(f.face_center(d, lat.unravel(k)))[d];
        }
        return f;
    }

    std::size_t total_size() const {
        std::size_t s = 0;
        for (const auto& c : comp) s += c.size();
        return s;
    }

    bool layout_ok() const {
        if (m < 1 || !(h > 0.0)) return false;
        for (int d = 0; d < N; ++d)
            if (comp[d].size() != lattice(d).size()) return false;
        return true;
    }

    bool mask_ok() const {
        for (int d = 0; d < N; ++d) {
            const auto lat = lattice(d);
            for (std::size_t k = 0; k < lat.size(); ++k)
                if (is_masked(d, lat.unravel(k)) && comp[d][k] != 0.0) return false;
        }
        return true;
    }

    void validate() const {
        if (!layout_ok()) throw Error(ErrorKind::DimensionMismatch, "component arrays do not match the MAC layout");
        if (!mask_ok()) throw Error(ErrorKind::InvariantViolation, "masked face holds a nonzero value");
    }

    /// Zeroes all masked faces.
    void apply_mask() {
        for (int d = 0; d < N; ++d) {
            const auto lat = lattice(d);
            for (std::size_t k = 0; k < lat.size(); ++k)
                if (is_masked(d, lat.unravel(k))) comp[d][k] = 0.0;
        }
    }

    /// Cell-weighted ℓ² norm (Σ v² hⁿ)^{1/2} over all faces.
    double norm() const {
        double s = 0.0;
        for (const auto& c : comp)
            for (double v : c) s += v * v;
        return std::sqrt(s * std::pow(h, N));
    }

    friend bool operator==(const GridField&, const GridField&) = default;
};

/// Scalar per-cell values.
template <int N>
struct CellScalar {
    int m = 0;
    double h = 0.0;
    std::vector<double> values;

    double max_abs() const {
        double r = 0.0;
        for (double v : values) r = std::max(r, std::abs(v));
        return r;
    }
    double sum_weighted() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * std::pow(h, N);
    }
    double norm() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return std::sqrt(s * std::pow(h, N));
    }
};

/// MAC divergence: per cell Σ_d (f_d(c + e_d) − f_d(c)) / h.
template <int N>
CellScalar<N> discrete_div(const GridField<N>& f) {
    f.validate();
    const auto cells = cell_lattice<N>(f.m);
    CellScalar<N> out{f.m, f.h, std::vector<double>(cells.size(), 0.0)};
    for (int d = 0; d < N; ++d) {
        const auto lat = f.lattice(d);
        const std::size_t sd = lat.stride(d);
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const auto c = cells.unravel(k);
            const std::size_t j = lat.index(c);
            out.values[k] += (f.comp[d][j + sd] - f.comp[d][j]) / f.h;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Potentials and the discrete curl
// ---------------------------------------------------------------------------

/// Vector potential for the discrete curl: edge field (n = 3) or nodal stream
/// function (n = 2). Components are flattened in `values` in a fixed order.
template <int N>
struct Potential {
    int m = 0;
    std::vector<double> values;
};

template <int N>
struct PotentialLayout {
    int m = 0;
    std::array<Lattice<N>, (N == 3 ? 3 : 1)> parts{};
    std::array<std::size_t, (N == 3 ? 3 : 1)> offsets{};
    std::size_t total = 0;

    explicit PotentialLayout(int m_) : m(m_) {
        if constexpr (N == 3) {
            for (int d = 0; d < 3; ++d) {
                parts[d] = edge_lattice<3>(m, d);
                offsets[d] = total;
                total += parts[d].size();
            }
        } else {
            parts[0] = node_lattice<2>(m);
            total = parts[0].size();
        }
    }

    static constexpr int num_parts() { return N == 3 ? 3 : 1; }

    /// True if the potential entry lies at least `margin` cells inside the box:
    /// nodal coordinates in [1 + margin, m − 1 − margin], centred ones in
    /// [margin, m − 1 − margin]. `margin = 0` means zero on the boundary only.
    bool is_free(int part, const std::array<int, N>& i, int margin) const {
        for (int a = 0; a < N; ++a) {
            const bool centred = (N == 3 && a == part);
            const int lo = centred ? margin : 1 + margin;
            const int hi = centred ? m - 1 - margin : m - 1 - margin;
            if (i[a] < lo || i[a] > hi) return false;
        }
        return true;
    }

    /// Entries not pinned by a Dirichlet box face (nodal coordinate on a
    /// Dirichlet face fixes the entry); free faces leave boundary entries free.
    std::vector<std::size_t> free_indices(const std::array<bool, 2 * N>& dirichlet) const {
        std::vector<std::size_t> out;
        for (int p = 0; p < num_parts(); ++p)
            for (std::size_t k = 0; k < parts[p].size(); ++k) {
                const auto i = parts[p].unravel(k);
                bool ok = true;
                for (int a = 0; a < N; ++a) {
                    if (N == 3 && a == p) continue;
                    ok = ok && !(i[a] == 0 && dirichlet[2 * a]) && !(i[a] == m && dirichlet[2 * a + 1]);
                }
                if (ok) out.push_back(offsets[p] + k);
            }
        return out;
    }

    std::vector<std::size_t> free_indices(int margin) const {
        std::vector<std::size_t> out;
        for (int p = 0; p < num_parts(); ++p)
            for (std::size_t k = 0; k < parts[p].size(); ++k)
                if (is_free(p, parts[p].unravel(k), margin)) out.push_back(offsets[p] + k);
        return out;
    }
};

/// φ = curl ψ on the faces. n = 3: φ_d = ∂_a ψ_b − ∂_b ψ_a for (d, a, b) cyclic.
/// n = 2: φ_0 = ∂_1 ψ, φ_1 = −∂_0 ψ.
template <int N>
void curl_apply(const PotentialLayout<N>& pl, const double* psi, GridField<N>& out) {
    const int m = pl.m;
    const double ih = static_cast<double>(m);  // 1/h on the unit box
    for (int d = 0; d < N; ++d) {
        const auto lat = face_lattice<N>(m, d);
        auto& c = out.comp[d];
        c.assign(lat.size(), 0.0);
        for (std::size_t k = 0; k < lat.size(); ++k) {
            const auto i = lat.unravel(k);
            if constexpr (N == 3) {
                const int a = (d + 1) % 3, b = (d + 2) % 3;
                const auto& lb = pl.parts[b];
                const auto& la = pl.parts[a];
                const std::size_t jb = pl.offsets[b] + lb.index(i), ja = pl.offsets[a] + la.index(i);
                c[k] = ih * ((psi[jb + lb.stride(a)] - psi[jb]) - (psi[ja + la.stride(b)] - psi[ja]));
            } else {
                const auto& l = pl.parts[0];
                const std::size_t j = l.index(i);
                if (d == 0) c[k] = ih * (psi[j + l.stride(1)] - psi[j]);
                else c[k] = -ih * (psi[j + l.stride(0)] - psi[j]);
            }
        }
    }
}

/// Adjoint of curl_apply: accumulates ∂E/∂ψ from ∂E/∂φ.
template <int N>
void curl_transpose(const PotentialLayout<N>& pl, const GridField<N>& gphi, double* gpsi) {
    const int m = pl.m;
    const double ih = static_cast<double>(m);
    for (int d = 0; d < N; ++d) {
        const auto lat = face_lattice<N>(m, d);
        const auto& c = gphi.comp[d];
        for (std::size_t k = 0; k < lat.size(); ++k) {
            const double g = c[k];
            if (g == 0.0) continue;
            const auto i = lat.unravel(k);
            if constexpr (N == 3) {
                const int a = (d + 1) % 3, b = (d + 2) % 3;
                const auto& lb = pl.parts[b];
                const auto& la = pl.parts[a];
                const std::size_t jb = pl.offsets[b] + lb.index(i), ja = pl.offsets[a] + la.index(i);
                gpsi[jb + lb.stride(a)] += ih * g;
                gpsi[jb] -= ih * g;
                gpsi[ja + la.stride(b)] -= ih * g;
                gpsi[ja] += ih * g;
            } else {
                const auto& l = pl.parts[0];
                const std::size_t j = l.index(i);
                if (d == 0) {
                    gpsi[j + l.stride(1)] += ih * g;
                    gpsi[j] -= ih * g;
                } else {
                    gpsi[j + l.stride(0)] -= ih * g;
                    gpsi[j] += ih * g;
                }
            }
        }
    }
}

/// Discrete curl of a potential on the unit box with all faces Dirichlet.
/// Boundary potential entries must be zero for the mask to hold.
template <int N>
GridField<N> discrete_curl(const Potential<N>& psi) {
    const PotentialLayout<N> pl(psi.m);
    if (psi.values.size() != pl.total) throw Error(ErrorKind::DimensionMismatch, "potential size mismatch");
    GridField<N> f = GridField<N>::zeros(psi.m, true);
    curl_apply(pl, psi.values.data(), f);
    return f;
}

// ---------------------------------------------------------------------------
// Cell-centred gradients of face fields
// ---------------------------------------------------------------------------

/// Per-cell midpoint gradient G_c[d][k] ≈ ∂_k φ_d: diagonal entries are the
/// exact face differences; off-diagonal ones are central differences of the
/// two-face averages. Tangential ghosts across a box face are −φ on Dirichlet
/// faces (φ = 0 on the wall) and +φ on free ones (zero normal derivative).
namespace detail {
template <int N>
std::array<double, 2 * N> ghost_signs(const GridField<N>& f) {
    std::array<double, 2 * N> s{};
    for (int k = 0; k < 2 * N; ++k) s[k] = f.dirichlet[k] ? -1.0 : 1.0;
    return s;
}
}  // namespace detail

template <int N>
struct CellGradient {
    int m = 0;
    std::vector<double> g;  // cells × N × N, row-major per cell

    double at(std::size_t cell, int d, int k) const { return g[cell * N * N + d * N + k]; }
};

template <int N>
void cell_gradient_apply(const GridField<N>& f, std::vector<double>& g) {
    const int m = f.m;
    const auto gs = detail::ghost_signs(f);
    const double ih = 1.0 / f.h;
    const auto cells = cell_lattice<N>(m);
    g.assign(cells.size() * N * N, 0.0);
    for (int d = 0; d < N; ++d) {
        const auto lat = face_lattice<N>(m, d);
        const std::size_t sd = lat.stride(d);
        const auto& c = f.comp[d];
        for (std::size_t cell = 0; cell < cells.size(); ++cell) {
            const auto i = cells.unravel(cell);
            const std::size_t j = lat.index(i);
            double* gc = &g[cell * N * N + d * N];
            gc[d] = ih * (c[j + sd] - c[j]);
            for (int k = 0; k < N; ++k) {
                if (k == d) continue;
                const std::size_t sk = lat.stride(k);
                const double here = 0.5 * (c[j] + c[j + sd]);
                const double up = i[k] + 1 < m ? 0.5 * (c[j + sk] + c[j + sk + sd]) : gs[2 * k + 1] * here;
                const double dn = i[k] > 0 ? 0.5 * (c[j - sk] + c[j - sk + sd]) : gs[2 * k] * here;
                gc[k] = 0.5 * ih * (up - dn);
            }
        }
    }
}

/// Adjoint of cell_gradient_apply.
template <int N>
void cell_gradient_transpose(const std::vector<double>& gg, GridField<N>& out) {
    const int m = out.m;
    const auto gs = detail::ghost_signs(out);
    const double ih = 1.0 / out.h;
    const auto cells = cell_lattice<N>(m);
    for (int d = 0; d < N; ++d) {
        const auto lat = face_lattice<N>(m, d);
        const std::size_t sd = lat.stride(d);
        auto& c = out.comp[d];
        c.assign(lat.size(), 0.0);
        for (std::size_t cell = 0; cell < cells.size(); ++cell) {
            const auto i = cells.unravel(cell);
            const std::size_t j = lat.index(i);
            const double* gc = &gg[cell * N * N + d * N];
            c[j + sd] += ih * gc[d];
            c[j] -= ih * gc[d];
            for (int k = 0; k < N; ++k) {
                if (k == d) continue;
                const std::size_t sk = lat.stride(k);
                const double w = 0.25 * ih * gc[k];  // weight per face value in (up − dn)/2 with averages
                if (i[k] + 1 < m) {
                    c[j + sk] += w;
                    c[j + sk + sd] += w;
                } else {
                    c[j] += gs[2 * k + 1] * w;
                    c[j + sd] += gs[2 * k + 1] * w;
                }
                if (i[k] > 0) {
                    c[j - sk] -= w;
                    c[j - sk + sd] -= w;
                } else {
                    c[j] -= gs[2 * k] * w;
                    c[j + sd] -= gs[2 * k] * w;
                }
            }
        }
    }
}

}  // namespace iqclab
