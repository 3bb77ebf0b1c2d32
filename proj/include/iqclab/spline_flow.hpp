#pragma once

// Smooth solenoidal velocities v = curl ψ with ψ a tensor cubic B-spline
// (knot spacing 1/m, only basis functions supported inside the unit box, so v
// and ∇v vanish on the boundary), and their RK4 flows with the variational
// equation J' = ∇v J. `flow_vjp` is the exact adjoint of the discrete flow.

#include <array>
#include <cmath>
#include <type_traits>
#include <vector>

#include "iqclab/errors.hpp"
#include "iqclab/matcore.hpp"

namespace iqclab {

namespace detail {

/// Uniform cubic B-spline on [0, 4]: value and first three derivatives.
inline std::array<double, 4> bspline3(double t) {
    if (t < 0.0 || t >= 4.0) return {0.0, 0.0, 0.0, 0.0};
    if (t < 1.0) return {t * t * t / 6.0, 0.5 * t * t, t, 1.0};
    if (t < 2.0) return {(-3 * t * t * t + 12 * t * t - 12 * t + 4) / 6.0, -1.5 * t * t + 4 * t - 2, -3 * t + 4, -3.0};
    if (t < 3.0) return {(3 * t * t * t - 24 * t * t + 60 * t - 44) / 6.0, 1.5 * t * t - 8 * t + 10, 3 * t - 8, 3.0};
    const double u = 4.0 - t;
    return {u * u * u / 6.0, -0.5 * u * u, u, -1.0};
}

/// v_i = Σ sign · ∂_j ψ_k over these terms.
struct CurlTerm {
    int i, j, k;
    double sign;
};

template <int N>
constexpr auto curl_terms() {
    if constexpr (N == 3) {
        return std::array<CurlTerm, 6>{
            {{0, 1, 2, 1.0}, {0, 2, 1, -1.0}, {1, 2, 0, 1.0}, {1, 0, 2, -1.0}, {2, 0, 1, 1.0}, {2, 1, 0, -1.0}}};
    } else {
        return std::array<CurlTerm, 2>{{{0, 1, 0, 1.0}, {1, 0, 0, -1.0}}};
    }
}

}  // namespace detail

template <int N>
struct VelocityJet {
    std::array<double, N> v{};
    Matrix<N> Dv{};                          // Dv(i, l) = ∂_l v_i
    std::array<Matrix<N>, N> D2v{};          // D2v[l](i, k) = ∂_l ∂_k v_i
};

template <int N>
class SplineVelocity {
public:
    static constexpr int kParts = N == 3 ? 3 : 1;
    static constexpr int kSlots = N == 3 ? 64 : 16;  // multi-index α, a_i ∈ [0, 3]

    explicit SplineVelocity(int m) : m_(m), nb_(m - 3) {
        if (m < 4) throw Error(ErrorKind::InvalidArgument, "spline velocity needs m >= 4");
        per_part_ = 1;
        for (int a = 0; a < N; ++a) per_part_ *= static_cast<std::size_t>(nb_);
    }

    int m() const { return m_; }
    std::size_t size() const { return kParts * per_part_; }

    void evaluate(const double* c, const std::array<double, N>& x, VelocityJet<N>& out, bool second) const {
        Local loc;
        locate(x, loc);
        std::array<std::array<double, kSlots>, kParts> jet{};
        const int maxo = second ? 3 : 2;
        for_local(loc, [&](std::size_t b, const std::array<int, N>& r) {
            for (int k = 0; k < kParts; ++k) {
                const double ck = c[k * per_part_ + b];
                if (ck == 0.0) continue;
                for (const auto& al : alphas(maxo)) jet[k][code(al)] += ck * basis(loc, r, al);
            }
        });
        out = VelocityJet<N>{};
        for (const auto& t : detail::curl_terms<N>()) {
            auto al = unit(t.j);
            out.v[t.i] += t.sign * jet[t.k][code(al)];
            for (int l = 0; l < N; ++l) {
                auto a2 = al;
                ++a2[l];
                out.Dv(t.i, l) += t.sign * jet[t.k][code(a2)];
                if (!second) continue;
                for (int q = 0; q < N; ++q) {
                    auto a3 = a2;
                    ++a3[q];
                    out.D2v[q](t.i, l) += t.sign * jet[t.k][code(a3)];
                }
            }
        }
    }

    /// Adjoint of (v, Dv·J) at x with respect to the coefficients: adds
    /// ⟨ā, ∂v/∂c⟩ + ⟨B̄, ∂(Dv J)/∂c⟩ into cbar.
    void scatter(const std::array<double, N>& x, const std::array<double, N>& abar, const Matrix<N>& M,
                 double* cbar) const {
        // M = B̄ Jᵀ, so ⟨B̄, Dv J⟩ = ⟨M, Dv⟩
        std::array<std::array<double, kSlots>, kParts> jbar{};
        for (const auto& t : detail::curl_terms<N>()) {
            auto al = unit(t.j);
            jbar[t.k][code(al)] += t.sign * abar[t.i];
            for (int l = 0; l < N; ++l) {
                auto a2 = al;
                ++a2[l];
                jbar[t.k][code(a2)] += t.sign * M(t.i, l);
            }
        }
        Local loc;
        locate(x, loc);
        for_local(loc, [&](std::size_t b, const std::array<int, N>& r) {
            for (int k = 0; k < kParts; ++k) {
                double s = 0.0;
                for (const auto& al : alphas(2)) {
                    const double w = jbar[k][code(al)];
                    if (w != 0.0) s += w * basis(loc, r, al);
                }
                cbar[k * per_part_ + b] += s;
            }
        });
    }

private:
    struct Local {
        std::array<std::array<int, 4>, N> b;                     // basis index per axis, −1 if absent
        std::array<std::array<std::array<double, 4>, 4>, N> B;  // B[a][r][order]
    };

    void locate(const std::array<double, N>& x, Local& loc) const {
        for (int a = 0; a < N; ++a) {
            const double s = x[a] * m_;
            const int cell = static_cast<int>(std::floor(s));
            for (int r = 0; r < 4; ++r) {
                const int b = cell - 3 + r;
                if (b < 0 || b >= nb_) {
                    loc.b[a][r] = -1;
                    loc.B[a][r] = {0, 0, 0, 0};
                    continue;
                }
                loc.b[a][r] = b;
                auto v = detail::bspline3(s - b);
                double sc = 1.0;
                for (int o = 0; o < 4; ++o, sc *= m_) v[o] *= sc;
                loc.B[a][r] = v;
            }
        }
    }

    template <class Fn>
    void for_local(const Local& loc, Fn&& fn) const {
        std::array<int, N> r{};
        const int total = 1 << (2 * N);
        for (int t = 0; t < total; ++t) {
            std::size_t b = 0;
            bool ok = true;
            for (int a = 0; a < N; ++a) {
                r[a] = (t >> (2 * a)) & 3;
                const int ba = loc.b[a][r[a]];
                if (ba < 0) {
                    ok = false;
                    break;
                }
                b = b * nb_ + ba;
            }
            if (ok) fn(b, r);
        }
    }

    static double basis(const Local& loc, const std::array<int, N>& r, const std::array<int, N>& al) {
        double p = 1.0;
        for (int a = 0; a < N; ++a) p *= loc.B[a][r[a]][al[a]];
        return p;
    }

    static int code(const std::array<int, N>& al) {
        int c = 0;
        for (int a = N - 1; a >= 0; --a) c = 4 * c + al[a];
        return c;
    }

    static std::array<int, N> unit(int j) {
        std::array<int, N> e{};
        e[j] = 1;
        return e;
    }

    /// Multi-indices with 1 ≤ |α| ≤ maxo (order 0 is never needed).
    static const std::vector<std::array<int, N>>& alphas(int maxo) {
        static const auto lists = [] {
            std::array<std::vector<std::array<int, N>>, 4> L;
            for (int c = 0; c < kSlots; ++c) {
                std::array<int, N> al{};
                int s = 0, t = c;
                for (int a = 0; a < N; ++a) al[a] = t % 4, s += al[a], t /= 4;
                for (int o = std::max(s, 1); o <= 3; ++o)
                    if (s >= 1) L[o].push_back(al);
            }
            return L;
        }();
        return lists[maxo];
    }

    int m_, nb_;
    std::size_t per_part_ = 1;
};

/// RK4 flow of a spline velocity for time t starting from x, carrying J' = ∇v J.
/// `tape` (optional) records the four stage inputs of every step for flow_vjp.
template <int N>
struct FlowTape {
    std::vector<std::array<double, N>> x;
    std::vector<Matrix<N>> J;
};

template <int N>
void spline_flow(const SplineVelocity<N>& sv, const double* c, std::type_identity_t<std::array<double, N>>& x,
                 Matrix<N>& J, double t,
                 int steps, FlowTape<N>* tape = nullptr) {
    const double dt = t / steps;
    VelocityJet<N> jet;
    if (tape) {
        tape->x.resize(4 * steps);
        tape->J.resize(4 * steps);
    }
    for (int s = 0; s < steps; ++s) {
        std::array<std::array<double, N>, 4> kx;
        std::array<Matrix<N>, 4> kJ;
        std::array<double, N> xs = x;
        Matrix<N> Js = J;
        for (int st = 0; st < 4; ++st) {
            if (st > 0) {
                const double w = st == 3 ? dt : 0.5 * dt;
                for (int a = 0; a < N; ++a) xs[a] = x[a] + w * kx[st - 1][a];
                Js = J + w * kJ[st - 1];
            }
            if (tape) {
                tape->x[4 * s + st] = xs;
                tape->J[4 * s + st] = Js;
            }
            sv.evaluate(c, xs, jet, false);
            kx[st] = jet.v;
            kJ[st] = jet.Dv * Js;
        }
        for (int a = 0; a < N; ++a) x[a] += dt / 6.0 * (kx[0][a] + 2 * kx[1][a] + 2 * kx[2][a] + kx[3][a]);
        J += (dt / 6.0) * (kJ[0] + 2.0 * kJ[1] + 2.0 * kJ[2] + kJ[3]);
    }
}

/// Reverse sweep: given ∂E/∂x_final, ∂E/∂J_final, accumulates ∂E/∂c into cbar.
template <int N>
void flow_vjp(const SplineVelocity<N>& sv, const double* c, const FlowTape<N>& tape, double t, int steps,
              std::type_identity_t<std::array<double, N>> lx, Matrix<N> lJ, double* cbar) {
    const double dt = t / steps;
    VelocityJet<N> jet;
    for (int s = steps - 1; s >= 0; --s) {
        std::array<std::array<double, N>, 4> kbx{};
        std::array<Matrix<N>, 4> kbJ{};
        const double wk[4] = {dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0};
        for (int st = 0; st < 4; ++st) {
            for (int a = 0; a < N; ++a) kbx[st][a] = wk[st] * lx[a];
            kbJ[st] = wk[st] * lJ;
        }
        for (int st = 3; st >= 0; --st) {
            const auto& xs = tape.x[4 * s + st];
            const auto& Js = tape.J[4 * s + st];
            sv.evaluate(c, xs, jet, true);
            const auto& ab = kbx[st];
            const auto& Bb = kbJ[st];
            // stage input adjoints
            std::array<double, N> xb{};
            for (int l = 0; l < N; ++l) {
                double acc = 0.0;
                for (int i = 0; i < N; ++i) acc += ab[i] * jet.Dv(i, l);
                xb[l] = acc;
            }
            const Matrix<N> M = Bb * Js.transpose();  // ⟨B̄, Dv J⟩ = ⟨M, Dv⟩
            for (int l = 0; l < N; ++l) {
                double acc = 0.0;
                for (int i = 0; i < N; ++i)
                    for (int k = 0; k < N; ++k) acc += M(i, k) * jet.D2v[l](i, k);
                xb[l] += acc;
            }
            const Matrix<N> Jb = jet.Dv.transpose() * Bb;
            sv.scatter(xs, ab, M, cbar);
            for (int a = 0; a < N; ++a) lx[a] += xb[a];
            lJ += Jb;
            if (st > 0) {
                const double w = st == 3 ? dt : 0.5 * dt;
                for (int a = 0; a < N; ++a) kbx[st - 1][a] += w * xb[a];
                kbJ[st - 1] += w * Jb;
            }
        }
    }
}

}  // namespace iqclab
