#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "iqclab/divfree.hpp"

using namespace iqclab;

namespace {

template <int N>
Potential<N> random_potential(int m, std::uint64_t seed, int margin = 0) {
    const PotentialLayout<N> pl(m);
    Potential<N> p{m, std::vector<double>(pl.total, 0.0)};
    Rng rng(seed);
    for (auto k : pl.free_indices(margin)) p.values[k] = rng.normal() / m;  // O(1) curl values
    return p;
}

template <int N>
double inner(const GridField<N>& a, const GridField<N>& b) {
    double s = 0.0;
    for (int d = 0; d < N; ++d)
        for (std::size_t k = 0; k < a.comp[d].size(); ++k) s += a.comp[d][k] * b.comp[d][k];
    return s;
}

template <int N>
GridField<N> random_faces(int m, std::uint64_t seed) {
    GridField<N> f = GridField<N>::zeros(m, false);
    Rng rng(seed);
    for (auto& c : f.comp)
        for (auto& v : c) v = rng.normal();
    return f;
}

}  // namespace

TEST(Lattice, IndexRoundTrip) {
    const auto l = face_lattice<3>(5, 1);
    for (std::size_t k = 0; k < l.size(); ++k) EXPECT_EQ(l.index(l.unravel(k)), k);
    EXPECT_EQ(l.size(), 5u * 6u * 5u);
}

TEST(Divergence, ZeroCurlAndLinear) {
    EXPECT_EQ(discrete_div(GridField<3>::zeros(6)).max_abs(), 0.0);
    for (std::uint64_t s = 0; s < 5; ++s) {
        EXPECT_LE(discrete_div(discrete_curl(random_potential<3>(7, s))).max_abs(), 1e-13);
        EXPECT_LE(discrete_div(discrete_curl(random_potential<2>(9, s))).max_abs(), 1e-13);
    }
    const auto f = GridField<3>::sample(8, [](const Vec3& x) { return x; });
    const auto dv = discrete_div(f);
    for (double v : dv.values) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST(Divergence, CurlFieldsRespectMask) {
    const auto f = discrete_curl(random_potential<3>(6, 1));
    EXPECT_TRUE(f.mask_ok());
    const auto g = discrete_curl(random_potential<2>(6, 1));
    EXPECT_TRUE(g.mask_ok());
}

TEST(Stencils, CurlAndCellGradientAdjoints) {
    for (int m : {4, 7}) {
        const PotentialLayout<3> pl(m);
        Rng rng(m);
        std::vector<double> psi(pl.total);
        for (auto& v : psi) v = rng.normal();
        GridField<3> cpsi = GridField<3>::zeros(m, false);
        curl_apply(pl, psi.data(), cpsi);
        const auto phi = random_faces<3>(m, 9);
        std::vector<double> back(pl.total, 0.0);
        curl_transpose(pl, phi, back.data());
        double lhs = inner(cpsi, phi), rhs = 0.0;
        for (std::size_t k = 0; k < psi.size(); ++k) rhs += psi[k] * back[k];
        EXPECT_NEAR(lhs, rhs, 1e-10 * (1 + std::abs(lhs)));

        std::vector<double> g;
        cell_gradient_apply(phi, g);
        std::vector<double> w(g.size());
        for (auto& v : w) v = rng.normal();
        GridField<3> gt = GridField<3>::zeros(m, false);
        cell_gradient_transpose(w, gt);
        double a = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) a += g[k] * w[k];
        EXPECT_NEAR(a, inner(phi, gt), 1e-10 * (1 + std::abs(a)));
    }
    const PotentialLayout<2> pl(6);
    std::vector<double> psi(pl.total);
    Rng rng(3);
    for (auto& v : psi) v = rng.normal();
    GridField<2> c = GridField<2>::zeros(6, false);
    curl_apply(pl, psi.data(), c);
    const auto phi = random_faces<2>(6, 4);
    std::vector<double> back(pl.total, 0.0);
    curl_transpose(pl, phi, back.data());
    double rhs = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) rhs += psi[k] * back[k];
    EXPECT_NEAR(inner(c, phi), rhs, 1e-10);
}

TEST(Stencils, CellGradientsAverageToZeroForCurlFields) {
    for (int margin : {0, 1}) {
        const auto f = discrete_curl(random_potential<3>(6, 5, margin));
        std::vector<double> g;
        cell_gradient_apply(f, g);
        std::array<double, 9> mean{};
        for (std::size_t k = 0; k < g.size(); ++k) mean[k % 9] += g[k];
        for (double v : mean) EXPECT_NEAR(v, 0.0, 1e-10);
        for (std::size_t c = 0; c < g.size() / 9; ++c)
            EXPECT_NEAR(g[9 * c] + g[9 * c + 4] + g[9 * c + 8], 0.0, 1e-12);
    }
}

TEST(Stencils, CellGradientExactForLinearFieldsInside) {
    const Matrix<3> a = Matrix<3>::from_row_major(std::array{1.0, 2.0, -0.5, 0.3, -1.0, 0.7, 0.2, 0.4, 0.0});
    const auto f = GridField<3>::sample(6, [&](const Vec3& x) { return a * x; });
    std::vector<double> g;
    cell_gradient_apply(f, g);
    const auto cells = cell_lattice<3>(6);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto i = cells.unravel(c);
        bool interior = true;
        for (int v : i) interior = interior && v > 0 && v < 5;
        if (!interior) continue;
        for (int d = 0; d < 3; ++d)
            for (int k = 0; k < 3; ++k) EXPECT_NEAR(g[9 * c + 3 * d + k], a(d, k), 1e-12);
    }
}

TEST(Bogovskii, FixedPointAndRejection) {
    const auto f = discrete_curl(random_potential<3>(8, 7));
    BogovskiiResult rep;
    const auto g = bogovskii_correct(f, &rep);
    for (int d = 0; d < 3; ++d)
        for (std::size_t k = 0; k < f.comp[d].size(); ++k) EXPECT_NEAR(g.comp[d][k], f.comp[d][k], 1e-10);
    const auto lin = GridField<3>::sample(8, [](const Vec3& x) { return x; });
    try {
        bogovskii_correct(lin);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonZeroMeanDivergence);
    }
}

TEST(Bogovskii, ZeroMeanSourceCorrected) {
    const double pi = std::numbers::pi;
    auto f = GridField<3>::sample(16, [&](const Vec3& x) {
        return Vec3{std::sin(pi * x[0]) * std::sin(2 * pi * x[1]) * std::cos(pi * x[2]), 0.0, 0.0};
    });
    f.dirichlet.fill(true);
    f.apply_mask();
    BogovskiiResult rep;
    const auto g = bogovskii_correct(f, &rep);
    EXPECT_LE(discrete_div(g).max_abs(), 1e-8);
    EXPECT_TRUE(g.mask_ok());
    EXPECT_GT(rep.div_norm, 0.1);
    EXPECT_LE(rep.correction_norm, rep.constant * rep.div_norm * (1 + 1e-12));
    EXPECT_LE(rep.constant, 1.0 / pi + 1e-3);
    const auto gg = bogovskii_correct(g);
    for (int d = 0; d < 3; ++d)
        for (std::size_t k = 0; k < g.comp[d].size(); ++k) EXPECT_NEAR(gg.comp[d][k], g.comp[d][k], 1e-10);
}

TEST(Bogovskii, TwoDimensions) {
    auto f = random_faces<2>(12, 3);
    f.dirichlet.fill(true);
    f.apply_mask();
    const auto g = bogovskii_correct(f);
    EXPECT_LE(discrete_div(g).max_abs(), 1e-8);
}

TEST(RandomSolenoidal, DivergenceDeterminismAndSupport) {
    const auto a = random_solenoidal<3>(8, 2.0, 11), b = random_solenoidal<3>(8, 2.0, 11);
    EXPECT_EQ(a, b);
    EXPECT_LE(discrete_div(a).max_abs(), 1e-13);
    EXPECT_FALSE(a == random_solenoidal<3>(8, 2.0, 12));
    const auto c = random_solenoidal<2>(8, 2.0, 11);
    EXPECT_LE(discrete_div(c).max_abs(), 1e-13);
}

TEST(RandomSolenoidal, SmoothnessShiftsEnergyToLowModes) {
    // Ratio ‖∇φ‖²/‖φ‖² (a mean squared wavenumber) falls as smoothness grows.
    auto ratio = [](double smoothness) {
        double acc = 0.0;
        for (std::uint64_t s = 0; s < 8; ++s) {
            const auto f = random_solenoidal<3>(16, smoothness, s);
            std::vector<double> g;
            cell_gradient_apply(f, g);
            double gn = 0.0;
            for (double v : g) gn += v * v;
            const double fn = f.norm();
            acc += gn * std::pow(f.h, 3) / (fn * fn);
        }
        return acc;
    };
    const double r0 = ratio(0.0), r2 = ratio(2.0), r4 = ratio(4.0);
    EXPECT_GT(r0, r2);
    EXPECT_GT(r2, r4);
}

TEST(Extension, ZeroCompactAndBoundaryFields) {
    const auto z = extend_solenoidal(GridField<3>::zeros(6), 10);
    for (const auto& c : z.comp)
        for (double v : c) EXPECT_EQ(v, 0.0);

    const auto f = random_solenoidal<3>(8, 2.0, 3);
    const auto e = extend_solenoidal(f, 12);
    EXPECT_EQ(e.m, 12);
    EXPECT_NEAR(e.origin[0], -2.0 / 8.0, 1e-15);
    for (int d = 0; d < 3; ++d) {
        const auto outer = e.lattice(d), inner = f.lattice(d);
        double inside = 0.0, outside = 0.0;
        for (std::size_t k = 0; k < outer.size(); ++k) {
            auto i = outer.unravel(k);
            bool in = true;
            for (int a = 0; a < 3; ++a) {
                in = in && i[a] >= 2 && i[a] <= (a == d ? 10 : 9);
                i[a] -= 2;
            }
            if (in) inside = std::max(inside, std::abs(e.comp[d][k] - f.comp[d][inner.index(i)]));
            else outside = std::max(outside, std::abs(e.comp[d][k]));
        }
        EXPECT_EQ(inside, 0.0);
        EXPECT_EQ(outside, 0.0);
    }

    // Curl of a potential that does not vanish on ∂Ω: nonzero boundary flux.
    SmoothPotential<3> sp(1.0, 9, 0.0);
    auto psi = sample_potential(sp, 8);
    const PotentialLayout<3> pl(8);
    GridField<3> g = GridField<3>::zeros(8, false);
    Rng rng(4);
    for (auto& v : psi.values) v += 0.1 * rng.normal();
    curl_apply(pl, psi.values.data(), g);
    ASSERT_LE(discrete_div(g).max_abs(), 1e-12);
    const auto ge = extend_solenoidal(g, 14);
    EXPECT_LE(discrete_div(ge).max_abs(), 1e-8);
    EXPECT_TRUE(ge.mask_ok());
    for (int d = 0; d < 3; ++d) {
        const auto outer = ge.lattice(d), inner = g.lattice(d);
        for (std::size_t k = 0; k < inner.size(); ++k) {
            auto i = inner.unravel(k);
            for (auto& v : i) v += 3;
            EXPECT_EQ(ge.comp[d][outer.index(i)], g.comp[d][k]);
        }
    }
    EXPECT_THROW(extend_solenoidal(g, 9), Error);
}

TEST(Flow, RigidRotationAndShear) {
    FunctionVelocity<3> rot([](const Vec3& x, Vec3& u, Matrix<3>* j) {
        u = {-x[1], x[0], 0.0};
        if (j) *j = Matrix<3>::from_row_major(std::array{0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0});
    });
    const double eps = 0.3;
    const auto r = flow_map(rot, 4, eps, 64);
    EXPECT_LE(r.det_residual, 1e-10);
    const auto nodes = node_lattice<3>(4);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto i = nodes.unravel(k);
        const double x = i[0] / 4.0, y = i[1] / 4.0;
        EXPECT_NEAR(x + r.displacement_map.values[k][0], std::cos(eps) * x - std::sin(eps) * y, 1e-9);
        EXPECT_NEAR(y + r.displacement_map.values[k][1], std::sin(eps) * x + std::cos(eps) * y, 1e-9);
    }
    FunctionVelocity<3> shear([](const Vec3& x, Vec3& u, Matrix<3>* j) {
        u = {x[1], 0.0, 0.0};
        if (j) {
            *j = Matrix<3>();
            (*j)(0, 1) = 1.0;
        }
    });
    const auto s = flow_map(shear, 4, eps, 4);
    EXPECT_LE(s.det_residual, 1e-15);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto i = nodes.unravel(k);
        EXPECT_NEAR(s.u_eps.values[k][0], i[1] / 4.0, 1e-14);
    }
    EXPECT_THROW(flow_map(shear, 4, eps, 2), Error);
}

TEST(Flow, FourthOrderDetResidualOnRandomFields) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto smp = random_solenoidal_sample<3>(16, 2.0, seed);
        SmoothCurlVelocity<3> u(smp.potential);
        const double r8 = flow_map(u, 8, 1.0, 8).det_residual;
        const double r16 = flow_map(u, 8, 1.0, 16).det_residual;
        EXPECT_GE(r8 / r16, 12.0);
        EXPECT_LE(flow_map(u, 8, 0.1, 32).det_residual, 1e-6);
    }
}

TEST(Flow, Reversible) {
    const auto smp = random_solenoidal_sample<3>(12, 2.0, 5);
    SmoothCurlVelocity<3> u(smp.potential);
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
        Vec3 x{rng.uniform(), rng.uniform(), rng.uniform()};
        const Vec3 x0 = x;
        Matrix<3> J = Matrix<3>::identity();
        flow_point(u, x, J, 0.2, 64);
        flow_point(u, x, J, -0.2, 64);
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(x[a], x0[a], 1e-8);
        EXPECT_LE(norm(Matrix<3>(J - Matrix<3>::identity())), 1e-8);
    }
}

TEST(Flow, MacInterpolantResidualShrinksWithH) {
    std::vector<double> res;
    for (int m : {16, 32, 64}) {
        // the same continuous potential at every resolution
        SmoothPotential<2> sp(3.0, 2, 0.25);
        sp.set_scale(0.05);
        const auto f = discrete_curl(sample_potential(sp, m));
        MacInterpolant<2> u(f);
        res.push_back(flow_map(u, 8, 0.3, 64).det_residual);
    }
    EXPECT_GT(res[0], res[1]);
    EXPECT_GT(res[1], res[2]);
    EXPECT_GE(res[0] / res[2], 2.0);
}

TEST(Flow, StepOutOfDomain) {
    const auto f = GridField<2>::sample(8, [](const Vec2&) { return Vec2{1.0, 0.0}; });
    MacInterpolant<2> u(f);
    try {
        flow_map(u, 4, 0.5, 8);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::StepOutOfDomain);
    }
}
