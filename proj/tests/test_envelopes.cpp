#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "iqclab/envelopes.hpp"

using namespace iqclab;

namespace {

const std::array<double, 3> kRho{-1.0, 0.0, 1.0};

std::array<double, 3> random_rho(Rng& rng) {
    std::array<double, 3> r{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), 0.0};
    r[2] = -r[0] - r[1];
    std::sort(r.begin(), r.end());
    r[1] = -r[0] - r[2];
    return r;
}

Matrix<3> with_spectrum(Rng& rng, std::array<double, 3> lam) {
    const double mean = (lam[0] + lam[1] + lam[2]) / 3.0;
    for (auto& l : lam) l -= mean;
    const auto q = random_rotation<3>(rng);
    return sym_part(Matrix<3>(q * Matrix<3>::diag(lam) * q.transpose()));
}

// The four branch formulas, evaluated unconditionally.
std::array<double, 4> branch_values(const std::array<double, 3>& d) {
    return {0.0, 3.0 * d[0] * d[0], 2.0 * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]), 3.0 * d[2] * d[2]};
}

}  // namespace

TEST(NematicIqc, DocumentedPoints) {
    auto e = nematic_V_iqc_eval(kRho, Matrix<3>::diag({-0.5, 0.0, 0.5}));
    EXPECT_EQ(e.region, 1);
    EXPECT_EQ(e.value.value(), 0.0);
    e = nematic_V_iqc_eval(kRho, Matrix<3>::diag({-2.0, 0.0, 2.0}));
    EXPECT_EQ(e.region, 3);
    EXPECT_NEAR(e.value.value(), 4.0, 1e-13);
    e = nematic_V_iqc_eval(kRho, Matrix<3>::diag({-3.0, 1.0, 2.0}));
    EXPECT_EQ(e.region, 2);
    EXPECT_NEAR(e.value.value(), 12.0, 1e-12);
    EXPECT_NEAR(nematic_V_iqc_alt(kRho, Matrix<3>::diag({-3.0, 1.0, 2.0})).value(), 12.0, 1e-12);
    EXPECT_NEAR(nematic_V_iqc_alt(kRho, Matrix<3>::diag(kRho)).value(), 0.0, 1e-15);
    EXPECT_TRUE(nematic_V_iqc(kRho, Matrix<3>::diag({1.0, 0.0, 0.0})).is_infinite());
}

TEST(NematicIqc, AlternativeFormAgrees) {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto rho = random_rho(rng);
        for (int k = 0; k < 2000; ++k) {
            const Matrix<3> z = random_ils<3>(rng, rng.uniform(0.1, 2.0));
            EXPECT_NEAR(nematic_V_iqc(rho, z).value(), nematic_V_iqc_alt(rho, z).value(), 1e-10);
        }
    }
}

TEST(NematicIqc, BelowVWithEqualityOnRegionThreeAndZeroOnRegionOne) {
    Rng rng(2);
    const auto m = make_nematic(kRho);
    for (int k = 0; k < 5000; ++k) {
        const Matrix<3> z = random_ils<3>(rng, 1.5);
        EXPECT_LE(nematic_V_iqc(kRho, z).value(), eval_V(m, z).value() + 1e-10);
    }
    for (int k = 0; k < 2000; ++k) {
        // region 1: spectrum inside [ρ1, ρ3]
        std::array<double, 3> lam{rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0};
        lam[2] = -lam[0] - lam[1];
        if (std::abs(lam[2]) > 1.0) continue;
        const auto z = with_spectrum(rng, lam);
        const auto e = nematic_V_iqc_eval(kRho, z);
        EXPECT_EQ(e.region, 1);
        EXPECT_EQ(e.value.value(), 0.0);
    }
    for (int k = 0; k < 2000; ++k) {
        // region 3: d ascending
        std::array<double, 3> d{rng.uniform(-2, 2), rng.uniform(-2, 2), 0.0};
        d[2] = -d[0] - d[1];
        std::sort(d.begin(), d.end());
        const auto z = with_spectrum(rng, {kRho[0] + d[0], kRho[1] + d[1], kRho[2] + d[2]});
        EXPECT_NEAR(nematic_V_iqc(kRho, z).value(), eval_V(m, z).value(), 1e-10);
    }
}

TEST(NematicIqc, RegionOneDescriptionsCoincide) {
    // λ1 ≥ ρ1 and λ3 ≤ ρ3 is the same as σ(Z) ⊂ [ρ1, ρ3].
    Rng rng(3);
    for (int k = 0; k < 5000; ++k) {
        const auto rho = random_rho(rng);
        const Matrix<3> z = random_ils<3>(rng);
        const auto lam = sym_eigenvalues(project_sym(z));
        const bool first = lam[0] >= rho[0] && lam[2] <= rho[2];
        const bool second = std::all_of(lam.begin(), lam.end(), [&](double l) { return l >= rho[0] && l <= rho[2]; });
        EXPECT_EQ(first, second);
    }
}

TEST(NematicIqc, BranchesAgreeOnRegionBoundaries) {
    Rng rng(4);
    for (int k = 0; k < 5000; ++k) {
        const auto rho = random_rho(rng);
        const double s = rng.uniform(0.0, 2.0);
        std::array<double, 3> d;
        int a, b;
        switch (k % 4) {
            case 0: d = {-2 * s, s, s}, a = 2, b = 3; break;     // d2 = d3, d1 ≤ 0
            case 1: d = {-s, -s, 2 * s}, a = 3, b = 4; break;    // d1 = d2, d3 ≥ 0
            case 2: d = {0.0, s, -s}, a = 1, b = 2; break;       // d1 = 0, d3 ≤ d2
            default: d = {s, -s, 0.0}, a = 1, b = 4; break;      // d3 = 0, d2 ≤ d1
        }
        const auto v = branch_values(d);
        EXPECT_NEAR(v[a - 1], v[b - 1], 1e-9 * (1 + v[a - 1]));
        std::array<double, 3> lam{rho[0] + d[0], rho[1] + d[1], rho[2] + d[2]};
        if (!(lam[0] <= lam[1] && lam[1] <= lam[2])) continue;
        const auto z = with_spectrum(rng, lam);
        EXPECT_NEAR(nematic_V_iqc(rho, z).value(), v[a - 1], 1e-9 * (1 + v[a - 1]));
    }
}

TEST(NematicIqc, RotationInvariant) {
    Rng rng(5);
    for (int k = 0; k < 1000; ++k) {
        const Matrix<3> z = random_ils<3>(rng, 2.0);
        const auto q = random_rotation<3>(rng);
        const Matrix<3> qz = q.transpose() * z * q;
        EXPECT_NEAR(nematic_V_iqc(kRho, z).value(), nematic_V_iqc(kRho, qz).value(), 1e-10);
    }
}

TEST(NematicIqc, GradientMatchesFiniteDifferences) {
    Rng rng(6);
    for (int k = 0; k < 300; ++k) {
        const Matrix<3> z = random_ils<3>(rng, 2.0);
        Matrix<3> g;
        const double v = nematic_V_iqc_grad(kRho, z, g);
        EXPECT_NEAR(v, nematic_V_iqc(kRho, z).value(), 1e-12);
        const Matrix<3> dir = random_ils<3>(rng);
        const double h = 1e-6;
        const double fd = (nematic_V_iqc(kRho, Matrix<3>(z + h * dir)).value() -
                           nematic_V_iqc(kRho, Matrix<3>(z - h * dir)).value()) / (2 * h);
        EXPECT_NEAR(dot(g, dir), fd, 1e-5 * (1 + std::abs(fd)));
        Matrix<3> gv;
        const double vv = nematic_V_grad(kRho, z, gv);
        const double fdv = (nematic_V_unchecked(kRho, Matrix<3>(z + h * dir)) -
                            nematic_V_unchecked(kRho, Matrix<3>(z - h * dir))) / (2 * h);
        EXPECT_NEAR(vv, nematic_V_unchecked(kRho, z), 1e-12);
        EXPECT_NEAR(dot(gv, dir), fdv, 1e-5 * (1 + std::abs(fdv)));
    }
}

TEST(NematicWqc, WellsIdentityAndBelowW) {
    const double eps = 0.1;
    const std::array<double, 3> g{std::exp(-eps), 1.0, std::exp(eps)};
    EXPECT_NEAR(nematic_W_qc(g, Matrix<3>::diag(g)).value(), 0.0, 1e-14);
    EXPECT_NEAR(nematic_W_qc({1.0, 1.0, 1.0}, Matrix<3>::identity()).value(), 0.0, 1e-15);
    EXPECT_TRUE(nematic_W_qc(g, Matrix<3>::diag({1.0, 1.0, 1.1})).is_infinite());
    const auto m = make_nematic(kRho);
    Rng rng(7);
    for (int k = 0; k < 5000; ++k) {
        const auto x = random_rotation<3>(rng) * matrix_exp(random_dev<3>(rng, 0.4));
        const double w = eval_W(m, eps, x).value();
        const double wq = nematic_W_qc(g, x).value();
        EXPECT_LE(wq, w + 1e-12);
        const auto s = singular_values(x);
        if (s[0] / g[0] <= s[1] / g[1] && s[1] / g[1] <= s[2] / g[2]) {
            EXPECT_NEAR(wq, w, 1e-12);
        }
        EXPECT_GE(wq, -1e-12);
    }
}

TEST(NematicWqc, ContinuousAcrossBranches) {
    // Along a fine path no increment stands out against its neighbours.
    const std::array<double, 3> g{std::exp(-0.1), 1.0, std::exp(0.1)};
    Rng rng(8);
    for (int path = 0; path < 20; ++path) {
        const Matrix<3> a = random_dev<3>(rng, 0.3), b = random_dev<3>(rng, 0.3);
        std::vector<double> v;
        for (int s = 0; s <= 2000; ++s) {
            const double t = s / 2000.0;
            v.push_back(nematic_W_qc(g, matrix_exp(Matrix<3>((1 - t) * a + t * b))).value());
        }
        for (std::size_t k = 1; k + 1 < v.size() - 1; ++k) {
            const double here = std::abs(v[k + 1] - v[k]);
            const double around = std::max(std::abs(v[k] - v[k - 1]), std::abs(v[k + 2] - v[k + 1]));
            EXPECT_LE(here, 3.0 * around + 1e-7);
        }
    }
}

TEST(ScaledQc, LimitsAndFirstOrderApproach) {
    const std::vector<double> eps{0.1, 0.05, 0.025};
    auto t = scaled_qc_limit(kRho, IlsMatrix<3>::checked(Matrix<3>::diag({-3.0, 1.0, 2.0})), eps);
    EXPECT_NEAR(t.limit, 12.0, 1e-12);
    std::vector<double> gaps;
    for (const auto& r : t.rows) gaps.push_back(std::abs(r.value - t.limit));
    for (int i = 0; i + 1 < 3; ++i) {
        EXPECT_GE(gaps[i] / gaps[i + 1], 1.6);
        EXPECT_LE(gaps[i] / gaps[i + 1], 2.4);
    }
    t = scaled_qc_limit(kRho, IlsMatrix<3>::checked(Matrix<3>::diag({-0.5, 0.0, 0.5})), eps);
    EXPECT_EQ(t.limit, 0.0);
    for (const auto& r : t.rows) EXPECT_NEAR(r.value, 0.0, 1e-12);
    t = scaled_qc_limit(kRho, IlsMatrix<3>::checked(Matrix<3>()), eps);
    EXPECT_EQ(t.limit, 0.0);
    t = scaled_qc_limit(kRho, IlsMatrix<3>::checked(Matrix<3>::diag({-2.0, 0.0, 2.0})), eps);
    EXPECT_NEAR(t.limit, 4.0, 1e-12);
    EXPECT_LT(std::abs(t.rows[2].value - 4.0), std::abs(t.rows[1].value - 4.0));
    EXPECT_LT(std::abs(t.rows[1].value - 4.0), std::abs(t.rows[0].value - 4.0));
}
