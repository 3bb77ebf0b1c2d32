// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "iqclab/cell_problem.hpp"
#include "iqclab/divfree.hpp"
#include "iqclab/envelopes.hpp"
#include "iqclab/solver.hpp"

using namespace iqclab;

namespace {

const std::array<double, 3> kRho{-1.0, 0.0, 1.0};

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

/// Sorted triple with zero sum.
std::array<double, 3> random_rho(Rng& rng) {
    std::array<double, 3> r{rng.normal(), rng.normal(), 0.0};
    r[2] = -r[0] - r[1];
    std::sort(r.begin(), r.end());
    return r;
}

Matrix<3> with_spectrum(Rng& rng, const std::array<double, 3>& lam) {
    const auto R = random_rotation<3>(rng);
    return sym_part(Matrix<3>(R * Matrix<3>::diag(lam) * R.transpose()));
}

/// Spectrum inside [rho1, rho3], summing to zero (rejection sampling).
std::array<double, 3> region1_spectrum(Rng& rng, const std::array<double, 3>& rho) {
    for (;;) {
        std::array<double, 3> l{rng.uniform(rho[0], rho[2]), rng.uniform(rho[0], rho[2]), 0.0};
        l[2] = -l[0] - l[1];
        std::sort(l.begin(), l.end());
        if (l[0] >= rho[0] && l[2] <= rho[2]) return l;
    }
}

/// λ = ρ + d with d ascending and traceless, so λ_i − ρ_i is ordered.
std::array<double, 3> region3_spectrum(Rng& rng, const std::array<double, 3>& rho) {
    std::array<double, 3> d{rng.normal(), rng.normal(), 0.0};
    d[2] = -d[0] - d[1];
    std::sort(d.begin(), d.end());
    return {rho[0] + d[0], rho[1] + d[1], rho[2] + d[2]};
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) mx += std::log(x[k]), my += std::log(y[k]);
    mx /= x.size(), my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
        sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
    }
    return sxy / sxx;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
    Outcome o;
    Rng rng(101);
    std::vector<std::array<double, 3>> rhos{kRho};
    while (rhos.size() < 20) rhos.push_back(random_rho(rng));
    double worst = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const auto& rho = rhos[k % 20];
        const auto z = random_ils<3>(rng, rng.uniform(0.1, 2.0));
        const double a = nematic_V_iqc(rho, z).value(), b = nematic_V_iqc_alt(rho, z).value();
        worst = std::max(worst, std::abs(a - b));
    }
    o.require(worst <= 1e-10, "max |iqc - alt| <= 1e-10");
    o.note("max |iqc - alt| = " + fmt(worst) + " over 1e5 samples, 20 rho");
    return o;
}

Outcome criterion2() {
    Outcome o;
    Rng rng(202);
    double slack = 0.0, eq3 = 0.0, zero1 = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const auto rho = k % 2 ? random_rho(rng) : kRho;
        const auto z1 = with_spectrum(rng, region1_spectrum(rng, rho));
        const auto z3 = with_spectrum(rng, region3_spectrum(rng, rho));
        const auto zg = random_ils<3>(rng, rng.uniform(0.0, 3.0));
        const auto model = make_nematic(rho);
        for (const auto& z : {z1, z3, zg})
            slack = std::min(slack, eval_V(model, z).value() - nematic_V_iqc(rho, z).value());
        const auto e3 = nematic_V_iqc_eval(rho, z3);
        const double v3 = eval_V(model, z3).value();
        eq3 = std::max(eq3, std::abs(e3.value.value() - v3) / (1.0 + v3));
        zero1 = std::max(zero1, std::abs(nematic_V_iqc(rho, z1).value()));
    }
    o.require(slack >= -1e-10, "V - V_iqc >= -1e-10");
    o.require(eq3 <= 1e-10, "equality on region 3");
    o.require(zero1 <= 1e-10, "zero on region 1");
    o.note("min slack " + fmt(slack) + ", region-3 rel. mismatch " + fmt(eq3) + ", region-1 max " + fmt(zero1));
    return o;
}

Outcome criterion3() {
    Outcome o;
    Rng rng(303);
    const std::vector<double> eps{0.1, 0.05, 0.025};
    double min_order = std::numeric_limits<double>::infinity(), worst_final = 0.0;
    int exact = 0;
    for (int k = 0; k < 50; ++k) {
        const double r = 2.0 * std::cbrt(rng.uniform());
        Matrix<3> z = random_ils<3>(rng);
        z = Matrix<3>((r / norm(z)) * z);
        const auto t = scaled_qc_limit(kRho, IlsMatrix<3>::unchecked(z), eps);
        std::vector<double> gaps;
        for (const auto& row : t.rows) gaps.push_back(std::abs(row.value - t.limit));
        worst_final = std::max(worst_final, gaps.back() / (1.0 + t.limit));
        if (gaps.back() <= 1e-12) {
            ++exact;  // already exact at every eps: no order to measure
            continue;
        }
        min_order = std::min(min_order, slope(eps, gaps));
    }
    o.require(min_order >= 0.8, "empirical order >= 0.8");
    o.require(worst_final <= 0.15, "final gap <= 0.15 (1 + value)");
    o.note("min order " + fmt(min_order) + " (" + std::to_string(exact) + " exact cases), worst final rel. gap " +
           fmt(worst_final));
    return o;
}

Outcome criterion4() {
    Outcome o;
    const auto rows = check_condition_C<3>(make_nematic(kRho), {}, 2.0, {0.1, 0.05, 0.025}, 10000, 404);
    std::string s = "sup deviations";
    for (const auto& r : rows) s += " " + fmt(r.sup_deviation);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double ratio = rows[k - 1].sup_deviation / rows[k].sup_deviation;
        o.require(ratio >= 1.5 && ratio <= 2.5, "ratio in [1.5, 2.5]");
        s += (k == 1 ? ", ratios " : " ") + fmt(ratio);
    }
    o.note(s);
    return o;
}

Outcome criterion5() {
    Outcome o;
    double worst32 = 0.0, min_ratio = std::numeric_limits<double>::infinity();
    int measured = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto smp = random_solenoidal_sample<3>(16, 2.0, 500 + seed);
        const SmoothCurlVelocity<3> u(smp.potential);
        // residuals at ε = 0.1 for 8, 16, 32 and 64 steps; each consecutive pair is one doubling
        double prev = flow_map(u, 16, 0.1, 8).det_residual;
        for (int steps : {16, 32, 64}) {
            const double r = flow_map(u, 16, 0.1, steps).det_residual;
            if (steps == 32) worst32 = std::max(worst32, r);
            if (r > 1e-12) {
                ++measured;
                min_ratio = std::min(min_ratio, prev / r);
            }
            prev = r;
        }
    }
    o.require(worst32 <= 1e-6, "residual <= 1e-6 at 32 steps");
    o.require(measured > 0, "some doubling above the floor");
    o.require(min_ratio >= 12.0, "doubling ratio >= 12");
    o.note("max residual (eps 0.1, 32 steps) " + fmt(worst32) + ", min doubling ratio " + fmt(min_ratio) + " over " +
           std::to_string(measured) + " pairs");
    return o;
}

Outcome criterion6() {
    Outcome o;
    double worst_div = 0.0, C = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        GridField<3> f = random_solenoidal<3>(16, 2.0, 600 + seed);
        Rng rng(seed);
        // interior-face noise keeps the boundary flux, hence the mean divergence, at zero
        for (int d = 0; d < 3; ++d) {
            const auto lat = f.lattice(d);
            for (std::size_t k = 0; k < lat.size(); ++k) {
                const auto i = lat.unravel(k);
                if (i[d] > 0 && i[d] < 16) f.comp[d][k] += 0.1 * rng.normal();
            }
        }
        f.dirichlet.fill(true);
        BogovskiiResult rep;
        const auto g = bogovskii_correct(f, &rep);
        worst_div = std::max(worst_div, discrete_div(g).max_abs());
        C = std::max(C, rep.correction_norm / rep.div_norm);
    }
    o.require(worst_div <= 1e-8, "max |div| <= 1e-8");
    o.require(C <= 20.0, "C <= 20");
    o.note("max |div g| " + fmt(worst_div) + ", fitted C " + fmt(C));
    return o;
}

CellProblem<3> nematic_cell(const Matrix<3>& z, int m) {
    CellProblem<3> p;
    p.density = nematic_V_density(kRho);
    p.base_point = z;
    p.m = m;
    return p;
}

Outcome criterion7_8(Outcome& c8) {
    Outcome o;
    const auto r8 = numerical_iqc(nematic_cell(Matrix<3>{}, 8));
    const auto r12 = numerical_iqc(nematic_cell(Matrix<3>{}, 12));
    const Matrix<3> z3 = Matrix<3>::diag({-2.0, 0.0, 2.0});
    const auto r3 = numerical_iqc(nematic_cell(z3, 8));
    const double f3 = nematic_V_unchecked(kRho, z3);
    o.require(r8.value <= 2.0, "m = 8 value <= 2.0");
    o.require(r12.value <= 1.2, "m = 12 value <= 1.2");
    o.require(r3.value >= f3 - 5e-3, "region 3 stays >= f(Z) - 5e-3");
    o.note("Z = 0: " + fmt(r8.value) + " (m 8), " + fmt(r12.value) + " (m 12); region 3: " + fmt(r3.value) +
           " vs f = " + fmt(f3));

    c8 = Outcome{};
    const auto rows = penalized_iqc<3>(nematic_V_density(kRho), Matrix<3>{}, {1, 4, 16, 64, 256}, 8);
    std::string s = "ladder";
    double dip = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        s += " " + fmt(rows[k].value);
        if (k > 0) dip = std::max(dip, rows[k - 1].value - rows[k].value);
    }
    c8.require(dip <= 1e-2, "monotone within 1e-2");
    const double diff = std::abs(rows.back().value - r8.value);
    c8.require(diff <= 5e-2, "final within 5e-2 of numerical_iqc");
    c8.note(s + "; |final - iqc| = " + fmt(diff) + " (iqc " + fmt(r8.value) + ", Z = 0, m = 8)");
    return o;
}

Outcome criterion9() {
    Outcome o;
    ExperimentConfig<3> cfg;
    cfg.m = 8;
    cfg.Z_bc = Matrix<3>::diag({0.3, -0.3, 0.0});
    const auto rep = convergence_experiment(cfg);
    const double analytic = dot(cfg.Z_bc, cfg.Z_bc);
    std::string s = "gaps";
    for (std::size_t k = 0; k < rep.gap.size(); ++k) {
        s += " " + fmt(rep.gap[k]);
        if (k > 0) o.require(std::abs(rep.gap[k]) < std::abs(rep.gap[k - 1]), "gap decreasing");
        o.require(rep.nonlinear[k].det_residual <= kDetResidualBudget, "det residual within budget");
    }
    o.require(std::abs(rep.gap.back()) <= 5e-2 * (1.0 + rep.relaxed.energy), "final gap <= 5e-2 (1 + min F_rel)");
    o.require(std::abs(rep.relaxed.energy - analytic) <= 5e-3, "min F_rel matches the affine value");
    o.note(s + "; min F_rel " + fmt(rep.relaxed.energy) + " vs " + fmt(analytic) + ", order " + fmt(rep.order));
    return o;
}

template <class T>
bool same_bytes(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

Outcome criterion10() {
    Outcome o;
    Rng rng(1010);
    Well<3> w1{Matrix<3>::identity(), Matrix<3>::diag({0.2, -0.2, 0.0}), 0.0};
    Well<3> w2{Matrix<3>::diag({2.0, 1.0, 0.5}), Matrix<3>::diag({-0.1, 0.0, 0.1}), 0.05};
    const std::vector<DensityModel<3>> models{make_nematic(kRho), make_multiwell<3>({w1, w2}), make_singlewell_dist2<3>()};

    double frame = 0.0;
    for (const auto& model : models)
        for (int k = 0; k < 100; ++k) {
            Matrix<3> x = matrix_exp(Matrix<3>(0.5 * random_dev<3>(rng)));
            const auto R = random_rotation<3>(rng);
            const double a = eval_W(model, 0.1, x).value(), b = eval_W(model, 0.1, Matrix<3>(R * x)).value();
            frame = std::max(frame, std::abs(a - b));
        }
    o.require(frame <= 1e-9, "frame indifference of W");

    double skew = 0.0;
    for (const auto& model : models)
        for (int k = 0; k < 100; ++k) {
            const auto z = random_dev<3>(rng);
            const auto s = sym_part(z);
            const auto v = eval_V(model, s).value();
            skew = std::max(skew, std::abs(eval_V(model, z).value() - v));
            skew = std::max(skew, std::abs(eval_V(model, Matrix<3>(s + skew_part(random_matrix<3>(rng)))).value() - v));
        }
    o.require(skew <= 1e-9, "V sees only the symmetric part");

    double rot = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto z = random_ils<3>(rng, 1.5);
        const auto R = random_rotation<3>(rng);
        rot = std::max(rot, std::abs(nematic_V_iqc(kRho, z).value() -
                                     nematic_V_iqc(kRho, Matrix<3>(R * z * R.transpose())).value()));
    }
    o.require(rot <= 1e-9, "rotation invariance of V_iqc");

    // seeded operations rerun byte-identically
    bool det = true;
    auto cp = nematic_cell(Matrix<3>::diag({-0.5, 0.0, 0.5}), 6);
    cp.optimizer.seed = 77;
    cp.optimizer.max_iters = 60;
    const auto a = numerical_iqc(cp), b = numerical_iqc(cp);
    det &= std::memcmp(&a.value, &b.value, sizeof(double)) == 0;
    for (int d = 0; d < 3; ++d) det &= same_bytes(a.field.comp[d], b.field.comp[d]);
    const auto c1 = check_condition_C<3>(models[0], {}, 2.0, {0.1}, 2000, 9);
    const auto c2 = check_condition_C<3>(models[0], {}, 2.0, {0.1}, 2000, 9);
    det &= std::memcmp(&c1[0].sup_deviation, &c2[0].sup_deviation, sizeof(double)) == 0;
    const auto g1 = random_solenoidal<3>(8, 2.0, 5), g2 = random_solenoidal<3>(8, 2.0, 5);
    for (int d = 0; d < 3; ++d) det &= same_bytes(g1.comp[d], g2.comp[d]);
    ExperimentConfig<3> cfg;
    cfg.m = 4;
    cfg.model = models[0];
    cfg.Z_bc = Matrix<3>::diag({-0.5, 0.0, 0.5});
    cfg.eps_list = {0.2, 0.1};
    cfg.eps_restarts = 1;
    cfg.optimizer.max_iters = 20;
    cfg.seed = 3;
    const auto e1 = convergence_experiment(cfg, 1), e2 = convergence_experiment(cfg, 2);
    for (std::size_t k = 0; k < e1.nonlinear.size(); ++k)
        det &= same_bytes(e1.nonlinear[k].coefficients, e2.nonlinear[k].coefficients) &&
               std::memcmp(&e1.gap[k], &e2.gap[k], sizeof(double)) == 0;
    o.require(det, "byte-identical reruns");
    o.note("frame " + fmt(frame) + ", skew " + fmt(skew) + ", rotation " + fmt(rot) + ", determinism " + (det ? "ok" : "broken"));
    return o;
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* title;
        double budget_s;  // runtime limit, 0 = none
    };
    const std::vector<Entry> entries{
        {1, "envelope formula agreement", 5},      {2, "envelope ordering", 0},
        {3, "scaling limit of the qc envelope", 10}, {4, "condition (C) rate", 30},
        {5, "incompressible flow exactness", 60},  {6, "Bogovskii correction", 0},
        {7, "cell-problem descent", 300},          {8, "penalized ladder", 0},
        {9, "Gamma-convergence evidence", 300},    {10, "invariance suite", 0},
    };
    std::vector<Outcome> results(11);
    std::vector<double> seconds(11, 0.0);
    auto timed = [&](int id, const std::function<Outcome()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            results[id] = fn();
        } catch (const std::exception& e) {
            results[id].pass = false;
            results[id].detail = std::string("exception: ") + e.what();
        }
        seconds[id] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    timed(1, criterion1);
    timed(2, criterion2);
    timed(3, criterion3);
    timed(4, criterion4);
    timed(5, criterion5);
    timed(6, criterion6);
    results[8] = {false, "not run"};
    timed(7, [&] { return criterion7_8(results[8]); });
    timed(9, criterion9);
    timed(10, criterion10);

    int failed = 0;
    for (const auto& e : entries) {
        auto& r = results[e.id];
        if (e.budget_s > 0) r.require(seconds[e.id] < e.budget_s, "runtime < " + fmt(e.budget_s) + " s");
        const std::string time = e.id == 8 ? "(timed with 7)" : fmt(seconds[e.id]) + " s";
        std::printf("criterion %d %s  %s: %s [%s]\n", e.id, r.pass ? "PASS" : "FAIL", e.title, r.detail.c_str(),
                    time.c_str());
        failed += !r.pass;
    }
    std::printf("%d/10 criteria passed\n", 10 - failed);
    return failed ? 1 : 0;
}
