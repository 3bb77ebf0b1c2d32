#pragma once

// Batch front-end: one subcommand per operation, a JSON config in, a JSON or
// CSV artifact out. Every artifact embeds the resolved config (defaults
// expanded) and the seed. Exit codes: 0 ok, 2 invalid input, 3 numerical
// failure; errors go to stderr as a JSON object.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "iqclab/cell_problem.hpp"
#include "iqclab/divfree.hpp"
#include "iqclab/envelopes.hpp"
#include "iqclab/io.hpp"
#include "iqclab/solver.hpp"

namespace iqclab::cli {

using io::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

struct Invocation {
    std::string command;
    std::string config_path;
    std::string output;           // empty: stdout
    std::string format = "json";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string field_output;     // optional binary GridField dump
};

/// What a command produced; written only after the whole computation succeeded.
struct Artifact {
    json result = json::object();
    std::string csv_header;
    std::vector<std::vector<std::string>> csv_rows;
    std::optional<std::string> field_binary;
};

struct Context {
    const Invocation& inv;
    std::uint64_t seed;
};

namespace detail {

inline std::uint64_t env_seed() {
    const char* s = std::getenv("IQCLAB_SEED");
    if (!s || !*s) return 0;
    std::uint64_t v = 0;
    const auto r = std::from_chars(s, s + std::strlen(s), v);
    if (r.ec != std::errc() || *r.ptr != '\0') throw io::parse_error("IQCLAB_SEED is not an unsigned integer");
    return v;
}

/// --seed, then the config's "seed", then IQCLAB_SEED, then 0.
inline std::uint64_t resolve_seed(const Invocation& inv, const json& cfg) {
    if (inv.seed) return *inv.seed;
    if (cfg.is_object() && cfg.contains("seed")) {
        if (!cfg["seed"].is_number_unsigned()) throw io::parse_error("config.seed: expected an unsigned integer");
        return cfg["seed"].get<std::uint64_t>();
    }
    return env_seed();
}

/// A matrix or a list of matrices.
template <int N>
std::vector<Matrix<N>> matrices(const json& j, const std::string& what) {
    if (j.is_array() && !j.empty() && j[0].is_array()) {
        std::vector<Matrix<N>> out;
        for (const auto& e : j) out.push_back(io::matrix_from_json<N>(e, what));
        return out;
    }
    return {io::matrix_from_json<N>(j, what)};
}

inline bool is_list_of_matrices(const json& j) { return j.is_array() && !j.empty() && j[0].is_array(); }

template <int N>
json matrices_json(const std::vector<Matrix<N>>& ms, bool list) {
    if (!list) return io::to_json(ms.front());
    json a = json::array();
    for (const auto& m : ms) a.push_back(io::to_json(m));
    return a;
}

template <int N>
CellDensity<N> density_from_json(const json& j, json& resolved) {
    io::Reader r(j, "density");
    const auto kind = r.require<std::string>("kind");
    CellDensity<N> f;
    if (kind == "convex_sym") {
        f = convex_sym_density<N>();
    } else if (kind == "two_well") {
        const auto U = io::matrix_from_json<N>(r.raw("U"), "density.U");
        r.put("U", io::to_json(U));
        f = two_well_density<N>(U);
    } else if (kind == "nematic_V" || kind == "nematic_V_iqc") {
        if constexpr (N != 3) {
            throw Error(ErrorKind::DimensionMismatch, "nematic densities require n = 3");
        } else {
            const auto rho = io::rho_from_json(r.raw("rho"), "density.rho");
            iqclab::detail::check_rho(rho);
            r.put("rho", {rho[0], rho[1], rho[2]});
            f = kind == "nematic_V" ? nematic_V_density(rho) : nematic_V_iqc_density(rho);
        }
    } else {
        throw io::parse_error("density.kind: unknown density '" + kind + "'");
    }
    resolved = r.finish();
    return f;
}

inline TestSpace space_from_string(const std::string& s) {
    if (s == "nodal") return TestSpace::Nodal;
    if (s == "staggered") return TestSpace::Staggered;
    throw io::parse_error("space: expected \"nodal\" or \"staggered\"");
}

inline std::vector<std::string> row(std::initializer_list<std::string> v) { return v; }

// ---------------------------------------------------------------------------
// Commands. Each returns the artifact and fills `resolved`.
// ---------------------------------------------------------------------------

template <int N>
Artifact eval_density(const json& cfg, json& resolved, const Context&) {
    io::Reader r(cfg, "config");
    r.get<int>("n", 3);
    json mres;
    const auto model = io::model_from_json<N>(r.raw("model"), &mres);
    r.put("model", mres);
    const double eps = r.get<double>("eps", 0.1);
    if (!(eps > 0.0 && eps <= 1.0)) throw io::parse_error("config.eps: must lie in (0, 1]");
    if (!r.has("X") && !r.has("Z")) throw io::parse_error("config: give \"X\" (for W_eps) and/or \"Z\" (for V)");
    Artifact a;
    a.csv_header = "quantity,index,value";
    if (r.has("X")) {
        const auto& xj = r.raw("X");
        const auto xs = matrices<N>(xj, "config.X");
        r.put("X", matrices_json(xs, is_list_of_matrices(xj)));
        json w = json::array();
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const auto e = eval_W(model, eps, xs[k]);
            w.push_back(io::energy_json(e));
            a.csv_rows.push_back(row({"W", std::to_string(k), io::format_double(e.as_double())}));
        }
        a.result["W"] = w;
    }
    if (r.has("Z")) {
        const auto& zj = r.raw("Z");
        const auto zs = matrices<N>(zj, "config.Z");
        r.put("Z", matrices_json(zs, is_list_of_matrices(zj)));
        json v = json::array(), ve = json::array();
        for (std::size_t k = 0; k < zs.size(); ++k) {
            const auto e = eval_V(model, zs[k]);
            v.push_back(io::energy_json(e));
            a.csv_rows.push_back(row({"V", std::to_string(k), io::format_double(e.as_double())}));
            if (traceless_for_V(zs[k])) {
                const double x = eval_V_eps(model, eps, DevMatrix<N>::unchecked(dev_part(zs[k])));
                ve.push_back(io::number(x));
                a.csv_rows.push_back(row({"V_eps", std::to_string(k), io::format_double(x)}));
            } else {
                ve.push_back("inf");
                a.csv_rows.push_back(row({"V_eps", std::to_string(k), "inf"}));
            }
        }
        a.result["V"] = v;
        a.result["V_eps"] = ve;
    }
    resolved = r.finish();
    return a;
}

inline Artifact eval_envelope(const json& cfg, json& resolved, const Context&) {
    io::Reader r(cfg, "config");
    if (r.get<int>("n", 3) != 3) throw Error(ErrorKind::DimensionMismatch, "eval-envelope requires n = 3");
    const auto rho = io::rho_from_json(r.raw("rho"), "config.rho");
    iqclab::detail::check_rho(rho);
    r.put("rho", {rho[0], rho[1], rho[2]});
    const auto& zj = r.raw("Z");
    const bool list = is_list_of_matrices(zj);
    const auto zs = matrices<3>(zj, "config.Z");
    r.put("Z", matrices_json(zs, list));
    resolved = r.finish();
    Artifact a;
    a.csv_header = "index,value,region,value_alt,V";
    json results = json::array();
    for (std::size_t k = 0; k < zs.size(); ++k) {
        const auto e = nematic_V_iqc_eval(rho, zs[k]);
        const auto alt = nematic_V_iqc_alt(rho, zs[k]);
        const auto v = eval_V(make_nematic(rho), zs[k]);
        results.push_back({{"value", io::energy_json(e.value)},
                           {"region", e.region},
                           {"value_alt", io::energy_json(alt)},
                           {"V", io::energy_json(v)}});
        a.csv_rows.push_back(row({std::to_string(k), io::format_double(e.value.as_double()), std::to_string(e.region),
                                  io::format_double(alt.as_double()), io::format_double(v.as_double())}));
    }
    if (list) a.result["results"] = results;
    else a.result = results[0];
    return a;
}

template <int N>
Artifact check_c(const json& cfg, json& resolved, const Context& ctx) {
    io::Reader r(cfg, "config");
    r.get<int>("n", 3);
    json mres;
    const auto model = io::model_from_json<N>(r.raw("model"), &mres);
    r.put("model", mres);
    const double radius = r.get<double>("r", 2.0);
    const auto eps_list = r.get<std::vector<double>>("eps_list", {0.1, 0.05, 0.025});
    const auto samples = r.get<std::uint64_t>("samples", 10000);
    r.put("seed", ctx.seed);
    resolved = r.finish();
    for (double e : eps_list)
        if (!(e > 0.0 && e <= 1.0)) throw io::parse_error("config.eps_list: values must lie in (0, 1]");
    const auto rows = check_condition_C<N>(model, {}, radius, eps_list, samples, ctx.seed);
    Artifact a;
    a.csv_header = "eps,sup_deviation,ratio";
    json out = json::array();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double ratio = k > 0 && rows[k].sup_deviation > 0.0 ? rows[k - 1].sup_deviation / rows[k].sup_deviation
                                                                  : std::numeric_limits<double>::quiet_NaN();
        out.push_back({{"eps", rows[k].eps}, {"sup_deviation", rows[k].sup_deviation}, {"ratio", io::number(ratio)}});
        a.csv_rows.push_back(
            row({io::format_double(rows[k].eps), io::format_double(rows[k].sup_deviation), io::format_double(ratio)}));
    }
    a.result["rows"] = out;
    a.result["samples"] = samples;
    return a;
}

inline OptimizerOptions optimizer_field(io::Reader& r, std::uint64_t seed) {
    json ores;
    OptimizerOptions o = io::optimizer_from_json(r.has("optimizer") ? r.raw("optimizer") : json::object(), ores);
    r.put("optimizer", ores);
    o.seed = seed;
    return o;
}

template <int N>
Artifact cell_problem(const json& cfg, json& resolved, const Context& ctx) {
    io::Reader r(cfg, "config");
    r.get<int>("n", 3);
    json dres;
    CellProblem<N> p;
    p.density = density_from_json<N>(r.raw("density"), dres);
    r.put("density", dres);
    const auto problem = r.get<std::string>("problem", "iqc");
    if (problem != "iqc" && problem != "qc") throw io::parse_error("config.problem: expected \"iqc\" or \"qc\"");
    p.base_point = io::matrix_from_json<N>(r.raw("X"), "config.X");
    r.put("X", io::to_json(p.base_point));
    p.m = r.get<int>("m", 8);
    p.margin = r.get<int>("margin", 1);
    p.space = space_from_string(r.get<std::string>("space", "nodal"));
    p.optimizer = optimizer_field(r, ctx.seed);
    const bool dump = r.get<bool>("dump_field", false);
    r.put("seed", ctx.seed);
    resolved = r.finish();
    if (p.m < 2) throw io::parse_error("config.m: must be >= 2");

    const auto res = problem == "iqc" ? numerical_iqc(p) : numerical_qc(p);
    Artifact a;
    a.result = {{"value", io::number(res.value)},
                {"iterations", res.iterations},
                {"converged", res.converged},
                {"base_value", io::number(res.base_value)},
                {"total_iterations", res.total_iterations},
                {"best_start", res.best_start}};
    const bool nodal = problem == "qc" && p.space == TestSpace::Nodal;
    if (dump) a.result["field"] = nodal ? io::node_field_to_json(res.nodal) : io::grid_to_json(res.field);
    if (!nodal && !ctx.inv.field_output.empty()) a.field_binary = io::grid_to_binary(res.field);
    return a;
}

template <int N>
Artifact penalized_ladder(const json& cfg, json& resolved, const Context& ctx) {
    io::Reader r(cfg, "config");
    r.get<int>("n", 3);
    json dres;
    const auto f = density_from_json<N>(r.raw("density"), dres);
    r.put("density", dres);
    const auto X = io::matrix_from_json<N>(r.raw("X"), "config.X");
    r.put("X", io::to_json(X));
    const auto b = r.get<std::vector<double>>("b_list", {1, 4, 16, 64, 256});
    const int m = r.get<int>("m", 8);
    const double p = r.get<double>("p", 2.0);
    const auto space = space_from_string(r.get<std::string>("space", "staggered"));
    const int margin = r.get<int>("margin", 1);
    const auto opt = optimizer_field(r, ctx.seed);
    r.put("seed", ctx.seed);
    resolved = r.finish();
    const auto rows = penalized_iqc<N>(f, X, b, m, opt, p, space, margin);
    Artifact a;
    a.csv_header = "b,value,iterations,converged";
    json out = json::array();
    bool monotone = true;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (k > 0 && rows[k].value < rows[k - 1].value) monotone = false;
        out.push_back({{"b", rows[k].b},
                       {"value", io::number(rows[k].value)},
                       {"iterations", rows[k].iterations},
                       {"converged", rows[k].converged}});
        a.csv_rows.push_back(row({io::format_double(rows[k].b), io::format_double(rows[k].value),
                                  std::to_string(rows[k].iterations), rows[k].converged ? "true" : "false"}));
    }
    a.result["rows"] = out;
    a.result["monotone"] = monotone;
    return a;
}

template <int N>
Artifact flow(const json& cfg, json& resolved, const Context& ctx) {
    io::Reader r(cfg, "config");
    r.get<int>("n", 3);
    const int m = r.get<int>("m", 16);
    const double eps = r.get<double>("eps", 0.1);
    const int steps = r.get<int>("steps", 32);
    const bool dump = r.get<bool>("dump_field", false);
    const json vin = r.has("velocity") ? r.raw("velocity") : json{{"kind", "random"}};
    io::Reader vr(vin, "config.velocity");
    const auto kind = vr.get<std::string>("kind", "random");
    Artifact a;
    FlowResult<N> fr;
    if (kind == "random") {
        const double smooth = vr.get<double>("smoothness", 2.0);
        const int modes = vr.get<int>("modes", 4);
        const int grid = vr.get<int>("grid_m", 16);
        const auto interp = vr.get<std::string>("interpolant", "smooth");
        if (interp != "smooth" && interp != "mac") throw io::parse_error("config.velocity.interpolant: expected \"smooth\" or \"mac\"");
        r.put("velocity", vr.finish());
        r.put("seed", ctx.seed);
        resolved = r.finish();
        const auto sample = random_solenoidal_sample<N>(grid, smooth, ctx.seed, modes);
        if (interp == "smooth") {
            const SmoothCurlVelocity<N> u(sample.potential);
            fr = flow_map<N>(u, m, eps, steps);
        } else {
            const MacInterpolant<N> u(sample.field);
            fr = flow_map<N>(u, m, eps, steps);
        }
    } else if (kind == "grid") {
        const auto path = vr.require<std::string>("path");
        r.put("velocity", vr.finish());
        r.put("seed", ctx.seed);
        resolved = r.finish();
        const MacInterpolant<N> u(io::load_grid<N>(path));
        fr = flow_map<N>(u, m, eps, steps);
    } else {
        throw io::parse_error("config.velocity.kind: expected \"random\" or \"grid\"");
    }
    a.result = {{"det_residual", fr.det_residual}, {"m", m}, {"eps", eps}, {"steps", steps}};
    if (dump) a.result["u_eps"] = io::node_field_to_json(fr.u_eps);
    return a;
}

template <int N>
Artifact correct_div(const json& cfg, json& resolved, const Context& ctx) {
    io::Reader r(cfg, "config");
    r.get<int>("n", 3);
    const json in = r.has("input") ? r.raw("input") : json{{"kind", "random"}};
    io::Reader ir(in, "config.input");
    const auto kind = ir.get<std::string>("kind", "random");
    GridField<N> f;
    if (kind == "random") {
        // solenoidal sample plus interior-face noise: zero boundary flux, so the mean divergence stays zero
        const int m = ir.get<int>("m", 16);
        const double smooth = ir.get<double>("smoothness", 2.0);
        const double noise = ir.get<double>("noise", 0.1);
        f = random_solenoidal<N>(m, smooth, ctx.seed);
        Rng rng(ctx.seed ^ 0xd1f0d1f0ull);
        for (int d = 0; d < N; ++d) {
            const auto lat = f.lattice(d);
            for (std::size_t k = 0; k < lat.size(); ++k) {
                const auto i = lat.unravel(k);
                if (i[d] > 0 && i[d] < m) f.comp[d][k] += noise * rng.normal();
            }
        }
    } else if (kind == "grid") {
        f = io::load_grid<N>(ir.require<std::string>("path"));
    } else {
        throw io::parse_error("config.input.kind: expected \"random\" or \"grid\"");
    }
    r.put("input", ir.finish());
    const auto mode = r.get<std::string>("mode", "bogovskii");
    const int outer = r.get<int>("outer_m", 0);
    const bool dump = r.get<bool>("dump_field", true);
    r.put("seed", ctx.seed);
    resolved = r.finish();
    BogovskiiResult rep;
    GridField<N> g;
    if (mode == "bogovskii") g = bogovskii_correct(f, &rep);
    else if (mode == "extend") g = extend_solenoidal(f, outer > 0 ? outer : 2 * f.m, &rep);
    else throw io::parse_error("config.mode: expected \"bogovskii\" or \"extend\"");
    Artifact a;
    a.result = {{"max_div", rep.max_div},
                {"div_norm", rep.div_norm},
                {"correction_norm", rep.correction_norm},
                {"constant", rep.constant},
                {"cg_iterations", rep.cg_iterations}};
    if (dump) a.result["field"] = io::grid_to_json(g);
    if (!ctx.inv.field_output.empty()) a.field_binary = io::grid_to_binary(g);
    return a;
}

inline const std::set<std::string> kRunKeys{"problem", "eps", "dump_field"};

template <int N>
ExperimentConfig<N> experiment(const json& cfg, json& resolved, const Context& ctx) {
    json with_seed = cfg;
    with_seed["seed"] = ctx.seed;
    auto ec = io::config_from_json<N>(with_seed, kRunKeys);
    resolved = io::config_to_json(ec);
    return ec;
}

template <int N>
Artifact minimize(const json& cfg, json& resolved, const Context& ctx) {
    const auto ec = experiment<N>(cfg, resolved, ctx);
    auto grab = [&](const char* k, json def) {
        json v = cfg.contains(k) ? cfg[k] : def;
        resolved[k] = v;
        return v;
    };
    const json pj = grab("problem", "rel");
    const json dj = grab("dump_field", false);
    if (!pj.is_string() || (pj != "rel" && pj != "eps")) throw io::parse_error("config.problem: expected \"rel\" or \"eps\"");
    if (!dj.is_boolean()) throw io::parse_error("config.dump_field: expected a boolean");
    const bool dump = dj.get<bool>();
    Artifact a;
    if (pj == "rel") {
        if (cfg.contains("eps")) throw io::parse_error("config.eps: only used with problem \"eps\"");
        const auto res = minimize_F_rel(ec);
        a.result = io::relaxed_to_json(res, dump);
        if (!ctx.inv.field_output.empty()) a.field_binary = io::grid_to_binary(res.displacement);
    } else {
        const json ej = grab("eps", 0.1);
        const double eps = io::to_double(ej, "config.eps");
        if (!(eps > 0.0 && eps <= 1.0)) throw io::parse_error("config.eps: must lie in (0, 1]");
        a.result = io::nonlinear_to_json(minimize_F_eps(ec, eps), dump);
    }
    return a;
}

template <int N>
Artifact converge(const json& cfg, json& resolved, const Context& ctx) {
    const auto ec = experiment<N>(cfg, resolved, ctx);
    if (cfg.contains("problem") || cfg.contains("eps")) throw io::parse_error("config: \"problem\"/\"eps\" are minimize-only keys");
    const json dj = cfg.contains("dump_field") ? cfg["dump_field"] : json(false);
    if (!dj.is_boolean()) throw io::parse_error("config.dump_field: expected a boolean");
    resolved["dump_field"] = dj;
    const auto rep = convergence_experiment(ec, ctx.inv.jobs);
    Artifact a;
    a.result = io::report_to_json(rep, dj.get<bool>());
    bool shrinking = true;
    for (std::size_t k = 1; k < rep.gap.size(); ++k)
        if (!(std::abs(rep.gap[k]) < std::abs(rep.gap[k - 1]))) shrinking = false;
    a.result["gap_shrinking"] = shrinking;
    a.csv_header = "eps,E_eps,E_rel,gap";
    for (std::size_t k = 0; k < rep.nonlinear.size(); ++k)
        a.csv_rows.push_back(row({io::format_double(rep.nonlinear[k].eps), io::format_double(rep.nonlinear[k].energy),
                                  io::format_double(rep.relaxed.energy), io::format_double(rep.gap[k])}));
    return a;
}

using Command = std::function<Artifact(const json&, json&, const Context&)>;

/// Dimension dispatch on the config's "n".
#define IQCLAB_DISPATCH(fn)                                                                    \
    [](const json& c, json& res, const Context& ctx) {                                         \
        return io::config_dimension(c) == 2 ? fn<2>(c, res, ctx) : fn<3>(c, res, ctx);         \
    }

inline const std::map<std::string, std::pair<Command, bool>>& commands() {
    // name -> (implementation, supports csv)
    static const std::map<std::string, std::pair<Command, bool>> table{
        {"eval-density", {IQCLAB_DISPATCH(eval_density), true}},
        {"eval-envelope", {eval_envelope, true}},
        {"check-c", {IQCLAB_DISPATCH(check_c), true}},
        {"cell-problem", {IQCLAB_DISPATCH(cell_problem), false}},
        {"penalized-ladder", {IQCLAB_DISPATCH(penalized_ladder), true}},
        {"flow", {IQCLAB_DISPATCH(flow), false}},
        {"correct-div", {IQCLAB_DISPATCH(correct_div), false}},
        {"minimize", {IQCLAB_DISPATCH(minimize), false}},
        {"converge", {IQCLAB_DISPATCH(converge), true}},
    };
    return table;
}

#undef IQCLAB_DISPATCH

inline std::string render(const Invocation& inv, std::uint64_t seed, const json& resolved, const Artifact& a) {
    if (inv.format == "csv") {
        std::string s = "# command: " + inv.command + "\n# seed: " + std::to_string(seed) + "\n# config: " + resolved.dump() + "\n";
        s += a.csv_header + "\n";
        for (const auto& r : a.csv_rows) {
            for (std::size_t k = 0; k < r.size(); ++k) s += (k ? "," : "") + r[k];
            s += "\n";
        }
        return s;
    }
    json doc = json::object();
    doc["command"] = inv.command;
    doc["seed"] = seed;
    doc["config"] = resolved;
    doc["result"] = a.result;
    return doc.dump(2) + "\n";
}

inline void report_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
    json e = {{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}};
    err << e.dump() << "\n";
}

}  // namespace detail

/// Runs one already-parsed invocation.
inline int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
    try {
        const auto& table = detail::commands();
        const auto it = table.find(inv.command);
        if (it == table.end()) throw io::parse_error("unknown subcommand '" + inv.command + "'");
        if (inv.format == "csv" && !it->second.second)
            throw io::parse_error("--format csv is not available for " + inv.command);
        if (inv.jobs < 1) throw io::parse_error("--jobs must be >= 1");
        const json cfg = io::read_json_file(inv.config_path);
        const std::uint64_t seed = detail::resolve_seed(inv, cfg);
        json resolved;
        const Artifact a = it->second.first(cfg, resolved, Context{inv, seed});
        const std::string text = detail::render(inv, seed, resolved, a);
        if (!inv.field_output.empty()) {
            if (!a.field_binary) throw io::parse_error("--field-output: " + inv.command + " produced no MAC field");
            io::write_atomic(inv.field_output, *a.field_binary);
        }
        if (inv.output.empty()) out << text << std::flush;
        else io::write_atomic(inv.output, text);
        return kExitOk;
    } catch (const Error& e) {
        const int code = is_numerical_failure(e.kind()) ? kExitNumerical : kExitInvalid;
        detail::report_error(err, std::string(to_string(e.kind())), e.what(), code);
        return code;
    } catch (const nlohmann::json::exception& e) {
        detail::report_error(err, "InvalidArgument", e.what(), kExitInvalid);
        return kExitInvalid;
    } catch (const std::exception& e) {
        detail::report_error(err, "InternalError", e.what(), kExitNumerical);
        return kExitNumerical;
    }
}

/// Parses argv and executes; `--help` prints usage and exits 0.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"iqclab: envelopes, incompressible flows and relaxation experiments"};
    app.require_subcommand(1, 1);
    app.fallthrough(false);
    Invocation inv;
    std::uint64_t seed = 0;
    static const std::map<std::string, std::string> help{
        {"eval-density", "evaluate W_eps and V of a density model"},
        {"eval-envelope", "nematic iqc envelope value and region"},
        {"check-c", "sampled deviation sup |V_eps - V| per eps"},
        {"cell-problem", "numerical qc/iqc cell problem"},
        {"penalized-ladder", "penalized cell problems over a b ladder"},
        {"flow", "flow map of a solenoidal velocity"},
        {"correct-div", "discrete Bogovskii correction or solenoidal extension"},
        {"minimize", "minimize F_rel or F_eps for one experiment"},
        {"converge", "eps ladder of F_eps against F_rel"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, desc] : help) {
        auto* s = app.add_subcommand(name, desc);
        s->add_option("-c,--config", inv.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        s->add_option("-o,--output", inv.output, "output path (default stdout)");
        s->add_option("-f,--format", inv.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        s->add_option("-s,--seed", seed, "seed override (else config seed, else IQCLAB_SEED, else 0)");
        s->add_option("-j,--jobs", inv.jobs, "worker bound for parallel ladders")->check(CLI::PositiveNumber);
        s->add_option("--field-output", inv.field_output, "write the MAC field result in binary form");
        subs.push_back(s);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        detail::report_error(err, "UsageError", e.what(), kExitInvalid);
        return kExitInvalid;
    }
    for (auto* s : subs)
        if (s->parsed()) {
            inv.command = s->get_name();
            if (s->count("--seed")) inv.seed = seed;
        }
    return execute(inv, out, err);
}

}  // namespace iqclab::cli
