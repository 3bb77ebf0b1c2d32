#pragma once

// JSON/CSV/binary serialization for matrices, density models, experiment
// configs, GridFields and energy reports. Parsing is strict: unknown keys are
// rejected, and every reader records the value it used (defaults included) so
// the resolved config can be echoed into outputs.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "iqclab/solver.hpp"

namespace iqclab::io {

using json = nlohmann::ordered_json;

/// Bad input files, as opposed to bad values inside a valid structure.
inline Error parse_error(const std::string& what) { return Error(ErrorKind::InvalidArgument, what); }

// ---------------------------------------------------------------------------
// Numbers
// ---------------------------------------------------------------------------

/// 17 significant digits, '.' decimal point, independent of the C locale.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

/// Non-finite values have no JSON literal; they are written as strings.
inline json number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline json energy_json(const ExtendedEnergy& e) { return e.is_finite() ? json(e.value()) : json("inf"); }

inline double to_double(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw parse_error(what + ": expected a number");
}

// ---------------------------------------------------------------------------
// Strict object reader
// ---------------------------------------------------------------------------

class Reader {
public:
    Reader(const json& in, std::string where) : in_(in), where_(std::move(where)) {
        if (!in_.is_object()) throw parse_error(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return in_.contains(key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        if (!in_.contains(key)) throw parse_error(path(key) + ": required");
        return in_.at(key);
    }

    template <class T>
    T get(const std::string& key, const T& def) {
        used_.insert(key);
        T v = def;
        if (in_.contains(key)) v = convert<T>(in_.at(key), path(key));
        out_[key] = v;
        return v;
    }

    template <class T>
    T require(const std::string& key) {
        T v = convert<T>(raw(key), path(key));
        out_[key] = v;
        return v;
    }

    /// Records a value the caller resolved itself.
    void put(const std::string& key, json v) {
        used_.insert(key);
        out_[key] = std::move(v);
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    /// Throws on keys nobody asked for; returns the resolved object.
    json finish() const {
        for (const auto& [k, v] : in_.items())
            if (!used_.count(k)) throw parse_error(where_ + ": unknown key '" + k + "'");
        return out_;
    }

private:
    template <class T>
    static T convert(const json& j, const std::string& what) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw parse_error(what + ": expected a boolean");
            return j.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!j.is_number_integer()) throw parse_error(what + ": expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (j.is_number_unsigned()) return j.get<T>();
                if (j.get<std::int64_t>() < 0) throw parse_error(what + ": expected a non-negative integer");
            }
            return j.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            return to_double(j, what);
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!j.is_string()) throw parse_error(what + ": expected a string");
            return j.get<std::string>();
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!j.is_array()) throw parse_error(what + ": expected an array");
            std::vector<double> v;
            for (const auto& e : j) v.push_back(to_double(e, what));
            return v;
        } else {
            static_assert(sizeof(T) == 0, "unsupported reader type");
        }
    }

    const json& in_;
    std::string where_;
    std::set<std::string> used_;
    json out_ = json::object();
};

// ---------------------------------------------------------------------------
// Matrices and models
// ---------------------------------------------------------------------------

template <int N>
json to_json(const Matrix<N>& x) {
    json a = json::array();
    for (double v : x.data()) a.push_back(v);
    return a;
}

template <int N>
Matrix<N> matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(N * N))
        throw Error(ErrorKind::DimensionMismatch, what + ": expected a row-major array of " + std::to_string(N * N) + " reals");
    std::vector<double> v;
    for (const auto& e : j) v.push_back(to_double(e, what));
    const auto m = Matrix<N>::from_row_major(v);
    if (!m.is_finite()) throw parse_error(what + ": non-finite entry");
    return m;
}

inline std::array<double, 3> rho_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) throw parse_error(what + ": expected 3 reals");
    return {to_double(j[0], what), to_double(j[1], what), to_double(j[2], what)};
}

template <int N>
json model_to_json(const DensityModel<N>& model) {
    json j = json::object();
    if (const auto* nm = std::get_if<Nematic>(&model.kind)) {
        j["model"] = "nematic";
        j["rho"] = {nm->rho[0], nm->rho[1], nm->rho[2]};
    } else if (const auto* mw = std::get_if<MultiWell<N>>(&model.kind)) {
        j["model"] = "multiwell";
        j["wells"] = json::array();
        for (const auto& w : mw->wells) j["wells"].push_back({{"a", to_json(w.a)}, {"U", to_json(w.U)}, {"w", w.w}});
    } else {
        const auto& sw = std::get<SingleWell<N>>(model.kind);
        if (sw.builtin.empty()) throw Error(ErrorKind::InvalidArgument, "only built-in single-well models serialize");
        j["model"] = "singlewell";
        j["builtin"] = sw.builtin;
    }
    j["p"] = model.p;
    return j;
}

template <int N>
DensityModel<N> model_from_json(const json& j, json* resolved = nullptr, const std::string& where = "model") {
    Reader r(j, where);
    const auto kind = r.require<std::string>("model");
    DensityModel<N> model;
    if (kind == "nematic") {
        if constexpr (N != 3) {
            throw Error(ErrorKind::DimensionMismatch, "nematic model requires n = 3");
        } else {
            const auto rho = rho_from_json(r.raw("rho"), r.path("rho"));
            r.put("rho", {rho[0], rho[1], rho[2]});
            model = make_nematic(rho);
        }
    } else if (kind == "multiwell") {
        const auto& ws = r.raw("wells");
        if (!ws.is_array()) throw parse_error(r.path("wells") + ": expected an array");
        std::vector<Well<N>> wells;
        json out = json::array();
        for (std::size_t k = 0; k < ws.size(); ++k) {
            Reader wr(ws[k], r.path("wells") + "[" + std::to_string(k) + "]");
            Well<N> w;
            w.a = matrix_from_json<N>(wr.raw("a"), wr.path("a"));
            w.U = matrix_from_json<N>(wr.raw("U"), wr.path("U"));
            wr.put("a", to_json(w.a));
            wr.put("U", to_json(w.U));
            w.w = wr.get<double>("w", 0.0);
            out.push_back(wr.finish());
            wells.push_back(w);
        }
        r.put("wells", out);
        model = make_multiwell<N>(std::move(wells));
    } else if (kind == "singlewell") {
        const auto b = r.get<std::string>("builtin", "dist2-sl");
        if (b != "dist2-sl") throw parse_error(r.path("builtin") + ": unknown built-in '" + b + "'");
        model = make_singlewell_dist2<N>();
    } else {
        throw parse_error(r.path("model") + ": unknown model '" + kind + "'");
    }
    model.p = r.get<double>("p", 2.0);
    if (!(model.p >= 1.0) || !std::isfinite(model.p)) throw parse_error(r.path("p") + ": must be >= 1");
    const json res = r.finish();
    if (resolved) *resolved = res;
    return model;
}

// ---------------------------------------------------------------------------
// Optimizer options and experiment configs
// ---------------------------------------------------------------------------

inline OptimizerOptions optimizer_from_json(const json& j, json& resolved, const OptimizerOptions& def = {}) {
    Reader r(j, "optimizer");
    OptimizerOptions o;
    o.max_iters = r.get<int>("max_iters", def.max_iters);
    o.gradient_tol = r.get<double>("gradient_tol", def.gradient_tol);
    o.restarts = r.get<int>("restarts", def.restarts);
    o.history = r.get<int>("history", def.history);
    o.init_amplitude = r.get<double>("init_amplitude", def.init_amplitude);
    if (o.max_iters < 0 || o.restarts < 0) throw parse_error("optimizer: counts must be >= 0");
    if (o.history < 1) throw parse_error("optimizer.history: must be >= 1");
    if (!(o.gradient_tol > 0.0) || !(o.init_amplitude >= 0.0)) throw parse_error("optimizer: tolerances must be positive");
    resolved = r.finish();
    return o;
}

inline json optimizer_to_json(const OptimizerOptions& o) {
    return {{"max_iters", o.max_iters},
            {"gradient_tol", o.gradient_tol},
            {"restarts", o.restarts},
            {"history", o.history},
            {"init_amplitude", o.init_amplitude}};
}

template <int N>
std::string face_name(int f) {
    static const char* axes = "xyz";
    return std::string(1, axes[f / 2]) + (f % 2 ? "+" : "-");
}

template <int N>
json dirichlet_to_json(const std::array<bool, 2 * N>& d) {
    if (std::all_of(d.begin(), d.end(), [](bool b) { return b; })) return "all";
    if (std::none_of(d.begin(), d.end(), [](bool b) { return b; })) return "none";
    json a = json::array();
    for (int f = 0; f < 2 * N; ++f)
        if (d[f]) a.push_back(face_name<N>(f));
    return a;
}

template <int N>
std::array<bool, 2 * N> dirichlet_from_json(const json& j) {
    std::array<bool, 2 * N> d{};
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "all") d.fill(true);
        else if (s != "none") throw parse_error("dirichlet: expected \"all\", \"none\" or a face list");
        return d;
    }
    if (!j.is_array()) throw parse_error("dirichlet: expected \"all\", \"none\" or a face list");
    for (const auto& e : j) {
        if (!e.is_string()) throw parse_error("dirichlet: face names are strings like \"x-\"");
        int hit = -1;
        for (int f = 0; f < 2 * N; ++f)
            if (e.get<std::string>() == face_name<N>(f)) hit = f;
        if (hit < 0) throw parse_error("dirichlet: unknown face '" + e.get<std::string>() + "'");
        d[hit] = true;
    }
    return d;
}

template <int N>
json config_to_json(const ExperimentConfig<N>& cfg) {
    json j = json::object();
    j["n"] = N;
    j["model"] = model_to_json(cfg.model);
    j["m"] = cfg.m;
    j["Z_bc"] = to_json(cfg.Z_bc);
    j["dirichlet"] = dirichlet_to_json<N>(cfg.dirichlet);
    if (cfg.load.empty()) {
        j["load"] = "zero";
    } else {
        json a = json::array();
        for (const auto& v : cfg.load) {
            json e = json::array();
            for (double c : v) e.push_back(c);
            a.push_back(e);
        }
        j["load"] = a;
    }
    j["eps_list"] = cfg.eps_list;
    j["optimizer"] = optimizer_to_json(cfg.optimizer);
    j["eps_restarts"] = cfg.eps_restarts;
    j["flow_steps"] = cfg.flow_steps;
    j["allow_upper_bound"] = cfg.allow_upper_bound;
    j["seed"] = cfg.seed;
    return j;
}

/// Reads the dimension tag (default 3) of a config object.
inline int config_dimension(const json& j) {
    if (!j.is_object()) throw parse_error("config: expected an object");
    if (!j.contains("n")) return 3;
    if (!j["n"].is_number_integer()) throw parse_error("config.n: expected 2 or 3");
    const int n = j["n"].get<int>();
    if (n != 2 && n != 3) throw parse_error("config.n: expected 2 or 3");
    return n;
}

/// `extra` lists keys the caller consumes itself (they are skipped here).
template <int N>
ExperimentConfig<N> config_from_json(const json& j, const std::set<std::string>& extra = {}) {
    json filtered = json::object();
    for (const auto& [k, v] : j.items())
        if (!extra.count(k)) filtered[k] = v;
    Reader r(filtered, "config");
    ExperimentConfig<N> cfg;
    r.get<int>("n", 3);
    if (r.has("model")) {
        json res;
        cfg.model = model_from_json<N>(r.raw("model"), &res);
    }
    cfg.m = r.get<int>("m", cfg.m);
    if (r.has("Z_bc")) {
        const auto& z = r.raw("Z_bc");
        if (z.is_string() && z.get<std::string>() == "zero") cfg.Z_bc = Matrix<N>{};
        else cfg.Z_bc = matrix_from_json<N>(z, "config.Z_bc");
    }
    if (r.has("dirichlet")) cfg.dirichlet = dirichlet_from_json<N>(r.raw("dirichlet"));
    if (r.has("load")) {
        const auto& l = r.raw("load");
        if (l.is_string() && l.get<std::string>() == "zero") {
            cfg.load.clear();
        } else if (l.is_array()) {
            for (const auto& e : l) {
                if (!e.is_array() || e.size() != static_cast<std::size_t>(N))
                    throw Error(ErrorKind::DimensionMismatch, "config.load: every entry needs n components");
                std::array<double, N> v{};
                for (int a = 0; a < N; ++a) v[a] = to_double(e[a], "config.load");
                cfg.load.push_back(v);
            }
        } else {
            throw parse_error("config.load: expected \"zero\" or one vector per cell");
        }
    }
    cfg.eps_list = r.get<std::vector<double>>("eps_list", cfg.eps_list);
    if (r.has("optimizer")) {
        json res;
        cfg.optimizer = optimizer_from_json(r.raw("optimizer"), res);
    }
    cfg.eps_restarts = r.get<int>("eps_restarts", cfg.eps_restarts);
    cfg.flow_steps = r.get<int>("flow_steps", cfg.flow_steps);
    cfg.allow_upper_bound = r.get<bool>("allow_upper_bound", cfg.allow_upper_bound);
    cfg.seed = r.get<std::uint64_t>("seed", cfg.seed);
    r.finish();
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// GridField
// ---------------------------------------------------------------------------

template <int N>
json grid_to_json(const GridField<N>& f) {
    json j = json::object();
    j["n"] = N;
    j["m"] = f.m;
    j["h"] = f.h;
    j["layout"] = "mac";
    j["origin"] = f.origin;
    j["dirichlet"] = f.dirichlet;
    json comps = json::array();
    for (const auto& c : f.comp) comps.push_back(c);
    j["components"] = comps;
    return j;
}

template <int N>
GridField<N> grid_from_json(const json& j) {
    Reader r(j, "grid");
    if (r.require<int>("n") != N) throw Error(ErrorKind::DimensionMismatch, "grid: dimension mismatch");
    if (r.require<std::string>("layout") != "mac") throw parse_error("grid.layout: only \"mac\" is supported");
    GridField<N> f;
    f.m = r.require<int>("m");
    if (f.m < 1) throw parse_error("grid.m: must be positive");
    f.h = r.require<double>("h");
    const auto origin = r.get<std::vector<double>>("origin", std::vector<double>(N, 0.0));
    const auto& d = r.raw("dirichlet");
    const auto& comps = r.raw("components");
    r.finish();
    if (origin.size() != static_cast<std::size_t>(N)) throw Error(ErrorKind::DimensionMismatch, "grid.origin: wrong length");
    for (int a = 0; a < N; ++a) f.origin[a] = origin[a];
    if (!d.is_array() || d.size() != 2 * N) throw Error(ErrorKind::DimensionMismatch, "grid.dirichlet: expected 2n booleans");
    for (int k = 0; k < 2 * N; ++k) {
        if (!d[k].is_boolean()) throw parse_error("grid.dirichlet: expected booleans");
        f.dirichlet[k] = d[k].get<bool>();
    }
    if (!comps.is_array() || comps.size() != static_cast<std::size_t>(N))
        throw Error(ErrorKind::DimensionMismatch, "grid.components: expected n arrays");
    for (int a = 0; a < N; ++a) {
        if (!comps[a].is_array()) throw parse_error("grid.components: expected arrays");
        for (const auto& v : comps[a]) f.comp[a].push_back(to_double(v, "grid.components"));
    }
    if (!f.layout_ok()) throw Error(ErrorKind::DimensionMismatch, "grid: component sizes do not match the MAC layout");
    return f;
}

namespace detail {
inline constexpr char kGridMagic[8] = {'I', 'Q', 'C', 'G', 'R', 'I', 'D', '1'};

template <class T>
void put_raw(std::string& s, const T& v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    s.append(b, sizeof(T));
}

template <class T>
T get_raw(const std::string& s, std::size_t& pos) {
    if (pos + sizeof(T) > s.size()) throw parse_error("grid binary: truncated");
    T v;
    std::memcpy(&v, s.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}
}  // namespace detail

/// Header {magic, n, m, h, origin, dirichlet flags, per-component counts}
/// followed by the raw doubles, host byte order (little-endian on all
/// supported targets, checked at load).
template <int N>
std::string grid_to_binary(const GridField<N>& f) {
    static_assert(std::endian::native == std::endian::little, "binary grid format is little-endian");
    std::string s(detail::kGridMagic, 8);
    detail::put_raw<std::int32_t>(s, N);
    detail::put_raw<std::int32_t>(s, f.m);
    detail::put_raw(s, f.h);
    for (double o : f.origin) detail::put_raw(s, o);
    for (bool b : f.dirichlet) detail::put_raw<std::uint8_t>(s, b ? 1 : 0);
    for (const auto& c : f.comp) detail::put_raw<std::uint64_t>(s, c.size());
    for (const auto& c : f.comp)
        if (!c.empty()) s.append(reinterpret_cast<const char*>(c.data()), c.size() * sizeof(double));
    return s;
}

template <int N>
GridField<N> grid_from_binary(const std::string& s) {
    if (s.size() < 8 || std::memcmp(s.data(), detail::kGridMagic, 8) != 0) throw parse_error("grid binary: bad magic");
    std::size_t pos = 8;
    if (detail::get_raw<std::int32_t>(s, pos) != N) throw Error(ErrorKind::DimensionMismatch, "grid binary: dimension mismatch");
    GridField<N> f;
    f.m = detail::get_raw<std::int32_t>(s, pos);
    if (f.m < 1) throw parse_error("grid binary: bad m");
    f.h = detail::get_raw<double>(s, pos);
    for (auto& o : f.origin) o = detail::get_raw<double>(s, pos);
    for (auto& b : f.dirichlet) b = detail::get_raw<std::uint8_t>(s, pos) != 0;
    std::array<std::uint64_t, N> counts;
    for (auto& c : counts) c = detail::get_raw<std::uint64_t>(s, pos);
    for (int a = 0; a < N; ++a) {
        if (counts[a] > (s.size() - pos) / sizeof(double)) throw parse_error("grid binary: truncated");
        f.comp[a].resize(counts[a]);
        if (counts[a]) std::memcpy(f.comp[a].data(), s.data() + pos, counts[a] * sizeof(double));
        pos += counts[a] * sizeof(double);
    }
    if (pos != s.size()) throw parse_error("grid binary: trailing bytes");
    if (!f.layout_ok()) throw Error(ErrorKind::DimensionMismatch, "grid binary: component sizes do not match the MAC layout");
    return f;
}

template <int N>
json node_field_to_json(const NodeField<N>& f) {
    json vals = json::array();
    for (const auto& v : f.values)
        for (double c : v) vals.push_back(c);
    return {{"n", N}, {"m", f.m}, {"h", f.h}, {"origin", f.origin}, {"layout", "nodes"}, {"values", vals}};
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

template <int N>
json relaxed_to_json(const RelaxedResult<N>& r, bool with_field) {
    json j = {{"energy", number(r.energy)},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"upper_bound", r.upper_bound}};
    if (with_field) j["displacement"] = grid_to_json(r.displacement);
    return j;
}

template <int N>
json nonlinear_to_json(const NonlinearResult<N>& r, bool with_field) {
    json j = {{"eps", r.eps},
              {"energy", number(r.energy)},
              {"det_residual", r.det_residual},
              {"iterations", r.iterations},
              {"converged", r.converged}};
    if (with_field) {
        j["coefficients"] = r.coefficients;
        j["displacement"] = node_field_to_json(r.displacement);
    }
    return j;
}

template <int N>
json report_to_json(const EnergyReport<N>& rep, bool with_fields) {
    json j = json::object();
    j["relaxed"] = relaxed_to_json(rep.relaxed, with_fields);
    json rows = json::array();
    for (const auto& n : rep.nonlinear) rows.push_back(nonlinear_to_json(n, with_fields));
    j["nonlinear"] = rows;
    json gaps = json::array();
    for (double g : rep.gap) gaps.push_back(number(g));
    j["gap"] = gaps;
    j["order"] = number(rep.order);
    return j;
}

/// Rows "eps,E_eps,E_rel,gap"; `preamble` lines are written first as '# ' comments.
template <int N>
std::string report_to_csv(const EnergyReport<N>& rep, const std::vector<std::string>& preamble = {}) {
    std::string s;
    for (const auto& p : preamble) s += "# " + p + "\n";
    s += "eps,E_eps,E_rel,gap\n";
    for (std::size_t k = 0; k < rep.nonlinear.size(); ++k) {
        s += format_double(rep.nonlinear[k].eps) + "," + format_double(rep.nonlinear[k].energy) + "," +
             format_double(rep.relaxed.energy) + "," + format_double(rep.gap[k]) + "\n";
    }
    return s;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json_file(const std::string& path) {
    const auto text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw parse_error("'" + path + "' is not valid JSON: " + e.what());
    }
}

/// Writes to a sibling temp file and renames it over `path`, so readers
/// never observe a partial file.
inline void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw parse_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw parse_error("short write to '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw parse_error("cannot rename onto '" + path + "': " + ec.message());
    }
}

/// Loads a GridField from JSON or from the binary format (by magic).
template <int N>
GridField<N> load_grid(const std::string& path) {
    const auto s = read_file(path);
    if (s.size() >= 8 && std::memcmp(s.data(), detail::kGridMagic, 8) == 0) return grid_from_binary<N>(s);
    try {
        return grid_from_json<N>(json::parse(s));
    } catch (const json::parse_error& e) {
        throw parse_error("'" + path + "' is neither a binary nor a JSON grid: " + e.what());
    }
}

}  // namespace iqclab::io
