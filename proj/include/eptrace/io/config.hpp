#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "eptrace/hamiltonian.hpp"
#include "eptrace/types.hpp"

namespace eptrace::io {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

/// Config validation failure located by a JSON pointer (RFC 6901).
class SchemaError : public Error {
public:
    SchemaError(std::string pointer, const std::string& what)
        : Error(ErrorCode::SchemaError, (pointer.empty() ? std::string("(root)") : pointer) + ": " + what),
          pointer_(std::move(pointer)) {}
    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

// ---------------------------------------------------------------------------
// Validated configuration

/// Explicit values, or num points spaced linearly / logarithmically from
/// start to stop inclusive.
struct GridSpec {
    enum class Kind { values, linspace, logspace };
    Kind kind = Kind::values;
    std::vector<double> values;
    double start = 0.0, stop = 0.0;
    std::size_t num = 0;

    std::vector<double> points() const {
        if (kind == Kind::values) return values;
        std::vector<double> out(num);
        for (std::size_t i = 0; i < num; ++i) {
            const double t = num == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(num - 1);
            out[i] = kind == Kind::linspace
                         ? start + (stop - start) * t
                         : std::pow(10.0, std::log10(start) + (std::log10(stop) - std::log10(start)) * t);
        }
        if (num > 1) out.back() = stop;
        return out;
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct LevelsClosed {
    std::vector<double> levels;
    friend bool operator==(const LevelsClosed&, const LevelsClosed&) = default;
};
struct MatrixClosed {
    CMatrix h0;
    friend bool operator==(const MatrixClosed&, const MatrixClosed&) = default;
};
/// n levels drawn uniformly from [low, high) with the run seed.
struct RandomLevelsClosed {
    std::size_t n = 0;
    double low = 0.0, high = 1.0;
    friend bool operator==(const RandomLevelsClosed&, const RandomLevelsClosed&) = default;
};
using ClosedSpec = std::variant<LevelsClosed, MatrixClosed, RandomLevelsClosed>;

/// Couplings given explicitly, or drawn as real Gaussians N(0, scale^2) with
/// the run seed after the closed-system draw.
struct ChannelsSpec {
    std::optional<CMatrix> v;
    std::size_t random_channels = 0;
    double random_scale = 1.0;
    std::vector<Band> bands;
    friend bool operator==(const ChannelsSpec&, const ChannelsSpec&) = default;
};

struct WidebandCoupling {
    double alpha = 0.0;
    friend bool operator==(const WidebandCoupling&, const WidebandCoupling&) = default;
};
struct EnergyDependentCoupling {
    double energy = 0.0;  // energy at which H_eff(E) is evaluated unless E is a scan parameter
    friend bool operator==(const EnergyDependentCoupling&, const EnergyDependentCoupling&) = default;
};
using CouplingSpec = std::variant<WidebandCoupling, EnergyDependentCoupling>;

struct EffectiveSpec {
    ClosedSpec closed;
    ChannelsSpec channels;
    CouplingSpec coupling;
    friend bool operator==(const EffectiveSpec&, const EffectiveSpec&) = default;
};

using ModelSpec = std::variant<TwoLevelParams, EffectiveSpec>;

struct EigTask {
    friend bool operator==(const EigTask&, const EigTask&) = default;
};
struct SweepTask {
    std::string x;
    GridSpec values;
    friend bool operator==(const SweepTask&, const SweepTask&) = default;
};
struct EpFindTask {
    std::string x, y;
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
    double seed_x = 0.0, seed_y = 0.0;
    std::optional<std::pair<std::size_t, std::size_t>> pair;
    int max_iter = 100;
    friend bool operator==(const EpFindTask&, const EpFindTask&) = default;
};
struct RigidityMapTask {
    std::string x, y;
    GridSpec xs, ys;
    friend bool operator==(const RigidityMapTask&, const RigidityMapTask&) = default;
};
struct CrossSectionTask {
    GridSpec energies;
    std::size_t from = 0, to = 0;
    friend bool operator==(const CrossSectionTask&, const CrossSectionTask&) = default;
};
struct TrapTask {
    GridSpec alphas;
    friend bool operator==(const TrapTask&, const TrapTask&) = default;
};
struct EncircleTask {
    std::string x, y;
    double center_x = 0.0, center_y = 0.0;
    double radius = 0.1;
    std::size_t steps = 400;
    friend bool operator==(const EncircleTask&, const EncircleTask&) = default;
};
struct OrthScanTask {
    std::string x, y;
    GridSpec xs, ys;
    friend bool operator==(const OrthScanTask&, const OrthScanTask&) = default;
};
using TaskSpec = std::variant<EigTask, SweepTask, EpFindTask, RigidityMapTask, CrossSectionTask, TrapTask,
                              EncircleTask, OrthScanTask>;

inline const char* task_name(const TaskSpec& t) {
    static constexpr const char* names[] = {"eig",           "sweep", "ep_find",  "rigidity_map",
                                            "cross_section", "trap",  "encircle", "orth_scan"};
    return names[t.index()];
}

enum class OutputFormat { csv, json };

struct OutputSpec {
    std::string dir = "out";
    OutputFormat format = OutputFormat::csv;
    friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct RunConfig {
    ModelSpec model;
    TaskSpec task;
    Tolerances tolerances;
    OutputSpec output;
    std::uint64_t seed = 0;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// ---------------------------------------------------------------------------
// Scan parameter names

inline const std::vector<std::string>& two_level_parameters() {
    static const std::vector<std::string> names{"e1", "gamma1", "e2", "gamma2", "omega_re", "omega_im"};
    return names;
}

/// "alpha" (wideband), "energy" (energy-dependent), or "h0_<k>" (diagonal
/// element k of H0, zero-based).
inline bool effective_parameter_ok(const std::string& name, const EffectiveSpec& m, std::size_t dim) {
    if (name == "alpha") return std::holds_alternative<WidebandCoupling>(m.coupling);
    if (name == "energy") return std::holds_alternative<EnergyDependentCoupling>(m.coupling);
    if (name.rfind("h0_", 0) == 0 && name.size() > 3) {
        std::size_t k = 0;
        for (std::size_t i = 3; i < name.size(); ++i) {
            if (name[i] < '0' || name[i] > '9') return false;
            k = k * 10 + static_cast<std::size_t>(name[i] - '0');
            if (k > dim) return false;
        }
        return k < dim && (name.size() == 4 || name[3] != '0');
    }
    return false;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string escape_pointer_token(const std::string& key) {
    std::string out;
    for (char ch : key) {
        if (ch == '~') out += "~0";
        else if (ch == '/') out += "~1";
        else out += ch;
    }
    return out;
}

inline std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + escape_pointer_token(key); }
inline std::string child(const std::string& ptr, std::size_t idx) { return ptr + "/" + std::to_string(idx); }

inline const json& expect_object(const json& j, const std::string& ptr) {
    if (!j.is_object()) throw SchemaError(ptr, "expected an object");
    return j;
}

inline void check_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) {
    expect_object(j, ptr);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw SchemaError(child(ptr, it.key()), "unknown key");
    }
}

inline const json& require(const json& j, const std::string& ptr, const char* key) {
    if (!j.contains(key)) throw SchemaError(child(ptr, key), "required key missing");
    return j.at(key);
}

/// The single key of a one-key object used as a tagged union.
inline std::string tag_of(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) {
    check_keys(j, ptr, allowed);
    if (j.size() != 1) {
        std::string names;
        for (const char* a : allowed) names += std::string(names.empty() ? "" : ", ") + a;
        throw SchemaError(ptr, "exactly one of {" + names + "} required");
    }
    return j.begin().key();
}

inline double get_double(const json& j, const std::string& ptr) {
    if (!j.is_number()) throw SchemaError(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw SchemaError(ptr, "expected a finite number");
    return v;
}

inline double get_positive(const json& j, const std::string& ptr) {
    const double v = get_double(j, ptr);
    if (!(v > 0.0)) throw SchemaError(ptr, "must be positive");
    return v;
}

inline std::uint64_t get_uint(const json& j, const std::string& ptr) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
    throw SchemaError(ptr, "expected a non-negative integer");
}

inline std::string get_string(const json& j, const std::string& ptr) {
    if (!j.is_string()) throw SchemaError(ptr, "expected a string");
    return j.get<std::string>();
}

/// A number, or [re, im].
inline cplx get_complex(const json& j, const std::string& ptr) {
    if (j.is_number()) return {get_double(j, ptr), 0.0};
    if (j.is_array() && j.size() == 2) return {get_double(j[0], child(ptr, 0)), get_double(j[1], child(ptr, 1))};
    throw SchemaError(ptr, "expected a number or [re, im]");
}

inline std::vector<double> get_doubles(const json& j, const std::string& ptr) {
    if (!j.is_array() || j.empty()) throw SchemaError(ptr, "expected a nonempty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_double(j[i], child(ptr, i)));
    return out;
}

inline CMatrix get_matrix(const json& j, const std::string& ptr) {
    if (!j.is_array() || j.empty()) throw SchemaError(ptr, "expected a nonempty array of rows");
    std::size_t cols = 0;
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].empty()) throw SchemaError(child(ptr, r), "expected a nonempty row");
        if (r == 0) cols = j[r].size();
        if (j[r].size() != cols) throw SchemaError(child(ptr, r), "rows must have equal length");
    }
    CMatrix m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = get_complex(j[r][c], child(child(ptr, r), c));
    return m;
}

inline std::pair<double, double> get_interval(const json& j, const std::string& ptr) {
    if (!j.is_array() || j.size() != 2) throw SchemaError(ptr, "expected [min, max]");
    const double lo = get_double(j[0], child(ptr, 0)), hi = get_double(j[1], child(ptr, 1));
    if (!(lo < hi)) throw SchemaError(ptr, "expected min < max");
    return {lo, hi};
}

inline GridSpec parse_grid(const json& j, const std::string& ptr) {
    GridSpec g;
    const std::string tag = tag_of(j, ptr, {"values", "linspace", "logspace"});
    const std::string p = child(ptr, tag);
    if (tag == "values") {
        g.kind = GridSpec::Kind::values;
        g.values = get_doubles(j.at(tag), p);
        for (std::size_t i = 1; i < g.values.size(); ++i)
            if (!(g.values[i] > g.values[i - 1])) throw SchemaError(child(p, i), "grid values must be strictly increasing");
        return g;
    }
    const json& body = j.at(tag);
    check_keys(body, p, {"start", "stop", "num"});
    g.kind = tag == "linspace" ? GridSpec::Kind::linspace : GridSpec::Kind::logspace;
    g.start = get_double(require(body, p, "start"), child(p, "start"));
    g.stop = get_double(require(body, p, "stop"), child(p, "stop"));
    g.num = get_uint(require(body, p, "num"), child(p, "num"));
    if (g.num == 0) throw SchemaError(child(p, "num"), "grid must be nonempty");
    if (g.num > 1 && !(g.stop > g.start)) throw SchemaError(child(p, "stop"), "stop must exceed start");
    if (g.num == 1 && g.stop != g.start) throw SchemaError(child(p, "stop"), "a one-point grid needs stop == start");
    if (g.kind == GridSpec::Kind::logspace && !(g.start > 0.0))
        throw SchemaError(child(p, "start"), "logspace needs start > 0");
    const auto pts = g.points();
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (!(pts[i] > pts[i - 1])) throw SchemaError(p, "grid points are not strictly increasing");
    return g;
}

inline TwoLevelParams parse_two_level(const json& j, const std::string& ptr) {
    check_keys(j, ptr, {"e1", "gamma1", "e2", "gamma2", "omega"});
    TwoLevelParams p;
    p.e1 = get_double(require(j, ptr, "e1"), child(ptr, "e1"));
    p.e2 = get_double(require(j, ptr, "e2"), child(ptr, "e2"));
    if (j.contains("gamma1")) p.gamma1 = get_double(j["gamma1"], child(ptr, "gamma1"));
    if (j.contains("gamma2")) p.gamma2 = get_double(j["gamma2"], child(ptr, "gamma2"));
    p.omega = get_complex(require(j, ptr, "omega"), child(ptr, "omega"));
    return p;
}

inline ClosedSpec parse_closed(const json& j, const std::string& ptr) {
    const std::string tag = tag_of(j, ptr, {"levels", "h0", "random_levels"});
    const std::string p = child(ptr, tag);
    if (tag == "levels") return LevelsClosed{get_doubles(j.at(tag), p)};
    if (tag == "h0") {
        CMatrix h0 = get_matrix(j.at(tag), p);
        try {
            (void)ClosedSystem::from_matrix(h0);
        } catch (const Error& e) {
            throw SchemaError(p, e.what());
        }
        return MatrixClosed{std::move(h0)};
    }
    const json& body = j.at(tag);
    check_keys(body, p, {"n", "low", "high"});
    RandomLevelsClosed r;
    r.n = get_uint(require(body, p, "n"), child(p, "n"));
    if (r.n == 0) throw SchemaError(child(p, "n"), "must be at least 1");
    if (body.contains("low")) r.low = get_double(body["low"], child(p, "low"));
    if (body.contains("high")) r.high = get_double(body["high"], child(p, "high"));
    if (!(r.low < r.high)) throw SchemaError(child(p, "high"), "must exceed low");
    return r;
}

inline std::size_t closed_dim(const ClosedSpec& c) {
    if (auto* l = std::get_if<LevelsClosed>(&c)) return l->levels.size();
    if (auto* m = std::get_if<MatrixClosed>(&c)) return m->h0.rows();
    return std::get<RandomLevelsClosed>(c).n;
}

inline ChannelsSpec parse_channels(const json& j, const std::string& ptr, std::size_t dim) {
    check_keys(j, ptr, {"v", "random", "bands"});
    ChannelsSpec ch;
    if (j.contains("v") == j.contains("random")) throw SchemaError(ptr, "exactly one of {v, random} required");
    std::size_t nc = 0;
    if (j.contains("v")) {
        const std::string p = child(ptr, "v");
        ch.v = get_matrix(j["v"], p);
        if (ch.v->rows() != dim)
            throw SchemaError(p, "V has " + std::to_string(ch.v->rows()) + " rows but H0 is " + std::to_string(dim) +
                                     "x" + std::to_string(dim));
        nc = ch.v->cols();
    } else {
        const std::string p = child(ptr, "random");
        const json& body = j["random"];
        check_keys(body, p, {"channels", "scale"});
        ch.random_channels = get_uint(require(body, p, "channels"), child(p, "channels"));
        if (ch.random_channels == 0) throw SchemaError(child(p, "channels"), "must be at least 1");
        if (body.contains("scale")) ch.random_scale = get_positive(body["scale"], child(p, "scale"));
        nc = ch.random_channels;
    }
    if (j.contains("bands")) {
        const std::string p = child(ptr, "bands");
        const json& arr = j["bands"];
        if (!arr.is_array()) throw SchemaError(p, "expected an array");
        if (arr.size() != nc) throw SchemaError(p, "one band per channel required");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string bp = child(p, i);
            check_keys(arr[i], bp, {"e_min", "e_max", "rho"});
            Band b;
            b.e_min = get_double(require(arr[i], bp, "e_min"), child(bp, "e_min"));
            b.e_max = get_double(require(arr[i], bp, "e_max"), child(bp, "e_max"));
            b.rho = get_positive(require(arr[i], bp, "rho"), child(bp, "rho"));
            if (!(b.e_min < b.e_max)) throw SchemaError(child(bp, "e_max"), "must exceed e_min");
            ch.bands.push_back(b);
        }
    }
    return ch;
}

inline EffectiveSpec parse_effective(const json& j, const std::string& ptr) {
    check_keys(j, ptr, {"closed", "channels", "coupling"});
    EffectiveSpec m;
    m.closed = parse_closed(require(j, ptr, "closed"), child(ptr, "closed"));
    m.channels = parse_channels(require(j, ptr, "channels"), child(ptr, "channels"), closed_dim(m.closed));
    const std::string cp = child(ptr, "coupling");
    const json& cj = require(j, ptr, "coupling");
    const std::string tag = tag_of(cj, cp, {"wideband", "energy_dependent"});
    const std::string p = child(cp, tag);
    const json& body = cj.at(tag);
    if (tag == "wideband") {
        check_keys(body, p, {"alpha"});
        WidebandCoupling w;
        w.alpha = get_double(require(body, p, "alpha"), child(p, "alpha"));
        if (w.alpha < 0.0) throw SchemaError(child(p, "alpha"), "must be non-negative");
        m.coupling = w;
    } else {
        check_keys(body, p, {"energy"});
        EnergyDependentCoupling e;
        if (body.contains("energy")) e.energy = get_double(body["energy"], child(p, "energy"));
        if (m.channels.bands.empty())
            throw SchemaError(child(child(ptr, "channels"), "bands"), "energy-dependent coupling needs one band per channel");
        m.coupling = e;
    }
    return m;
}

inline ModelSpec parse_model(const json& j, const std::string& ptr) {
    const std::string tag = tag_of(j, ptr, {"two_level", "effective"});
    if (tag == "two_level") return parse_two_level(j.at(tag), child(ptr, tag));
    return parse_effective(j.at(tag), child(ptr, tag));
}

inline std::size_t model_dim(const ModelSpec& m) {
    if (std::holds_alternative<TwoLevelParams>(m)) return 2;
    return closed_dim(std::get<EffectiveSpec>(m).closed);
}

inline std::string get_parameter(const json& j, const std::string& ptr, const ModelSpec& model) {
    const std::string name = get_string(j, ptr);
    if (std::holds_alternative<TwoLevelParams>(model)) {
        for (const auto& n : two_level_parameters())
            if (n == name) return name;
        throw SchemaError(ptr, "unknown two-level parameter '" + name + "'");
    }
    if (!effective_parameter_ok(name, std::get<EffectiveSpec>(model), model_dim(model)))
        throw SchemaError(ptr, "parameter '" + name + "' is not available for this model");
    return name;
}

inline std::pair<std::string, std::string> get_xy(const json& j, const std::string& ptr, const ModelSpec& model) {
    std::string x = get_parameter(require(j, ptr, "x"), child(ptr, "x"), model);
    std::string y = get_parameter(require(j, ptr, "y"), child(ptr, "y"), model);
    if (x == y) throw SchemaError(child(ptr, "y"), "x and y must be different parameters");
    return {std::move(x), std::move(y)};
}

inline const EffectiveSpec& require_effective(const ModelSpec& model, const std::string& ptr, const char* task) {
    if (!std::holds_alternative<EffectiveSpec>(model))
        throw SchemaError(ptr, std::string(task) + " needs an effective model");
    return std::get<EffectiveSpec>(model);
}

inline std::size_t channel_count(const EffectiveSpec& m) {
    return m.channels.v ? m.channels.v->cols() : m.channels.random_channels;
}

inline TaskSpec parse_task(const json& j, const std::string& ptr, const ModelSpec& model) {
    const std::string tag =
        tag_of(j, ptr, {"eig", "sweep", "ep_find", "rigidity_map", "cross_section", "trap", "encircle", "orth_scan"});
    const std::string p = child(ptr, tag);
    const json& b = j.at(tag);
    if (tag == "eig") {
        check_keys(b, p, {});
        return EigTask{};
    }
    if (tag == "sweep") {
        check_keys(b, p, {"x", "values"});
        SweepTask t;
        t.x = get_parameter(require(b, p, "x"), child(p, "x"), model);
        t.values = parse_grid(require(b, p, "values"), child(p, "values"));
        return t;
    }
    if (tag == "ep_find") {
        check_keys(b, p, {"x", "y", "domain", "seed", "pair", "max_iter"});
        EpFindTask t;
        std::tie(t.x, t.y) = get_xy(b, p, model);
        const std::string dp = child(p, "domain");
        const json& d = require(b, p, "domain");
        check_keys(d, dp, {"x", "y"});
        std::tie(t.x_min, t.x_max) = get_interval(require(d, dp, "x"), child(dp, "x"));
        std::tie(t.y_min, t.y_max) = get_interval(require(d, dp, "y"), child(dp, "y"));
        const std::string sp = child(p, "seed");
        const json& s = require(b, p, "seed");
        if (!s.is_array() || s.size() != 2) throw SchemaError(sp, "expected [x, y]");
        t.seed_x = get_double(s[0], child(sp, 0));
        t.seed_y = get_double(s[1], child(sp, 1));
        if (b.contains("pair")) {
            const std::string pp = child(p, "pair");
            const json& pr = b["pair"];
            if (!pr.is_array() || pr.size() != 2) throw SchemaError(pp, "expected [i, j]");
            const std::size_t i = get_uint(pr[0], child(pp, 0)), k = get_uint(pr[1], child(pp, 1));
            const std::size_t n = model_dim(model);
            if (i >= n || k >= n || i == k) throw SchemaError(pp, "expected two distinct state indices below " + std::to_string(n));
            t.pair = std::pair{i, k};
        }
        if (b.contains("max_iter")) {
            const std::uint64_t m = get_uint(b["max_iter"], child(p, "max_iter"));
            if (m == 0 || m > 100000) throw SchemaError(child(p, "max_iter"), "must be in [1, 100000]");
            t.max_iter = static_cast<int>(m);
        }
        return t;
    }
    if (tag == "rigidity_map" || tag == "orth_scan") {
        check_keys(b, p, {"x", "y", "xs", "ys"});
        std::string x, y;
        std::tie(x, y) = get_xy(b, p, model);
        GridSpec xs = parse_grid(require(b, p, "xs"), child(p, "xs"));
        GridSpec ys = parse_grid(require(b, p, "ys"), child(p, "ys"));
        if (tag == "rigidity_map") return RigidityMapTask{x, y, xs, ys};
        return OrthScanTask{x, y, xs, ys};
    }
    if (tag == "cross_section") {
        const EffectiveSpec& m = require_effective(model, p, "cross_section");
        check_keys(b, p, {"energies", "from", "to"});
        CrossSectionTask t;
        t.energies = parse_grid(require(b, p, "energies"), child(p, "energies"));
        const std::size_t nc = channel_count(m);
        if (b.contains("from")) t.from = get_uint(b["from"], child(p, "from"));
        if (b.contains("to")) t.to = get_uint(b["to"], child(p, "to"));
        if (t.from >= nc) throw SchemaError(child(p, "from"), "channel index out of range");
        if (t.to >= nc) throw SchemaError(child(p, "to"), "channel index out of range");
        return t;
    }
    if (tag == "trap") {
        const EffectiveSpec& m = require_effective(model, p, "trap");
        if (!std::holds_alternative<WidebandCoupling>(m.coupling)) throw SchemaError(p, "trap needs wideband coupling");
        check_keys(b, p, {"alphas"});
        TrapTask t;
        t.alphas = parse_grid(require(b, p, "alphas"), child(p, "alphas"));
        const auto pts = t.alphas.points();
        if (pts.size() < 2) throw SchemaError(child(p, "alphas"), "needs at least two coupling values");
        if (pts.front() < 0.0) throw SchemaError(child(p, "alphas"), "coupling values must be non-negative");
        return t;
    }
    check_keys(b, p, {"x", "y", "center", "radius", "steps"});
    EncircleTask t;
    std::tie(t.x, t.y) = get_xy(b, p, model);
    const std::string cp = child(p, "center");
    const json& c = require(b, p, "center");
    if (!c.is_array() || c.size() != 2) throw SchemaError(cp, "expected [x, y]");
    t.center_x = get_double(c[0], child(cp, 0));
    t.center_y = get_double(c[1], child(cp, 1));
    t.radius = get_positive(require(b, p, "radius"), child(p, "radius"));
    if (b.contains("steps")) {
        t.steps = get_uint(b["steps"], child(p, "steps"));
        if (t.steps < 3 || t.steps > 1000000) throw SchemaError(child(p, "steps"), "must be in [3, 1000000]");
    }
    return t;
}

#define EPTRACE_TOLERANCE_FIELDS(X)                                                                        \
    X(tol_eig) X(tol_norm) X(tol_sym) X(tol_solve) X(gap_min) X(tol_defect) X(tol_fix) X(tol_ep_gap)     \
        X(tol_ep_rig) X(fd_step) X(overlap_min) X(tol_orth) X(tol_cluster) X(tol_unit) X(prominence)

inline Tolerances parse_tolerances(const json& j, const std::string& ptr) {
    expect_object(j, ptr);
    Tolerances t;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const std::string p = child(ptr, k);
#define EPTRACE_READ_TOL(name)                 \
    if (k == #name) {                          \
        t.name = get_positive(it.value(), p);  \
        continue;                              \
    }
        EPTRACE_TOLERANCE_FIELDS(EPTRACE_READ_TOL)
#undef EPTRACE_READ_TOL
        if (k == "max_iter") {
            const std::uint64_t m = get_uint(it.value(), p);
            if (m == 0 || m > 1000000) throw SchemaError(p, "must be in [1, 1000000]");
            t.max_iter = static_cast<int>(m);
            continue;
        }
        throw SchemaError(p, "unknown key");
    }
    if (t.overlap_min > 1.0) throw SchemaError(child(ptr, "overlap_min"), "must not exceed 1");
    if (t.prominence > 1.0) throw SchemaError(child(ptr, "prominence"), "must not exceed 1");
    return t;
}

inline OutputSpec parse_output(const json& j, const std::string& ptr) {
    check_keys(j, ptr, {"dir", "format"});
    OutputSpec o;
    if (j.contains("dir")) {
        o.dir = get_string(j["dir"], child(ptr, "dir"));
        if (o.dir.empty()) throw SchemaError(child(ptr, "dir"), "must be nonempty");
    }
    if (j.contains("format")) {
        const std::string f = get_string(j["format"], child(ptr, "format"));
        if (f == "csv") o.format = OutputFormat::csv;
        else if (f == "json") o.format = OutputFormat::json;
        else throw SchemaError(child(ptr, "format"), "expected \"csv\" or \"json\"");
    }
    return o;
}

}  // namespace detail

inline RunConfig parse_config_json(const json& j) {
    using namespace detail;
    check_keys(j, "", {"model", "task", "tolerances", "output", "seed"});
    RunConfig cfg;
    cfg.model = parse_model(require(j, "", "model"), "/model");
    cfg.task = parse_task(require(j, "", "task"), "/task", cfg.model);
    if (j.contains("tolerances")) cfg.tolerances = parse_tolerances(j["tolerances"], "/tolerances");
    if (j.contains("output")) cfg.output = parse_output(j["output"], "/output");
    if (j.contains("seed")) cfg.seed = get_uint(j["seed"], "/seed");
    return cfg;
}

inline RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config_json(j);
}

// ---------------------------------------------------------------------------
// Serialization (validated form, all defaults explicit)

namespace detail {

inline ojson complex_json(cplx z) { return ojson::array({z.real(), z.imag()}); }

inline ojson matrix_json(const CMatrix& m) {
    ojson rows = ojson::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        ojson row = ojson::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline ojson grid_json(const GridSpec& g) {
    if (g.kind == GridSpec::Kind::values) return ojson{{"values", g.values}};
    ojson body{{"start", g.start}, {"stop", g.stop}, {"num", g.num}};
    return ojson{{g.kind == GridSpec::Kind::linspace ? "linspace" : "logspace", std::move(body)}};
}

inline ojson model_json(const ModelSpec& model) {
    if (const auto* p = std::get_if<TwoLevelParams>(&model))
        return ojson{{"two_level",
                      {{"e1", p->e1}, {"gamma1", p->gamma1}, {"e2", p->e2}, {"gamma2", p->gamma2},
                       {"omega", complex_json(p->omega)}}}};
    const auto& m = std::get<EffectiveSpec>(model);
    ojson closed;
    if (const auto* l = std::get_if<LevelsClosed>(&m.closed)) closed = ojson{{"levels", l->levels}};
    else if (const auto* h = std::get_if<MatrixClosed>(&m.closed)) closed = ojson{{"h0", matrix_json(h->h0)}};
    else {
        const auto& r = std::get<RandomLevelsClosed>(m.closed);
        closed = ojson{{"random_levels", {{"n", r.n}, {"low", r.low}, {"high", r.high}}}};
    }
    ojson channels = ojson::object();
    if (m.channels.v) channels["v"] = matrix_json(*m.channels.v);
    else channels["random"] = ojson{{"channels", m.channels.random_channels}, {"scale", m.channels.random_scale}};
    if (!m.channels.bands.empty()) {
        ojson bands = ojson::array();
        for (const Band& b : m.channels.bands) bands.push_back({{"e_min", b.e_min}, {"e_max", b.e_max}, {"rho", b.rho}});
        channels["bands"] = std::move(bands);
    }
    ojson coupling;
    if (const auto* w = std::get_if<WidebandCoupling>(&m.coupling)) coupling = ojson{{"wideband", {{"alpha", w->alpha}}}};
    else coupling = ojson{{"energy_dependent", {{"energy", std::get<EnergyDependentCoupling>(m.coupling).energy}}}};
    return ojson{{"effective", {{"closed", closed}, {"channels", channels}, {"coupling", coupling}}}};
}

inline ojson task_json(const TaskSpec& task) {
    ojson body = ojson::object();
    std::visit(
        [&](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, SweepTask>) {
                body["x"] = t.x;
                body["values"] = grid_json(t.values);
            } else if constexpr (std::is_same_v<T, EpFindTask>) {
                body["x"] = t.x;
                body["y"] = t.y;
                body["domain"] = {{"x", {t.x_min, t.x_max}}, {"y", {t.y_min, t.y_max}}};
                body["seed"] = {t.seed_x, t.seed_y};
                if (t.pair) body["pair"] = {t.pair->first, t.pair->second};
                body["max_iter"] = t.max_iter;
            } else if constexpr (std::is_same_v<T, RigidityMapTask> || std::is_same_v<T, OrthScanTask>) {
                body["x"] = t.x;
                body["y"] = t.y;
                body["xs"] = grid_json(t.xs);
                body["ys"] = grid_json(t.ys);
            } else if constexpr (std::is_same_v<T, CrossSectionTask>) {
                body["energies"] = grid_json(t.energies);
                body["from"] = t.from;
                body["to"] = t.to;
            } else if constexpr (std::is_same_v<T, TrapTask>) {
                body["alphas"] = grid_json(t.alphas);
            } else if constexpr (std::is_same_v<T, EncircleTask>) {
                body["x"] = t.x;
                body["y"] = t.y;
                body["center"] = {t.center_x, t.center_y};
                body["radius"] = t.radius;
                body["steps"] = t.steps;
            }
        },
        task);
    return ojson{{task_name(task), std::move(body)}};
}

inline ojson tolerances_json(const Tolerances& t) {
    ojson j = ojson::object();
#define EPTRACE_WRITE_TOL(name) j[#name] = t.name;
    EPTRACE_TOLERANCE_FIELDS(EPTRACE_WRITE_TOL)
#undef EPTRACE_WRITE_TOL
    j["max_iter"] = t.max_iter;
    return j;
}

}  // namespace detail

/// Full validated form. With include_output = false the output block is
/// omitted, so the echo does not depend on where results were written.
inline ojson serialize_config(const RunConfig& cfg, bool include_output = true) {
    ojson j = ojson::object();
    j["model"] = detail::model_json(cfg.model);
    j["task"] = detail::task_json(cfg.task);
    j["tolerances"] = detail::tolerances_json(cfg.tolerances);
    if (include_output)
        j["output"] = {{"dir", cfg.output.dir}, {"format", cfg.output.format == OutputFormat::csv ? "csv" : "json"}};
    j["seed"] = cfg.seed;
    return j;
}

}  // namespace eptrace::io
