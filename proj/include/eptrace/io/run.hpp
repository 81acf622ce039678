#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "eptrace/hamiltonian.hpp"
#include "eptrace/io/config.hpp"
#include "eptrace/linalg.hpp"
#include "eptrace/scattering.hpp"
#include "eptrace/spectral.hpp"
#include "eptrace/types.hpp"

#ifndef EPTRACE_VERSION
#define EPTRACE_VERSION "0.1.0"
#endif

namespace eptrace::io {

inline constexpr const char* version = EPTRACE_VERSION;

// ---------------------------------------------------------------------------
// Model resolution and parameter families

/// Uniform and Gaussian draws built directly on the 64-bit Mersenne Twister,
/// whose output sequence is fixed by the standard.
class SeededDraws {
public:
    explicit SeededDraws(std::uint64_t seed) : rng_(seed) {}
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double gauss() {
        double u = uniform();
        while (u == 0.0) u = uniform();
        const double v = uniform();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * pi * v);
    }

private:
    std::mt19937_64 rng_;
};

/// A model with every random draw made, plus the current values of the scan
/// parameters.
struct ResolvedModel {
    bool two_level = false;
    TwoLevelParams tl;
    ClosedSystem cs;
    ChannelSet ch;
    bool wideband = true;
    double alpha = 0.0;
    double energy = 0.0;

    CMatrix matrix() const {
        if (two_level) return build_two_level(tl).matrix;
        if (wideband) return build_wideband(cs, ch, alpha).matrix;
        return build_energy_dependent(cs, ch, energy).matrix;
    }

    ResolvedModel with(const std::string& name, double value) const {
        ResolvedModel m = *this;
        if (two_level) {
            static const TwoLevelParam ids[] = {TwoLevelParam::e1,     TwoLevelParam::gamma1,   TwoLevelParam::e2,
                                                TwoLevelParam::gamma2, TwoLevelParam::omega_re, TwoLevelParam::omega_im};
            const auto& names = two_level_parameters();
            for (std::size_t i = 0; i < names.size(); ++i)
                if (names[i] == name) m.tl = with_param(tl, ids[i], value);
            return m;
        }
        if (name == "alpha") {
            m.alpha = value;
        } else if (name == "energy") {
            m.energy = value;
        } else {
            const std::size_t k = std::stoul(name.substr(3));
            if (cs.levels()) {
                std::vector<double> lv = *cs.levels();
                lv[k] = value;
                m.cs = ClosedSystem::from_levels(std::move(lv));
            } else {
                CMatrix h0 = cs.h0();
                h0(k, k) = value;
                m.cs = ClosedSystem::from_matrix(std::move(h0));
            }
        }
        return m;
    }
};

inline ResolvedModel resolve_model(const ModelSpec& spec, std::uint64_t seed) {
    ResolvedModel m;
    if (const auto* p = std::get_if<TwoLevelParams>(&spec)) {
        m.two_level = true;
        m.tl = *p;
        return m;
    }
    const auto& e = std::get<EffectiveSpec>(spec);
    SeededDraws draws(seed);
    if (const auto* l = std::get_if<LevelsClosed>(&e.closed)) {
        m.cs = ClosedSystem::from_levels(l->levels);
    } else if (const auto* h = std::get_if<MatrixClosed>(&e.closed)) {
        m.cs = ClosedSystem::from_matrix(h->h0);
    } else {
        const auto& r = std::get<RandomLevelsClosed>(e.closed);
        std::vector<double> lv(r.n);
        for (auto& x : lv) x = r.low + (r.high - r.low) * draws.uniform();
        m.cs = ClosedSystem::from_levels(std::move(lv));
    }
    CMatrix v;
    if (e.channels.v) {
        v = *e.channels.v;
    } else {
        v = CMatrix(m.cs.dim(), e.channels.random_channels);
        for (std::size_t i = 0; i < v.rows(); ++i)
            for (std::size_t c = 0; c < v.cols(); ++c) v(i, c) = e.channels.random_scale * draws.gauss();
    }
    m.ch = ChannelSet(std::move(v), e.channels.bands);
    if (const auto* w = std::get_if<WidebandCoupling>(&e.coupling)) {
        m.wideband = true;
        m.alpha = w->alpha;
    } else {
        m.wideband = false;
        m.energy = std::get<EnergyDependentCoupling>(e.coupling).energy;
    }
    return m;
}

/// (x, y) -> H with the named parameters replaced; y may be empty for a
/// one-parameter family.
inline Family make_family(const ResolvedModel& model, std::string x, std::string y) {
    return [model, x = std::move(x), y = std::move(y)](double xv, double yv) {
        ResolvedModel m = model.with(x, xv);
        if (!y.empty()) m = m.with(y, yv);
        return m.matrix();
    };
}

// ---------------------------------------------------------------------------
// Results

struct Warning {
    std::string code;  // NearDefective, NoConvergence, AmbiguousMatching, PoleProximity, BandEdge
    std::string message;
};

struct OutputFile {
    std::string name;
    std::string content;
};

struct RunResult {
    ojson envelope;
    int exit_code = 0;
    std::vector<OutputFile> files;  // result.json first, then CSV files
};

namespace detail {

/// Shortest decimal that reads back to the same double.
inline std::string fmt(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::string fmt(std::size_t x) { return std::to_string(x); }

class Csv {
public:
    explicit Csv(std::string header) : text_(std::move(header) + "\n") {}
    template <class... T>
    void row(const T&... cells) {
        bool first = true;
        ((text_ += (first ? "" : ","), text_ += cell(cells), first = false), ...);
        text_ += "\n";
    }
    std::string str() const { return text_; }

private:
    static std::string cell(double x) { return fmt(x); }
    static std::string cell(std::size_t x) { return fmt(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(bool b) { return b ? "1" : "0"; }
    static std::string cell(const std::string& s) { return s; }
    std::string text_;
};

inline ojson cjson(cplx z) { return ojson::array({z.real(), z.imag()}); }

inline ojson cjson(const std::vector<cplx>& v) {
    ojson a = ojson::array();
    for (cplx z : v) a.push_back(cjson(z));
    return a;
}

inline std::string point_str(double x, double y) { return "(" + fmt(x) + ", " + fmt(y) + ")"; }

struct TaskOutput {
    ojson payload = ojson::object();
    std::vector<Warning> warnings;
    std::vector<OutputFile> csv;
};

inline TaskOutput run_eig(const ResolvedModel& m, const Tolerances& tol) {
    TaskOutput out;
    if (!m.two_level && !m.wideband) {
        const auto poles = solve_poles(m.cs, m.ch, tol.max_iter, tol.tol_fix, tol);
        ojson arr = ojson::array();
        Csv csv("state,re_lambda,im_lambda,Gamma,energy,iterations,converged");
        for (std::size_t k = 0; k < poles.size(); ++k) {
            const auto& p = poles[k];
            arr.push_back({{"value", cjson(p.value)},
                           {"width", width(p.value)},
                           {"energy", p.energy},
                           {"iterations", p.iterations},
                           {"converged", p.converged}});
            if (!p.converged) out.warnings.push_back({"NoConvergence", "pole " + std::to_string(k) + ": " + p.note});
            csv.row(k, p.value.real(), p.value.imag(), width(p.value), p.energy, p.iterations, p.converged);
        }
        out.payload["poles"] = std::move(arr);
        out.csv.push_back({"poles.csv", csv.str()});
        return out;
    }
    const CMatrix h = m.matrix();
    const EigenSystem sys = biorthonormalize(eig_general(h, tol), tol);
    std::vector<cplx> values = sys.values(), r;
    ojson abs_r = ojson::array(), widths = ojson::array(), c_norm = ojson::array(), defective = ojson::array();
    Csv csv("state,re_lambda,im_lambda,Gamma,re_r,im_r,abs_r");
    for (std::size_t k = 0; k < sys.pairs.size(); ++k) {
        const auto& p = sys.pairs[k];
        const cplx rk = phase_rigidity(p);
        r.push_back(rk);
        abs_r.push_back(std::abs(rk));
        widths.push_back(width(p.value));
        c_norm.push_back(cjson(p.c_norm));
        defective.push_back(p.near_defective);
        if (p.near_defective)
            out.warnings.push_back({"NearDefective", "state " + std::to_string(k) + ": |c(left, right)| below tol_defect"});
        csv.row(k, p.value.real(), p.value.imag(), width(p.value), rk.real(), rk.imag(), std::abs(rk));
    }
    out.payload["dim"] = sys.matrix_dim;
    out.payload["eigenvalues"] = cjson(values);
    out.payload["widths"] = std::move(widths);
    out.payload["rigidity"] = cjson(r);
    out.payload["abs_rigidity"] = std::move(abs_r);
    out.payload["c_norm"] = std::move(c_norm);
    out.payload["near_defective"] = std::move(defective);
    out.payload["max_residual"] = sys.max_residual;
    out.payload["coalescence_order"] = coalescence_order(sys, tol.tol_cluster);
    if (!m.two_level) {
        const MixingResult mix = mixing_matrix(sys, closed_basis(m.cs));
        out.payload["mixing_max_offdiag"] = mix.max_offdiag;
    }
    out.csv.push_back({"eig.csv", csv.str()});
    return out;
}

inline void trajectory_warnings(const Trajectory& tr, TaskOutput& out) {
    for (std::size_t s : tr.ambiguous_steps)
        out.warnings.push_back(
            {"AmbiguousMatching", "step " + std::to_string(s) + ": best eigenvector overlap below overlap_min"});
}

inline ojson trajectory_json(const Trajectory& tr) {
    ojson branches = ojson::array(), rig = ojson::array();
    for (std::size_t b = 0; b < tr.branches.size(); ++b) {
        branches.push_back(cjson(tr.branches[b]));
        rig.push_back(tr.rigidity[b]);
    }
    return {{"branches", std::move(branches)}, {"abs_rigidity", std::move(rig)}, {"ambiguous_steps", tr.ambiguous_steps}};
}

inline TaskOutput run_sweep(const ResolvedModel& m, const SweepTask& t, const Tolerances& tol) {
    TaskOutput out;
    const auto xs = t.values.points();
    std::vector<Point2> path;
    for (double x : xs) path.push_back({x, 0.0});
    const Trajectory tr = trace_branches(make_family(m, t.x, ""), std::span<const Point2>(path), tol);
    trajectory_warnings(tr, out);
    Csv csv(t.x + ",branch,re_lambda,im_lambda,abs_r");
    for (std::size_t s = 0; s < path.size(); ++s)
        for (std::size_t b = 0; b < tr.branches.size(); ++b)
            csv.row(path[s].x, b, tr.branches[b][s].real(), tr.branches[b][s].imag(), tr.rigidity[b][s]);
    out.payload["x"] = t.x;
    out.payload["values"] = xs;
    out.payload.update(trajectory_json(tr));
    out.csv.push_back({"sweep.csv", csv.str()});
    return out;
}

inline ojson candidate_json(const EPCandidate& c, const Family& f, const Tolerances& tol) {
    ojson j{{"point", {c.params.x, c.params.y}},
            {"pair", {c.i, c.j}},
            {"gap", c.gap},
            {"min_rigidity", c.min_rigidity},
            {"converged", c.converged},
            {"iterations", c.iterations}};
    try {
        const auto vals = eig_general(f(c.params.x, c.params.y), tol).values();
        if (c.i < vals.size() && c.j < vals.size()) j["eigenvalue"] = cjson(0.5 * (vals[c.i] + vals[c.j]));
    } catch (const Error&) {
    }
    return j;
}

inline TaskOutput run_ep_find(const ResolvedModel& m, const EpFindTask& t, const Tolerances& tol, ojson& partial) {
    TaskOutput out;
    const Family f = make_family(m, t.x, t.y);
    EPSearchOptions opt;
    opt.pair = t.pair;
    opt.max_iter = t.max_iter;
    opt.tol = tol;
    out.payload["x"] = t.x;
    out.payload["y"] = t.y;
    try {
        const EPCandidate c = ep_search(f, Domain{t.x_min, t.x_max, t.y_min, t.y_max}, {t.seed_x, t.seed_y}, opt);
        out.payload.update(candidate_json(c, f, tol));
        if (!c.converged)
            out.warnings.push_back({"NoConvergence", "coalescence at " + point_str(c.params.x, c.params.y) +
                                                         " has |r| above tol_ep_rig (diabolic, not exceptional)"});
    } catch (const EPSearchError& e) {
        partial = out.payload;
        partial["best"] = candidate_json(e.best(), f, tol);
        throw;
    }
    return out;
}

inline Grid2 make_grid(const GridSpec& xs, const GridSpec& ys) { return Grid2{xs.points(), ys.points()}; }

inline TaskOutput run_rigidity_map(const ResolvedModel& m, const RigidityMapTask& t, const Tolerances& tol) {
    TaskOutput out;
    const RigidityMap map = rigidity_map(make_family(m, t.x, t.y), make_grid(t.xs, t.ys), tol);
    Csv csv("x,y,state,re_r,im_r,abs_r");
    ojson r = ojson::array();
    for (const auto& pt : map.points) {
        const std::string where = point_str(pt.params.x, pt.params.y);
        if (pt.failed) {
            out.warnings.push_back({"NoConvergence", "grid point " + where + ": " + pt.note});
            r.push_back(nullptr);
            continue;
        }
        ojson row = ojson::array();
        for (std::size_t s = 0; s < pt.states.size(); ++s) {
            const auto& e = pt.states[s];
            if (e.near_defective)
                out.warnings.push_back({"NearDefective", "grid point " + where + " state " + std::to_string(s)});
            csv.row(pt.params.x, pt.params.y, s, e.r.real(), e.r.imag(), e.abs_r);
            row.push_back(cjson(e.r));
        }
        r.push_back(std::move(row));
    }
    out.payload["x"] = t.x;
    out.payload["y"] = t.y;
    out.payload["xs"] = map.grid.xs;
    out.payload["ys"] = map.grid.ys;
    out.payload["order"] = "row-major, y outer";
    out.payload["rigidity"] = std::move(r);
    out.csv.push_back({"rigidity_map.csv", csv.str()});
    return out;
}

inline TaskOutput run_cross_section(const ResolvedModel& m, const CrossSectionTask& t, const Tolerances& tol) {
    TaskOutput out;
    const auto grid = t.energies.points();
    const CrossSection xs = cross_section(m.cs, m.ch, m.alpha, std::span<const double>(grid), t.from, t.to, tol,
                                          m.wideband ? CouplingModel::wideband : CouplingModel::energy_dependent);
    for (std::size_t k = 0; k < xs.pole_flags.size(); ++k)
        out.warnings.push_back({to_string(xs.flag_codes[k]), "E = " + fmt(xs.energies[xs.pole_flags[k]]) +
                                                                  ": S-matrix not evaluated, sigma recorded as 0"});
    Csv csv("E,sigma");
    for (std::size_t i = 0; i < grid.size(); ++i) csv.row(xs.energies[i], xs.values[i]);
    out.payload["from"] = t.from;
    out.payload["to"] = t.to;
    out.payload["energies"] = xs.energies;
    out.payload["sigma"] = xs.values;
    out.payload["flagged"] = xs.pole_flags;
    out.payload["peak_count"] = peak_count(xs, tol.prominence);
    out.csv.push_back({"cross_section.csv", csv.str()});
    return out;
}

inline TaskOutput run_trap(const ResolvedModel& m, const TrapTask& t, const Tolerances& tol) {
    TaskOutput out;
    const auto alphas = t.alphas.points();
    const TrappingSweep sw = trapping_sweep(m.cs, m.ch, std::span<const double>(alphas), tol);
    std::string header = "alpha";
    for (std::size_t k = 1; k <= m.cs.dim(); ++k) header += ",Gamma_" + std::to_string(k);
    header += ",sum_residual";
    std::string text = header + "\n";
    for (std::size_t i = 0; i < sw.alphas.size(); ++i) {
        text += fmt(sw.alphas[i]);
        for (double g : sw.widths[i]) text += "," + fmt(g);
        text += "," + fmt(sw.sum_rule_residuals[i]) + "\n";
    }
    ojson widths = ojson::array();
    for (const auto& w : sw.widths) widths.push_back(w);
    out.payload["coupling_weight"] = m.ch.coupling_weight();
    out.payload["alphas"] = sw.alphas;
    out.payload["widths"] = std::move(widths);
    out.payload["sum_rule_residuals"] = sw.sum_rule_residuals;
    out.payload["growing"] = sw.growing;
    out.csv.push_back({"trap.csv", std::move(text)});
    return out;
}

inline TaskOutput run_encircle(const ResolvedModel& m, const EncircleTask& t, const Tolerances& tol) {
    TaskOutput out;
    const auto path = circle_path({t.center_x, t.center_y}, t.radius, t.steps);
    const Trajectory tr = trace_branches(make_family(m, t.x, t.y), std::span<const Point2>(path), tol);
    trajectory_warnings(tr, out);
    Csv csv("step,x,y,branch,re_lambda,im_lambda,abs_r");
    for (std::size_t s = 0; s < path.size(); ++s)
        for (std::size_t b = 0; b < tr.branches.size(); ++b)
            csv.row(s, path[s].x, path[s].y, b, tr.branches[b][s].real(), tr.branches[b][s].imag(), tr.rigidity[b][s]);
    out.payload["x"] = t.x;
    out.payload["y"] = t.y;
    out.payload["closed"] = tr.closed;
    out.payload["permutation"] = tr.permutation;
    out.payload.update(trajectory_json(tr));
    out.csv.push_back({"encircle.csv", csv.str()});
    return out;
}

inline TaskOutput run_orth_scan(const ResolvedModel& m, const OrthScanTask& t, const Tolerances& tol) {
    TaskOutput out;
    const auto pts = orthogonality_scan(make_family(m, t.x, t.y), make_grid(t.xs, t.ys), tol.tol_orth, tol);
    Csv csv("x,y,i,j,overlap,on_grid");
    ojson arr = ojson::array();
    for (const auto& p : pts) {
        csv.row(p.params.x, p.params.y, p.i, p.j, p.overlap, p.on_grid);
        arr.push_back({{"point", {p.params.x, p.params.y}}, {"pair", {p.i, p.j}}, {"overlap", p.overlap}, {"on_grid", p.on_grid}});
    }
    out.payload["x"] = t.x;
    out.payload["y"] = t.y;
    out.payload["points"] = std::move(arr);
    out.csv.push_back({"orth_scan.csv", csv.str()});
    return out;
}

}  // namespace detail

inline constexpr const char* envelope_name = "result.json";

/// Runs the configured task. Module errors do not escape: they become an
/// "error" entry in the envelope with exit code 1. Warnings alone give
/// exit code 2.
inline RunResult run(const RunConfig& cfg) {
    using namespace detail;
    TaskOutput out;
    ojson partial = nullptr;
    ojson error = nullptr;
    try {
        const ResolvedModel m = resolve_model(cfg.model, cfg.seed);
        const Tolerances& tol = cfg.tolerances;
        out = std::visit(
            [&](const auto& t) -> TaskOutput {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, EigTask>) return run_eig(m, tol);
                else if constexpr (std::is_same_v<T, SweepTask>) return run_sweep(m, t, tol);
                else if constexpr (std::is_same_v<T, EpFindTask>) return run_ep_find(m, t, tol, partial);
                else if constexpr (std::is_same_v<T, RigidityMapTask>) return run_rigidity_map(m, t, tol);
                else if constexpr (std::is_same_v<T, CrossSectionTask>) return run_cross_section(m, t, tol);
                else if constexpr (std::is_same_v<T, TrapTask>) return run_trap(m, t, tol);
                else if constexpr (std::is_same_v<T, EncircleTask>) return run_encircle(m, t, tol);
                else return run_orth_scan(m, t, tol);
            },
            cfg.task);
    } catch (const Error& e) {
        error = {{"code", to_string(e.code())}, {"message", e.what()}};
    } catch (const std::exception& e) {
        error = {{"code", "InternalError"}, {"message", e.what()}};
    }

    RunResult res;
    res.exit_code = !error.is_null() ? 1 : (out.warnings.empty() ? 0 : 2);
    const bool csv = cfg.output.format == OutputFormat::csv && error.is_null();

    ojson echo = serialize_config(cfg);
    echo["output"].erase("dir");
    ojson warnings = ojson::array();
    for (const auto& w : out.warnings) warnings.push_back({{"code", w.code}, {"message", w.message}});
    ojson files = ojson::array({envelope_name});
    if (csv)
        for (const auto& f : out.csv) files.push_back(f.name);

    ojson& env = res.envelope;
    env["eptrace_version"] = version;
    env["task"] = task_name(cfg.task);
    env["status"] = res.exit_code == 0 ? "ok" : res.exit_code == 2 ? "warnings" : "error";
    env["exit_code"] = res.exit_code;
    env["config"] = std::move(echo);
    env["payload"] = error.is_null() ? std::move(out.payload) : std::move(partial);
    env["warnings"] = std::move(warnings);
    env["error"] = std::move(error);
    env["files"] = std::move(files);

    res.files.push_back({envelope_name, env.dump(2) + "\n"});
    if (csv)
        for (auto& f : out.csv) res.files.push_back(std::move(f));
    return res;
}

/// Writes every file of a run into dir, each through a temporary file and
/// a rename.
inline void emit(const RunResult& res, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    for (const auto& f : res.files) {
        const fs::path target = dir / f.name;
        const fs::path tmp = dir / ("." + f.name + ".tmp");
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            if (!os) throw Error(ErrorCode::IoError, "cannot open " + tmp.string());
            os.write(f.content.data(), static_cast<std::streamsize>(f.content.size()));
            os.flush();
            if (!os) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
        }
        fs::rename(tmp, target, ec);
        if (ec) {
            fs::remove(tmp, ec);
            throw Error(ErrorCode::IoError, "cannot move " + tmp.string() + " to " + target.string());
        }
    }
}

}  // namespace eptrace::io
