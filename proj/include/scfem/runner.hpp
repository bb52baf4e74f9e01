#pragma once

// Experiment harness: flat key=value config files, run orchestration
// with history/meta/snapshot outputs, and slope summaries of recorded
// histories.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptive.hpp"
#include "history.hpp"
#include "problems.hpp"

namespace scfem {

struct RunConfig {
    std::string problem;          // preset name, required
    std::string driver = "scfe";  // "scfe" or "sc"
    AdaptiveConfig adaptive;
    std::string output_dir = ".";
    int snapshot_every = 0;   // write mesh snapshots every k outer iterations
    int mesh_divisions = 0;   // 0 keeps the preset default
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
    }
    if (pos != v.size())
        throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
    return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long out;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
    }
    if (pos != v.size())
        throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw std::invalid_argument("config: bad flag for " + key + ": '" + v + "'");
}

}  // namespace detail

/// Parse the flat key=value format; '#' starts a comment, unknown keys
/// are rejected.
inline RunConfig parse_run_config(std::istream& is) {
    RunConfig cfg;
    bool have_problem = false;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key=value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " has an empty key or value");

        AdaptiveConfig& a = cfg.adaptive;
        if (key == "problem") {
            cfg.problem = value;
            have_problem = true;
        } else if (key == "driver") {
            if (value != "scfe" && value != "sc")
                throw std::invalid_argument("config: driver must be scfe or sc");
            cfg.driver = value;
        } else if (key == "epsilon") {
            a.epsilon = detail::parse_double(key, value);
        } else if (key == "theta_y") {
            a.theta_y = detail::parse_double(key, value);
        } else if (key == "theta_x") {
            a.theta_x = detail::parse_double(key, value);
        } else if (key == "alpha") {
            a.alpha = detail::parse_double(key, value);
        } else if (key == "profit") {
            if (value == "workless")
                a.profit = ProfitKind::workless;
            else if (value == "with_work")
                a.profit = ProfitKind::with_work;
            else
                throw std::invalid_argument("config: profit must be workless or with_work");
        } else if (key == "tolerance_rule") {
            if (value == "margin_weighted")
                a.tolerance_rule = ToleranceRule::margin_weighted;
            else if (value == "simplified")
                a.tolerance_rule = ToleranceRule::simplified;
            else
                throw std::invalid_argument(
                    "config: tolerance_rule must be margin_weighted or simplified");
        } else if (key == "deferred_tolerance") {
            a.deferred_tolerance = detail::parse_bool(key, value);
        } else if (key == "theta_size") {
            a.theta_size = static_cast<int>(detail::parse_int(key, value));
        } else if (key == "theta_seed") {
            a.theta_seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
        } else if (key == "pi_size") {
            a.pi_size = static_cast<int>(detail::parse_int(key, value));
        } else if (key == "pi_seed") {
            a.pi_seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
        } else if (key == "max_outer") {
            a.max_outer = static_cast<int>(detail::parse_int(key, value));
        } else if (key == "max_total_dofs") {
            a.max_total_dofs = detail::parse_int(key, value);
        } else if (key == "max_sweeps") {
            a.max_sweeps = static_cast<int>(detail::parse_int(key, value));
        } else if (key == "workers") {
            a.workers = static_cast<int>(detail::parse_int(key, value));
        } else if (key == "parametric_floor") {
            a.parametric_floor = detail::parse_double(key, value);
        } else if (key == "timing") {
            a.record_timing = detail::parse_bool(key, value);
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else if (key == "snapshot_every") {
            cfg.snapshot_every = static_cast<int>(detail::parse_int(key, value));
        } else if (key == "mesh_divisions") {
            cfg.mesh_divisions = static_cast<int>(detail::parse_int(key, value));
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    if (!have_problem) throw std::invalid_argument("config: missing required key 'problem'");
    cfg.adaptive.validate();
    if (cfg.snapshot_every < 0)
        throw std::invalid_argument("config: snapshot_every must be >= 0");
    if (cfg.mesh_divisions < 0)
        throw std::invalid_argument("config: mesh_divisions must be >= 0");
    return cfg;
}

inline ProblemSpec make_problem(const RunConfig& cfg) {
    ProblemSpec p = problem_preset(cfg.problem);
    if (cfg.mesh_divisions > 0 && cfg.mesh_divisions != p.mesh_divisions)
        p = ProblemSpec(p.name, p.dim, p.geometry, p.coefficient, p.forcing,
                        cfg.mesh_divisions);
    return p;
}

namespace detail {

inline void write_meta(std::ostream& os, const RunConfig& cfg, const ProblemSpec& problem,
                       StopReason stop, const History& history, double wall_seconds) {
    const AdaptiveConfig& a = cfg.adaptive;
    os << "problem=" << cfg.problem << "\n";
    os << "driver=" << cfg.driver << "\n";
    os << "mesh_divisions=" << problem.mesh_divisions << "\n";
    os << "epsilon=" << a.epsilon << "\n";
    os << "theta_y=" << a.theta_y << "\n";
    os << "theta_x=" << a.theta_x << "\n";
    os << "alpha=" << a.alpha << "\n";
    os << "profit=" << (a.profit == ProfitKind::workless ? "workless" : "with_work") << "\n";
    os << "tolerance_rule="
       << (a.tolerance_rule == ToleranceRule::margin_weighted ? "margin_weighted" : "simplified")
       << "\n";
    os << "deferred_tolerance=" << (a.deferred_tolerance ? 1 : 0) << "\n";
    os << "theta_size=" << a.theta_size << "\n";
    os << "theta_seed=" << a.theta_seed << "\n";
    os << "pi_size=" << a.pi_size << "\n";
    os << "pi_seed=" << a.pi_seed << "\n";
    os << "max_outer=" << a.max_outer << "\n";
    os << "max_total_dofs=" << a.max_total_dofs << "\n";
    os << "max_sweeps=" << a.max_sweeps << "\n";
    os << "workers=" << a.workers << "\n";
    os << "parametric_floor=" << a.parametric_floor << "\n";
    os << "timing=" << (a.record_timing ? 1 : 0) << "\n";
    os << "snapshot_every=" << cfg.snapshot_every << "\n";
    os << "eigen=" << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
       << EIGEN_MINOR_VERSION << "\n";
#if defined(__clang__)
    os << "compiler=clang " << __clang_major__ << '.' << __clang_minor__ << "\n";
#elif defined(__GNUC__)
    os << "compiler=gcc " << __GNUC__ << '.' << __GNUC_MINOR__ << "\n";
#else
    os << "compiler=unknown\n";
#endif
    os << "stop=" << to_string(stop) << "\n";
    os << "history_rows=" << history.rows.size() << "\n";
    os << "wall_seconds=" << wall_seconds << "\n";
}

}  // namespace detail

/// Execute a parsed config: run the requested driver and write
/// history.csv plus meta.txt (and mesh snapshots when enabled) into the
/// output directory. Returns the process exit code: 0 converged,
/// 2 stopped on a budget cap.
inline int run_config(const RunConfig& cfg, std::ostream& log) {
    ProblemSpec problem = make_problem(cfg);
    std::filesystem::path outdir(cfg.output_dir);
    std::filesystem::create_directories(outdir);

    auto t0 = std::chrono::steady_clock::now();
    StopReason stop;
    History history;
    if (cfg.driver == "sc") {
        ScResult r = run_sc(problem, cfg.adaptive);
        stop = r.stop;
        history = std::move(r.history);
    } else {
        std::function<void(int, const CollocationState&)> on_outer;
        if (cfg.snapshot_every > 0) {
            on_outer = [&](int outer, const CollocationState& state) {
                if (outer % cfg.snapshot_every != 0) return;
                for (int id = 0; id < static_cast<int>(state.points.size()); ++id) {
                    std::ofstream ms(outdir / ("mesh_" + std::to_string(id) + "_" +
                                               std::to_string(outer) + ".txt"));
                    write_mesh_snapshot(ms, state.points[static_cast<std::size_t>(id)].mesh);
                }
            };
        }
        RunResult r = run_scfe(problem, cfg.adaptive, on_outer);
        stop = r.stop;
        history = std::move(r.history);
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    {
        std::ofstream hs(outdir / "history.csv");
        if (!hs) throw std::runtime_error("run: cannot write history.csv in " + cfg.output_dir);
        write_history_csv(hs, history);
    }
    {
        std::ofstream ms(outdir / "meta.txt");
        detail::write_meta(ms, cfg, problem, stop, history, wall);
    }
    log << "stop=" << to_string(stop) << " rows=" << history.rows.size() << "\n";
    return stop == StopReason::converged ? 0 : 2;
}

struct SummaryResult {
    int fe_rows = 0;
    int outer_rows = 0;
    double slope_fe = std::nan("");     // log(fe_est) vs log(total_dofs) over FE sweeps
    double slope_outer = std::nan("");  // log(total_est) vs log(total_dofs) over outer rows
};

namespace detail {

inline double fit_slope(const std::vector<std::pair<double, double>>& xy) {
    // least squares on (log x, log y)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xy.size());
    for (const auto& [x, y] : xy) {
        double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

/// Least-squares convergence slopes of a recorded history. Requires at
/// least 4 usable rows in at least one of the two series.
inline SummaryResult summarize_history(const History& history) {
    std::vector<std::pair<double, double>> fe, outer;
    for (const auto& r : history.rows) {
        if (r.total_dofs <= 0) continue;
        if (r.phase == "fe_sweep" && r.fe_est > 0.0)
            fe.emplace_back(static_cast<double>(r.total_dofs), r.fe_est);
        else if (r.phase == "outer" && r.total_est > 0.0)
            outer.emplace_back(static_cast<double>(r.total_dofs), r.total_est);
    }
    SummaryResult s;
    s.fe_rows = static_cast<int>(fe.size());
    s.outer_rows = static_cast<int>(outer.size());
    if (fe.size() < 4 && outer.size() < 4)
        throw std::runtime_error("summarize: too few rows for a fit");
    if (fe.size() >= 4) s.slope_fe = detail::fit_slope(fe);
    if (outer.size() >= 4) s.slope_outer = detail::fit_slope(outer);
    return s;
}

inline SummaryResult summarize_history_file(const std::string& path, std::ostream& os) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("summarize: cannot open " + path);
    History h = read_history_csv(is);
    SummaryResult s = summarize_history(h);
    os << "fe_sweep rows: " << s.fe_rows << ", outer rows: " << s.outer_rows << "\n";
    if (std::isnan(s.slope_fe))
        os << "slope_fe_sweep=na\n";
    else
        os << "slope_fe_sweep=" << s.slope_fe << "\n";
    if (std::isnan(s.slope_outer))
        os << "slope_outer=na\n";
    else
        os << "slope_outer=" << s.slope_outer << "\n";
    return s;
}

}  // namespace scfem
