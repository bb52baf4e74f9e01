// Acceptance suite: one pass/fail line per criterion, exit 0 only when
// every criterion holds. Runs the full desk-scale 4D benchmark, so the
// whole binary takes tens of minutes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scfem/adaptive.hpp"
#include "scfem/problems.hpp"
#include "scfem/runner.hpp"
#include "support/oracles.hpp"

using namespace scfem;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back(what);
        }
    }
    void note(const std::string& what) { notes.push_back(what); }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// --- criterion 1: sparse-grid identities ---------------------------------

void sparse_grid_identities(Criterion& c) {
    std::mt19937_64 rng(20260814);
    auto smooth = [](const std::vector<double>& z) {
        double s = 1.0;
        for (std::size_t n = 0; n < z.size(); ++n)
            s *= 1.0 + 0.4 * std::sin(1.3 * z[n] + 0.7 * static_cast<double>(n));
        return s + 0.25 * z[0];
    };
    for (int trial = 0; trial < 20; ++trial) {
        int dim = 1 + static_cast<int>(rng() % 3);
        int target = 2 + static_cast<int>(rng() % 9);
        MultiIndexSet I = oracles::random_downward_closed(rng, dim, target);
        SparseGrid g(I);
        std::vector<double> values(static_cast<std::size_t>(g.size()));
        for (int id = 0; id < g.size(); ++id)
            values[static_cast<std::size_t>(id)] = smooth(g.point(id));
        std::span<const double> vals(values);

        // combination evaluation equals the telescoped surplus sum
        for (int k = 0; k < 50; ++k) {
            std::vector<double> z(static_cast<std::size_t>(dim));
            for (auto& x : z) x = uniform(rng, -1.0, 1.0);
            double comb = interpolate(g, vals, z);
            double tele = 0.0;
            for (const auto& i : I.members()) tele += surplus_evaluate(g, i, vals, z);
            double scale = std::max(1.0, std::abs(comb));
            c.check(std::abs(comb - tele) <= 1e-11 * scale,
                    "trial " + std::to_string(trial) + ": telescoped sum off by " +
                        fmt(std::abs(comb - tele) / scale));
        }

        // interpolatory at every collocation point
        for (int id = 0; id < g.size(); ++id) {
            double v = interpolate(g, vals, g.point(id));
            double scale = std::max(1.0, std::abs(values[static_cast<std::size_t>(id)]));
            c.check(std::abs(v - values[static_cast<std::size_t>(id)]) <= 1e-12 * scale,
                    "trial " + std::to_string(trial) + ": not interpolatory at point " +
                        std::to_string(id));
        }

        // exact on a random polynomial inside the interpolated space
        auto poly = oracles::random_poly_in_space(rng, I);
        std::vector<double> pvals(static_cast<std::size_t>(g.size()));
        for (int id = 0; id < g.size(); ++id)
            pvals[static_cast<std::size_t>(id)] = poly.eval(g.point(id));
        std::span<const double> pv(pvals);
        for (int k = 0; k < 50; ++k) {
            std::vector<double> z(static_cast<std::size_t>(dim));
            for (auto& x : z) x = uniform(rng, -1.0, 1.0);
            double exact = poly.eval(z);
            double v = interpolate(g, pv, z);
            double scale = std::max(1.0, std::abs(exact));
            c.check(std::abs(v - exact) <= 1e-11 * scale,
                    "trial " + std::to_string(trial) + ": polynomial reproduction off by " +
                        fmt(std::abs(v - exact) / scale));
        }
        if (!c.pass) return;
    }
}

// --- criterion 2: surplus annihilation conditions -------------------------

// Normalized nodal polynomial of the previous level: vanishes on the
// level (l-1) skeleton, so its surplus content sits exactly at level l.
std::function<double(double)> level_bump(int l) {
    if (l <= 1) return [](double) { return 1.0; };
    const std::vector<double>& roots = cc_nodes(doubling_node_count(l - 1));
    auto raw = [roots](double t) {
        double p = 1.0;
        for (double r : roots) p *= (t - r);
        return p;
    };
    double sup = 0.0;
    for (int k = 0; k < 200; ++k)
        sup = std::max(sup, std::abs(raw(-1.0 + 2.0 * k / 199.0)));
    return [raw, sup](double t) { return raw(t) / sup; };
}

void surplus_annihilation(Criterion& c) {
    const int P = 40;
    MultiIndexSet rect = MultiIndexSet::rectangle(MultiIndex{4, 4});
    SparseGrid grid(rect);
    ParamSampleSet theta = ParamSampleSet::uniform(2, 200, 31);
    DiffusionCoefficient a({1.5, 2.0}, {{0.3, 0.8}, {0.5, 0.2}}, {1.0, 1.0});
    std::vector<int> labels(P);
    for (int r = 0; r < P; ++r) labels[static_cast<std::size_t>(r)] = r % 2;

    std::mt19937_64 rng(99);
    Eigen::VectorXd direction(2 * P);
    for (int r = 0; r < 2 * P; ++r) direction[r] = uniform(rng, -1.0, 1.0);

    std::vector<std::function<double(double)>> bumps;
    for (int l = 0; l <= 4; ++l) bumps.push_back(level_bump(l));

    double strongest_diagonal = 0.0;
    for (int j1 = 1; j1 <= 4; ++j1) {
        for (int j2 = 1; j2 <= 4; ++j2) {
            Eigen::MatrixXd G(2 * P, grid.size());
            for (int id = 0; id < grid.size(); ++id) {
                const auto& y = grid.point(id);
                double d = bumps[static_cast<std::size_t>(j1)](y[0]) *
                           bumps[static_cast<std::size_t>(j2)](y[1]);
                G.col(id) = d * direction;
            }
            std::vector<MultiIndex> inner = {MultiIndex{j1, j2}};
            for (int i1 = 1; i1 <= 4; ++i1) {
                for (int i2 = 1; i2 <= 4; ++i2) {
                    MultiIndex i{i1, i2};
                    bool overshoot = j1 > i1 || j2 > i2;
                    bool buried = (j1 <= i1 - 2) && (j2 <= i2 - 2);
                    bool diagonal = i1 == j1 && i2 == j2;
                    if (!(overshoot || buried || diagonal)) continue;
                    double v = surplus_chain_sup_norm(i, inner, grid, G, a, labels, theta);
                    if (diagonal) {
                        strongest_diagonal = std::max(strongest_diagonal, v);
                        continue;
                    }
                    c.check(v <= 1e-10, "i=" + i.str() + " j=" + MultiIndex{j1, j2}.str() +
                                            " should annihilate, got " + fmt(v));
                }
            }
        }
    }
    // guard against a degenerate setup that annihilates everything
    c.check(strongest_diagonal > 1e-6,
            "no signal on matching levels: " + fmt(strongest_diagonal));
}

// --- criterion 3: reduced indicator equals the direct definition ----------

void reduced_indicator_equivalence(Criterion& c) {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        int dim = 1 + static_cast<int>(rng() % 2);
        MultiIndexSet I = MultiIndexSet::initial(dim);
        do {
            I = oracles::random_downward_closed(rng, dim, 2 + static_cast<int>(rng() % 4));
        } while (I.corner().max_entry() > 3);
        SparseGrid grid(I);

        const int P = 16;
        Eigen::MatrixXd G(2 * P, grid.size());
        for (int r = 0; r < 2 * P; ++r)
            for (int id = 0; id < grid.size(); ++id) G(r, id) = uniform(rng, -1.0, 1.0);
        std::vector<int> labels(P);
        for (auto& l : labels) l = static_cast<int>(rng() % 2);
        std::vector<std::vector<double>> terms;
        std::vector<double> scale;
        for (int n = 0; n < dim; ++n) {
            terms.push_back({uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3)});
            scale.push_back(1.0 / dim);
        }
        DiffusionCoefficient a({2.0, 3.0}, std::move(terms), std::move(scale));
        ParamSampleSet theta = ParamSampleSet::uniform(dim, 25, 7000 + trial);

        for (const auto& i : margin(I).indices) {
            double reduced = parametric_indicator(i, I, grid, G, a, labels, theta);
            double direct =
                oracles::direct_parametric_indicator(i, I, grid, G, a, labels, theta);
            double scale_v = std::max(direct, 1e-30);
            c.check(std::abs(reduced - direct) <= 1e-10 * scale_v,
                    "trial " + std::to_string(trial) + " index " + i.str() +
                        ": reduced=" + fmt(reduced) + " direct=" + fmt(direct));
        }
    }
}

// --- criterion 4: Lebesgue growth bound -----------------------------------

void lebesgue_growth(Criterion& c) {
    std::vector<double> basis;
    for (int level = 1; level <= 6; ++level) {
        int count = doubling_node_count(level);
        double worst = 0.0;
        for (int k = 0; k < 10000; ++k) {
            double z = -1.0 + 2.0 * static_cast<double>(k) / 9999.0;
            lagrange_basis(count, z, basis);
            double s = 0.0;
            for (double w : basis) s += std::abs(w);
            worst = std::max(worst, s);
        }
        c.check(worst <= 2.0 * level, "level " + std::to_string(level) +
                                          ": sampled Lebesgue value " + fmt(worst) +
                                          " exceeds " + fmt(2.0 * level));
    }
}

// --- criterion 5: FEM convergence oracle ----------------------------------

void fem_convergence(Criterion& c) {
    std::vector<double> l2s, h1s;
    for (int d : {8, 16, 32, 64, 128}) {
        ProblemSpec p = manufactured_poisson(d);
        Triangulation m = p.initial_mesh();
        std::vector<double> y = {0.0};
        FESolution sol = assemble_and_solve(m, p.coefficient, y, p.forcing);
        auto [l2, h1] = oracles::error_norms(m, sol, manufactured_exact,
                                             manufactured_exact_gradient);
        l2s.push_back(l2);
        h1s.push_back(h1);
    }
    for (std::size_t k = 0; k + 1 < l2s.size(); ++k) {
        double rate_l2 = std::log2(l2s[k] / l2s[k + 1]);
        double rate_h1 = std::log2(h1s[k] / h1s[k + 1]);
        c.check(rate_l2 >= 1.8 && rate_l2 <= 2.1,
                "refinement " + std::to_string(k) + ": L2 rate " + fmt(rate_l2));
        c.check(rate_h1 >= 0.9 && rate_h1 <= 1.1,
                "refinement " + std::to_string(k) + ": H1 rate " + fmt(rate_h1));
    }

    Triangulation m = unit_square_mesh(128);
    DiffusionCoefficient one({1.0}, {{0.0}}, {1.0});
    std::vector<double> y = {0.0};
    FESolution sol = assemble_and_solve(m, one, y, SpatialField::constant(1.0));
    double mid = sol.nodal[static_cast<std::size_t>(64 * 129 + 64)];
    c.check(std::abs(mid - oracles::kPoissonMidpointFourier) <= 1e-4,
            "midpoint " + fmt(mid) + " vs series " + fmt(oracles::kPoissonMidpointFourier));
}

// --- criterion 6: adaptive FEM rate ---------------------------------------

void afem_rate(Criterion& c) {
    ProblemSpec p = manufactured_poisson(8);
    AdaptiveConfig cfg;
    cfg.epsilon = 0.12;
    cfg.theta_size = 200;
    cfg.pi_size = 512;
    RunResult r = run_scfe(p, cfg);
    c.check(r.stop == StopReason::converged, std::string("stop=") + to_string(r.stop));
    SummaryResult s = summarize_history(r.history);
    c.check(s.fe_rows >= 4, "only " + std::to_string(s.fe_rows) + " sweep rows");
    c.check(!std::isnan(s.slope_fe) && s.slope_fe >= -0.65 && s.slope_fe <= -0.35,
            "estimator-vs-dofs slope " + fmt(s.slope_fe));
}

// --- criteria 7/8: collocation driver structure and decay ------------------

void workless_structure(Criterion& c) {
    ProblemSpec p = inclusion_problem(2);
    AdaptiveConfig cfg;
    cfg.profit = ProfitKind::workless;
    cfg.epsilon = 1e-12;  // never reached; exactly max_outer enrichments happen
    cfg.max_outer = 8;
    ScResult r = run_sc(p, cfg);  // the driver asserts rectangles internally
    c.check(r.selected.size() == 8, std::to_string(r.selected.size()) + " steps recorded");
    for (std::size_t s = 0; s < r.selected.size(); ++s) {
        c.check(r.trajectory[s + 1] == MultiIndexSet::rectangle(r.selected[s]),
                "step " + std::to_string(s) + ": set is not the rectangle of " +
                    r.selected[s].str());
        c.check(r.selected[s].sum() == 2 + static_cast<int>(s) + 1,
                "step " + std::to_string(s) + ": depth " +
                    std::to_string(r.selected[s].sum()));
    }
}

void parametric_decay(Criterion& c) {
    for (ProfitKind kind : {ProfitKind::workless, ProfitKind::with_work}) {
        const char* tag = kind == ProfitKind::workless ? "workless" : "with_work";
        ProblemSpec p = inclusion_problem(2);
        AdaptiveConfig cfg;
        cfg.profit = kind;
        cfg.epsilon = 1e-3;
        cfg.max_outer = 15;
        ScResult r = run_sc(p, cfg);
        c.check(r.stop == StopReason::converged,
                std::string(tag) + ": estimate still " +
                    fmt(r.parametric_history.back()) + " after " +
                    std::to_string(r.selected.size()) + " steps");
        double running_min = r.parametric_history.front();
        for (std::size_t k = 1; k < r.parametric_history.size(); ++k) {
            c.check(r.parametric_history[k] < running_min,
                    std::string(tag) + ": running minimum stalls at step " +
                        std::to_string(k) + " (" + fmt(r.parametric_history[k]) +
                        " vs " + fmt(running_min) + ")");
            running_min = std::min(running_min, r.parametric_history[k]);
        }
        c.note(std::string(tag) + ": reached " + fmt(r.parametric_history.back()) +
               " after " + std::to_string(r.selected.size()) + " enrichments");
    }
}

// --- criteria 9/10: desk-scale 4D benchmark and byte-stable reruns ---------

RunConfig benchmark_config(const fs::path& outdir, int workers) {
    RunConfig cfg;
    cfg.problem = "inclusion4d";
    cfg.driver = "scfe";
    cfg.output_dir = outdir.string();
    cfg.adaptive.epsilon = 0.1;
    cfg.adaptive.theta_y = 0.5;
    cfg.adaptive.theta_x = 0.25;
    cfg.adaptive.alpha = 0.9;
    cfg.adaptive.tolerance_rule = ToleranceRule::simplified;
    cfg.adaptive.max_total_dofs = 500000;
    cfg.adaptive.workers = workers;
    return cfg;
}

fs::path benchmark_dir(const std::string& leaf) {
    fs::path dir = fs::temp_directory_path() / "scfem_acceptance" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void benchmark_run(Criterion& c, fs::path& outdir) {
    outdir = benchmark_dir("benchmark_w1");
    std::ostringstream log;
    int code = run_config(benchmark_config(outdir, 1), log);
    std::string msg = log.str();
    while (!msg.empty() && msg.back() == '\n') msg.pop_back();
    c.check(code == 0, "exit code " + std::to_string(code) + " (" + msg + ")");

    std::ifstream hs(outdir / "history.csv");
    History h = read_history_csv(hs);

    // every enrichment must spike the FE estimator above the preceding row
    int enrichments = 0;
    for (std::size_t r = 1; r < h.rows.size(); ++r) {
        if (h.rows[r].phase != "enrich") continue;
        ++enrichments;
        c.check(h.rows[r].fe_est > h.rows[r - 1].fe_est,
                "no FE spike at enrich row " + std::to_string(r) + " (" +
                    fmt(h.rows[r].fe_est) + " vs " + fmt(h.rows[r - 1].fe_est) + ")");
    }
    c.check(enrichments >= 1, "no enrichment rows recorded");

    try {
        SummaryResult s = summarize_history(h);
        c.check(!std::isnan(s.slope_fe) && s.slope_fe >= -0.7 && s.slope_fe <= -0.3,
                "FE sweep slope " + fmt(s.slope_fe));
        c.check(!std::isnan(s.slope_outer) && s.slope_outer <= -0.25,
                "outer slope " + fmt(s.slope_outer));
    } catch (const std::exception& e) {
        c.check(false, std::string("slope fit: ") + e.what());
    }
}

void benchmark_determinism(Criterion& c, const fs::path& first_run) {
    if (first_run.empty() || !fs::exists(first_run / "history.csv")) {
        c.check(false, "benchmark run left no history to compare");
        return;
    }
    fs::path rerun = benchmark_dir("benchmark_w3");
    std::ostringstream log;
    run_config(benchmark_config(rerun, 3), log);
    std::string a = slurp(first_run / "history.csv");
    std::string b = slurp(rerun / "history.csv");
    c.check(!a.empty(), "first history is empty");
    c.check(a == b, "histories differ between worker counts 1 and 3");
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* label;
        double limit_sec;  // 0 = no runtime requirement
        std::function<void(Criterion&)> body;
    };

    fs::path benchmark_out;
    std::vector<Entry> entries = {
        {1, "sparse-grid identities", 10.0, sparse_grid_identities},
        {2, "surplus annihilation conditions", 30.0, surplus_annihilation},
        {3, "reduced indicator equivalence", 0.0, reduced_indicator_equivalence},
        {4, "Lebesgue growth bound", 0.0, lebesgue_growth},
        {5, "FEM convergence oracle", 60.0, fem_convergence},
        {6, "adaptive FEM rate", 120.0, afem_rate},
        {7, "workless enrichment structure", 0.0, workless_structure},
        {8, "parametric estimator decay", 0.0, parametric_decay},
        {9, "desk-scale 4D benchmark", 0.0,
         [&benchmark_out](Criterion& c) { benchmark_run(c, benchmark_out); }},
        {10, "byte-stable reruns", 0.0,
         [&benchmark_out](Criterion& c) { benchmark_determinism(c, benchmark_out); }},
    };

    int failures = 0;
    for (const auto& e : entries) {
        Criterion c;
        auto t0 = std::chrono::steady_clock::now();
        try {
            e.body(c);
        } catch (const std::exception& ex) {
            c.check(false, std::string("exception: ") + ex.what());
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (e.limit_sec > 0.0 && sec > e.limit_sec)
            c.check(false, "runtime " + fmt(sec) + " s exceeds " + fmt(e.limit_sec) + " s");
        std::printf("[%s] %2d %s (%.1f s)\n", c.pass ? "PASS" : "FAIL", e.id, e.label, sec);
        for (const auto& n : c.notes) std::printf("       - %s\n", n.c_str());
        std::fflush(stdout);
        if (!c.pass) ++failures;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(entries.size()) - failures,
                entries.size());
    return failures == 0 ? 0 : 1;
}
