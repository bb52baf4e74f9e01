#pragma once

// The coupled adaptive loop: alternate FE mesh refinement (Dorfler
// marking of collocation points by weighted residual indicators, then of
// elements within each marked point) against parametric enrichment
// (profit-maximal margin index, completed to keep the set downward
// closed). Also the collocation-only driver used to study enrichment
// trajectories on a fixed fine mesh.

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "estimators.hpp"
#include "fem.hpp"
#include "history.hpp"
#include "mesh.hpp"
#include "problems.hpp"
#include "sparse_grid.hpp"

namespace scfem {

enum class ProfitKind { workless, with_work };
enum class ToleranceRule { margin_weighted, simplified };
enum class StopReason { converged, budget_dofs, budget_outer };

inline const char* to_string(StopReason s) {
    switch (s) {
        case StopReason::converged: return "converged";
        case StopReason::budget_dofs: return "budget_dofs";
        case StopReason::budget_outer: return "budget_outer";
    }
    return "unknown";
}

struct AdaptiveConfig {
    double epsilon = 0.1;
    double theta_y = 0.5;   // Dorfler fraction over collocation points
    double theta_x = 0.25;  // Dorfler fraction over elements per point
    double alpha = 0.9;     // FE tolerance as a fraction of the parametric estimate
    ProfitKind profit = ProfitKind::with_work;
    ToleranceRule tolerance_rule = ToleranceRule::simplified;
    bool deferred_tolerance = true;  // refresh the parametric estimate only when
                                     // the FE loop thinks it is done
    int theta_size = 1000;
    std::uint64_t theta_seed = 9001;
    int pi_size = 4096;
    std::uint64_t pi_seed = 9002;
    int max_outer = 60;
    long long max_total_dofs = 500000;
    int max_sweeps = 200;  // per FE phase
    int workers = 1;
    double parametric_floor = 1e-12;  // below this the FE target becomes epsilon/2
    bool record_timing = false;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("config: epsilon must be > 0");
        if (!(theta_y > 0.0 && theta_y < 1.0))
            throw std::invalid_argument("config: theta_y must be in (0,1)");
        if (!(theta_x > 0.0 && theta_x < 1.0))
            throw std::invalid_argument("config: theta_x must be in (0,1)");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("config: alpha must be in (0,1)");
        if (theta_size < 1) throw std::invalid_argument("config: theta_size must be >= 1");
        if (pi_size < 1) throw std::invalid_argument("config: pi_size must be >= 1");
        if (max_outer < 1) throw std::invalid_argument("config: max_outer must be >= 1");
        if (max_total_dofs < 1) throw std::invalid_argument("config: max_total_dofs must be >= 1");
        if (max_sweeps < 1) throw std::invalid_argument("config: max_sweeps must be >= 1");
        if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
        if (!(parametric_floor >= 0.0))
            throw std::invalid_argument("config: parametric_floor must be >= 0");
    }
};

namespace detail {

// Work-stealing loop over [0,n); every task writes only its own slot, so
// results do not depend on the worker count.
template <class Fn>
inline void parallel_for(int n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (int k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mtx;
    auto body = [&]() {
        for (;;) {
            int k = next.fetch_add(1);
            if (k >= n) break;
            try {
                fn(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mtx);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    int launch = std::min(workers, n);
    pool.reserve(static_cast<std::size_t>(launch - 1));
    for (int w = 1; w < launch; ++w) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Smallest prefix of the weight ranking whose mass reaches theta times
/// the total; returns the selected ids in ascending order.
inline std::vector<int> dorfler_select(std::span<const double> weights, double theta) {
    if (weights.empty()) throw std::invalid_argument("dorfler_select: empty weight list");
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("dorfler_select: theta must be in (0,1)");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("dorfler_select: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("dorfler_select: all weights zero");
    std::vector<int> order(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) order[k] = static_cast<int>(k);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return weights[static_cast<std::size_t>(a)] >
                                                weights[static_cast<std::size_t>(b)]; });
    std::vector<int> out;
    double cum = 0.0;
    for (int id : order) {
        out.push_back(id);
        cum += weights[static_cast<std::size_t>(id)];
        if (cum >= theta * total) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Enrichment profit of a margin index: the summed indicators of its
/// reduced set, divided by the summed work when requested.
inline double profit(const MultiIndex& i, const MultiIndexSet& I,
                     std::span<const MultiIndex> margin_indices,
                     std::span<const double> margin_values, ProfitKind kind) {
    if (margin_indices.size() != margin_values.size())
        throw std::invalid_argument("profit: indicator list size mismatch");
    double num = 0.0;
    long long den = 0;
    for (const auto& j : reduced_set(i, I)) {
        auto it = std::lower_bound(margin_indices.begin(), margin_indices.end(), j);
        if (it == margin_indices.end() || !(*it == j))
            throw std::invalid_argument("profit: missing indicator for " + j.str());
        num += margin_values[static_cast<std::size_t>(it - margin_indices.begin())];
        den += surplus_work(j);
    }
    return kind == ProfitKind::workless ? num : num / static_cast<double>(den);
}

/// One collocation point of the coupled solver: its own mesh (descended
/// from the initial mesh by bisection only), solution, residual
/// indicators, and cached gradient samples.
struct PointRecord {
    Triangulation mesh;
    FESolution solution;
    std::vector<double> indicator_sq;
    double indicator = 0.0;
    Eigen::VectorXd gradient_samples;  // [gx; gy] at the spatial samples
};

struct CollocationState {
    MultiIndexSet indices = MultiIndexSet::initial(1);
    SparseGrid grid{indices};
    std::vector<PointRecord> points;  // aligned with grid point ids

    long long total_dofs() const {
        long long s = 0;
        for (const auto& p : points) s += p.solution.free_dofs;
        return s;
    }
};

namespace detail {

struct RunContext {
    const ProblemSpec* problem = nullptr;
    AdaptiveConfig cfg;
    ParamSampleSet theta;
    SpatialSampleSet pi;
    std::vector<int> pi_labels;
    Triangulation t_init;
    std::chrono::steady_clock::time_point start;

    double elapsed() const {
        if (!cfg.record_timing) return -1.0;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

inline RunContext make_context(const ProblemSpec& problem, const AdaptiveConfig& cfg) {
    cfg.validate();
    RunContext ctx;
    ctx.problem = &problem;
    ctx.cfg = cfg;
    ctx.theta = ParamSampleSet::uniform(problem.dim, cfg.theta_size, cfg.theta_seed);
    ctx.pi = SpatialSampleSet::uniform(cfg.pi_size, cfg.pi_seed);
    ctx.pi_labels.reserve(ctx.pi.points.size());
    for (const auto& p : ctx.pi.points)
        ctx.pi_labels.push_back(problem.geometry.label_at(p.x, p.y));
    ctx.t_init = problem.initial_mesh();
    ctx.start = std::chrono::steady_clock::now();
    return ctx;
}

inline void solve_point(PointRecord& rec, std::span<const double> y, const RunContext& ctx) {
    rec.solution = assemble_and_solve(rec.mesh, ctx.problem->coefficient, y,
                                      ctx.problem->forcing);
    auto est = residual_estimator(rec.mesh, rec.solution, ctx.problem->coefficient,
                                  ctx.problem->forcing);
    rec.indicator_sq = std::move(est.element_sq);
    rec.indicator = est.total;
    auto grads = gradient_at_points(rec.mesh, rec.solution, ctx.pi.points);
    const int P = static_cast<int>(grads.size());
    rec.gradient_samples.resize(2 * P);
    for (int r = 0; r < P; ++r) {
        rec.gradient_samples[r] = grads[static_cast<std::size_t>(r)].x;
        rec.gradient_samples[P + r] = grads[static_cast<std::size_t>(r)].y;
    }
}

inline Eigen::MatrixXd gather_gradients(const CollocationState& state, const RunContext& ctx) {
    const int P = static_cast<int>(ctx.pi.points.size());
    Eigen::MatrixXd G(2 * P, state.grid.size());
    for (int id = 0; id < state.grid.size(); ++id)
        G.col(id) = state.points[static_cast<std::size_t>(id)].gradient_samples;
    return G;
}

inline void refresh_parametric(EstimatorReport& report, const CollocationState& state,
                               const RunContext& ctx) {
    Eigen::MatrixXd G = gather_gradients(state, ctx);
    auto est = parametric_estimator(state.indices, state.grid, G, ctx.problem->coefficient,
                                    ctx.pi_labels, ctx.theta);
    report.margin = std::move(est.margin);
    report.parametric_per_index = std::move(est.per_index);
    report.parametric_total = est.total;
    report.total = report.parametric_total + report.fe_total;
}

inline void refresh_fe(EstimatorReport& report, const CollocationState& state) {
    report.fe_per_point.resize(state.points.size());
    for (std::size_t k = 0; k < state.points.size(); ++k)
        report.fe_per_point[k] = state.points[k].indicator;
    report.fe_total = weighted_fe_total(report.fe_per_point, report.point_weights);
    report.total = report.parametric_total + report.fe_total;
}

inline HistoryRow base_row(const CollocationState& state, const EstimatorReport& report,
                           const RunContext& ctx) {
    HistoryRow r;
    r.n_indices = state.indices.size();
    r.n_points = state.grid.size();
    r.total_dofs = state.total_dofs();
    r.param_est = report.parametric_total;
    r.fe_est = report.fe_total;
    r.total_est = report.total;
    r.elapsed_sec = ctx.elapsed();
    return r;
}

}  // namespace detail

/// FE target for the current parametric estimate. Once the parametric
/// part is at the floor there is nothing left to balance against, so the
/// target switches to half the overall tolerance.
inline double fe_tolerance(const EstimatorReport& report, const AdaptiveConfig& cfg) {
    double tol;
    if (cfg.tolerance_rule == ToleranceRule::margin_weighted) {
        double s = 0.0;
        for (const auto& i : report.margin) s += static_cast<double>(entry_product(i));
        tol = cfg.alpha * report.parametric_total / (s * s);
    } else {
        tol = cfg.alpha * report.parametric_total;
    }
    if (report.parametric_total <= cfg.parametric_floor)
        tol = std::max(tol, cfg.epsilon / 2.0);
    return tol;
}

/// Full estimator evaluation for the current state.
inline EstimatorReport compute_estimator_report(const CollocationState& state,
                                                const detail::RunContext& ctx) {
    EstimatorReport report;
    report.point_weights = lagrange_sup_norms(state.grid, ctx.theta);
    detail::refresh_fe(report, state);
    detail::refresh_parametric(report, state, ctx);
    return report;
}

/// Drive the FE estimator below its tolerance by repeated Dorfler sweeps.
/// Returns true when the dof budget stopped the phase early. On a normal
/// return the report is fresh and fe_total <= fe_tolerance holds.
inline bool refine_fe_spaces(CollocationState& state, EstimatorReport& report,
                             const detail::RunContext& ctx, History& history, int outer) {
    if (state.total_dofs() > ctx.cfg.max_total_dofs) return true;
    int sweep = 0;
    bool param_fresh = true;  // callers pass a freshly computed report
    for (;;) {
        double tol = fe_tolerance(report, ctx.cfg);
        if (report.fe_total <= tol) {
            if (param_fresh || !ctx.cfg.deferred_tolerance) return false;
            detail::refresh_parametric(report, state, ctx);
            param_fresh = true;
            continue;
        }
        if (sweep >= ctx.cfg.max_sweeps)
            throw std::runtime_error("refine_fe_spaces: sweep limit reached");

        std::vector<double> weights(state.points.size());
        for (std::size_t k = 0; k < state.points.size(); ++k)
            weights[k] = report.fe_per_point[k] * report.fe_per_point[k] *
                         report.point_weights[k];
        auto marked_points = dorfler_select(weights, ctx.cfg.theta_y);

        detail::parallel_for(
            static_cast<int>(marked_points.size()), ctx.cfg.workers, [&](int k) {
                PointRecord& rec =
                    state.points[static_cast<std::size_t>(marked_points[static_cast<std::size_t>(k)])];
                auto marked_elems = dorfler_select(rec.indicator_sq, ctx.cfg.theta_x);
                rec.mesh = refine_nvb(rec.mesh, marked_elems).mesh;
                detail::solve_point(rec, rec.solution.parameter, ctx);
            });
        ++sweep;
        param_fresh = false;
        detail::refresh_fe(report, state);
        if (!ctx.cfg.deferred_tolerance) {
            detail::refresh_parametric(report, state, ctx);
            param_fresh = true;
        }

        HistoryRow row = detail::base_row(state, report, ctx);
        row.phase = "fe_sweep";
        row.outer = outer;
        row.sweep = sweep;
        history.rows.push_back(std::move(row));

        if (state.total_dofs() > ctx.cfg.max_total_dofs) return true;
    }
}

/// Enrich the index set by the reduced set of the profit-maximal margin
/// index (first maximum in lexicographic order). New collocation points
/// start on the initial mesh; existing point records are not touched.
inline MultiIndex refine_parameter_space(CollocationState& state, const EstimatorReport& report,
                                         const detail::RunContext& ctx) {
    if (report.margin.empty()) throw std::logic_error("refine_parameter_space: empty margin");
    int best = -1;
    double best_profit = 0.0;
    for (int k = 0; k < static_cast<int>(report.margin.size()); ++k) {
        double p = profit(report.margin[static_cast<std::size_t>(k)], state.indices,
                          report.margin, report.parametric_per_index, ctx.cfg.profit);
        if (best < 0 || p > best_profit) {
            best = k;
            best_profit = p;
        }
    }
    MultiIndex selected = report.margin[static_cast<std::size_t>(best)];
    auto add = reduced_set(selected, state.indices);
    MultiIndexSet enlarged = state.indices.union_with(add);
    SparseGrid grid = state.grid.extended(enlarged);

    int old_size = state.grid.size();
    state.points.resize(static_cast<std::size_t>(grid.size()));
    for (int id = old_size; id < grid.size(); ++id)
        state.points[static_cast<std::size_t>(id)].mesh = ctx.t_init;
    detail::parallel_for(grid.size() - old_size, ctx.cfg.workers, [&](int k) {
        int id = old_size + k;
        detail::solve_point(state.points[static_cast<std::size_t>(id)], grid.point(id), ctx);
    });
    state.indices = std::move(enlarged);
    state.grid = std::move(grid);
    return selected;
}

struct RunResult {
    StopReason stop = StopReason::converged;
    CollocationState state;
    EstimatorReport report;
    History history;
};

/// The coupled adaptive solver. The optional callback fires after every
/// outer iteration with the current state (used for mesh snapshots).
inline RunResult run_scfe(
    const ProblemSpec& problem, const AdaptiveConfig& cfg,
    const std::function<void(int, const CollocationState&)>& on_outer = {}) {
    auto ctx = detail::make_context(problem, cfg);

    RunResult result;
    CollocationState& state = result.state;
    state.indices = MultiIndexSet::initial(problem.dim);
    state.grid = SparseGrid(state.indices);
    state.points.resize(static_cast<std::size_t>(state.grid.size()));
    for (auto& rec : state.points) rec.mesh = ctx.t_init;
    detail::parallel_for(state.grid.size(), cfg.workers, [&](int id) {
        detail::solve_point(state.points[static_cast<std::size_t>(id)], state.grid.point(id),
                            ctx);
    });

    EstimatorReport report = compute_estimator_report(state, ctx);
    {
        HistoryRow row = detail::base_row(state, report, ctx);
        row.phase = "enrich";
        row.outer = 0;
        result.history.rows.push_back(std::move(row));
    }

    for (int outer = 0;; ++outer) {
        bool budget = refine_fe_spaces(state, report, ctx, result.history, outer);
        {
            HistoryRow row = detail::base_row(state, report, ctx);
            row.phase = "outer";
            row.outer = outer;
            result.history.rows.push_back(std::move(row));
        }
        if (on_outer) on_outer(outer, state);
        if (budget) {
            result.stop = StopReason::budget_dofs;
            break;
        }
        if (report.total < cfg.epsilon) {
            result.stop = StopReason::converged;
            break;
        }
        if (outer + 1 >= cfg.max_outer) {
            result.stop = StopReason::budget_outer;
            break;
        }
        MultiIndex selected = refine_parameter_space(state, report, ctx);
        report = compute_estimator_report(state, ctx);
        HistoryRow row = detail::base_row(state, report, ctx);
        row.phase = "enrich";
        row.outer = outer + 1;
        row.selected = selected.str();
        result.history.rows.push_back(std::move(row));
    }
    result.report = std::move(report);
    return result;
}

struct ScResult {
    StopReason stop = StopReason::converged;
    std::vector<MultiIndexSet> trajectory;   // index set after each step
    std::vector<MultiIndex> selected;        // enriched index per step
    std::vector<double> parametric_history;  // estimate per trajectory entry
    History history;
};

/// Collocation-only driver: the parametric loop against a fixed sampler,
/// a three-times uniformly refined initial mesh. Under workless profit
/// the enriched sets are asserted to stay full rectangles with the
/// selected index one step further out per enrichment.
inline ScResult run_sc(const ProblemSpec& problem, const AdaptiveConfig& cfg) {
    auto ctx = detail::make_context(problem, cfg);
    Triangulation fine = uniform_refine(ctx.t_init, 3);

    const int P = static_cast<int>(ctx.pi.points.size());
    MultiIndexSet indices = MultiIndexSet::initial(problem.dim);
    SparseGrid grid(indices);
    std::vector<Eigen::VectorXd> gradient_cols;
    std::vector<int> point_dofs;

    auto solve_new_points = [&](int old_size) {
        gradient_cols.resize(static_cast<std::size_t>(grid.size()));
        point_dofs.resize(static_cast<std::size_t>(grid.size()));
        detail::parallel_for(grid.size() - old_size, cfg.workers, [&](int k) {
            int id = old_size + k;
            FESolution sol = assemble_and_solve(fine, problem.coefficient, grid.point(id),
                                                problem.forcing);
            auto grads = gradient_at_points(fine, sol, ctx.pi.points);
            Eigen::VectorXd col(2 * P);
            for (int r = 0; r < P; ++r) {
                col[r] = grads[static_cast<std::size_t>(r)].x;
                col[P + r] = grads[static_cast<std::size_t>(r)].y;
            }
            gradient_cols[static_cast<std::size_t>(id)] = std::move(col);
            point_dofs[static_cast<std::size_t>(id)] = sol.free_dofs;
        });
    };
    solve_new_points(0);

    ScResult result;
    auto record = [&](const char* phase, int outer, double estimate,
                      const std::string& sel) {
        HistoryRow row;
        row.phase = phase;
        row.outer = outer;
        row.n_indices = indices.size();
        row.n_points = grid.size();
        long long dofs = 0;
        for (int d : point_dofs) dofs += d;
        row.total_dofs = dofs;
        row.param_est = estimate;
        row.fe_est = -1.0;  // no FE adaptivity in this driver
        row.total_est = estimate;
        row.selected = sel;
        row.elapsed_sec = ctx.elapsed();
        result.history.rows.push_back(std::move(row));
    };

    Eigen::MatrixXd G(2 * P, grid.size());
    auto estimate_total = [&]() {
        G.resize(2 * P, grid.size());
        for (int id = 0; id < grid.size(); ++id)
            G.col(id) = gradient_cols[static_cast<std::size_t>(id)];
        return parametric_estimator(indices, grid, G, problem.coefficient, ctx.pi_labels,
                                    ctx.theta);
    };

    int steps = 0;
    for (;;) {
        auto est = estimate_total();
        result.trajectory.push_back(indices);
        result.parametric_history.push_back(est.total);
        if (steps == 0) record("enrich", 0, est.total, "");  // initial estimate
        record("outer", steps, est.total, "");
        if (est.total < cfg.epsilon) {
            result.stop = StopReason::converged;
            break;
        }
        if (steps >= cfg.max_outer) {
            result.stop = StopReason::budget_outer;
            break;
        }

        int best = -1;
        double best_profit = 0.0;
        for (int k = 0; k < static_cast<int>(est.margin.size()); ++k) {
            double p = profit(est.margin[static_cast<std::size_t>(k)], indices, est.margin,
                              est.per_index, cfg.profit);
            if (best < 0 || p > best_profit) {
                best = k;
                best_profit = p;
            }
        }
        MultiIndex sel = est.margin[static_cast<std::size_t>(best)];
        auto add = reduced_set(sel, indices);
        MultiIndexSet enlarged = indices.union_with(add);
        SparseGrid next = grid.extended(enlarged);
        ++steps;
        if (cfg.profit == ProfitKind::workless) {
            // Workless profits are monotone along the rectangle order, so
            // each enriched set must be the full rectangle of the pick.
            if (!(enlarged == MultiIndexSet::rectangle(sel)))
                throw std::logic_error("run_sc: enriched set is not the rectangle of " +
                                       sel.str());
            if (sel.sum() != problem.dim + steps)
                throw std::logic_error("run_sc: selected index depth " +
                                       std::to_string(sel.sum()) + " != dim + step");
        }
        int old_size = grid.size();
        indices = std::move(enlarged);
        grid = std::move(next);
        solve_new_points(old_size);
        result.selected.push_back(sel);
        record("enrich", steps, est.total, sel.str());
    }
    return result;
}

}  // namespace scfem
