#ifndef TIDECAL_OPTIMIZE_HPP
#define TIDECAL_OPTIMIZE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tidecal/estuary.hpp"
#include "tidecal/kriging.hpp"
#include "tidecal/sobol.hpp"  // ObjectiveFn
#include "tidecal/types.hpp"

namespace tidecal {

enum class GoalKind { mean_rmse, station_rmse, std_rmse, max_rmse, abs_bias, neg_nash };

/// What a mono-objective run minimizes, or one coordinate of a
/// multi-objective run. station_id is required for the per-station kinds.
struct ObjectiveSpec {
    GoalKind kind = GoalKind::mean_rmse;
    int station_id = -1;

    std::string label() const;
    /// "mean" | "std" | "max" | "station:<id>" | "bias:<id>" | "nash:<id>"
    static ObjectiveSpec parse(const std::string& text);
};

/// Surrogate-backed objective over the prediction means. For abs_bias and
/// neg_nash the models must have been fit to the matching response tables.
ObjectiveFn build_objective(const ObjectiveSpec& spec, const std::vector<KrigingModel>& models);

/// Forward-model-backed objective (for validation and oracle runs).
ObjectiveFn build_objective(const ObjectiveSpec& spec, const ForwardEvaluator& fwd,
                            const std::vector<TimeSeries>& observations);

/// Smooth companion used to refine near an optimum: squared station RMSE
/// (mean of squares across stations for the mean goal). Shares its
/// minimizer with the plain objective where an exact fit exists; for the
/// other goal kinds it falls back to the plain objective.
ObjectiveFn build_polish_objective(const ObjectiveSpec& spec, const ForwardEvaluator& fwd,
                                   const std::vector<TimeSeries>& observations);

struct OptimRun {
    std::vector<double> best_x;
    double best_f = 0.0;
    std::vector<double> history;  // best value so far, one entry per iteration
    long long evals = 0;
    std::uint64_t seed = 0;
};

struct PsoConfig {
    int swarm = 40;
    int iters = 200;
    double inertia = 0.729;
    double c1 = 1.494;
    double c2 = 1.494;
    std::uint64_t seed = 0;
    int workers = 0;
};

/// Global-best particle swarm with reflecting bound handling. Objective
/// evaluations within an iteration may fan out over workers; every random
/// draw happens on the single seeded stream beforehand, so results do not
/// depend on the worker count.
OptimRun pso_minimize(const ObjectiveFn& f, const Bounds& bounds, const PsoConfig& config);

struct GradConfig {
    int max_iters = 200;
    double gtol = 1e-8;
    double fd_step = 1e-6;  // central-difference step, relative to the box width
};

/// Projected BFGS in box-normalized coordinates with central finite
/// differences. Deterministic; the final point can depend on x0.
OptimRun gradient_minimize(const ObjectiveFn& f, const Bounds& bounds, std::span<const double> x0,
                           const GradConfig& config = {});

/// n_starts LHS starting points (plus any explicit extra starts); returns
/// the best run, with history tracking the best value across all starts.
OptimRun multistart_gradient_minimize(const ObjectiveFn& f, const Bounds& bounds, int n_starts,
                                      std::uint64_t seed, const GradConfig& config = {},
                                      const std::vector<std::vector<double>>& extra_starts = {});

/// Fronts of mutually nondominated points, best first. Dominance: <= in
/// every coordinate and < in at least one.
std::vector<std::vector<int>> nondominated_sort(const std::vector<std::vector<double>>& points);

/// NSGA-II diversity measure within one front. Extremes get infinity;
/// interior points sum normalized neighbor gaps per objective.
std::vector<double> crowding_distance(const std::vector<std::vector<double>>& front);

struct Nsga2Config {
    int pop = 100;
    int gens = 150;
    double crossover_p = 0.9;
    double crossover_eta = 15.0;
    double mutation_p = -1.0;  // -1: 1/d
    double mutation_eta = 20.0;
    std::uint64_t seed = 0;
    int workers = 0;
};

struct ParetoPoint {
    std::vector<double> x;
    std::vector<double> f;
};

struct ParetoFront {
    std::vector<ParetoPoint> points;
    std::vector<std::string> objective_labels;
};

/// Elitist NSGA-II: binary tournament on (rank, crowding), simulated
/// binary crossover, polynomial mutation, (mu+lambda) survival. Returns
/// the final population's first front.
ParetoFront nsga2(const std::vector<ObjectiveFn>& objectives, const Bounds& bounds,
                  const Nsga2Config& config, const std::vector<std::string>& labels = {});

struct OptimumCheck {
    double f_hat = 0.0;
    double f_true = 0.0;
    double rel_gap = 0.0;
    bool ok = false;
};

/// The trust gate: evaluate the surrogate and the forward objective at the
/// calibrated point; flag failure when the relative gap exceeds tol.
OptimumCheck validate_optimum(std::span<const double> x_opt, const ObjectiveFn& surrogate_objective,
                              const ObjectiveFn& forward_objective, double tol = 0.01);

}  // namespace tidecal

#endif
