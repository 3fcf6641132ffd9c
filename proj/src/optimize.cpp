#include "tidecal/optimize.hpp"

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "tidecal/metrics.hpp"
#include "tidecal/rng.hpp"

namespace tidecal {

// ---------- objectives ----------

std::string ObjectiveSpec::label() const {
    switch (kind) {
        case GoalKind::mean_rmse: return "mean";
        case GoalKind::std_rmse: return "std";
        case GoalKind::max_rmse: return "max";
        case GoalKind::station_rmse: return "station:" + std::to_string(station_id);
        case GoalKind::abs_bias: return "bias:" + std::to_string(station_id);
        case GoalKind::neg_nash: return "nash:" + std::to_string(station_id);
    }
    return "?";
}

ObjectiveSpec ObjectiveSpec::parse(const std::string& text) {
    ObjectiveSpec spec;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if (head == "mean") {
        spec.kind = GoalKind::mean_rmse;
    } else if (head == "std") {
        spec.kind = GoalKind::std_rmse;
    } else if (head == "max") {
        spec.kind = GoalKind::max_rmse;
    } else if (head == "station") {
        spec.kind = GoalKind::station_rmse;
    } else if (head == "bias") {
        spec.kind = GoalKind::abs_bias;
    } else if (head == "nash") {
        spec.kind = GoalKind::neg_nash;
    } else {
        throw config_error("unknown goal '" + text + "'");
    }
    const bool wants_station = spec.kind == GoalKind::station_rmse ||
                               spec.kind == GoalKind::abs_bias || spec.kind == GoalKind::neg_nash;
    if (wants_station) {
        if (colon == std::string::npos || colon + 1 >= text.size())
            throw config_error("goal '" + head + "' needs a station id, e.g. " + head + ":3");
        try {
            spec.station_id = std::stoi(text.substr(colon + 1));
        } catch (const std::exception&) {
            throw config_error("bad station id in goal '" + text + "'");
        }
    } else if (colon != std::string::npos) {
        throw config_error("goal '" + head + "' takes no station id");
    }
    return spec;
}

namespace {

int station_index_by_id(const std::vector<KrigingModel>& models, int id) {
    for (std::size_t i = 0; i < models.size(); ++i)
        if (models[i].station_id() == id) return static_cast<int>(i);
    throw config_error("objective references station id " + std::to_string(id) +
                       " not covered by the models");
}

int station_index_by_id(const std::vector<StationConfig>& stations, int id) {
    for (std::size_t i = 0; i < stations.size(); ++i)
        if (stations[i].id == id) return static_cast<int>(i);
    throw config_error("objective references unknown station id " + std::to_string(id));
}

ResponseMetric metric_for(GoalKind kind) {
    switch (kind) {
        case GoalKind::abs_bias: return ResponseMetric::abs_bias;
        case GoalKind::neg_nash: return ResponseMetric::neg_nash;
        default: return ResponseMetric::rmse;
    }
}

}  // namespace

ObjectiveFn build_objective(const ObjectiveSpec& spec, const std::vector<KrigingModel>& models) {
    if (models.empty()) throw config_error("build_objective: no models");
    switch (spec.kind) {
        case GoalKind::mean_rmse:
            return [&models](std::span<const double> x) {
                return aggregate(predict_all(models, x), Aggregate::mean);
            };
        case GoalKind::std_rmse:
            return [&models](std::span<const double> x) {
                return aggregate(predict_all(models, x), Aggregate::stddev);
            };
        case GoalKind::max_rmse:
            return [&models](std::span<const double> x) {
                return aggregate(predict_all(models, x), Aggregate::max);
            };
        case GoalKind::station_rmse:
        case GoalKind::abs_bias:
        case GoalKind::neg_nash: {
            const int idx = station_index_by_id(models, spec.station_id);
            const KrigingModel* m = &models[static_cast<std::size_t>(idx)];
            return [m](std::span<const double> x) { return std::max(0.0, m->predict_mean(x)); };
        }
    }
    throw config_error("build_objective: unknown goal kind");
}

ObjectiveFn build_objective(const ObjectiveSpec& spec, const ForwardEvaluator& fwd,
                            const std::vector<TimeSeries>& observations) {
    if (observations.size() != fwd.scenario().stations.size())
        throw config_error("build_objective: observation count mismatch");
    const ResponseMetric metric = metric_for(spec.kind);
    const int grid_n = fwd.scenario().grid.n;
    const int ns = fwd.scenario().n_stations();

    if (spec.kind == GoalKind::station_rmse || spec.kind == GoalKind::abs_bias ||
        spec.kind == GoalKind::neg_nash) {
        const int idx = station_index_by_id(fwd.scenario().stations, spec.station_id);
        return [&fwd, &observations, idx, metric, grid_n](std::span<const double> x) {
            thread_local std::vector<double> scratch;
            scratch.resize(static_cast<std::size_t>(grid_n));
            return station_response_metric(fwd, ParameterVector::from_array(x), idx,
                                           observations[static_cast<std::size_t>(idx)].values, metric,
                                           scratch);
        };
    }

    const Aggregate agg = spec.kind == GoalKind::mean_rmse    ? Aggregate::mean
                          : spec.kind == GoalKind::std_rmse   ? Aggregate::stddev
                                                              : Aggregate::max;
    return [&fwd, &observations, agg, grid_n, ns](std::span<const double> x) {
        thread_local std::vector<double> scratch;
        thread_local std::vector<double> errs;
        scratch.resize(static_cast<std::size_t>(grid_n));
        errs.resize(static_cast<std::size_t>(ns));
        const ParameterVector p = ParameterVector::from_array(x);
        for (int s = 0; s < ns; ++s)
            errs[static_cast<std::size_t>(s)] =
                station_response_metric(fwd, p, s, observations[static_cast<std::size_t>(s)].values,
                                        ResponseMetric::rmse, scratch);
        return aggregate(errs, agg);
    };
}

ObjectiveFn build_polish_objective(const ObjectiveSpec& spec, const ForwardEvaluator& fwd,
                                   const std::vector<TimeSeries>& observations) {
    const int grid_n = fwd.scenario().grid.n;
    const int ns = fwd.scenario().n_stations();
    if (spec.kind == GoalKind::mean_rmse) {
        return [&fwd, &observations, grid_n, ns](std::span<const double> x) {
            thread_local std::vector<double> scratch;
            scratch.resize(static_cast<std::size_t>(grid_n));
            const ParameterVector p = ParameterVector::from_array(x);
            double acc = 0.0;
            for (int s = 0; s < ns; ++s) {
                const double j = station_response_metric(
                    fwd, p, s, observations[static_cast<std::size_t>(s)].values, ResponseMetric::rmse,
                    scratch);
                acc += j * j;
            }
            return acc / static_cast<double>(ns);
        };
    }
    if (spec.kind == GoalKind::station_rmse) {
        const int idx = station_index_by_id(fwd.scenario().stations, spec.station_id);
        return [&fwd, &observations, idx, grid_n](std::span<const double> x) {
            thread_local std::vector<double> scratch;
            scratch.resize(static_cast<std::size_t>(grid_n));
            const double j = station_response_metric(fwd, ParameterVector::from_array(x), idx,
                                                     observations[static_cast<std::size_t>(idx)].values,
                                                     ResponseMetric::rmse, scratch);
            return j * j;
        };
    }
    return build_objective(spec, fwd, observations);
}

// ---------- PSO ----------

namespace {

std::vector<double> batch_evaluate(const ObjectiveFn& f, const std::vector<std::vector<double>>& xs,
                                   int workers, const std::string& where) {
    std::vector<double> vals(xs.size());
    std::size_t bad = xs.size();
    std::string bad_what;
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(xs.size()); ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        try {
            vals[u] = f(xs[u]);
            if (!std::isfinite(vals[u])) throw compute_error("non-finite objective value");
        } catch (const std::exception& e) {
#pragma omp critical(tidecal_opt_err)
            if (u < bad) {
                bad = u;
                bad_what = e.what();
            }
        }
    }
    if (bad < xs.size())
        throw compute_error(where + ": evaluation " + std::to_string(bad) + " failed: " + bad_what);
    return vals;
}

}  // namespace

OptimRun pso_minimize(const ObjectiveFn& f, const Bounds& bounds, const PsoConfig& config) {
    bounds.validate();
    if (config.swarm < 5) throw config_error("pso: swarm must be >= 5");
    if (config.iters < 1) throw config_error("pso: iters must be >= 1");
    const int d = bounds.dim();
    const int m = config.swarm;
    Rng rng(config.seed);

    std::vector<std::vector<double>> pos(static_cast<std::size_t>(m), std::vector<double>(d));
    std::vector<std::vector<double>> vel(static_cast<std::size_t>(m), std::vector<double>(d));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) {
            const double lo = bounds.lower[static_cast<std::size_t>(j)];
            const double hi = bounds.upper[static_cast<std::size_t>(j)];
            pos[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = rng.uniform(lo, hi);
            vel[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                0.1 * (hi - lo) * rng.uniform(-1.0, 1.0);
        }

    OptimRun run;
    run.seed = config.seed;

    std::vector<double> fval = batch_evaluate(f, pos, config.workers, "pso iteration 0");
    run.evals += m;
    std::vector<std::vector<double>> pbest = pos;
    std::vector<double> pbest_f = fval;
    std::size_t gbest = 0;
    for (std::size_t i = 1; i < pbest_f.size(); ++i)
        if (pbest_f[i] < pbest_f[gbest]) gbest = i;
    std::vector<double> gbest_x = pbest[gbest];
    double gbest_f = pbest_f[gbest];

    for (int it = 1; it <= config.iters; ++it) {
        for (int i = 0; i < m; ++i) {
            auto& x = pos[static_cast<std::size_t>(i)];
            auto& v = vel[static_cast<std::size_t>(i)];
            const auto& pb = pbest[static_cast<std::size_t>(i)];
            for (int j = 0; j < d; ++j) {
                const double r1 = rng.uniform01();
                const double r2 = rng.uniform01();
                const std::size_t ju = static_cast<std::size_t>(j);
                v[ju] = config.inertia * v[ju] + config.c1 * r1 * (pb[ju] - x[ju]) +
                        config.c2 * r2 * (gbest_x[ju] - x[ju]);
                x[ju] += v[ju];
                const double lo = bounds.lower[ju];
                const double hi = bounds.upper[ju];
                if (x[ju] < lo) {
                    x[ju] = std::min(hi, lo + (lo - x[ju]));
                    v[ju] = -v[ju];
                } else if (x[ju] > hi) {
                    x[ju] = std::max(lo, hi - (x[ju] - hi));
                    v[ju] = -v[ju];
                }
            }
        }
        fval = batch_evaluate(f, pos, config.workers, "pso iteration " + std::to_string(it));
        run.evals += m;
        for (int i = 0; i < m; ++i) {
            const std::size_t iu = static_cast<std::size_t>(i);
            if (fval[iu] < pbest_f[iu]) {
                pbest_f[iu] = fval[iu];
                pbest[iu] = pos[iu];
                if (fval[iu] < gbest_f) {
                    gbest_f = fval[iu];
                    gbest_x = pos[iu];
                }
            }
        }
        run.history.push_back(gbest_f);
    }
    run.best_x = gbest_x;
    run.best_f = gbest_f;
    return run;
}

// ---------- projected BFGS ----------

namespace {

// Work happens in box-normalized coordinates so one curvature matrix and
// one finite-difference step fit every parameter scale.
struct BoxScale {
    const Bounds& bounds;
    std::vector<double> to_unit(std::span<const double> x) const {
        std::vector<double> z(x.size());
        for (std::size_t j = 0; j < z.size(); ++j)
            z[j] = (x[j] - bounds.lower[j]) / (bounds.upper[j] - bounds.lower[j]);
        return z;
    }
    std::vector<double> to_phys(const Eigen::VectorXd& z) const {
        std::vector<double> x(static_cast<std::size_t>(z.size()));
        for (std::size_t j = 0; j < x.size(); ++j)
            x[j] = bounds.lower[j] + z[static_cast<Eigen::Index>(j)] * (bounds.upper[j] - bounds.lower[j]);
        return x;
    }
};

}  // namespace

OptimRun gradient_minimize(const ObjectiveFn& f, const Bounds& bounds, std::span<const double> x0,
                           const GradConfig& config) {
    bounds.validate();
    if (!bounds.contains(x0)) throw config_error("gradient_minimize: x0 outside bounds");
    const int d = bounds.dim();
    const BoxScale scale{bounds};

    OptimRun run;
    long long evals = 0;
    auto eval_unit = [&](const Eigen::VectorXd& z) {
        const double v = f(scale.to_phys(z));
        ++evals;
        if (!std::isfinite(v)) throw compute_error("gradient_minimize: non-finite objective value");
        return v;
    };

    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(scale.to_unit(x0).data(), d);
    double fz = eval_unit(z);
    run.history.push_back(fz);

    const double h = std::max(config.fd_step, 1e-12);
    auto gradient = [&](const Eigen::VectorXd& at) {
        Eigen::VectorXd g(d);
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd zp = at, zm = at;
            zp[j] = std::min(1.0, at[j] + h);
            zm[j] = std::max(0.0, at[j] - h);
            const double denom = zp[j] - zm[j];
            g[j] = denom > 0.0 ? (eval_unit(zp) - eval_unit(zm)) / denom : 0.0;
        }
        return g;
    };
    auto projected_norm = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& g) {
        double nrm = 0.0;
        for (int j = 0; j < d; ++j) {
            double gj = g[j];
            if (at[j] <= 0.0 && gj > 0.0) gj = 0.0;
            if (at[j] >= 1.0 && gj < 0.0) gj = 0.0;
            nrm = std::max(nrm, std::abs(gj));
        }
        return nrm;
    };

    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd g = gradient(z);

    for (int it = 0; it < config.max_iters; ++it) {
        if (projected_norm(z, g) <= config.gtol) break;

        Eigen::VectorXd p = -(hinv * g);
        // keep descent along the active set
        for (int j = 0; j < d; ++j) {
            if (z[j] <= 0.0 && p[j] < 0.0) p[j] = 0.0;
            if (z[j] >= 1.0 && p[j] > 0.0) p[j] = 0.0;
        }
        if (p.dot(g) >= 0.0) {  // fall back to projected steepest descent
            p = -g;
            for (int j = 0; j < d; ++j) {
                if (z[j] <= 0.0 && p[j] < 0.0) p[j] = 0.0;
                if (z[j] >= 1.0 && p[j] > 0.0) p[j] = 0.0;
            }
        }

        double alpha = 1.0;
        Eigen::VectorXd z_new = z;
        double f_new = fz;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            Eigen::VectorXd cand = z + alpha * p;
            for (int j = 0; j < d; ++j) cand[j] = std::min(1.0, std::max(0.0, cand[j]));
            const Eigen::VectorXd step = cand - z;
            if (step.norm() == 0.0) break;
            const double fc = eval_unit(cand);
            if (fc <= fz + 1e-4 * g.dot(step)) {
                z_new = cand;
                f_new = fc;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd g_new = gradient(z_new);
        const Eigen::VectorXd s = z_new - z;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(d, d);
            hinv = (ident - rho * s * y.transpose()) * hinv * (ident - rho * y * s.transpose()) +
                   rho * s * s.transpose();
        }
        z = z_new;
        fz = f_new;
        g = g_new;
        run.history.push_back(fz);
    }

    run.best_x = scale.to_phys(z);
    run.best_f = fz;
    run.evals = evals;
    return run;
}

OptimRun multistart_gradient_minimize(const ObjectiveFn& f, const Bounds& bounds, int n_starts,
                                      std::uint64_t seed, const GradConfig& config,
                                      const std::vector<std::vector<double>>& extra_starts) {
    if (n_starts < 1 && extra_starts.empty())
        throw config_error("multistart_gradient_minimize: no starting points");
    std::vector<std::vector<double>> starts;
    if (n_starts >= 1) {
        const DesignMatrix dm = lhs_sample(n_starts, bounds, seed);
        for (int i = 0; i < dm.n; ++i) {
            auto row = dm.row(i);
            starts.emplace_back(row.begin(), row.end());
        }
    }
    for (const auto& x : extra_starts) starts.push_back(bounds.clamp(x));

    OptimRun best;
    best.seed = seed;
    double best_so_far = std::numeric_limits<double>::infinity();
    std::vector<double> merged_history;
    for (const auto& x0 : starts) {
        OptimRun r = gradient_minimize(f, bounds, x0, config);
        for (double v : r.history) {
            best_so_far = std::min(best_so_far, v);
            merged_history.push_back(best_so_far);
        }
        if (best.best_x.empty() || r.best_f < best.best_f) {
            best.best_x = r.best_x;
            best.best_f = r.best_f;
        }
        best.evals += r.evals;
    }
    best.history = std::move(merged_history);
    best.seed = seed;
    return best;
}

// ---------- nondominated sorting / crowding / NSGA-II ----------

namespace {
bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
    bool strictly = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] > b[k]) return false;
        if (a[k] < b[k]) strictly = true;
    }
    return strictly;
}
}  // namespace

std::vector<std::vector<int>> nondominated_sort(const std::vector<std::vector<double>>& points) {
    const int n = static_cast<int>(points.size());
    if (n == 0) return {};
    const std::size_t m = points[0].size();
    for (const auto& p : points) {
        if (p.size() != m) throw config_error("nondominated_sort: objective vector length mismatch");
        for (double v : p)
            if (!std::isfinite(v)) throw config_error("nondominated_sort: non-finite objective");
    }

    std::vector<std::vector<int>> dominated(static_cast<std::size_t>(n));
    std::vector<int> count(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> fronts(1);
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(points[static_cast<std::size_t>(p)], points[static_cast<std::size_t>(q)]))
                dominated[static_cast<std::size_t>(p)].push_back(q);
            else if (dominates(points[static_cast<std::size_t>(q)], points[static_cast<std::size_t>(p)]))
                ++count[static_cast<std::size_t>(p)];
        }
        if (count[static_cast<std::size_t>(p)] == 0) fronts[0].push_back(p);
    }
    int k = 0;
    while (!fronts[static_cast<std::size_t>(k)].empty()) {
        std::vector<int> next;
        for (int p : fronts[static_cast<std::size_t>(k)])
            for (int q : dominated[static_cast<std::size_t>(p)])
                if (--count[static_cast<std::size_t>(q)] == 0) next.push_back(q);
        ++k;
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::vector<double>>& front) {
    const int n = static_cast<int>(front.size());
    if (n == 0) throw config_error("crowding_distance: empty front");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), inf);
        return dist;
    }
    const std::size_t m = front[0].size();
    std::vector<int> order(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < m; ++k) {
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return front[static_cast<std::size_t>(a)][k] < front[static_cast<std::size_t>(b)][k];
        });
        const double lo = front[static_cast<std::size_t>(order.front())][k];
        const double hi = front[static_cast<std::size_t>(order.back())][k];
        dist[static_cast<std::size_t>(order.front())] = inf;
        dist[static_cast<std::size_t>(order.back())] = inf;
        const double range = hi - lo;
        if (range <= 0.0) continue;  // degenerate objective adds nothing
        for (int i = 1; i + 1 < n; ++i) {
            const int cur = order[static_cast<std::size_t>(i)];
            if (dist[static_cast<std::size_t>(cur)] == inf) continue;
            const double below = front[static_cast<std::size_t>(order[static_cast<std::size_t>(i - 1)])][k];
            const double above = front[static_cast<std::size_t>(order[static_cast<std::size_t>(i + 1)])][k];
            dist[static_cast<std::size_t>(cur)] += (above - below) / range;
        }
    }
    return dist;
}

namespace {

struct RankedPopulation {
    std::vector<int> rank;
    std::vector<double> crowding;
};

RankedPopulation rank_population(const std::vector<std::vector<double>>& objs) {
    RankedPopulation rp;
    rp.rank.assign(objs.size(), 0);
    rp.crowding.assign(objs.size(), 0.0);
    const auto fronts = nondominated_sort(objs);
    for (std::size_t fi = 0; fi < fronts.size(); ++fi) {
        std::vector<std::vector<double>> sub;
        sub.reserve(fronts[fi].size());
        for (int idx : fronts[fi]) sub.push_back(objs[static_cast<std::size_t>(idx)]);
        const std::vector<double> cd = crowding_distance(sub);
        for (std::size_t j = 0; j < fronts[fi].size(); ++j) {
            rp.rank[static_cast<std::size_t>(fronts[fi][j])] = static_cast<int>(fi);
            rp.crowding[static_cast<std::size_t>(fronts[fi][j])] = cd[j];
        }
    }
    return rp;
}

// Deb's bounded simulated binary crossover, per variable.
void sbx_pair(Rng& rng, double eta, double lo, double hi, double& y1, double& y2) {
    constexpr double eps = 1e-14;
    if (std::abs(y1 - y2) <= eps) return;
    double a = std::min(y1, y2), b = std::max(y1, y2);
    const double u = rng.uniform01();
    auto spread = [&](double beta) {
        const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
        if (u <= 1.0 / alpha) return std::pow(u * alpha, 1.0 / (eta + 1.0));
        return std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
    };
    const double beta1 = 1.0 + 2.0 * (a - lo) / (b - a);
    const double beta2 = 1.0 + 2.0 * (hi - b) / (b - a);
    double c1 = 0.5 * ((a + b) - spread(beta1) * (b - a));
    double c2 = 0.5 * ((a + b) + spread(beta2) * (b - a));
    c1 = std::min(hi, std::max(lo, c1));
    c2 = std::min(hi, std::max(lo, c2));
    if (rng.uniform01() <= 0.5) {
        y1 = c2;
        y2 = c1;
    } else {
        y1 = c1;
        y2 = c2;
    }
}

// Deb's bounded polynomial mutation, per variable.
void polynomial_mutate(Rng& rng, double eta, double lo, double hi, double& y) {
    const double u = rng.uniform01();
    const double delta1 = (y - lo) / (hi - lo);
    const double delta2 = (hi - y) / (hi - lo);
    const double mpow = 1.0 / (eta + 1.0);
    double deltaq;
    if (u <= 0.5) {
        const double xy = 1.0 - delta1;
        const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, eta + 1.0);
        deltaq = std::pow(val, mpow) - 1.0;
    } else {
        const double xy = 1.0 - delta2;
        const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, eta + 1.0);
        deltaq = 1.0 - std::pow(val, mpow);
    }
    y = std::min(hi, std::max(lo, y + deltaq * (hi - lo)));
}

}  // namespace

ParetoFront nsga2(const std::vector<ObjectiveFn>& objectives, const Bounds& bounds,
                  const Nsga2Config& config, const std::vector<std::string>& labels) {
    bounds.validate();
    if (objectives.empty() || objectives.size() > 3)
        throw config_error("nsga2: need 1 to 3 objectives");
    if (config.pop < 8 || config.pop % 2 != 0) throw config_error("nsga2: pop must be even and >= 8");
    if (config.gens < 1) throw config_error("nsga2: gens must be >= 1");
    const int d = bounds.dim();
    const int pop = config.pop;
    const double pm = config.mutation_p < 0.0 ? 1.0 / d : config.mutation_p;
    Rng rng(config.seed);

    auto evaluate = [&](const std::vector<std::vector<double>>& xs, int gen) {
        std::vector<std::vector<double>> objs(xs.size(),
                                              std::vector<double>(objectives.size()));
        for (std::size_t k = 0; k < objectives.size(); ++k) {
            std::vector<double> vals;
            try {
                vals = batch_evaluate(objectives[k], xs, config.workers, "nsga2");
            } catch (const std::exception& e) {
                throw compute_error("nsga2: generation " + std::to_string(gen) + ": " + e.what());
            }
            for (std::size_t i = 0; i < xs.size(); ++i) objs[i][k] = vals[i];
        }
        return objs;
    };

    std::vector<std::vector<double>> xs(static_cast<std::size_t>(pop), std::vector<double>(d));
    for (auto& x : xs)
        for (int j = 0; j < d; ++j)
            x[static_cast<std::size_t>(j)] = rng.uniform(bounds.lower[static_cast<std::size_t>(j)],
                                                         bounds.upper[static_cast<std::size_t>(j)]);
    std::vector<std::vector<double>> objs = evaluate(xs, 0);
    RankedPopulation rp = rank_population(objs);

    auto tournament = [&](int a, int b) {
        const std::size_t ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        if (rp.rank[ua] != rp.rank[ub]) return rp.rank[ua] < rp.rank[ub] ? a : b;
        if (rp.crowding[ua] != rp.crowding[ub]) return rp.crowding[ua] > rp.crowding[ub] ? a : b;
        return a;
    };

    for (int gen = 1; gen <= config.gens; ++gen) {
        std::vector<std::vector<double>> children;
        children.reserve(static_cast<std::size_t>(pop));
        while (static_cast<int>(children.size()) < pop) {
            const int p1 = tournament(static_cast<int>(rng.below(static_cast<std::uint64_t>(pop))),
                                      static_cast<int>(rng.below(static_cast<std::uint64_t>(pop))));
            const int p2 = tournament(static_cast<int>(rng.below(static_cast<std::uint64_t>(pop))),
                                      static_cast<int>(rng.below(static_cast<std::uint64_t>(pop))));
            std::vector<double> c1 = xs[static_cast<std::size_t>(p1)];
            std::vector<double> c2 = xs[static_cast<std::size_t>(p2)];
            if (rng.uniform01() <= config.crossover_p) {
                for (int j = 0; j < d; ++j) {
                    if (rng.uniform01() > 0.5) continue;
                    sbx_pair(rng, config.crossover_eta, bounds.lower[static_cast<std::size_t>(j)],
                             bounds.upper[static_cast<std::size_t>(j)], c1[static_cast<std::size_t>(j)],
                             c2[static_cast<std::size_t>(j)]);
                }
            }
            for (auto* c : {&c1, &c2})
                for (int j = 0; j < d; ++j)
                    if (rng.uniform01() <= pm)
                        polynomial_mutate(rng, config.mutation_eta,
                                          bounds.lower[static_cast<std::size_t>(j)],
                                          bounds.upper[static_cast<std::size_t>(j)],
                                          (*c)[static_cast<std::size_t>(j)]);
            children.push_back(std::move(c1));
            if (static_cast<int>(children.size()) < pop) children.push_back(std::move(c2));
        }

        std::vector<std::vector<double>> child_objs = evaluate(children, gen);

        // (mu + lambda) survival
        std::vector<std::vector<double>> all_x = xs;
        all_x.insert(all_x.end(), children.begin(), children.end());
        std::vector<std::vector<double>> all_f = objs;
        all_f.insert(all_f.end(), child_objs.begin(), child_objs.end());
        const auto fronts = nondominated_sort(all_f);

        std::vector<int> chosen;
        chosen.reserve(static_cast<std::size_t>(pop));
        for (const auto& front : fronts) {
            if (static_cast<int>(chosen.size()) + static_cast<int>(front.size()) <= pop) {
                chosen.insert(chosen.end(), front.begin(), front.end());
            } else {
                std::vector<std::vector<double>> sub;
                sub.reserve(front.size());
                for (int idx : front) sub.push_back(all_f[static_cast<std::size_t>(idx)]);
                const std::vector<double> cd = crowding_distance(sub);
                std::vector<int> order(front.size());
                for (std::size_t i = 0; i < front.size(); ++i) order[i] = static_cast<int>(i);
                std::stable_sort(order.begin(), order.end(),
                                 [&](int a, int b) { return cd[static_cast<std::size_t>(a)] > cd[static_cast<std::size_t>(b)]; });
                for (int oi : order) {
                    if (static_cast<int>(chosen.size()) >= pop) break;
                    chosen.push_back(front[static_cast<std::size_t>(oi)]);
                }
            }
            if (static_cast<int>(chosen.size()) >= pop) break;
        }

        std::vector<std::vector<double>> new_x, new_f;
        new_x.reserve(static_cast<std::size_t>(pop));
        new_f.reserve(static_cast<std::size_t>(pop));
        for (int idx : chosen) {
            new_x.push_back(all_x[static_cast<std::size_t>(idx)]);
            new_f.push_back(all_f[static_cast<std::size_t>(idx)]);
        }
        xs = std::move(new_x);
        objs = std::move(new_f);
        rp = rank_population(objs);
    }

    ParetoFront front;
    front.objective_labels = labels;
    const auto fronts = nondominated_sort(objs);
    for (int idx : fronts[0])
        front.points.push_back({xs[static_cast<std::size_t>(idx)], objs[static_cast<std::size_t>(idx)]});
    return front;
}

OptimumCheck validate_optimum(std::span<const double> x_opt, const ObjectiveFn& surrogate_objective,
                              const ObjectiveFn& forward_objective, double tol) {
    OptimumCheck c;
    c.f_hat = surrogate_objective(x_opt);
    c.f_true = forward_objective(x_opt);
    c.rel_gap = std::abs(c.f_hat - c.f_true) / std::max(c.f_true, 1e-9);
    c.ok = c.rel_gap <= tol;
    return c;
}

}  // namespace tidecal
