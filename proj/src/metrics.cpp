#include "tidecal/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace tidecal {

namespace {
void check_aligned(std::span<const double> sim, std::span<const double> obs) {
    if (sim.empty()) throw config_error("metric: empty series");
    if (sim.size() != obs.size())
        throw config_error("metric: series lengths differ (" + std::to_string(sim.size()) + " vs " +
                           std::to_string(obs.size()) + ")");
}

void check_grids(const TimeSeries& a, const TimeSeries& b) {
    if (a.t0 != b.t0 || a.dt != b.dt) throw config_error("metric: series grids not aligned");
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}
}  // namespace

double rmse(std::span<const double> sim, std::span<const double> obs) {
    check_aligned(sim, obs);
    double ss = 0.0;
    for (std::size_t i = 0; i < sim.size(); ++i) {
        const double d = sim[i] - obs[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(sim.size()));
}

double bias(std::span<const double> sim, std::span<const double> obs) {
    check_aligned(sim, obs);
    return mean_of(sim) - mean_of(obs);
}

double nash(std::span<const double> sim, std::span<const double> obs, bool standard_nse) {
    check_aligned(sim, obs);
    const double obs_mean = mean_of(obs);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < sim.size(); ++i) {
        const double d = sim[i] - obs[i];
        num += d * d;
        const double c = (standard_nse ? obs[i] : sim[i]) - obs_mean;
        den += c * c;
    }
    if (den == 0.0)
        throw compute_error(standard_nse ? "nash: observed series constant, zero denominator"
                                         : "nash: simulated series constant at observed mean, zero denominator");
    return 1.0 - num / den;
}

double rmse(const TimeSeries& sim, const TimeSeries& obs) {
    check_grids(sim, obs);
    return rmse(std::span<const double>(sim.values), std::span<const double>(obs.values));
}

double bias(const TimeSeries& sim, const TimeSeries& obs) {
    check_grids(sim, obs);
    return bias(std::span<const double>(sim.values), std::span<const double>(obs.values));
}

double nash(const TimeSeries& sim, const TimeSeries& obs, bool standard_nse) {
    check_grids(sim, obs);
    return nash(std::span<const double>(sim.values), std::span<const double>(obs.values), standard_nse);
}

double aggregate(std::span<const double> errors, Aggregate kind) {
    if (errors.empty()) throw config_error("aggregate: empty error vector");
    switch (kind) {
        case Aggregate::mean:
            return mean_of(errors);
        case Aggregate::stddev: {
            const double m = mean_of(errors);
            double ss = 0.0;
            for (double e : errors) ss += (e - m) * (e - m);
            return std::sqrt(ss / static_cast<double>(errors.size()));
        }
        case Aggregate::max:
            return *std::max_element(errors.begin(), errors.end());
    }
    throw config_error("aggregate: unknown kind");
}

std::string to_string(ResponseMetric m) {
    switch (m) {
        case ResponseMetric::rmse: return "rmse";
        case ResponseMetric::abs_bias: return "abs_bias";
        case ResponseMetric::neg_nash: return "neg_nash";
    }
    throw config_error("unknown response metric");
}

ResponseMetric response_metric_from_string(const std::string& s) {
    if (s == "rmse") return ResponseMetric::rmse;
    if (s == "abs_bias") return ResponseMetric::abs_bias;
    if (s == "neg_nash") return ResponseMetric::neg_nash;
    throw config_error("unknown response metric '" + s + "'");
}

double station_response_metric(const ForwardEvaluator& fwd, const ParameterVector& params,
                               int station, std::span<const double> obs_values,
                               ResponseMetric metric, std::span<double> scratch) {
    if (obs_values.size() != scratch.size())
        throw config_error("station_response_metric: observation/scratch length mismatch");
    fwd.run_station_into(params, station, scratch);
    switch (metric) {
        case ResponseMetric::rmse:
            return rmse(scratch, obs_values);
        case ResponseMetric::abs_bias:
            return std::abs(bias(scratch, obs_values));
        case ResponseMetric::neg_nash:
            return 1.0 - nash(scratch, obs_values);
    }
    throw config_error("unknown response metric");
}

}  // namespace tidecal
