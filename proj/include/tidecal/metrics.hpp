#ifndef TIDECAL_METRICS_HPP
#define TIDECAL_METRICS_HPP

#include <span>

#include "tidecal/estuary.hpp"

namespace tidecal {

/// Per-station error values J_s [m].
using StationErrors = std::vector<double>;

double rmse(std::span<const double> sim, std::span<const double> obs);
double bias(std::span<const double> sim, std::span<const double> obs);

/// Efficiency score, 1 for a perfect model. The default denominator
/// centers the *simulated* series on the observed mean, which is the
/// form this toolkit standardizes on; standard_nse = true switches to
/// the textbook Nash-Sutcliffe denominator (observed values).
double nash(std::span<const double> sim, std::span<const double> obs, bool standard_nse = false);

double rmse(const TimeSeries& sim, const TimeSeries& obs);
double bias(const TimeSeries& sim, const TimeSeries& obs);
double nash(const TimeSeries& sim, const TimeSeries& obs, bool standard_nse = false);

enum class Aggregate { mean, stddev, max };

/// mean = arithmetic mean; stddev = population standard deviation
/// (the stations are the whole population of objectives); max = largest.
double aggregate(std::span<const double> errors, Aggregate kind);

/// Which per-station error functional a response table or objective uses.
enum class ResponseMetric { rmse, abs_bias, neg_nash };

std::string to_string(ResponseMetric m);
ResponseMetric response_metric_from_string(const std::string& s);

/// One station's response at a calibration point, computed through a
/// caller-provided scratch buffer of grid length (no allocation on the
/// hot path). Values match simulate() + the series metrics bit for bit.
double station_response_metric(const ForwardEvaluator& fwd, const ParameterVector& params,
                               int station, std::span<const double> obs_values,
                               ResponseMetric metric, std::span<double> scratch);

}  // namespace tidecal

#endif
