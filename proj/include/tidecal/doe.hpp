#ifndef TIDECAL_DOE_HPP
#define TIDECAL_DOE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tidecal/estuary.hpp"
#include "tidecal/metrics.hpp"
#include "tidecal/types.hpp"

namespace tidecal {

/// n sampled points in physical units, one row per point.
struct DesignMatrix {
    int n = 0;
    int d = 0;
    std::vector<double> data;  // row-major n*d
    Bounds bounds;

    double at(int row, int col) const { return data[static_cast<std::size_t>(row) * d + col]; }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * d, static_cast<std::size_t>(d)};
    }
    ParameterVector params_at(int r) const { return ParameterVector::from_array(row(r)); }
};

/// Empirical minimum design size, 10 points per input dimension.
int default_design_size(int d);

/// Latin Hypercube sample: per column an independent random permutation of
/// the n strata, one point placed uniformly inside each stratum. Exactly
/// one point per stratum per column, deterministic under seed.
DesignMatrix lhs_sample(int n, const Bounds& bounds, std::uint64_t seed);

/// Design plus the n x N_s matrix of per-station responses.
struct ErrorTable {
    DesignMatrix design;
    std::vector<int> station_ids;
    std::vector<double> responses;  // row-major n * N_s
    ResponseMetric metric = ResponseMetric::rmse;

    int n_stations() const { return static_cast<int>(station_ids.size()); }
    double response(int row, int station) const {
        return responses[static_cast<std::size_t>(row) * station_ids.size() +
                         static_cast<std::size_t>(station)];
    }
    std::span<const double> row_responses(int r) const {
        return {responses.data() + static_cast<std::size_t>(r) * station_ids.size(), station_ids.size()};
    }
    std::vector<double> station_column(int station) const;
};

/// Run the forward model at every design row and measure it against the
/// observations. Rows are distributed over OpenMP workers; the result
/// ordering (and every byte of it) is independent of the worker count.
/// workers = 0 means the OpenMP default.
ErrorTable evaluate_design(const DesignMatrix& design, const ForwardEvaluator& fwd,
                           const std::vector<TimeSeries>& observations,
                           ResponseMetric metric = ResponseMetric::rmse, int workers = 0);

/// Plain-loop reference implementation, kept for testing the parallel
/// kernel against and for the benchmark harness.
ErrorTable evaluate_design_serial(const DesignMatrix& design, const ForwardEvaluator& fwd,
                                  const std::vector<TimeSeries>& observations,
                                  ResponseMetric metric = ResponseMetric::rmse);

// CSV persistence (headers: alpha,...,ks6 and the same plus J_<id> columns).
std::string design_to_csv(const DesignMatrix& design);
DesignMatrix design_from_csv(const std::string& text, const Bounds& bounds);
std::string error_table_to_csv(const ErrorTable& table);
ErrorTable error_table_from_csv(const std::string& text, const Bounds& bounds);

}  // namespace tidecal

#endif
