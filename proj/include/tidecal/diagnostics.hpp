#ifndef TIDECAL_DIAGNOSTICS_HPP
#define TIDECAL_DIAGNOSTICS_HPP

#include <vector>

#include "tidecal/doe.hpp"

namespace tidecal {

/// Correlation-matrix PCA of the per-station error columns.
/// correlations holds each station's Pearson correlation with the first
/// two component scores (the correlation-circle coordinates).
struct PCAResult {
    std::vector<double> explained_ratio;              // m entries, sum 1
    std::vector<std::vector<double>> scores;          // n rows, m columns
    std::vector<std::vector<double>> loadings;        // N_s rows, m columns (eigenvectors)
    std::vector<std::array<double, 2>> correlations;  // N_s rows
};

/// Columns are standardized before the eigen-decomposition; components are
/// ordered by eigenvalue descending and signed so each component's
/// largest-magnitude loading is positive.
PCAResult pca(const ErrorTable& table);

struct StationSummary {
    int station_id = 0;
    double min = 0, q25 = 0, median = 0, q75 = 0, max = 0, mean = 0;
};

/// Quantiles by linear interpolation between order statistics.
std::vector<StationSummary> summary_stats(const ErrorTable& table);

/// Long-format export of the raw response values for external scatter
/// plotting: one row per (design point, station).
std::string scatter_long_csv(const ErrorTable& table);

}  // namespace tidecal

#endif
