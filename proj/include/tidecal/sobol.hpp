#ifndef TIDECAL_SOBOL_HPP
#define TIDECAL_SOBOL_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tidecal/types.hpp"

namespace tidecal {

using ObjectiveFn = std::function<double(std::span<const double>)>;

struct SobolConfig {
    int n_mc = 1 << 13;
    std::uint64_t seed = 0;
    bool second_order = false;
    int workers = 0;  // 0 = OpenMP default
};

struct SobolResult {
    std::vector<double> first;   // S_i, Saltelli estimator
    std::vector<double> total;   // S_Ti, Jansen estimator
    std::optional<std::vector<double>> second;  // S_ij, upper triangle row-major (i<j)
    int n_mc = 0;
    std::string estimator = "saltelli-first/jansen-total";
    std::uint64_t seed = 0;

    double second_at(int i, int j, int d) const;
};

/// Pick-freeze Monte Carlo estimate of first-order, total and (optionally)
/// second-order indices of f over the uniform distribution on the box.
/// Uses two independent sample matrices plus column-hybrids; evaluations
/// run across OpenMP workers, accumulation order is fixed by block index,
/// so the result is identical for any worker count.
/// Evaluation count: n_mc*(d+2), plus n_mc*d*(d-1)/2 with second_order.
SobolResult sobol_indices(const ObjectiveFn& f, const Bounds& bounds, const SobolConfig& config);

/// Serial reference of the batch evaluation path, kept for testing
/// and benchmarking against the parallel kernel.
SobolResult sobol_indices_serial(const ObjectiveFn& f, const Bounds& bounds, const SobolConfig& config);

struct ParameterRanking {
    std::vector<int> significant;  // S_Ti >= threshold, descending by S_Ti
    std::vector<int> ignorable;    // the complement: could have been fixed
};

ParameterRanking rank_parameters(const SobolResult& result, double threshold);

}  // namespace tidecal

#endif
