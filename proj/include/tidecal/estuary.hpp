#ifndef TIDECAL_ESTUARY_HPP
#define TIDECAL_ESTUARY_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tidecal/types.hpp"

namespace tidecal {

inline constexpr double kGravity = 9.81;

/// One harmonic of the astronomical tide. Nodal factor and phase are held
/// constant over the simulated window (they vary on 18.6-year scales).
struct TideConstituent {
    std::string name;
    double amplitude = 0.0;     // A_F [m]
    double period = 1.0;        // T [s]
    double phase = 0.0;         // phi_F [rad]
    double nodal_factor = 1.0;  // f
    double nodal_phase = 0.0;   // w [rad]
    double origin_phase = 0.0;  // phi0 [rad]
};

/// Marine-boundary forcing: datum levels plus the constituent table.
/// u_amplitudes holds the per-constituent velocity amplitudes [m/s] that
/// enter the friction damping (velocities themselves are never output).
struct BoundaryConfig {
    double z_f = -25.0;    // bottom elevation at the boundary [m]
    double z_mean = 0.0;   // mean reference level [m]
    std::vector<TideConstituent> constituents;
    std::vector<double> u_amplitudes;

    void validate() const;
};

struct StationConfig {
    int id = 0;
    std::string name;
    double distance = 0.0;  // from the marine boundary [m]
    double depth = 1.0;     // mean water depth along the path [m]
    int zone = 1;           // friction zone, 1..6

    void validate() const;
};

/// Uniform output grid: n samples at t0, t0+dt, ..., t0+(n-1)*dt.
struct TimeGrid {
    double t0 = 0.0;
    double dt = 60.0;
    int n = 0;

    void validate() const;
    double time_at(int i) const { return t0 + dt * i; }
};

struct TimeSeries {
    double t0 = 0.0;
    double dt = 60.0;
    std::vector<double> values;  // water levels [m]
};

/// Free-surface elevation at the marine boundary:
///   eta(t) = alpha * sum_i f_i A_i cos(2 pi t / T_i - phi_i + phi0_i + w_i)
///            + z_mean + gamma
/// Throws compute_error (naming t) if the water depth eta - z_f is not
/// positive: such a configuration has no physical solution.
double boundary_level(const ParameterVector& params, const BoundaryConfig& boundary, double t);

/// Water levels at a station. Each constituent's amplitude is attenuated by
/// exp(-mu) with mu = c_damp * distance * beta * U_i / (Ks(zone)^2 h^(4/3)),
/// the Strickler-friction scaling, and its phase lags by the shallow-water
/// travel time distance / sqrt(g h). distance = 0 reproduces the boundary
/// series exactly.
TimeSeries propagate_to_station(const ParameterVector& params, const BoundaryConfig& boundary,
                                const StationConfig& station, const TimeGrid& grid, double c_damp);

std::vector<TimeSeries> simulate(const ParameterVector& params, const BoundaryConfig& boundary,
                                 const std::vector<StationConfig>& stations, const TimeGrid& grid,
                                 double c_damp);

/// simulate() plus i.i.d. zero-mean Gaussian noise of standard deviation
/// noise_sigma, reproducible under seed.
std::vector<TimeSeries> synthesize_observations(const ParameterVector& true_params,
                                                const BoundaryConfig& boundary,
                                                const std::vector<StationConfig>& stations,
                                                const TimeGrid& grid, double c_damp,
                                                double noise_sigma, std::uint64_t seed);

/// Everything a study needs: forcing, stations, grid, damping constant,
/// observation noise, master seed, the truth used to synthesize
/// observations, and the calibration bounds.
struct Scenario {
    BoundaryConfig boundary;
    std::vector<StationConfig> stations;
    TimeGrid grid;
    double c_damp = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    ParameterVector true_params;
    ParameterBounds bounds = default_parameter_bounds();

    void validate() const;
    int n_stations() const { return static_cast<int>(stations.size()); }

    /// The built-in six-station analog estuary used by the workbench.
    static Scenario gironde_analog();

    std::string to_json() const;
    static Scenario from_json(const std::string& text);
};

/// Batch evaluation engine. Precomputes the per-(station, constituent)
/// cosine tables, which do not depend on the calibration point, so a
/// forward run costs one exp per (station, constituent) plus a fused
/// multiply-add sweep. Values are bit-identical to simulate().
/// Immutable after construction; safe for concurrent use.
class ForwardEvaluator {
public:
    explicit ForwardEvaluator(const Scenario& scenario);

    const Scenario& scenario() const { return scenario_; }

    std::vector<TimeSeries> run(const ParameterVector& params) const;

    /// Simulated series for one station (row of run()).
    TimeSeries run_station(const ParameterVector& params, int station_index) const;

    /// Same values written into a caller buffer of grid length.
    void run_station_into(const ParameterVector& params, int station_index,
                          std::span<double> out) const;

private:
    Scenario scenario_;
    // tables_[s] holds n_constituents rows of grid.n cosine values
    std::vector<std::vector<std::vector<double>>> tables_;

    void fill_station(const ParameterVector& params, int s, std::vector<double>& out) const;
};

/// Convert between TimeSeries lists and the export CSV
/// (`time_s,station_<id>,...`, full double precision).
std::string series_to_csv(const std::vector<TimeSeries>& series, const std::vector<StationConfig>& stations);
std::vector<TimeSeries> series_from_csv(const std::string& text);

}  // namespace tidecal

#endif
