#ifndef TIDECAL_WORKBENCH_HPP
#define TIDECAL_WORKBENCH_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tidecal/diagnostics.hpp"
#include "tidecal/doe.hpp"
#include "tidecal/estuary.hpp"
#include "tidecal/kriging.hpp"
#include "tidecal/optimize.hpp"
#include "tidecal/sobol.hpp"

namespace tidecal {

/// File registry with content checksums plus the master seed. Stage
/// completion is derived from which artifacts are registered; loads verify
/// checksums so no stage can silently read a stale or edited artifact.
class ProjectManifest {
public:
    static ProjectManifest create(const std::filesystem::path& dir, std::uint64_t master_seed);
    static ProjectManifest load(const std::filesystem::path& dir);
    static bool exists(const std::filesystem::path& dir);

    void save() const;

    std::uint64_t master_seed() const { return master_seed_; }
    void set_master_seed(std::uint64_t s) { master_seed_ = s; }
    const std::filesystem::path& dir() const { return dir_; }

    /// Record (or refresh) an artifact after writing it.
    void register_file(const std::string& name, const std::string& relpath);

    bool has_file(const std::string& name) const;

    /// Absolute path after a checksum check. Throws stage_error when the
    /// artifact was never produced or is missing on disk, compute_error
    /// ("integrity: ...") when the bytes changed since registration.
    std::filesystem::path verified_path(const std::string& name) const;

    /// Same but phrased as a stage requirement, for error messages.
    std::filesystem::path require(const std::string& name, const std::string& needed_for) const;

    std::vector<std::string> file_names() const;
    std::string relpath(const std::string& name) const;

private:
    std::filesystem::path dir_;
    std::uint64_t master_seed_ = 0;
    std::vector<std::pair<std::string, std::pair<std::string, std::string>>> files_;  // name -> (relpath, checksum)
};

struct CalibrateOptions {
    std::string goal = "mean";
    std::string algo = "both";  // pso | grad | both
    bool polish = false;        // refine on the forward model after the surrogate search
    int workers = 0;
    int grad_starts = 10;
    PsoConfig pso;
};

struct ParetoOptions {
    std::vector<std::string> objectives;  // 2 or 3 goal specs
    Nsga2Config nsga2;
    int workers = 0;
};

/// Orchestrates the workflow: scenario -> observations -> design ->
/// error table -> surrogates -> validation / sensitivity / diagnostics ->
/// calibration -> Pareto studies -> report. One directory per project.
class Workbench {
public:
    /// Open an existing project.
    explicit Workbench(const std::filesystem::path& dir);

    /// Create a project around a scenario (empty path = built-in default).
    static Workbench init(const std::filesystem::path& dir, const std::filesystem::path& scenario_path,
                          std::optional<std::uint64_t> seed_override = {});

    void synth_obs();
    void design(int n = 0);  // 0 = 10 * d
    void evaluate(int workers = 0);
    void fit_models(KernelFamily kernel = KernelFamily::matern52,
                    TrendBasis basis = TrendBasis::constant, int workers = 0);
    ValidationReport validate_models(int n_test = 10);
    SobolResult run_sobol(int n_mc = 1 << 13, bool second_order = false, int workers = 0);
    void run_pca();
    void run_stats();
    OptimRun calibrate(const CalibrateOptions& opts);
    ParetoFront pareto(const ParetoOptions& opts);
    OptimumCheck check_optimum(double tol = 0.01);
    std::string report();

    // loaders (checksum-verified)
    Scenario load_scenario() const;
    std::vector<TimeSeries> load_observations() const;
    DesignMatrix load_design() const;
    ErrorTable load_error_table() const;
    std::vector<KrigingModel> load_models() const;

    ProjectManifest& manifest() { return manifest_; }

private:
    ProjectManifest manifest_;

    std::uint64_t stage_seed(const std::string& stage) const;
    void save_models(const std::vector<KrigingModel>& models, KernelFamily kernel, TrendBasis basis);

    /// Fit surrogates of a non-RMSE response metric for pareto objectives.
    std::vector<KrigingModel> metric_models(ResponseMetric metric, int workers);
};

}  // namespace tidecal

#endif
