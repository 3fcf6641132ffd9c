#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "tidecal/csv.hpp"
#include "tidecal/metrics.hpp"
#include "tidecal/rng.hpp"
#include "tidecal/workbench.hpp"

using namespace tidecal;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("tidecal_wb_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// small scenario so workbench tests stay fast
Scenario small_scenario() {
    Scenario sc = Scenario::gironde_analog();
    sc.grid = TimeGrid{0.0, 600.0, 289};
    sc.seed = 99;
    return sc;
}

fs::path write_scenario(const fs::path& dir, const Scenario& sc) {
    const fs::path p = dir / "scenario_in.json";
    write_text_file(p.string(), sc.to_json());
    return p;
}

#ifdef TIDECAL_CLI_PATH
int run_cli(const fs::path& project, const std::string& args) {
    const std::string cmd = std::string(TIDECAL_CLI_PATH) + " --project " + project.string() + " " +
                            args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}
#endif

}  // namespace

TEST_CASE("stage ordering is enforced") {
    const fs::path dir = fresh_dir("stages");
    CHECK_THROWS_AS(Workbench{dir}, stage_error);  // no manifest at all

    Workbench wb = Workbench::init(dir, write_scenario(dir, small_scenario()));
    CHECK_THROWS_AS(wb.evaluate(), stage_error);       // needs design + observations
    CHECK_THROWS_AS(wb.fit_models(), stage_error);     // needs error table
    CHECK_THROWS_AS(wb.check_optimum(), stage_error);  // needs calibration
    wb.design();
    CHECK_THROWS_AS(wb.evaluate(), stage_error);  // still no observations
    wb.synth_obs();
    wb.evaluate();
    CHECK_THROWS_AS(wb.validate_models(), stage_error);  // models not fit yet
}

TEST_CASE("full pipeline artifacts, persistence and integrity") {
    const fs::path dir = fresh_dir("full");
    Workbench wb = Workbench::init(dir, write_scenario(dir, small_scenario()));
    wb.synth_obs();
    wb.design(40);
    wb.evaluate();
    wb.fit_models();

    // save/load round trip: bit-identical predictions at random points
    const auto models = wb.load_models();
    const ErrorTable table = wb.load_error_table();
    std::vector<KrigingModel> refit;
    {
        KrigingConfig cfg;
        cfg.seed = derive_seed(wb.manifest().master_seed(), "kriging");
        refit = fit_all(table, cfg);
    }
    REQUIRE(models.size() == refit.size());
    Rng r(3);
    const Bounds& b = models[0].bounds();
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> x(static_cast<std::size_t>(b.dim()));
        for (int j = 0; j < b.dim(); ++j)
            x[static_cast<std::size_t>(j)] = r.uniform(b.lower[static_cast<std::size_t>(j)],
                                                       b.upper[static_cast<std::size_t>(j)]);
        for (std::size_t m = 0; m < models.size(); ++m) {
            CHECK(models[m].predict_mean(x) == refit[m].predict_mean(x));
            CHECK(models[m].predict(x).variance == refit[m].predict(x).variance);
        }
    }

    // truncating a model file breaks the checksum gate
    const fs::path mpath = dir / "models/station_3.json";
    const std::string original = read_text_file(mpath.string());
    write_text_file(mpath.string(), original.substr(0, original.size() / 2));
    CHECK_THROWS_WITH_AS(wb.load_models(), doctest::Contains("integrity"), compute_error);
    write_text_file(mpath.string(), original);
    CHECK(wb.load_models().size() == models.size());

    // a missing file is a stage problem
    fs::remove(mpath);
    CHECK_THROWS_AS(wb.load_models(), stage_error);
}

TEST_CASE("validation, sobol, diagnostics and calibration artifacts appear in the report") {
    const fs::path dir = fresh_dir("report");
    Workbench wb = Workbench::init(dir, write_scenario(dir, small_scenario()));
    wb.synth_obs();
    wb.design(40);
    wb.evaluate();
    wb.fit_models();
    const ValidationReport rep = wb.validate_models(8);
    CHECK(rep.n_test == 8);

    const std::string partial = wb.report();
    CHECK(partial.find("\"validation\"") != std::string::npos);
    CHECK(partial.find("\"calibration\"") == std::string::npos);

    wb.run_stats();
    wb.run_pca();
    wb.run_sobol(256);
    CalibrateOptions copts;
    copts.goal = "mean";
    copts.algo = "grad";
    copts.grad_starts = 3;
    wb.calibrate(copts);
    wb.check_optimum(1.0);  // loose gate; this test only exercises plumbing

    const std::string full = wb.report();
    for (const char* block : {"\"validation\"", "\"quantiles\"", "\"pca_explained\"", "\"sobol\"",
                              "\"calibration\"", "\"check_optimum\""})
        CHECK(full.find(block) != std::string::npos);

    // regeneration is byte-identical
    CHECK(wb.report() == full);
}

TEST_CASE("pipeline reruns are byte-identical for any worker count") {
    const Scenario sc = small_scenario();
    std::vector<std::string> sums;
    for (int workers : {1, 2, 4}) {
        const fs::path dir = fresh_dir("det" + std::to_string(workers));
        Workbench wb = Workbench::init(dir, write_scenario(dir, sc));
        wb.synth_obs();
        wb.design(30);
        wb.evaluate(workers);
        wb.fit_models(KernelFamily::matern52, TrendBasis::constant, workers);
        wb.run_sobol(256, false, workers);
        std::string combined;
        for (const char* f : {"observations.csv", "design.csv", "error_table.csv", "sobol.csv",
                              "models/station_4.json"})
            combined += file_checksum((dir / f).string());
        sums.push_back(combined);
    }
    CHECK(sums[0] == sums[1]);
    CHECK(sums[0] == sums[2]);
}

TEST_CASE("surrogate objectives behave at and around training points") {
    const fs::path dir = fresh_dir("obj");
    Workbench wb = Workbench::init(dir, write_scenario(dir, small_scenario()));
    wb.synth_obs();
    wb.design(40);
    wb.evaluate();
    wb.fit_models();
    const auto models = wb.load_models();
    const ErrorTable table = wb.load_error_table();

    const ObjectiveFn mean_f = build_objective(ObjectiveSpec{GoalKind::mean_rmse, -1}, models);
    const ObjectiveFn max_f = build_objective(ObjectiveSpec{GoalKind::max_rmse, -1}, models);
    const ObjectiveFn std_f = build_objective(ObjectiveSpec{GoalKind::std_rmse, -1}, models);

    // interpolation: the mean objective reproduces training-row means
    for (int i = 0; i < table.design.n; i += 7) {
        const auto resp = table.row_responses(i);
        const double truth = aggregate(resp, Aggregate::mean);
        CHECK(mean_f(table.design.row(i)) == doctest::Approx(truth).epsilon(1e-5));
    }
    // order property everywhere
    Rng r(8);
    const Bounds& b = models[0].bounds();
    for (int rep = 0; rep < 40; ++rep) {
        std::vector<double> x(static_cast<std::size_t>(b.dim()));
        for (int j = 0; j < b.dim(); ++j)
            x[static_cast<std::size_t>(j)] = r.uniform(b.lower[static_cast<std::size_t>(j)],
                                                       b.upper[static_cast<std::size_t>(j)]);
        CHECK(max_f(x) >= mean_f(x) - 1e-12);
        CHECK(std_f(x) >= 0.0);
    }

    // station mismatch
    CHECK_THROWS_AS(build_objective(ObjectiveSpec{GoalKind::station_rmse, 42}, models),
                    config_error);

    // identical per-station models make the spread objective vanish
    std::vector<KrigingModel> clones;
    for (int k = 0; k < 3; ++k) clones.push_back(models[0]);
    const ObjectiveFn zero_std = build_objective(ObjectiveSpec{GoalKind::std_rmse, -1}, clones);
    CHECK(zero_std(b.center()) <= 1e-12);
}

TEST_CASE("forward-backed objectives match direct metric evaluation") {
    const Scenario sc = small_scenario();
    const ForwardEvaluator fwd(sc);
    const auto obs = synthesize_observations(sc.true_params, sc.boundary, sc.stations, sc.grid,
                                             sc.c_damp, sc.noise_sigma, 31);
    const ObjectiveFn f = build_objective(ObjectiveSpec{GoalKind::station_rmse, 4}, fwd, obs);
    const ObjectiveFn fb = build_objective(ObjectiveSpec{GoalKind::abs_bias, 4}, fwd, obs);
    const ObjectiveFn fn = build_objective(ObjectiveSpec{GoalKind::neg_nash, 4}, fwd, obs);
    const auto x = sc.bounds.center();
    const auto sims = fwd.run(ParameterVector::from_array(x));
    CHECK(f(x) == rmse(sims[3], obs[3]));
    CHECK(fb(x) == std::abs(bias(sims[3], obs[3])));
    CHECK(fn(x) == 1.0 - nash(sims[3], obs[3]));

    // polish objective is the squared station error for station goals
    const ObjectiveFn fp = build_polish_objective(ObjectiveSpec{GoalKind::station_rmse, 4}, fwd, obs);
    CHECK(fp(x) == doctest::Approx(f(x) * f(x)).epsilon(1e-12));
}

#ifdef TIDECAL_CLI_PATH

TEST_CASE("cli exit codes") {
    const fs::path dir = fresh_dir("cli");
    // stage error before init
    CHECK(run_cli(dir, "design") == 3);
    // usage errors
    CHECK(run_cli(dir, "no-such-command") == 1);
    CHECK(run_cli(dir, "init") == 0);
    CHECK(run_cli(dir, "synth-obs") == 0);
    CHECK(run_cli(dir, "design --n 0") == 1);
    CHECK(run_cli(dir, "design --n 30") == 0);
    CHECK(run_cli(dir, "fit") == 3);  // error table not built yet
    CHECK(run_cli(dir, "evaluate") == 0);
    CHECK(run_cli(dir, "fit") == 0);
    CHECK(run_cli(dir, "validate") == 0);
    CHECK(run_cli(dir, "report") == 0);
    // integrity violation: stale artifact after editing
    {
        std::ofstream f(dir / "design.csv", std::ios::app);
        f << "\n";
    }
    CHECK(run_cli(dir, "evaluate") == 2);
}

#endif
