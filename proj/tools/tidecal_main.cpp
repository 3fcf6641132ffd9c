// tidecal: surrogate-based calibration workbench for the synthetic estuary model.
//
// Exit codes: 0 success, 1 usage error, 2 computation error, 3 manifest/stage error.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>

#include "tidecal/workbench.hpp"

using namespace tidecal;

namespace {

std::string default_project_dir() {
    if (const char* env = std::getenv("TIDECAL_PROJECT")) return env;
    return ".";
}

struct GlobalOpts {
    std::string project = default_project_dir();
    std::optional<std::uint64_t> seed;
};

Workbench open(const GlobalOpts& g) {
    Workbench wb{std::filesystem::path(g.project)};
    if (g.seed) {
        wb.manifest().set_master_seed(*g.seed);
        wb.manifest().save();
    }
    return wb;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tidecal: metamodel-based calibration of a synthetic tidal estuary model"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--project", g.project, "project directory (env TIDECAL_PROJECT, default .)");
    std::uint64_t seed_value = 0;
    CLI::Option* seed_opt =
        app.add_option("--seed", seed_value, "override the manifest master seed");

    std::string scenario_path;
    auto* cmd_init = app.add_subcommand("init", "create a project (default: built-in scenario)");
    cmd_init->add_option("--scenario", scenario_path, "scenario json file");

    auto* cmd_obs = app.add_subcommand("synth-obs", "synthesize observations from the true parameters");

    int design_n = 0;
    auto* cmd_design = app.add_subcommand("design", "draw the Latin Hypercube design");
    cmd_design->add_option("--n", design_n, "design size (default 10 x dimension)");

    int workers = 0;
    auto* cmd_eval = app.add_subcommand("evaluate", "run the forward model over the design");
    cmd_eval->add_option("--workers", workers, "worker threads (default: all)");

    std::string kernel = "matern52", basis = "constant";
    auto* cmd_fit = app.add_subcommand("fit", "fit per-station Kriging surrogates");
    cmd_fit->add_option("--kernel", kernel, "matern52 | squared_exponential");
    cmd_fit->add_option("--basis", basis, "constant | linear");
    cmd_fit->add_option("--workers", workers, "worker threads");

    int n_test = 10;
    auto* cmd_val = app.add_subcommand("validate", "hold-out validation of the surrogates");
    cmd_val->add_option("--n-test", n_test, "held-out test points");

    int n_mc = 1 << 13;
    bool second_order = false;
    auto* cmd_sobol = app.add_subcommand("sobol", "Sobol sensitivity of the mean-RMSE surrogate");
    cmd_sobol->add_option("--n-mc", n_mc, "Monte Carlo block size (>= 128)");
    cmd_sobol->add_flag("--second-order", second_order, "also estimate pairwise indices");
    cmd_sobol->add_option("--workers", workers, "worker threads");

    auto* cmd_pca = app.add_subcommand("pca", "PCA of the error table (circle + explained ratios)");
    auto* cmd_stats = app.add_subcommand("stats", "per-station quantile summaries");

    CalibrateOptions copts;
    auto* cmd_cal = app.add_subcommand("calibrate", "minimize a goal on the surrogate");
    cmd_cal->add_option("--goal", copts.goal, "mean | station:<id> | std | max");
    cmd_cal->add_option("--algo", copts.algo, "pso | grad | both");
    cmd_cal->add_flag("--polish", copts.polish, "refine the optimum on the forward model");
    cmd_cal->add_option("--workers", copts.workers, "worker threads");

    std::string objectives;
    ParetoOptions popts;
    auto* cmd_pareto = app.add_subcommand("pareto", "NSGA-II front for 2-3 goals");
    cmd_pareto->add_option("--objectives", objectives,
                           "comma list, e.g. station:4,station:3 or station:6,bias:6,nash:6")
        ->required();
    cmd_pareto->add_option("--pop", popts.nsga2.pop, "population size (even, >= 8)");
    cmd_pareto->add_option("--gens", popts.nsga2.gens, "generations");
    cmd_pareto->add_option("--workers", popts.workers, "worker threads");

    double tol = 0.01;
    auto* cmd_check = app.add_subcommand("check-optimum", "surrogate-vs-forward gap at the optimum");
    cmd_check->add_option("--tol", tol, "relative-gap tolerance");

    auto* cmd_report = app.add_subcommand("report", "aggregate results into report.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (cmd_init->parsed()) {
            Workbench::init(g.project, scenario_path, g.seed);
            std::printf("initialized project in %s\n", g.project.c_str());
        } else if (cmd_obs->parsed()) {
            open(g).synth_obs();
            std::printf("observations written\n");
        } else if (cmd_design->parsed()) {
            if (design_n < 0) throw config_error("design: --n must be positive");
            open(g).design(design_n);
            std::printf("design written\n");
        } else if (cmd_eval->parsed()) {
            open(g).evaluate(workers);
            std::printf("error table written\n");
        } else if (cmd_fit->parsed()) {
            open(g).fit_models(kernel_from_string(kernel), trend_from_string(basis), workers);
            std::printf("models written\n");
        } else if (cmd_val->parsed()) {
            const ValidationReport rep = open(g).validate_models(n_test);
            std::printf("mean surrogate: mse=%.6g r2=%.6g (n_test=%d)\n", rep.mse, rep.r2, rep.n_test);
        } else if (cmd_sobol->parsed()) {
            const SobolResult res = open(g).run_sobol(n_mc, second_order, workers);
            for (int i = 0; i < kNumParams; ++i)
                std::printf("%-6s S1=%+.4f ST=%+.4f\n",
                            ParameterVector::names()[static_cast<std::size_t>(i)].c_str(),
                            res.first[static_cast<std::size_t>(i)],
                            res.total[static_cast<std::size_t>(i)]);
        } else if (cmd_pca->parsed()) {
            open(g).run_pca();
            std::printf("pca exports written\n");
        } else if (cmd_stats->parsed()) {
            open(g).run_stats();
            std::printf("quantile summary written\n");
        } else if (cmd_cal->parsed()) {
            const OptimRun run = open(g).calibrate(copts);
            std::printf("calibrated %s: f=%.6g after %lld evaluations\n", copts.goal.c_str(),
                        run.best_f, run.evals);
        } else if (cmd_pareto->parsed()) {
            std::string item;
            std::istringstream in(objectives);
            while (std::getline(in, item, ','))
                if (!item.empty()) popts.objectives.push_back(item);
            const ParetoFront front = open(g).pareto(popts);
            std::printf("front with %zu nondominated points written\n", front.points.size());
        } else if (cmd_check->parsed()) {
            const OptimumCheck c = open(g).check_optimum(tol);
            std::printf("f_hat=%.6g f_true=%.6g rel_gap=%.4f%% -> %s\n", c.f_hat, c.f_true,
                        100.0 * c.rel_gap, c.ok ? "ok" : "FAIL");
            if (!c.ok) return 2;
        } else if (cmd_report->parsed()) {
            std::fputs(open(g).report().c_str(), stdout);
        }
    } catch (const stage_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
