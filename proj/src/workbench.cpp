#include "tidecal/workbench.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "tidecal/csv.hpp"
#include "tidecal/metrics.hpp"
#include "tidecal/rng.hpp"

namespace tidecal {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------- manifest ----------

namespace {
const char* kManifestName = "manifest.json";
}

ProjectManifest ProjectManifest::create(const fs::path& dir, std::uint64_t master_seed) {
    fs::create_directories(dir);
    ProjectManifest m;
    m.dir_ = dir;
    m.master_seed_ = master_seed;
    m.save();
    return m;
}

bool ProjectManifest::exists(const fs::path& dir) { return fs::exists(dir / kManifestName); }

ProjectManifest ProjectManifest::load(const fs::path& dir) {
    if (!exists(dir))
        throw stage_error("no project manifest in '" + dir.string() + "' (run init first)");
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file((dir / kManifestName).string()));
    } catch (const std::exception& e) {
        throw stage_error(std::string("manifest unreadable: ") + e.what());
    }
    ProjectManifest m;
    m.dir_ = dir;
    try {
        m.master_seed_ = j.at("master_seed").get<std::uint64_t>();
        for (const auto& [name, entry] : j.at("files").items())
            m.files_.emplace_back(name, std::make_pair(entry.at("path").get<std::string>(),
                                                        entry.at("checksum").get<std::string>()));
    } catch (const ordered_json::exception& e) {
        throw stage_error(std::string("manifest malformed: ") + e.what());
    }
    return m;
}

void ProjectManifest::save() const {
    ordered_json j;
    j["format"] = "tidecal-manifest/1";
    j["master_seed"] = master_seed_;
    ordered_json files = ordered_json::object();
    for (const auto& [name, pc] : files_)
        files[name] = {{"path", pc.first}, {"checksum", pc.second}};
    j["files"] = files;
    write_text_file((dir_ / kManifestName).string(), j.dump(2) + "\n");
}

void ProjectManifest::register_file(const std::string& name, const std::string& relpath) {
    const std::string sum = file_checksum((dir_ / relpath).string());
    for (auto& [n, pc] : files_)
        if (n == name) {
            pc = {relpath, sum};
            save();
            return;
        }
    files_.emplace_back(name, std::make_pair(relpath, sum));
    save();
}

bool ProjectManifest::has_file(const std::string& name) const {
    for (const auto& [n, pc] : files_)
        if (n == name) return true;
    return false;
}

fs::path ProjectManifest::verified_path(const std::string& name) const {
    for (const auto& [n, pc] : files_) {
        if (n != name) continue;
        const fs::path p = dir_ / pc.first;
        if (!fs::exists(p))
            throw stage_error("manifest references absent file '" + pc.first + "'");
        const std::string sum = file_checksum(p.string());
        if (sum != pc.second)
            throw compute_error("integrity: checksum mismatch for '" + pc.first + "' (stale or edited)");
        return p;
    }
    throw stage_error("artifact '" + name + "' has not been produced yet");
}

fs::path ProjectManifest::require(const std::string& name, const std::string& needed_for) const {
    if (!has_file(name))
        throw stage_error("stage '" + needed_for + "' requires '" + name + "' first");
    return verified_path(name);
}

std::vector<std::string> ProjectManifest::file_names() const {
    std::vector<std::string> v;
    for (const auto& [n, pc] : files_) v.push_back(n);
    return v;
}

std::string ProjectManifest::relpath(const std::string& name) const {
    for (const auto& [n, pc] : files_)
        if (n == name) return pc.first;
    throw stage_error("artifact '" + name + "' not registered");
}

// ---------- workbench ----------

Workbench::Workbench(const fs::path& dir) : manifest_(ProjectManifest::load(dir)) {}

Workbench Workbench::init(const fs::path& dir, const fs::path& scenario_path,
                          std::optional<std::uint64_t> seed_override) {
    Scenario sc = scenario_path.empty()
                      ? Scenario::gironde_analog()
                      : Scenario::from_json(read_text_file(scenario_path.string()));
    if (seed_override) sc.seed = *seed_override;
    fs::create_directories(dir);
    write_text_file((dir / "scenario.json").string(), sc.to_json());
    ProjectManifest m = ProjectManifest::create(dir, sc.seed);
    m.register_file("scenario", "scenario.json");
    return Workbench(dir);
}

std::uint64_t Workbench::stage_seed(const std::string& stage) const {
    return derive_seed(manifest_.master_seed(), stage);
}

Scenario Workbench::load_scenario() const {
    const fs::path p = manifest_.require("scenario", "any");
    return Scenario::from_json(read_text_file(p.string()));
}

std::vector<TimeSeries> Workbench::load_observations() const {
    const fs::path p = manifest_.require("observations", "load");
    return series_from_csv(read_text_file(p.string()));
}

DesignMatrix Workbench::load_design() const {
    const Scenario sc = load_scenario();
    const fs::path p = manifest_.require("design", "load");
    return design_from_csv(read_text_file(p.string()), sc.bounds);
}

ErrorTable Workbench::load_error_table() const {
    const Scenario sc = load_scenario();
    const fs::path p = manifest_.require("error_table", "load");
    return error_table_from_csv(read_text_file(p.string()), sc.bounds);
}

void Workbench::synth_obs() {
    const Scenario sc = load_scenario();
    const auto obs = synthesize_observations(sc.true_params, sc.boundary, sc.stations, sc.grid,
                                             sc.c_damp, sc.noise_sigma, stage_seed("observations"));
    write_text_file((manifest_.dir() / "observations.csv").string(), series_to_csv(obs, sc.stations));
    manifest_.register_file("observations", "observations.csv");
}

void Workbench::design(int n) {
    const Scenario sc = load_scenario();
    const int count = n == 0 ? default_design_size(sc.bounds.dim()) : n;
    const DesignMatrix dm = lhs_sample(count, sc.bounds, stage_seed("design"));
    write_text_file((manifest_.dir() / "design.csv").string(), design_to_csv(dm));
    manifest_.register_file("design", "design.csv");
}

void Workbench::evaluate(int workers) {
    const Scenario sc = load_scenario();
    manifest_.require("design", "evaluate");
    manifest_.require("observations", "evaluate");
    const DesignMatrix dm = load_design();
    const auto obs = load_observations();
    const ForwardEvaluator fwd(sc);
    const ErrorTable table = evaluate_design(dm, fwd, obs, ResponseMetric::rmse, workers);
    write_text_file((manifest_.dir() / "error_table.csv").string(), error_table_to_csv(table));
    manifest_.register_file("error_table", "error_table.csv");
}

void Workbench::save_models(const std::vector<KrigingModel>& models, KernelFamily kernel,
                            TrendBasis basis) {
    fs::create_directories(manifest_.dir() / "models");
    ordered_json mm;
    mm["format"] = "tidecal-models/1";
    mm["kernel"] = to_string(kernel);
    mm["basis"] = to_string(basis);
    mm["seed"] = stage_seed("kriging");
    mm["bounds"] = {{"lower", models[0].bounds().lower}, {"upper", models[0].bounds().upper}};
    ordered_json entries = ordered_json::array();
    for (const auto& m : models) {
        const std::string rel = "models/station_" + std::to_string(m.station_id()) + ".json";
        write_text_file((manifest_.dir() / rel).string(), m.to_json());
        manifest_.register_file("model_station_" + std::to_string(m.station_id()), rel);
        entries.push_back({{"station_id", m.station_id()}, {"path", rel}});
    }
    mm["models"] = entries;
    write_text_file((manifest_.dir() / "models/models_manifest.json").string(), mm.dump(2) + "\n");
    manifest_.register_file("models_manifest", "models/models_manifest.json");
}

void Workbench::fit_models(KernelFamily kernel, TrendBasis basis, int workers) {
    manifest_.require("error_table", "fit");
    const ErrorTable table = load_error_table();
    KrigingConfig cfg;
    cfg.kernel = kernel;
    cfg.basis = basis;
    cfg.seed = stage_seed("kriging");
    const auto models = fit_all(table, cfg, workers);
    save_models(models, kernel, basis);
}

std::vector<KrigingModel> Workbench::load_models() const {
    const fs::path mm = manifest_.require("models_manifest", "load models");
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(mm.string()));
    } catch (const std::exception& e) {
        throw compute_error(std::string("integrity: models manifest unreadable: ") + e.what());
    }
    std::vector<KrigingModel> models;
    for (const auto& entry : j.at("models")) {
        const int id = entry.at("station_id").get<int>();
        const fs::path p = manifest_.verified_path("model_station_" + std::to_string(id));
        models.push_back(KrigingModel::from_json(read_text_file(p.string())));
    }
    if (models.empty()) throw stage_error("models manifest lists no stations");
    return models;
}

ValidationReport Workbench::validate_models(int n_test) {
    if (n_test < 1) throw config_error("validate: n_test must be >= 1");
    const Scenario sc = load_scenario();
    const auto models = load_models();
    const auto obs = load_observations();
    const ForwardEvaluator fwd(sc);
    // held-out points from an independently seeded LHS
    const DesignMatrix test = lhs_sample(n_test, sc.bounds, stage_seed("test-design"));
    const ErrorTable test_table = evaluate_design(test, fwd, obs);

    CsvTable out;
    out.header = {"station", "mse", "r2", "n_test"};
    for (std::size_t s = 0; s < models.size(); ++s) {
        const ValidationReport rep = validate(models[s], test_table, static_cast<int>(s));
        out.rows.push_back({static_cast<double>(models[s].station_id()), rep.mse, rep.r2,
                            static_cast<double>(rep.n_test)});
    }
    const ValidationReport mean_rep = validate_mean(models, test_table);
    out.rows.push_back({0.0, mean_rep.mse, mean_rep.r2, static_cast<double>(mean_rep.n_test)});
    write_text_file((manifest_.dir() / "validation.csv").string(), csv_to_string(out));
    manifest_.register_file("validation", "validation.csv");
    return mean_rep;
}

SobolResult Workbench::run_sobol(int n_mc, bool second_order, int workers) {
    const auto models = load_models();
    const Scenario sc = load_scenario();
    const ObjectiveFn f = build_objective(ObjectiveSpec{GoalKind::mean_rmse, -1}, models);
    SobolConfig cfg;
    cfg.n_mc = n_mc;
    cfg.seed = stage_seed("sobol");
    cfg.second_order = second_order;
    cfg.workers = workers;
    const SobolResult res = sobol_indices(f, sc.bounds, cfg);

    std::string text;
    text += "# n_mc=" + std::to_string(res.n_mc) + "\n";
    text += "# seed=" + std::to_string(res.seed) + "\n";
    text += "# estimator=" + res.estimator + "\n";
    text += "parameter,S_first,S_total\n";
    const auto& names = ParameterVector::names();
    for (int i = 0; i < kNumParams; ++i)
        text += names[static_cast<std::size_t>(i)] + "," +
                format_double(res.first[static_cast<std::size_t>(i)]) + "," +
                format_double(res.total[static_cast<std::size_t>(i)]) + "\n";
    if (res.second) {
        text += "parameter_i,parameter_j,S_second\n";
        for (int i = 0; i < kNumParams; ++i)
            for (int j = i + 1; j < kNumParams; ++j)
                text += names[static_cast<std::size_t>(i)] + "," + names[static_cast<std::size_t>(j)] +
                        "," + format_double(res.second_at(i, j, kNumParams)) + "\n";
    }
    write_text_file((manifest_.dir() / "sobol.csv").string(), text);
    manifest_.register_file("sobol", "sobol.csv");
    return res;
}

void Workbench::run_pca() {
    const ErrorTable table = load_error_table();
    const PCAResult res = pca(table);

    CsvTable expl;
    expl.header = {"dimension", "explained_ratio"};
    for (std::size_t i = 0; i < res.explained_ratio.size(); ++i)
        expl.rows.push_back({static_cast<double>(i + 1), res.explained_ratio[i]});
    write_text_file((manifest_.dir() / "pca_explained.csv").string(), csv_to_string(expl));
    manifest_.register_file("pca_explained", "pca_explained.csv");

    CsvTable circle;
    circle.header = {"station", "dim1", "dim2"};
    for (std::size_t s = 0; s < res.correlations.size(); ++s)
        circle.rows.push_back({static_cast<double>(table.station_ids[s]), res.correlations[s][0],
                               res.correlations[s][1]});
    write_text_file((manifest_.dir() / "pca_circle.csv").string(), csv_to_string(circle));
    manifest_.register_file("pca_circle", "pca_circle.csv");

    write_text_file((manifest_.dir() / "scatter.csv").string(), scatter_long_csv(table));
    manifest_.register_file("scatter", "scatter.csv");
}

void Workbench::run_stats() {
    const ErrorTable table = load_error_table();
    const auto sums = summary_stats(table);
    CsvTable out;
    out.header = {"station", "min", "q25", "median", "q75", "max", "mean"};
    for (const auto& s : sums)
        out.rows.push_back({static_cast<double>(s.station_id), s.min, s.q25, s.median, s.q75, s.max,
                            s.mean});
    write_text_file((manifest_.dir() / "stats.csv").string(), csv_to_string(out));
    manifest_.register_file("stats", "stats.csv");
}

namespace {
std::string history_csv(const OptimRun& run) {
    CsvTable t;
    t.header = {"iter", "best_f"};
    for (std::size_t i = 0; i < run.history.size(); ++i)
        t.rows.push_back({static_cast<double>(i + 1), run.history[i]});
    return csv_to_string(t);
}

ordered_json run_to_json(const OptimRun& run) {
    return ordered_json{{"best_f", run.best_f},
                        {"best_x", run.best_x},
                        {"evals", run.evals},
                        {"seed", run.seed}};
}
}  // namespace

OptimRun Workbench::calibrate(const CalibrateOptions& opts) {
    const Scenario sc = load_scenario();
    const auto models = load_models();
    const ObjectiveSpec spec = ObjectiveSpec::parse(opts.goal);
    if (spec.kind == GoalKind::abs_bias || spec.kind == GoalKind::neg_nash)
        throw config_error("calibrate: goal '" + opts.goal + "' is for pareto objectives");
    const ObjectiveFn f = build_objective(spec, models);

    if (opts.algo != "pso" && opts.algo != "grad" && opts.algo != "both")
        throw config_error("calibrate: algo must be pso, grad or both");

    ordered_json j;
    j["goal"] = spec.label();
    j["algo"] = opts.algo;

    std::optional<OptimRun> pso_run, grad_run;
    if (opts.algo == "pso" || opts.algo == "both") {
        PsoConfig pc = opts.pso;
        pc.seed = stage_seed("calibrate-pso");
        pc.workers = opts.workers;
        pso_run = pso_minimize(f, sc.bounds, pc);
        write_text_file((manifest_.dir() / "calib_history_pso.csv").string(), history_csv(*pso_run));
        manifest_.register_file("calib_history_pso", "calib_history_pso.csv");
        j["pso"] = run_to_json(*pso_run);
    }
    if (opts.algo == "grad" || opts.algo == "both") {
        grad_run = multistart_gradient_minimize(f, sc.bounds, opts.grad_starts,
                                                stage_seed("calibrate-grad"));
        write_text_file((manifest_.dir() / "calib_history_grad.csv").string(), history_csv(*grad_run));
        manifest_.register_file("calib_history_grad", "calib_history_grad.csv");
        j["grad"] = run_to_json(*grad_run);
    }

    OptimRun best;
    std::string best_algo;
    if (pso_run && (!grad_run || pso_run->best_f <= grad_run->best_f)) {
        best = *pso_run;
        best_algo = "pso";
    } else {
        best = *grad_run;
        best_algo = "grad";
    }
    j["best"] = {{"algo", best_algo}, {"x", best.best_x}, {"f_hat", best.best_f}};

    if (opts.polish) {
        const auto obs = load_observations();
        const ForwardEvaluator fwd(sc);
        const ObjectiveFn smooth = build_polish_objective(spec, fwd, obs);
        GradConfig gc;
        gc.max_iters = 400;
        gc.gtol = 1e-12;
        const OptimRun refined = gradient_minimize(smooth, sc.bounds, best.best_x, gc);
        const ObjectiveFn goal_true = build_objective(spec, fwd, obs);
        const double f_true = goal_true(refined.best_x);
        j["polish"] = {{"x", refined.best_x}, {"f_true", f_true}, {"evals", refined.evals}};
        best.best_x = refined.best_x;
        best.best_f = f(refined.best_x);
    }

    write_text_file((manifest_.dir() / "calibration.json").string(), j.dump(2) + "\n");
    manifest_.register_file("calibration", "calibration.json");
    return best;
}

std::vector<KrigingModel> Workbench::metric_models(ResponseMetric metric, int workers) {
    const Scenario sc = load_scenario();
    const DesignMatrix dm = load_design();
    const auto obs = load_observations();
    const ForwardEvaluator fwd(sc);
    const ErrorTable table = evaluate_design(dm, fwd, obs, metric, workers);
    KrigingConfig cfg;
    cfg.seed = stage_seed("kriging-" + to_string(metric));
    return fit_all(table, cfg, workers);
}

ParetoFront Workbench::pareto(const ParetoOptions& opts) {
    if (opts.objectives.size() < 2 || opts.objectives.size() > 3)
        throw config_error("pareto: need 2 or 3 objectives");
    const Scenario sc = load_scenario();
    const auto rmse_models = load_models();

    // surrogates for bias / nash objectives are fit on demand
    std::optional<std::vector<KrigingModel>> bias_models, nash_models;
    std::vector<ObjectiveFn> fns;
    std::vector<std::string> labels;
    for (const auto& text : opts.objectives) {
        const ObjectiveSpec spec = ObjectiveSpec::parse(text);
        labels.push_back(spec.label());
        if (spec.kind == GoalKind::abs_bias) {
            if (!bias_models) bias_models = metric_models(ResponseMetric::abs_bias, opts.workers);
            fns.push_back(build_objective(spec, *bias_models));
        } else if (spec.kind == GoalKind::neg_nash) {
            if (!nash_models) nash_models = metric_models(ResponseMetric::neg_nash, opts.workers);
            fns.push_back(build_objective(spec, *nash_models));
        } else {
            fns.push_back(build_objective(spec, rmse_models));
        }
    }

    Nsga2Config cfg = opts.nsga2;
    cfg.seed = stage_seed("pareto-" + opts.objectives[0] + "-" + opts.objectives[1] +
                          (opts.objectives.size() > 2 ? "-" + opts.objectives[2] : ""));
    cfg.workers = opts.workers;
    const ParetoFront front = nsga2(fns, sc.bounds, cfg, labels);

    CsvTable out;
    for (std::size_t k = 0; k < labels.size(); ++k) out.header.push_back("f" + std::to_string(k + 1));
    for (const auto& n : ParameterVector::names()) out.header.push_back(n);
    for (const auto& pt : front.points) {
        std::vector<double> row = pt.f;
        row.insert(row.end(), pt.x.begin(), pt.x.end());
        out.rows.push_back(std::move(row));
    }
    std::string slug = "pareto";
    for (auto l : labels) {
        std::replace(l.begin(), l.end(), ':', '-');
        slug += "_" + l;
    }
    write_text_file((manifest_.dir() / (slug + ".csv")).string(), csv_to_string(out));
    manifest_.register_file(slug, slug + ".csv");
    return front;
}

OptimumCheck Workbench::check_optimum(double tol) {
    const fs::path cp = manifest_.require("calibration", "check-optimum");
    ordered_json cj;
    try {
        cj = ordered_json::parse(read_text_file(cp.string()));
    } catch (const std::exception& e) {
        throw compute_error(std::string("integrity: calibration unreadable: ") + e.what());
    }
    const ObjectiveSpec spec = ObjectiveSpec::parse(cj.at("goal").get<std::string>());
    const std::vector<double> x = cj.contains("polish")
                                      ? cj.at("polish").at("x").get<std::vector<double>>()
                                      : cj.at("best").at("x").get<std::vector<double>>();

    const Scenario sc = load_scenario();
    const auto models = load_models();
    const auto obs = load_observations();
    const ForwardEvaluator fwd(sc);
    const OptimumCheck check = validate_optimum(x, build_objective(spec, models),
                                                build_objective(spec, fwd, obs), tol);
    ordered_json j;
    j["goal"] = spec.label();
    j["x"] = x;
    j["f_hat"] = check.f_hat;
    j["f_true"] = check.f_true;
    j["rel_gap"] = check.rel_gap;
    j["tolerance"] = tol;
    j["ok"] = check.ok;
    write_text_file((manifest_.dir() / "check_optimum.json").string(), j.dump(2) + "\n");
    manifest_.register_file("check_optimum", "check_optimum.json");
    return check;
}

std::string Workbench::report() {
    ordered_json j;
    j["format"] = "tidecal-report/1";
    j["master_seed"] = manifest_.master_seed();

    bool any = false;
    if (manifest_.has_file("scenario")) {
        const Scenario sc = load_scenario();
        j["scenario"] = {{"stations", sc.n_stations()},
                         {"grid_n", sc.grid.n},
                         {"noise_sigma", sc.noise_sigma},
                         {"c_damp", sc.c_damp}};
        any = true;
    }
    auto attach_csv = [&](const std::string& name, const char* block) {
        if (!manifest_.has_file(name)) return;
        const CsvTable t = [&] {
            // sobol.csv carries comment lines; strip them for the report
            std::string raw = read_text_file(manifest_.verified_path(name).string());
            std::string body;
            std::istringstream in(raw);
            std::string line;
            while (std::getline(in, line))
                if (line.empty() || line[0] != '#') body += line + "\n";
            return csv_from_string(body);
        }();
        ordered_json rows = ordered_json::array();
        for (const auto& r : t.rows) {
            ordered_json row = ordered_json::object();
            for (std::size_t c = 0; c < t.header.size() && c < r.size(); ++c) row[t.header[c]] = r[c];
            rows.push_back(row);
        }
        j[block] = rows;
        any = true;
    };
    attach_csv("validation", "validation");
    attach_csv("stats", "quantiles");
    attach_csv("pca_explained", "pca_explained");
    attach_csv("pca_circle", "pca_circle");

    if (manifest_.has_file("sobol")) {
        // the simple table part only (first-order/total)
        std::string raw = read_text_file(manifest_.verified_path("sobol").string());
        std::istringstream in(raw);
        std::string line;
        ordered_json rows = ordered_json::array();
        bool in_main = false;
        while (std::getline(in, line)) {
            if (line.rfind("parameter,S_first", 0) == 0) {
                in_main = true;
                continue;
            }
            if (line.rfind("parameter_i", 0) == 0) break;
            if (!in_main || line.empty() || line[0] == '#') continue;
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            rows.push_back({{"parameter", line.substr(0, c1)},
                            {"S_first", std::stod(line.substr(c1 + 1, c2 - c1 - 1))},
                            {"S_total", std::stod(line.substr(c2 + 1))}});
        }
        j["sobol"] = rows;
        any = true;
    }
    if (manifest_.has_file("calibration")) {
        j["calibration"] = ordered_json::parse(read_text_file(manifest_.verified_path("calibration").string()));
        any = true;
    }
    if (manifest_.has_file("check_optimum")) {
        j["check_optimum"] =
            ordered_json::parse(read_text_file(manifest_.verified_path("check_optimum").string()));
        any = true;
    }
    ordered_json fronts = ordered_json::array();
    for (const auto& name : manifest_.file_names())
        if (name.rfind("pareto", 0) == 0) fronts.push_back(manifest_.relpath(name));
    if (!fronts.empty()) {
        j["pareto_files"] = fronts;
        any = true;
    }
    if (!any) throw stage_error("report: no completed stage to report on");

    const std::string text = j.dump(2) + "\n";
    write_text_file((manifest_.dir() / "report.json").string(), text);
    manifest_.register_file("report", "report.json");
    return text;
}

}  // namespace tidecal
