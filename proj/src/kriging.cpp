#include "tidecal/kriging.hpp"

#include <omp.h>

#include <cmath>
#include <limits>

#include <json.hpp>

#include "tidecal/rng.hpp"

namespace tidecal {

namespace {

constexpr double kLogThetaLo = -2.995732273553991;  // log 0.05
constexpr double kLogThetaHi = 2.302585092994046;   // log 10
constexpr double kMaxNugget = 1e-4;

double kernel_value(KernelFamily k, double a) {
    // a: anisotropic scaled distance
    switch (k) {
        case KernelFamily::matern52: {
            const double b = std::sqrt(5.0) * a;
            return (1.0 + b + b * b / 3.0) * std::exp(-b);
        }
        case KernelFamily::squared_exponential:
            return std::exp(-0.5 * a * a);
    }
    return 0.0;
}

double scaled_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& theta) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        const double d = (a[j] - b[j]) / theta[j];
        s += d * d;
    }
    return std::sqrt(s);
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& x, const Eigen::VectorXd& theta,
                                   KernelFamily kernel, double nugget) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r(i, i) = 1.0 + nugget;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = kernel_value(kernel, scaled_distance(x.row(i), x.row(j), theta));
            r(i, j) = v;
            r(j, i) = v;
        }
    }
    return r;
}

Eigen::MatrixXd trend_matrix(const Eigen::MatrixXd& x, TrendBasis basis) {
    const Eigen::Index n = x.rows();
    if (basis == TrendBasis::constant) return Eigen::MatrixXd::Ones(n, 1);
    Eigen::MatrixXd g(n, x.cols() + 1);
    g.col(0).setOnes();
    g.rightCols(x.cols()) = x;
    return g;
}

struct LikelihoodEval {
    bool ok = false;
    double nll = std::numeric_limits<double>::infinity();
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd beta;
    double sigma2 = 0.0;
};

// Concentrated negative log-likelihood: n log sigma2(theta) + log det R(theta).
LikelihoodEval evaluate_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& g, const Eigen::VectorXd& theta,
                                   KernelFamily kernel, double nugget) {
    LikelihoodEval out;
    Eigen::MatrixXd r = correlation_matrix(x, theta, kernel, nugget);
    out.llt.compute(r);
    if (out.llt.info() != Eigen::Success) return out;

    const auto& l = out.llt.matrixL();
    Eigen::MatrixXd f = l.solve(g);
    Eigen::VectorXd z = l.solve(y);
    Eigen::MatrixXd m = f.transpose() * f;
    Eigen::LLT<Eigen::MatrixXd> mllt(m);
    if (mllt.info() != Eigen::Success) return out;
    out.beta = mllt.solve(f.transpose() * z);

    const Eigen::VectorXd resid = z - f * out.beta;
    const Eigen::Index n = x.rows();
    out.sigma2 = resid.squaredNorm() / static_cast<double>(n);

    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(out.llt.matrixLLT()(i, i));
    logdet *= 2.0;

    out.nll = static_cast<double>(n) * std::log(std::max(out.sigma2, 1e-300)) + logdet;
    out.ok = true;
    return out;
}

struct TrainingData {
    Eigen::MatrixXd x;  // normalized
    Eigen::VectorXd y;  // scaled
    double y_mean = 0.0;
    double y_scale = 1.0;
};

// Shared by fit() and the likelihood probe: normalize inputs by bounds,
// center/scale the responses, reject duplicates and short tables.
TrainingData prepare_training(const ErrorTable& table, int station) {
    const int n = table.design.n;
    const int d = table.design.d;
    if (station < 0 || station >= table.n_stations())
        throw config_error("fit: station index out of range");
    if (n < d + 2)
        throw compute_error("fit: need at least d+2 = " + std::to_string(d + 2) + " rows, got " +
                            std::to_string(n));
    table.design.bounds.validate();

    TrainingData td;
    td.x.resize(n, d);
    for (int i = 0; i < n; ++i) {
        const auto row = table.design.row(i);
        for (int j = 0; j < d; ++j) {
            const double lo = table.design.bounds.lower[static_cast<std::size_t>(j)];
            const double hi = table.design.bounds.upper[static_cast<std::size_t>(j)];
            td.x(i, j) = (row[static_cast<std::size_t>(j)] - lo) / (hi - lo);
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if ((td.x.row(i) - td.x.row(j)).cwiseAbs().maxCoeff() == 0.0)
                throw compute_error("fit: ill-posed design, duplicate input rows " +
                                    std::to_string(j) + " and " + std::to_string(i));

    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = table.response(i, station);
    td.y_mean = y.mean();
    const double sd = std::sqrt((y.array() - td.y_mean).square().sum() / std::max(1, n - 1));
    td.y_scale = sd > 0.0 ? sd : 1.0;
    td.y = (y.array() - td.y_mean) / td.y_scale;
    return td;
}

double loglik_from_nll(double nll, int n) {
    return -0.5 * (nll + static_cast<double>(n) * (1.0 + std::log(2.0 * M_PI)));
}

}  // namespace

double profiled_log_likelihood(const ErrorTable& table, int station, const KrigingConfig& config,
                               std::span<const double> theta) {
    const TrainingData td = prepare_training(table, station);
    if (static_cast<int>(theta.size()) != table.design.d)
        throw config_error("profiled_log_likelihood: theta dimension mismatch");
    Eigen::VectorXd th(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
        if (!(theta[j] > 0.0)) throw config_error("profiled_log_likelihood: theta must be positive");
        th[static_cast<Eigen::Index>(j)] = theta[j];
    }
    const Eigen::MatrixXd g = trend_matrix(td.x, config.basis);
    const LikelihoodEval e = evaluate_likelihood(td.x, td.y, g, th, config.kernel, config.nugget);
    if (!e.ok) return -std::numeric_limits<double>::infinity();
    return loglik_from_nll(e.nll, table.design.n);
}

std::string to_string(KernelFamily k) {
    return k == KernelFamily::matern52 ? "matern52" : "squared_exponential";
}
std::string to_string(TrendBasis b) { return b == TrendBasis::constant ? "constant" : "linear"; }

KernelFamily kernel_from_string(const std::string& s) {
    if (s == "matern52") return KernelFamily::matern52;
    if (s == "squared_exponential") return KernelFamily::squared_exponential;
    throw config_error("unknown kernel '" + s + "'");
}
TrendBasis trend_from_string(const std::string& s) {
    if (s == "constant") return TrendBasis::constant;
    if (s == "linear") return TrendBasis::linear;
    throw config_error("unknown trend basis '" + s + "'");
}

Eigen::VectorXd KrigingModel::normalize(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != bounds_.dim())
        throw config_error("predict: point dimension mismatch");
    Eigen::VectorXd xn(bounds_.dim());
    for (int j = 0; j < bounds_.dim(); ++j) {
        const double lo = bounds_.lower[static_cast<std::size_t>(j)];
        const double hi = bounds_.upper[static_cast<std::size_t>(j)];
        xn[j] = (x[static_cast<std::size_t>(j)] - lo) / (hi - lo);
    }
    return xn;
}

Eigen::VectorXd KrigingModel::trend_at(const Eigen::VectorXd& xn) const {
    if (basis_ == TrendBasis::constant) return Eigen::VectorXd::Ones(1);
    Eigen::VectorXd g(xn.size() + 1);
    g[0] = 1.0;
    g.tail(xn.size()) = xn;
    return g;
}

Eigen::VectorXd KrigingModel::corr_vector(const Eigen::VectorXd& xn) const {
    // The jitter is part of the prior (k(x,x) = 1 + nugget), so a point that
    // coincides with a training input correlates at 1 + nugget and the
    // predictor passes through the training response exactly.
    const Eigen::Index n = x_train_.rows();
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dist = scaled_distance(x_train_.row(i), xn, theta_);
        r[i] = dist == 0.0 ? 1.0 + nugget_ : kernel_value(kernel_, dist);
    }
    return r;
}

double KrigingModel::predict_mean(std::span<const double> x) const {
    const Eigen::VectorXd xn = normalize(x);
    const Eigen::VectorXd r = corr_vector(xn);
    const double scaled = trend_at(xn).dot(trend_coeffs_) + r.dot(dual_weights_);
    return y_mean_ + y_scale_ * scaled;
}

Prediction KrigingModel::predict(std::span<const double> x) const {
    Prediction p;
    p.extrapolated = !bounds_.contains(x);
    const Eigen::VectorXd xn = normalize(x);
    const Eigen::VectorXd g = trend_at(xn);
    const Eigen::VectorXd r = corr_vector(xn);
    p.mean = y_mean_ + y_scale_ * (g.dot(trend_coeffs_) + r.dot(dual_weights_));

    // universal-kriging variance: sigma2 (1 - r^T R^-1 r + u^T (G^T R^-1 G)^-1 u)
    const Eigen::VectorXd a =
        chol_.triangularView<Eigen::Lower>().solve(r);
    const Eigen::VectorXd u = g - whitened_trend_.transpose() * a;
    const Eigen::VectorXd w =
        trend_normal_chol_.triangularView<Eigen::Lower>().solve(u);
    const double term = (1.0 + nugget_) - a.squaredNorm() + w.squaredNorm();
    p.variance = std::max(0.0, sigma2_ * term) * y_scale_ * y_scale_;
    return p;
}

void KrigingModel::finalize_derived() {
    const Eigen::MatrixXd g = trend_matrix(x_train_, basis_);
    whitened_trend_ = chol_.triangularView<Eigen::Lower>().solve(g);
    Eigen::MatrixXd m = whitened_trend_.transpose() * whitened_trend_;
    Eigen::LLT<Eigen::MatrixXd> mllt(m);
    if (mllt.info() != Eigen::Success)
        throw compute_error("kriging: trend normal matrix not positive definite");
    trend_normal_chol_ = mllt.matrixL();
}

KrigingModel fit(const ErrorTable& table, int station, const KrigingConfig& config) {
    const int n = table.design.n;
    const int d = table.design.d;
    TrainingData td = prepare_training(table, station);

    KrigingModel model;
    model.bounds_ = table.design.bounds;
    model.kernel_ = config.kernel;
    model.basis_ = config.basis;
    model.station_id_ = table.station_ids[static_cast<std::size_t>(station)];
    model.x_train_ = std::move(td.x);
    model.y_mean_ = td.y_mean;
    model.y_scale_ = td.y_scale;
    model.y_train_ = std::move(td.y);

    const Eigen::MatrixXd g = trend_matrix(model.x_train_, model.basis_);

    // multi-start compass search over log theta
    Bounds logbox;
    logbox.lower.assign(static_cast<std::size_t>(d), kLogThetaLo);
    logbox.upper.assign(static_cast<std::size_t>(d), kLogThetaHi);
    const DesignMatrix starts =
        lhs_sample(config.restarts, logbox, derive_seed(config.seed, "kriging-theta-starts"));

    auto nll_at = [&](const Eigen::VectorXd& logtheta) {
        return evaluate_likelihood(model.x_train_, model.y_train_, g, logtheta.array().exp(),
                                   model.kernel_, config.nugget);
    };

    Eigen::VectorXd best_lt;
    double best_nll = std::numeric_limits<double>::infinity();
    for (int s = 0; s < config.restarts; ++s) {
        Eigen::VectorXd lt(d);
        for (int j = 0; j < d; ++j) lt[j] = starts.at(s, j);
        LikelihoodEval e = nll_at(lt);
        double cur = e.nll;
        int evals = 1;
        const int max_evals = 160 * d;
        for (double step = 0.6; step >= 0.009 && evals < max_evals; step *= 0.5) {
            bool improved_at_step = true;
            while (improved_at_step && evals < max_evals) {
                improved_at_step = false;
                for (int j = 0; j < d && evals < max_evals; ++j) {
                    for (double sgn : {1.0, -1.0}) {
                        Eigen::VectorXd cand = lt;
                        cand[j] = std::min(kLogThetaHi, std::max(kLogThetaLo, cand[j] + sgn * step));
                        if (cand[j] == lt[j]) continue;
                        LikelihoodEval ce = nll_at(cand);
                        ++evals;
                        if (ce.nll < cur) {
                            lt = cand;
                            cur = ce.nll;
                            improved_at_step = true;
                            break;
                        }
                    }
                }
            }
        }
        if (cur < best_nll) {
            best_nll = cur;
            best_lt = lt;
        }
    }
    if (!best_lt.size()) throw compute_error("fit: likelihood search failed at every start");

    model.theta_ = best_lt.array().exp();

    // final factorization with the jitter ladder
    double nugget = config.nugget;
    LikelihoodEval fin;
    while (true) {
        fin = evaluate_likelihood(model.x_train_, model.y_train_, g, model.theta_, model.kernel_, nugget);
        if (fin.ok) break;
        if (nugget >= kMaxNugget)
            throw compute_error("fit: correlation matrix not positive definite at max jitter " +
                                std::to_string(kMaxNugget));
        nugget = (nugget == 0.0) ? 1e-10 : nugget * 10.0;
    }
    model.nugget_ = nugget;
    model.sigma2_ = fin.sigma2;
    model.loglik_ = loglik_from_nll(fin.nll, n);
    model.trend_coeffs_ = fin.beta;
    model.chol_ = fin.llt.matrixL();

    const Eigen::VectorXd resid = model.y_train_ - g * model.trend_coeffs_;
    model.dual_weights_ = fin.llt.solve(resid);
    model.finalize_derived();
    return model;
}

std::vector<KrigingModel> fit_all(const ErrorTable& table, const KrigingConfig& config, int workers) {
    const int ns = table.n_stations();
    std::vector<KrigingModel> models(static_cast<std::size_t>(ns));
    std::vector<std::string> errors(static_cast<std::size_t>(ns));
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int s = 0; s < ns; ++s) {
        try {
            KrigingConfig cfg = config;
            cfg.seed = derive_seed(config.seed, "kriging-station-" +
                                                    std::to_string(table.station_ids[static_cast<std::size_t>(s)]));
            models[static_cast<std::size_t>(s)] = fit(table, s, cfg);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(s)] = e.what();
        }
    }
    for (int s = 0; s < ns; ++s)
        if (!errors[static_cast<std::size_t>(s)].empty())
            throw compute_error("fit_all: station " + std::to_string(table.station_ids[static_cast<std::size_t>(s)]) +
                                ": " + errors[static_cast<std::size_t>(s)]);
    return models;
}

namespace {
ValidationReport report_from(const std::vector<double>& pred, const std::vector<double>& truth) {
    ValidationReport rep;
    rep.n_test = static_cast<int>(truth.size());
    double sse = 0.0, mean = 0.0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(truth.size());
    double sst = 0.0;
    rep.residuals.resize(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double r = pred[i] - truth[i];
        rep.residuals[i] = r;
        sse += r * r;
        sst += (truth[i] - mean) * (truth[i] - mean);
    }
    rep.mse = sse / static_cast<double>(truth.size());
    if (sst == 0.0) {
        rep.degenerate_sst = true;
        rep.r2 = std::numeric_limits<double>::quiet_NaN();
    } else {
        rep.r2 = 1.0 - sse / sst;
    }
    return rep;
}
}  // namespace

ValidationReport validate(const KrigingModel& model, const ErrorTable& test_table, int station) {
    if (test_table.design.n < 1) throw config_error("validate: empty test set");
    if (station < 0 || station >= test_table.n_stations())
        throw config_error("validate: station index out of range");
    std::vector<double> pred(static_cast<std::size_t>(test_table.design.n));
    std::vector<double> truth(static_cast<std::size_t>(test_table.design.n));
    for (int i = 0; i < test_table.design.n; ++i) {
        pred[static_cast<std::size_t>(i)] = model.predict_mean(test_table.design.row(i));
        truth[static_cast<std::size_t>(i)] = test_table.response(i, station);
    }
    return report_from(pred, truth);
}

ValidationReport validate_mean(const std::vector<KrigingModel>& models, const ErrorTable& test_table) {
    if (test_table.design.n < 1) throw config_error("validate_mean: empty test set");
    if (static_cast<int>(models.size()) != test_table.n_stations())
        throw config_error("validate_mean: model/station count mismatch");
    std::vector<double> pred(static_cast<std::size_t>(test_table.design.n));
    std::vector<double> truth(static_cast<std::size_t>(test_table.design.n));
    for (int i = 0; i < test_table.design.n; ++i) {
        const StationErrors e = predict_all(models, test_table.design.row(i));
        double p = 0.0;
        for (double v : e) p += v;
        pred[static_cast<std::size_t>(i)] = p / static_cast<double>(e.size());
        const auto resp = test_table.row_responses(i);
        double t = 0.0;
        for (double v : resp) t += v;
        truth[static_cast<std::size_t>(i)] = t / static_cast<double>(resp.size());
    }
    return report_from(pred, truth);
}

StationErrors predict_all(const std::vector<KrigingModel>& models, std::span<const double> x) {
    if (models.empty()) throw config_error("predict_all: no models");
    for (std::size_t i = 1; i < models.size(); ++i)
        if (models[i].bounds().lower != models[0].bounds().lower ||
            models[i].bounds().upper != models[0].bounds().upper)
            throw config_error("predict_all: models do not share bounds");
    StationErrors out(models.size());
    for (std::size_t i = 0; i < models.size(); ++i)
        out[i] = std::max(0.0, models[i].predict_mean(x));
    return out;
}

// ---- persistence ----

std::string KrigingModel::to_json() const {
    using nlohmann::ordered_json;
    ordered_json j;
    j["format"] = "tidecal-kriging/1";
    j["station_id"] = station_id_;
    j["kernel"] = to_string(kernel_);
    j["basis"] = to_string(basis_);
    j["bounds"] = {{"lower", bounds_.lower}, {"upper", bounds_.upper}};
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    j["theta"] = vec(theta_);
    j["process_variance"] = process_variance();
    j["sigma2_scaled"] = sigma2_;
    j["nugget"] = nugget_;
    j["log_likelihood"] = loglik_;
    j["y_mean"] = y_mean_;
    j["y_scale"] = y_scale_;
    const Eigen::Index n = x_train_.rows(), d = x_train_.cols();
    j["n"] = n;
    j["d"] = d;
    std::vector<double> xt;
    xt.reserve(static_cast<std::size_t>(n * d));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < d; ++c) xt.push_back(x_train_(i, c));
    j["x_train"] = xt;
    j["y_train"] = vec(y_train_);
    j["trend_coeffs"] = vec(trend_coeffs_);
    j["dual_weights"] = vec(dual_weights_);
    std::vector<double> lo;  // packed lower triangle, row by row
    lo.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c <= i; ++c) lo.push_back(chol_(i, c));
    j["chol_lower"] = lo;
    return j.dump(2) + "\n";
}

KrigingModel KrigingModel::from_json(const std::string& text) {
    using nlohmann::ordered_json;
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw config_error(std::string("kriging model: bad json: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "tidecal-kriging/1")
            throw config_error("kriging model: unsupported format " +
                               j.at("format").get<std::string>());
        KrigingModel m;
        m.station_id_ = j.at("station_id").get<int>();
        m.kernel_ = kernel_from_string(j.at("kernel").get<std::string>());
        m.basis_ = trend_from_string(j.at("basis").get<std::string>());
        m.bounds_.lower = j.at("bounds").at("lower").get<std::vector<double>>();
        m.bounds_.upper = j.at("bounds").at("upper").get<std::vector<double>>();
        m.bounds_.validate();
        const auto n = j.at("n").get<Eigen::Index>();
        const auto d = j.at("d").get<Eigen::Index>();
        auto load_vec = [&](const char* key, Eigen::Index len) {
            auto v = j.at(key).get<std::vector<double>>();
            if (static_cast<Eigen::Index>(v.size()) != len)
                throw config_error(std::string("kriging model: bad length for ") + key);
            return Eigen::Map<const Eigen::VectorXd>(v.data(), len).eval();
        };
        m.theta_ = load_vec("theta", d);
        m.sigma2_ = j.at("sigma2_scaled").get<double>();
        m.nugget_ = j.at("nugget").get<double>();
        m.loglik_ = j.at("log_likelihood").get<double>();
        m.y_mean_ = j.at("y_mean").get<double>();
        m.y_scale_ = j.at("y_scale").get<double>();
        auto xt = j.at("x_train").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(xt.size()) != n * d)
            throw config_error("kriging model: bad x_train length");
        m.x_train_.resize(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < d; ++c)
                m.x_train_(i, c) = xt[static_cast<std::size_t>(i * d + c)];
        m.y_train_ = load_vec("y_train", n);
        const Eigen::Index k = m.basis_ == TrendBasis::constant ? 1 : d + 1;
        m.trend_coeffs_ = load_vec("trend_coeffs", k);
        m.dual_weights_ = load_vec("dual_weights", n);
        auto lo = j.at("chol_lower").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(lo.size()) != n * (n + 1) / 2)
            throw config_error("kriging model: bad chol length");
        m.chol_ = Eigen::MatrixXd::Zero(n, n);
        std::size_t idx = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c <= i; ++c) m.chol_(i, c) = lo[idx++];
        m.finalize_derived();
        return m;
    } catch (const ordered_json::exception& e) {
        throw config_error(std::string("kriging model: missing or malformed field: ") + e.what());
    }
}

}  // namespace tidecal
