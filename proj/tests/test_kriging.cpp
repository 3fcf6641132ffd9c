#include <doctest.h>

#include <cmath>

#include "tidecal/kriging.hpp"
#include "tidecal/rng.hpp"

using namespace tidecal;

namespace {

// Hand-rolled table over an analytic function, independent of the
// estuary machinery.
ErrorTable table_from_function(const DesignMatrix& dm, double (*f)(std::span<const double>)) {
    ErrorTable t;
    t.design = dm;
    t.station_ids = {1};
    t.responses.resize(static_cast<std::size_t>(dm.n));
    for (int i = 0; i < dm.n; ++i) t.responses[static_cast<std::size_t>(i)] = f(dm.row(i));
    return t;
}

double linear_1d(std::span<const double> x) { return 2.0 + 3.0 * x[0]; }
double constant_fn(std::span<const double>) { return 0.37; }
double smooth_3d(std::span<const double> x) {
    return std::sin(3.0 * x[0]) + 0.5 * x[1] * x[1] + 0.3 * std::cos(2.0 * x[2]) + 0.2 * x[0] * x[2];
}

// Test-side Matern 5/2, written independently of the library kernel.
double matern52_ref(double dist) {
    const double b = std::sqrt(5.0) * dist;
    return (1.0 + b + b * b / 3.0) * std::exp(-b);
}

DesignMatrix grid_1d(const std::vector<double>& xs, const Bounds& b) {
    DesignMatrix dm;
    dm.n = static_cast<int>(xs.size());
    dm.d = 1;
    dm.bounds = b;
    dm.data = xs;
    return dm;
}

}  // namespace

TEST_CASE("constant responses give a constant predictor with vanishing process variance") {
    const Bounds b{{0.0, 0.0}, {1.0, 1.0}};
    const DesignMatrix dm = lhs_sample(12, b, 3);
    const ErrorTable t = table_from_function(dm, constant_fn);
    const KrigingModel m = fit(t, 0);
    Rng r(4);
    for (int rep = 0; rep < 20; ++rep) {
        const std::vector<double> x{r.uniform01(), r.uniform01()};
        const Prediction p = m.predict(x);
        CHECK(p.mean == doctest::Approx(0.37).epsilon(1e-12));
    }
    CHECK(m.process_variance() <= 1e-12);
}

TEST_CASE("a linear function with the linear basis is recovered exactly") {
    const Bounds b{{0.0}, {2.0}};
    const DesignMatrix dm = grid_1d({0.0, 0.5, 1.0, 1.5, 2.0}, b);
    const ErrorTable t = table_from_function(dm, linear_1d);
    KrigingConfig cfg;
    cfg.basis = TrendBasis::linear;
    const KrigingModel m = fit(t, 0, cfg);

    // trend coefficients in normalized coordinates: intercept 2, slope 3*2
    CHECK(m.trend_coeffs()[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(m.trend_coeffs()[1] == doctest::Approx(6.0).epsilon(1e-6));

    for (double x : {0.25, 0.75, 1.2, 1.9}) {
        const std::vector<double> xv{x};
        CHECK(m.predict_mean(xv) == doctest::Approx(2.0 + 3.0 * x).epsilon(1e-6));
    }
    // midpoint of two training points follows the linear interpolant
    CHECK(m.predict_mean(std::vector<double>{0.75}) == doctest::Approx(4.25).epsilon(1e-6));
}

TEST_CASE("interpolation at training points with tiny variance") {
    const Bounds b{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const DesignMatrix dm = lhs_sample(30, b, 5);
    const ErrorTable t = table_from_function(dm, smooth_3d);
    const KrigingModel m = fit(t, 0);

    double ymax = 0.0;
    for (double y : t.responses) ymax = std::max(ymax, std::abs(y));
    for (int i = 0; i < dm.n; ++i) {
        const Prediction p = m.predict(dm.row(i));
        CHECK(std::abs(p.mean - t.responses[static_cast<std::size_t>(i)]) <= 1e-6 * ymax);
        CHECK(p.variance >= 0.0);
        CHECK(p.variance <= 10.0 * m.nugget() * m.process_variance());
        CHECK(!p.extrapolated);
    }
    const std::vector<double> outside{1.5, 0.5, 0.5};
    CHECK(m.predict(outside).extrapolated);
}

TEST_CASE("the stored factor reproduces the correlation matrix") {
    const Bounds b{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const DesignMatrix dm = lhs_sample(25, b, 6);
    const ErrorTable t = table_from_function(dm, smooth_3d);
    const KrigingModel m = fit(t, 0);

    const auto& x = m.x_train();
    const auto& theta = m.corr_lengths();
    const Eigen::MatrixXd l = m.chol();
    const Eigen::MatrixXd reconstructed = l * l.transpose();
    for (int i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < x.rows(); ++j) {
            double dist = 0.0;
            for (int k = 0; k < x.cols(); ++k) {
                const double dd = (x(i, k) - x(j, k)) / theta[k];
                dist += dd * dd;
            }
            const double expected =
                matern52_ref(std::sqrt(dist)) + (i == j ? m.nugget() : 0.0);
            CHECK(std::abs(reconstructed(i, j) - expected) <= 1e-10);
        }
    }
}

TEST_CASE("fit rejects duplicates and short tables") {
    const Bounds b{{0.0}, {1.0}};
    DesignMatrix dm = grid_1d({0.1, 0.5, 0.5, 0.9}, b);
    const ErrorTable t = table_from_function(dm, linear_1d);
    CHECK_THROWS_WITH_AS(fit(t, 0), doctest::Contains("duplicate"), compute_error);

    const DesignMatrix tiny = grid_1d({0.1, 0.9}, b);
    const ErrorTable t2 = table_from_function(tiny, linear_1d);
    CHECK_THROWS_AS(fit(t2, 0), compute_error);
}

TEST_CASE("squared-exponential kernel also interpolates") {
    const Bounds b{{0.0, 0.0}, {1.0, 1.0}};
    const DesignMatrix dm = lhs_sample(20, b, 8);
    const ErrorTable t = table_from_function(
        dm, +[](std::span<const double> x) { return std::sin(2.0 * x[0]) + x[1]; });
    KrigingConfig cfg;
    cfg.kernel = KernelFamily::squared_exponential;
    const KrigingModel m = fit(t, 0, cfg);
    for (int i = 0; i < dm.n; ++i)
        CHECK(m.predict_mean(dm.row(i)) ==
              doctest::Approx(t.responses[static_cast<std::size_t>(i)]).epsilon(1e-5));
}

TEST_CASE("affine rescaling of the input space does not change predictions") {
    // same normalized geometry through different physical bounds
    const Bounds b1{{0.0, 0.0}, {1.0, 1.0}};
    const Bounds b2{{-5.0, 100.0}, {3.0, 250.0}};
    const DesignMatrix d1 = lhs_sample(18, b1, 12);
    DesignMatrix d2 = d1;
    d2.bounds = b2;
    for (int i = 0; i < d1.n; ++i)
        for (int j = 0; j < 2; ++j) {
            const double u = d1.at(i, j);
            d2.data[static_cast<std::size_t>(i) * 2 + j] =
                b2.lower[static_cast<std::size_t>(j)] +
                u * (b2.upper[static_cast<std::size_t>(j)] - b2.lower[static_cast<std::size_t>(j)]);
        }
    ErrorTable t1 = table_from_function(d1, smooth_3d);  // only x0,x1 used
    ErrorTable t2 = t1;
    t2.design = d2;

    const KrigingModel m1 = fit(t1, 0);
    const KrigingModel m2 = fit(t2, 0);
    Rng r(7);
    for (int rep = 0; rep < 25; ++rep) {
        const double u0 = r.uniform01(), u1 = r.uniform01();
        const std::vector<double> x1{u0, u1};
        const std::vector<double> x2{-5.0 + 8.0 * u0, 100.0 + 150.0 * u1};
        CHECK(m1.predict_mean(x1) == doctest::Approx(m2.predict_mean(x2)).epsilon(1e-10));
    }
}

TEST_CASE("the returned correlation lengths beat every restart's starting point") {
    const Bounds b{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const DesignMatrix dm = lhs_sample(24, b, 9);
    const ErrorTable t = table_from_function(dm, smooth_3d);
    KrigingConfig cfg;
    cfg.restarts = 6;
    cfg.seed = 123;
    const KrigingModel m = fit(t, 0, cfg);

    // rebuild the internal restart grid: LHS over log-theta in [log .05, log 10]
    Bounds logbox;
    logbox.lower.assign(3, std::log(0.05));
    logbox.upper.assign(3, std::log(10.0));
    const DesignMatrix starts =
        lhs_sample(cfg.restarts, logbox, derive_seed(cfg.seed, "kriging-theta-starts"));
    const double fitted = profiled_log_likelihood(
        t, 0, cfg, std::vector<double>(m.corr_lengths().data(), m.corr_lengths().data() + 3));
    for (int s = 0; s < starts.n; ++s) {
        std::vector<double> theta(3);
        for (int j = 0; j < 3; ++j) theta[static_cast<std::size_t>(j)] = std::exp(starts.at(s, j));
        CHECK(fitted >= profiled_log_likelihood(t, 0, cfg, theta) - 1e-9);
    }
    CHECK(fitted == doctest::Approx(m.log_likelihood()).epsilon(1e-9));
}

TEST_CASE("validate: reusing the training set is near-perfect, constant responses flag SST") {
    const Bounds b{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const DesignMatrix dm = lhs_sample(25, b, 10);
    const ErrorTable t = table_from_function(dm, smooth_3d);
    const KrigingModel m = fit(t, 0);
    const ValidationReport rep = validate(m, t, 0);
    CHECK(rep.mse <= 1e-10);
    CHECK(rep.r2 >= 1.0 - 1e-8);
    CHECK(!rep.degenerate_sst);
    CHECK(rep.n_test == 25);

    ErrorTable flat = t;
    std::fill(flat.responses.begin(), flat.responses.end(), 1.0);
    const ValidationReport dg = validate(m, flat, 0);
    CHECK(dg.degenerate_sst);
    CHECK(std::isnan(dg.r2));

    ErrorTable empty = t;
    empty.design.n = 0;
    empty.design.data.clear();
    empty.responses.clear();
    CHECK_THROWS_AS(validate(m, empty, 0), config_error);
}

TEST_CASE("predict_all clamps negative means at zero") {
    const Bounds b{{0.0}, {1.0}};
    const DesignMatrix dm = grid_1d({0.3, 0.5, 0.7, 0.9, 1.0}, b);
    // linear trend crosses zero inside the box, so extrapolating the trend
    // below x=0.3 predicts negative values
    const ErrorTable t = table_from_function(dm, +[](std::span<const double> x) { return x[0] - 0.29; });
    KrigingConfig cfg;
    cfg.basis = TrendBasis::linear;
    std::vector<KrigingModel> models;
    models.push_back(fit(t, 0, cfg));
    CHECK(models[0].predict_mean(std::vector<double>{0.05}) < 0.0);
    const StationErrors e = predict_all(models, std::vector<double>{0.05});
    CHECK(e[0] == 0.0);
    const StationErrors e2 = predict_all(models, std::vector<double>{0.8});
    CHECK(e2[0] == doctest::Approx(0.51).epsilon(1e-5));
}

TEST_CASE("persistence round-trips predictions bit for bit") {
    const Bounds b{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const DesignMatrix dm = lhs_sample(22, b, 20);
    const ErrorTable t = table_from_function(dm, smooth_3d);
    const KrigingModel m = fit(t, 0);
    const KrigingModel back = KrigingModel::from_json(m.to_json());

    Rng r(21);
    for (int rep = 0; rep < 100; ++rep) {
        const std::vector<double> x{r.uniform01(), r.uniform01(), r.uniform01()};
        const Prediction p1 = m.predict(x);
        const Prediction p2 = back.predict(x);
        CHECK(p1.mean == p2.mean);
        CHECK(p1.variance == p2.variance);
        CHECK(m.predict_mean(x) == back.predict_mean(x));
    }
    CHECK_THROWS_AS(KrigingModel::from_json("{ not json"), config_error);
    CHECK_THROWS_AS(KrigingModel::from_json("{\"format\":\"tidecal-kriging/1\"}"), config_error);
}

TEST_CASE("predict_all insists on shared bounds") {
    const Bounds b1{{0.0}, {1.0}}, b2{{0.0}, {2.0}};
    const ErrorTable t1 = table_from_function(grid_1d({0.0, 0.4, 0.8, 1.0}, b1), linear_1d);
    const ErrorTable t2 = table_from_function(grid_1d({0.0, 0.8, 1.6, 2.0}, b2), linear_1d);
    std::vector<KrigingModel> models;
    models.push_back(fit(t1, 0));
    models.push_back(fit(t2, 0));
    CHECK_THROWS_AS(predict_all(models, std::vector<double>{0.5}), config_error);
}
