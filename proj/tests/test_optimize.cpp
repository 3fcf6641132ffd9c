#include <doctest.h>

#include <cmath>
#include <limits>

#include "tidecal/optimize.hpp"
#include "tidecal/rng.hpp"

using namespace tidecal;

namespace {

Bounds box(int d, double lo, double hi) {
    Bounds b;
    b.lower.assign(static_cast<std::size_t>(d), lo);
    b.upper.assign(static_cast<std::size_t>(d), hi);
    return b;
}

// Peeling oracle for nondominated sorting: repeatedly remove the points no
// survivor dominates, straight from the definition.
std::vector<std::vector<int>> peel_fronts(const std::vector<std::vector<double>>& pts) {
    auto dom = [](const std::vector<double>& a, const std::vector<double>& b) {
        bool strict = false;
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (a[k] > b[k]) return false;
            if (a[k] < b[k]) strict = true;
        }
        return strict;
    };
    std::vector<int> alive(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) alive[i] = static_cast<int>(i);
    std::vector<std::vector<int>> fronts;
    while (!alive.empty()) {
        std::vector<int> front, rest;
        for (int i : alive) {
            bool dominated = false;
            for (int j : alive)
                if (j != i && dom(pts[static_cast<std::size_t>(j)], pts[static_cast<std::size_t>(i)])) {
                    dominated = true;
                    break;
                }
            (dominated ? rest : front).push_back(i);
        }
        fronts.push_back(front);
        alive = rest;
    }
    return fronts;
}

}  // namespace

TEST_CASE("objective spec parsing") {
    CHECK(ObjectiveSpec::parse("mean").kind == GoalKind::mean_rmse);
    CHECK(ObjectiveSpec::parse("std").kind == GoalKind::std_rmse);
    CHECK(ObjectiveSpec::parse("max").kind == GoalKind::max_rmse);
    const ObjectiveSpec st = ObjectiveSpec::parse("station:4");
    CHECK(st.kind == GoalKind::station_rmse);
    CHECK(st.station_id == 4);
    CHECK(ObjectiveSpec::parse("bias:2").kind == GoalKind::abs_bias);
    CHECK(ObjectiveSpec::parse("nash:6").kind == GoalKind::neg_nash);
    CHECK(ObjectiveSpec::parse("nash:6").label() == "nash:6");
    CHECK_THROWS_AS(ObjectiveSpec::parse("station"), config_error);
    CHECK_THROWS_AS(ObjectiveSpec::parse("mean:3"), config_error);
    CHECK_THROWS_AS(ObjectiveSpec::parse("banana"), config_error);
    CHECK_THROWS_AS(ObjectiveSpec::parse("station:x"), config_error);
}

TEST_CASE("pso finds the sphere minimum") {
    const ObjectiveFn sphere = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    };
    PsoConfig cfg;
    cfg.swarm = 40;
    cfg.iters = 200;
    cfg.seed = 17;
    const OptimRun run = pso_minimize(sphere, box(5, -5.0, 5.0), cfg);
    CHECK(run.best_f <= 1e-6);
    CHECK(run.evals == 40 * 201);
    for (std::size_t i = 1; i < run.history.size(); ++i)
        CHECK(run.history[i] <= run.history[i - 1]);
    CHECK(run.best_f == run.history.back());
}

TEST_CASE("pso on a constant objective settles immediately") {
    const ObjectiveFn flat = [](std::span<const double>) { return 3.25; };
    PsoConfig cfg;
    cfg.swarm = 8;
    cfg.iters = 10;
    cfg.seed = 4;
    const OptimRun run = pso_minimize(flat, box(2, 0.0, 1.0), cfg);
    CHECK(run.best_f == 3.25);
    for (double h : run.history) CHECK(h == 3.25);
}

TEST_CASE("pso is deterministic under its seed and worker count") {
    const ObjectiveFn f = [](std::span<const double> x) {
        return std::pow(x[0] - 0.3, 2) + std::abs(x[1]) + 0.1 * std::sin(9.0 * x[0]);
    };
    PsoConfig cfg;
    cfg.swarm = 12;
    cfg.iters = 30;
    cfg.seed = 5;
    const OptimRun a = pso_minimize(f, box(2, -1.0, 1.0), cfg);
    const OptimRun b = pso_minimize(f, box(2, -1.0, 1.0), cfg);
    CHECK(a.best_x == b.best_x);
    CHECK(a.history == b.history);
    PsoConfig cfg2 = cfg;
    cfg2.workers = 4;
    const OptimRun c = pso_minimize(f, box(2, -1.0, 1.0), cfg2);
    CHECK(a.best_x == c.best_x);
    CHECK(a.history == c.history);
    cfg2.seed = 6;
    const OptimRun d = pso_minimize(f, box(2, -1.0, 1.0), cfg2);
    CHECK(a.best_x != d.best_x);
}

TEST_CASE("pso respects bounds") {
    const ObjectiveFn edge = [](std::span<const double> x) { return x[0]; };
    PsoConfig cfg;
    cfg.swarm = 10;
    cfg.iters = 50;
    cfg.seed = 2;
    const OptimRun run = pso_minimize(edge, box(1, 1.0, 2.0), cfg);
    CHECK(run.best_x[0] >= 1.0);
    CHECK(run.best_f == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("projected BFGS solves a quadratic quickly") {
    const std::vector<double> c{0.3, -1.2, 2.0};
    const ObjectiveFn f = [&c](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
        return s;
    };
    GradConfig cfg;
    cfg.max_iters = 50;
    const std::vector<double> x0{0.0, 0.0, 0.0};
    const OptimRun run = gradient_minimize(f, box(3, -5.0, 5.0), x0, cfg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(run.best_x[i] - c[i]) <= 1e-6);
    CHECK(run.history.size() <= 51);
    for (std::size_t i = 1; i < run.history.size(); ++i)
        CHECK(run.history[i] <= run.history[i - 1]);
}

TEST_CASE("projected BFGS stops on an active bound") {
    const ObjectiveFn f = [](std::span<const double> x) { return x[0] * x[0]; };
    const std::vector<double> x0{1.7};
    const OptimRun run = gradient_minimize(f, box(1, 1.0, 2.0), x0);
    CHECK(run.best_x[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(run.best_f == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gradient_minimize validates its inputs") {
    const ObjectiveFn f = [](std::span<const double> x) { return x[0]; };
    CHECK_THROWS_AS(gradient_minimize(f, box(1, 0.0, 1.0), std::vector<double>{2.0}), config_error);
    const ObjectiveFn bad = [](std::span<const double>) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(gradient_minimize(bad, box(1, 0.0, 1.0), std::vector<double>{0.5}),
                    compute_error);
}

TEST_CASE("multistart keeps the best run and a global best-so-far history") {
    // two basins; the deeper one is narrow
    const ObjectiveFn f = [](std::span<const double> x) {
        const double a = std::pow(x[0] - 0.15, 2);
        const double b = 0.5 + std::pow(x[0] - 0.8, 2);
        return std::min(a, 0.04) == a ? a : std::min(a, b);
    };
    const OptimRun run = multistart_gradient_minimize(f, box(1, 0.0, 1.0), 8, 3);
    CHECK(run.best_f <= 1e-8);
    CHECK(std::abs(run.best_x[0] - 0.15) <= 1e-4);
    for (std::size_t i = 1; i < run.history.size(); ++i)
        CHECK(run.history[i] <= run.history[i - 1]);

    // explicit extra start must be honored (monotone from that point)
    const ObjectiveFn g = [](std::span<const double> x) { return std::pow(x[0] - 0.5, 2); };
    const OptimRun r2 = multistart_gradient_minimize(g, box(1, 0.0, 1.0), 0, 1, {},
                                                     {{std::vector<double>{0.9}}});
    CHECK(r2.best_f <= g(std::vector<double>{0.9}) + 1e-15);
}

TEST_CASE("nondominated_sort basics") {
    const auto single = nondominated_sort({{1.0, 2.0}});
    REQUIRE(single.size() == 1);
    CHECK(single[0] == std::vector<int>{0});

    const auto two = nondominated_sort({{1.0, 1.0}, {2.0, 2.0}});
    REQUIRE(two.size() == 2);
    CHECK(two[0] == std::vector<int>{0});
    CHECK(two[1] == std::vector<int>{1});

    // equal points do not dominate each other
    const auto ties = nondominated_sort({{1.0, 1.0}, {1.0, 1.0}});
    REQUIRE(ties.size() == 1);
    CHECK(ties[0].size() == 2);

    CHECK_THROWS_AS(nondominated_sort({{1.0, 2.0}, {1.0}}), config_error);
    CHECK_THROWS_AS(nondominated_sort({{std::numeric_limits<double>::infinity(), 1.0}}),
                    config_error);
}

TEST_CASE("nondominated_sort agrees with the peeling oracle on random instances") {
    Rng r(13);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 5 + static_cast<int>(r.below(60));
        const int m = 2 + static_cast<int>(r.below(2));
        std::vector<std::vector<double>> pts(static_cast<std::size_t>(n),
                                             std::vector<double>(static_cast<std::size_t>(m)));
        for (auto& p : pts)
            for (auto& v : p) v = std::round(r.uniform(0.0, 8.0));  // ties likely
        const auto fast = nondominated_sort(pts);
        const auto slow = peel_fronts(pts);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t k = 0; k < fast.size(); ++k) {
            auto a = fast[k];
            auto b = slow[k];
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            CHECK(a == b);
        }
    }
}

TEST_CASE("scaling one objective by a positive constant preserves the fronts") {
    Rng r(14);
    std::vector<std::vector<double>> pts(40, std::vector<double>(2));
    for (auto& p : pts) {
        p[0] = r.uniform(0, 1);
        p[1] = r.uniform(0, 1);
    }
    auto scaled = pts;
    for (auto& p : scaled) p[1] *= 37.5;
    CHECK(nondominated_sort(pts) == nondominated_sort(scaled));
}

TEST_CASE("crowding distance on the documented cases") {
    CHECK(crowding_distance({{1.0, 2.0}}) ==
          std::vector<double>{std::numeric_limits<double>::infinity()});
    const auto two = crowding_distance({{0.0, 1.0}, {1.0, 0.0}});
    CHECK(two[0] == std::numeric_limits<double>::infinity());
    CHECK(two[1] == std::numeric_limits<double>::infinity());

    // three equally spaced points on a line: the middle one gets 1 per objective
    const auto three = crowding_distance({{0.0, 2.0}, {1.0, 1.0}, {2.0, 0.0}});
    CHECK(three[0] == std::numeric_limits<double>::infinity());
    CHECK(three[2] == std::numeric_limits<double>::infinity());
    CHECK(three[1] == doctest::Approx(2.0).epsilon(1e-12));

    // identical points: extremes infinite, interior zero
    const auto same = crowding_distance({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
    CHECK(same[1] == 0.0);
}

TEST_CASE("nsga2 degenerates to a point for a single objective") {
    const ObjectiveFn sphere = [](std::span<const double> x) {
        return (x[0] - 0.4) * (x[0] - 0.4) + x[1] * x[1];
    };
    Nsga2Config cfg;
    cfg.pop = 24;
    cfg.gens = 60;
    cfg.seed = 5;
    const ParetoFront front = nsga2({sphere}, box(2, -1.0, 1.0), cfg);
    REQUIRE(!front.points.empty());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : front.points) best = std::min(best, p.f[0]);
    for (const auto& p : front.points) CHECK(p.f[0] <= best + 1e-6);
}

TEST_CASE("nsga2 front on a biobjective toy is mutually nondominated and in bounds") {
    // Schaffer-style: f1 = x^2, f2 = (x-2)^2
    const ObjectiveFn f1 = [](std::span<const double> x) { return x[0] * x[0]; };
    const ObjectiveFn f2 = [](std::span<const double> x) { return (x[0] - 2.0) * (x[0] - 2.0); };
    Nsga2Config cfg;
    cfg.pop = 40;
    cfg.gens = 60;
    cfg.seed = 7;
    const Bounds b = box(1, -3.0, 5.0);
    const ParetoFront front = nsga2({f1, f2}, b, cfg);
    CHECK(front.points.size() >= 10);
    std::vector<std::vector<double>> objs;
    for (const auto& p : front.points) {
        objs.push_back(p.f);
        CHECK(b.contains(p.x));
        CHECK(p.x[0] >= -0.1);
        CHECK(p.x[0] <= 2.1);
    }
    CHECK(nondominated_sort(objs).size() == 1);

    // determinism
    const ParetoFront again = nsga2({f1, f2}, b, cfg);
    REQUIRE(again.points.size() == front.points.size());
    for (std::size_t i = 0; i < front.points.size(); ++i)
        CHECK(again.points[i].x == front.points[i].x);
}

TEST_CASE("nsga2 validates configuration") {
    const ObjectiveFn f = [](std::span<const double> x) { return x[0]; };
    Nsga2Config cfg;
    cfg.pop = 7;
    CHECK_THROWS_AS(nsga2({f}, box(1, 0.0, 1.0), cfg), config_error);
    cfg.pop = 9;
    CHECK_THROWS_AS(nsga2({f}, box(1, 0.0, 1.0), cfg), config_error);
    cfg.pop = 16;
    CHECK_THROWS_AS(nsga2({}, box(1, 0.0, 1.0), cfg), config_error);
    CHECK_THROWS_AS(nsga2({f, f, f, f}, box(1, 0.0, 1.0), cfg), config_error);
    const ObjectiveFn bad = [](std::span<const double>) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_WITH_AS(nsga2({bad}, box(1, 0.0, 1.0), cfg), doctest::Contains("generation"),
                         compute_error);
}

TEST_CASE("validate_optimum flags the gap against the tolerance") {
    const ObjectiveFn hat = [](std::span<const double>) { return 0.1259; };
    const ObjectiveFn truth = [](std::span<const double>) { return 0.1265; };
    const OptimumCheck c = validate_optimum(std::vector<double>{0.0}, hat, truth, 0.01);
    CHECK(c.rel_gap == doctest::Approx(0.004743083003952485).epsilon(1e-12));
    CHECK(c.ok);  // the half-percent case clears the one-percent gate

    const ObjectiveFn far = [](std::span<const double>) { return 0.20; };
    CHECK(!validate_optimum(std::vector<double>{0.0}, far, truth, 0.01).ok);

    // near-zero truth guarded by epsilon
    const ObjectiveFn zero = [](std::span<const double>) { return 0.0; };
    const OptimumCheck z = validate_optimum(std::vector<double>{0.0}, zero, zero, 0.01);
    CHECK(z.rel_gap == 0.0);
    CHECK(z.ok);
}
