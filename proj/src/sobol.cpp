#include "tidecal/sobol.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "tidecal/rng.hpp"

namespace tidecal {

double SobolResult::second_at(int i, int j, int d) const {
    if (!second) throw config_error("sobol: second-order indices not computed");
    if (i > j) std::swap(i, j);
    if (i == j || j >= d) throw config_error("sobol: bad pair index");
    // row-major upper triangle offset
    const int off = i * d - i * (i + 1) / 2 + (j - i - 1);
    return (*second)[static_cast<std::size_t>(off)];
}

namespace {

struct SampleBlocks {
    int n = 0, d = 0;
    std::vector<double> a;   // n*d
    std::vector<double> b;   // n*d
    std::vector<std::pair<int, int>> pairs;  // for second order
};

SampleBlocks draw_samples(const Bounds& bounds, const SobolConfig& cfg) {
    SampleBlocks s;
    s.n = cfg.n_mc;
    s.d = bounds.dim();
    Rng rng(cfg.seed);
    s.a.resize(static_cast<std::size_t>(s.n) * s.d);
    s.b.resize(static_cast<std::size_t>(s.n) * s.d);
    // row-major draw order: A then B, row by row
    for (auto* block : {&s.a, &s.b})
        for (int i = 0; i < s.n; ++i)
            for (int j = 0; j < s.d; ++j)
                (*block)[static_cast<std::size_t>(i) * s.d + j] =
                    rng.uniform(bounds.lower[static_cast<std::size_t>(j)],
                                bounds.upper[static_cast<std::size_t>(j)]);
    if (cfg.second_order)
        for (int i = 0; i < s.d; ++i)
            for (int j = i + 1; j < s.d; ++j) s.pairs.emplace_back(i, j);
    return s;
}

// Every evaluation point laid out contiguously:
// [A | B | AB_0 .. AB_{d-1} | AB_{ij} pairs]
std::vector<double> build_points(const SampleBlocks& s) {
    const std::size_t nd = static_cast<std::size_t>(s.n) * s.d;
    const std::size_t total = nd * (2 + static_cast<std::size_t>(s.d) + s.pairs.size());
    std::vector<double> pts;
    pts.reserve(total);
    pts.insert(pts.end(), s.a.begin(), s.a.end());
    pts.insert(pts.end(), s.b.begin(), s.b.end());
    for (int col = 0; col < s.d; ++col) {
        for (int i = 0; i < s.n; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * s.d;
            for (int j = 0; j < s.d; ++j)
                pts.push_back(j == col ? s.b[base + static_cast<std::size_t>(j)]
                                       : s.a[base + static_cast<std::size_t>(j)]);
        }
    }
    for (const auto& [ci, cj] : s.pairs) {
        for (int i = 0; i < s.n; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * s.d;
            for (int j = 0; j < s.d; ++j)
                pts.push_back((j == ci || j == cj) ? s.b[base + static_cast<std::size_t>(j)]
                                                   : s.a[base + static_cast<std::size_t>(j)]);
        }
    }
    return pts;
}

void check_value(double v, std::size_t row) {
    if (!std::isfinite(v))
        throw compute_error("sobol: non-finite objective value at sample " + std::to_string(row));
}

std::vector<double> evaluate_points(const ObjectiveFn& f, const std::vector<double>& pts, int d,
                                    int workers, bool parallel) {
    const std::size_t rows = pts.size() / static_cast<std::size_t>(d);
    std::vector<double> vals(rows);
    if (!parallel) {
        for (std::size_t r = 0; r < rows; ++r) {
            vals[r] = f({pts.data() + r * static_cast<std::size_t>(d), static_cast<std::size_t>(d)});
            check_value(vals[r], r);
        }
        return vals;
    }
    std::size_t bad = rows;
    std::string bad_what;
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long long r = 0; r < static_cast<long long>(rows); ++r) {
        const std::size_t u = static_cast<std::size_t>(r);
        try {
            vals[u] = f({pts.data() + u * static_cast<std::size_t>(d), static_cast<std::size_t>(d)});
            check_value(vals[u], u);
        } catch (const std::exception& e) {
#pragma omp critical(tidecal_sobol_err)
            if (u < bad) {
                bad = u;
                bad_what = e.what();
            }
        }
    }
    if (bad < rows) throw compute_error(bad_what);
    return vals;
}

SobolResult estimate(const ObjectiveFn& f, const Bounds& bounds, const SobolConfig& cfg,
                     bool parallel) {
    bounds.validate();
    if (cfg.n_mc < 128) throw config_error("sobol: n_mc must be >= 128");
    const int d = bounds.dim();
    const int n = cfg.n_mc;

    const SampleBlocks s = draw_samples(bounds, cfg);
    const std::vector<double> pts = build_points(s);
    const std::vector<double> vals = evaluate_points(f, pts, d, cfg.workers, parallel);

    const double* fa = vals.data();
    const double* fb = vals.data() + n;
    auto fab = [&](int col) { return vals.data() + static_cast<std::size_t>(2 + col) * n; };

    // pooled moments of (fA, fB)
    double mean = 0.0;
    for (int i = 0; i < 2 * n; ++i) mean += vals[static_cast<std::size_t>(i)];
    mean /= 2.0 * n;
    double var = 0.0;
    for (int i = 0; i < 2 * n; ++i) {
        const double c = vals[static_cast<std::size_t>(i)] - mean;
        var += c * c;
    }
    var /= 2.0 * n;
    if (var == 0.0) throw compute_error("sobol: objective is constant over the box");

    SobolResult out;
    out.n_mc = n;
    out.seed = cfg.seed;
    out.first.resize(static_cast<std::size_t>(d));
    out.total.resize(static_cast<std::size_t>(d));
    for (int col = 0; col < d; ++col) {
        const double* fi = fab(col);
        double vi = 0.0, ti = 0.0;
        for (int i = 0; i < n; ++i) {
            vi += fb[i] * (fi[i] - fa[i]);
            const double diff = fa[i] - fi[i];
            ti += diff * diff;
        }
        out.first[static_cast<std::size_t>(col)] = (vi / n) / var;
        out.total[static_cast<std::size_t>(col)] = (ti / (2.0 * n)) / var;
    }

    if (cfg.second_order) {
        std::vector<double> sec(s.pairs.size());
        const double* base = vals.data() + static_cast<std::size_t>(2 + d) * n;
        for (std::size_t p = 0; p < s.pairs.size(); ++p) {
            const double* fp = base + p * static_cast<std::size_t>(n);
            double vij = 0.0;
            for (int i = 0; i < n; ++i) vij += fb[i] * (fp[i] - fa[i]);
            const auto [ci, cj] = s.pairs[p];
            sec[p] = (vij / n) / var - out.first[static_cast<std::size_t>(ci)] -
                     out.first[static_cast<std::size_t>(cj)];
        }
        out.second = std::move(sec);
    }
    return out;
}

}  // namespace

SobolResult sobol_indices(const ObjectiveFn& f, const Bounds& bounds, const SobolConfig& config) {
    return estimate(f, bounds, config, true);
}

SobolResult sobol_indices_serial(const ObjectiveFn& f, const Bounds& bounds, const SobolConfig& config) {
    return estimate(f, bounds, config, false);
}

ParameterRanking rank_parameters(const SobolResult& result, double threshold) {
    const int d = static_cast<int>(result.total.size());
    ParameterRanking r;
    for (int i = 0; i < d; ++i)
        (result.total[static_cast<std::size_t>(i)] >= threshold ? r.significant : r.ignorable).push_back(i);
    auto by_total_desc = [&](int a, int b) {
        return result.total[static_cast<std::size_t>(a)] > result.total[static_cast<std::size_t>(b)];
    };
    std::sort(r.significant.begin(), r.significant.end(), by_total_desc);
    std::sort(r.ignorable.begin(), r.ignorable.end(), by_total_desc);
    return r;
}

}  // namespace tidecal
