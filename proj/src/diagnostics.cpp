#include "tidecal/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "tidecal/csv.hpp"

namespace tidecal {

PCAResult pca(const ErrorTable& table) {
    const int n = table.design.n;
    const int ns = table.n_stations();
    if (n < 3) throw config_error("pca: need at least 3 rows");
    if (ns < 2) throw config_error("pca: need at least 2 stations");

    Eigen::MatrixXd z(n, ns);
    for (int s = 0; s < ns; ++s) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += table.response(i, s);
        mean /= n;
        double ss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double c = table.response(i, s) - mean;
            ss += c * c;
        }
        const double sd = std::sqrt(ss / (n - 1));
        if (sd == 0.0)
            throw compute_error("pca: station " +
                                std::to_string(table.station_ids[static_cast<std::size_t>(s)]) +
                                " has constant errors");
        for (int i = 0; i < n; ++i) z(i, s) = (table.response(i, s) - mean) / sd;
    }

    const Eigen::MatrixXd corr = z.transpose() * z / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    if (eig.info() != Eigen::Success) throw compute_error("pca: eigen decomposition failed");

    // ascending from Eigen; reverse and fix signs
    Eigen::VectorXd evals = eig.eigenvalues().reverse();
    Eigen::MatrixXd evecs = eig.eigenvectors().rowwise().reverse();
    for (int c = 0; c < ns; ++c) {
        int arg = 0;
        double best = 0.0;
        for (int r = 0; r < ns; ++r)
            if (std::abs(evecs(r, c)) > best) {
                best = std::abs(evecs(r, c));
                arg = r;
            }
        if (evecs(arg, c) < 0.0) evecs.col(c) *= -1.0;
    }

    PCAResult out;
    const double total = evals.sum();
    out.explained_ratio.resize(static_cast<std::size_t>(ns));
    for (int c = 0; c < ns; ++c)
        out.explained_ratio[static_cast<std::size_t>(c)] = std::max(0.0, evals[c]) / total;

    const Eigen::MatrixXd scores = z * evecs;
    out.scores.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(ns)));
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < ns; ++c) out.scores[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = scores(i, c);
    out.loadings.assign(static_cast<std::size_t>(ns), std::vector<double>(static_cast<std::size_t>(ns)));
    for (int s = 0; s < ns; ++s)
        for (int c = 0; c < ns; ++c) out.loadings[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)] = evecs(s, c);

    // circle coordinates: Pearson correlation of each raw column with the
    // first two score columns
    out.correlations.resize(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) {
        for (int c = 0; c < 2; ++c) {
            double num = 0.0, den = 0.0;
            for (int i = 0; i < n; ++i) {
                num += z(i, s) * scores(i, c);
                den += scores(i, c) * scores(i, c);
            }
            const double zs = std::sqrt(static_cast<double>(n - 1) * den);
            out.correlations[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)] =
                zs > 0.0 ? num / zs : 0.0;
        }
    }
    return out;
}

namespace {
// type-7 quantile: linear interpolation at h = (n-1) p
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = static_cast<double>(n - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}
}  // namespace

std::vector<StationSummary> summary_stats(const ErrorTable& table) {
    if (table.design.n < 1) throw config_error("summary_stats: empty table");
    std::vector<StationSummary> out;
    for (int s = 0; s < table.n_stations(); ++s) {
        std::vector<double> col = table.station_column(s);
        std::sort(col.begin(), col.end());
        StationSummary sum;
        sum.station_id = table.station_ids[static_cast<std::size_t>(s)];
        sum.min = col.front();
        sum.max = col.back();
        sum.q25 = quantile_sorted(col, 0.25);
        sum.median = quantile_sorted(col, 0.5);
        sum.q75 = quantile_sorted(col, 0.75);
        double m = 0.0;
        for (double v : col) m += v;
        sum.mean = m / static_cast<double>(col.size());
        out.push_back(sum);
    }
    return out;
}

std::string scatter_long_csv(const ErrorTable& table) {
    CsvTable t;
    t.header = {"point", "station", "value"};
    for (int i = 0; i < table.design.n; ++i)
        for (int s = 0; s < table.n_stations(); ++s)
            t.rows.push_back({static_cast<double>(i),
                              static_cast<double>(table.station_ids[static_cast<std::size_t>(s)]),
                              table.response(i, s)});
    return csv_to_string(t);
}

}  // namespace tidecal
