#include "tidecal/doe.hpp"

#include <omp.h>

#include <atomic>
#include <cmath>
#include <numeric>

#include "tidecal/csv.hpp"
#include "tidecal/metrics.hpp"
#include "tidecal/rng.hpp"

namespace tidecal {

int default_design_size(int d) {
    if (d < 1) throw config_error("default_design_size: dimension must be >= 1");
    return 10 * d;
}

DesignMatrix lhs_sample(int n, const Bounds& bounds, std::uint64_t seed) {
    if (n < 1) throw config_error("lhs_sample: need n >= 1");
    bounds.validate();
    const int d = bounds.dim();

    DesignMatrix design;
    design.n = n;
    design.d = d;
    design.bounds = bounds;
    design.data.resize(static_cast<std::size_t>(n) * d);

    Rng rng(seed);
    std::vector<int> strata(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        std::iota(strata.begin(), strata.end(), 0);
        rng.shuffle(strata);
        const double lo = bounds.lower[static_cast<std::size_t>(j)];
        const double width = bounds.upper[static_cast<std::size_t>(j)] - lo;
        for (int i = 0; i < n; ++i) {
            const double u = (strata[static_cast<std::size_t>(i)] + rng.uniform01()) / n;
            design.data[static_cast<std::size_t>(i) * d + j] = lo + u * width;
        }
    }
    return design;
}

std::vector<double> ErrorTable::station_column(int station) const {
    std::vector<double> col(static_cast<std::size_t>(design.n));
    for (int r = 0; r < design.n; ++r) col[static_cast<std::size_t>(r)] = response(r, station);
    return col;
}

namespace {

void evaluate_row(const DesignMatrix& design, const ForwardEvaluator& fwd,
                  const std::vector<TimeSeries>& observations, ResponseMetric metric, int r,
                  double* out_row, std::vector<double>& scratch) {
    const ParameterVector p = design.params_at(r);
    scratch.resize(static_cast<std::size_t>(fwd.scenario().grid.n));
    for (std::size_t s = 0; s < observations.size(); ++s)
        out_row[s] = station_response_metric(fwd, p, static_cast<int>(s), observations[s].values,
                                             metric, scratch);
}

ErrorTable make_table(const DesignMatrix& design, const ForwardEvaluator& fwd,
                      ResponseMetric metric) {
    if (design.d != kNumParams)
        throw config_error("evaluate_design: design dimension must be 9");
    ErrorTable t;
    t.design = design;
    t.metric = metric;
    for (const auto& st : fwd.scenario().stations) t.station_ids.push_back(st.id);
    t.responses.resize(static_cast<std::size_t>(design.n) * t.station_ids.size());
    return t;
}

void check_observations(const ForwardEvaluator& fwd, const std::vector<TimeSeries>& observations) {
    if (observations.size() != fwd.scenario().stations.size())
        throw config_error("evaluate_design: observation station count mismatch");
    for (const auto& o : observations)
        if (static_cast<int>(o.values.size()) != fwd.scenario().grid.n)
            throw config_error("evaluate_design: observation length does not match grid");
}

}  // namespace

ErrorTable evaluate_design(const DesignMatrix& design, const ForwardEvaluator& fwd,
                           const std::vector<TimeSeries>& observations, ResponseMetric metric,
                           int workers) {
    check_observations(fwd, observations);
    ErrorTable table = make_table(design, fwd, metric);
    const std::size_t ns = table.station_ids.size();

    // First failing row (lowest index) wins; partial results are discarded.
    std::atomic<int> first_bad{design.n};
    std::string bad_message;

    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel num_threads(threads)
    {
        std::vector<double> scratch;
#pragma omp for schedule(dynamic)
        for (int r = 0; r < design.n; ++r) {
            if (first_bad.load(std::memory_order_relaxed) < r) continue;
            try {
                evaluate_row(design, fwd, observations, metric, r,
                             table.responses.data() + static_cast<std::size_t>(r) * ns, scratch);
            } catch (const std::exception& e) {
                int expected = first_bad.load();
                while (r < expected && !first_bad.compare_exchange_weak(expected, r)) {
                }
#pragma omp critical(tidecal_eval_err)
                if (first_bad.load() == r) bad_message = e.what();
            }
        }
    }
    if (first_bad.load() < design.n)
        throw compute_error("evaluate_design: row " + std::to_string(first_bad.load()) +
                            " failed: " + bad_message);
    return table;
}

ErrorTable evaluate_design_serial(const DesignMatrix& design, const ForwardEvaluator& fwd,
                                  const std::vector<TimeSeries>& observations,
                                  ResponseMetric metric) {
    check_observations(fwd, observations);
    ErrorTable table = make_table(design, fwd, metric);
    const std::size_t ns = table.station_ids.size();
    std::vector<double> scratch;
    for (int r = 0; r < design.n; ++r) {
        try {
            evaluate_row(design, fwd, observations, metric, r,
                         table.responses.data() + static_cast<std::size_t>(r) * ns, scratch);
        } catch (const std::exception& e) {
            throw compute_error("evaluate_design: row " + std::to_string(r) + " failed: " + e.what());
        }
    }
    return table;
}

std::string design_to_csv(const DesignMatrix& design) {
    CsvTable t;
    if (design.d == kNumParams) {
        for (const auto& n : ParameterVector::names()) t.header.push_back(n);
    } else {
        for (int j = 0; j < design.d; ++j) t.header.push_back("x" + std::to_string(j + 1));
    }
    for (int r = 0; r < design.n; ++r) {
        auto row = design.row(r);
        t.rows.emplace_back(row.begin(), row.end());
    }
    return csv_to_string(t);
}

DesignMatrix design_from_csv(const std::string& text, const Bounds& bounds) {
    CsvTable t = csv_from_string(text);
    DesignMatrix d;
    d.d = static_cast<int>(t.header.size());
    d.n = static_cast<int>(t.rows.size());
    if (d.d != bounds.dim()) throw config_error("design csv: column count does not match bounds");
    d.bounds = bounds;
    d.data.reserve(static_cast<std::size_t>(d.n) * d.d);
    for (const auto& row : t.rows) d.data.insert(d.data.end(), row.begin(), row.end());
    return d;
}

std::string error_table_to_csv(const ErrorTable& table) {
    CsvTable t;
    const auto& names = ParameterVector::names();
    for (int j = 0; j < table.design.d; ++j)
        t.header.push_back(table.design.d == kNumParams ? names[static_cast<std::size_t>(j)]
                                                        : "x" + std::to_string(j + 1));
    for (int id : table.station_ids) t.header.push_back("J_" + std::to_string(id));
    for (int r = 0; r < table.design.n; ++r) {
        std::vector<double> row;
        auto x = table.design.row(r);
        row.assign(x.begin(), x.end());
        auto resp = table.row_responses(r);
        row.insert(row.end(), resp.begin(), resp.end());
        t.rows.push_back(std::move(row));
    }
    return csv_to_string(t);
}

ErrorTable error_table_from_csv(const std::string& text, const Bounds& bounds) {
    CsvTable t = csv_from_string(text);
    const int d = bounds.dim();
    if (static_cast<int>(t.header.size()) <= d)
        throw config_error("error table csv: no response columns");
    ErrorTable table;
    table.design.d = d;
    table.design.n = static_cast<int>(t.rows.size());
    table.design.bounds = bounds;
    for (std::size_t c = static_cast<std::size_t>(d); c < t.header.size(); ++c) {
        const std::string& h = t.header[c];
        if (h.rfind("J_", 0) != 0) throw config_error("error table csv: bad response column " + h);
        table.station_ids.push_back(std::stoi(h.substr(2)));
    }
    for (const auto& row : t.rows) {
        table.design.data.insert(table.design.data.begin() + table.design.data.size(), row.begin(),
                                 row.begin() + d);
        table.responses.insert(table.responses.end(), row.begin() + d, row.end());
    }
    return table;
}

}  // namespace tidecal
