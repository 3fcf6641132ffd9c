// Timings of the OpenMP kernels against their serial reference
// implementations: design evaluation, Sobol sampling of the surrogate,
// and the batch objective evaluations inside PSO.

#include <omp.h>

#include <cstdio>
#include <vector>

#include "tidecal/doe.hpp"
#include "tidecal/kriging.hpp"
#include "tidecal/optimize.hpp"
#include "tidecal/sobol.hpp"
#include "tidecal/workbench.hpp"

using namespace tidecal;

namespace {

template <class F>
double time_of(F&& fn, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = omp_get_wtime();
        fn();
        best = std::min(best, omp_get_wtime() - t0);
    }
    return best;
}

void row(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_s * 1e3, parallel_s * 1e3,
                serial_s / parallel_s);
}

}  // namespace

int main() {
    const int threads = omp_get_max_threads();
    std::printf("threads: %d\n", threads);
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    const Scenario sc = Scenario::gironde_analog();
    const ForwardEvaluator fwd(sc);
    const auto obs = synthesize_observations(sc.true_params, sc.boundary, sc.stations, sc.grid,
                                             sc.c_damp, sc.noise_sigma, 7);

    const DesignMatrix design = lhs_sample(180, sc.bounds, 11);
    ErrorTable table;
    row("evaluate_design (180 rows)",
        time_of([&] { table = evaluate_design_serial(design, fwd, obs); }),
        time_of([&] { table = evaluate_design(design, fwd, obs); }));

    KrigingConfig kc;
    kc.restarts = 4;
    const std::vector<KrigingModel> models = fit_all(table, kc);
    const ObjectiveFn f = build_objective(ObjectiveSpec{GoalKind::mean_rmse, -1}, models);

    SobolConfig scfg;
    scfg.n_mc = 1 << 11;
    scfg.seed = 3;
    row("sobol surrogate (2^11)",
        time_of([&] { (void)sobol_indices_serial(f, sc.bounds, scfg); }),
        time_of([&] { (void)sobol_indices(f, sc.bounds, scfg); }));

    const ObjectiveFn ft = build_objective(ObjectiveSpec{GoalKind::mean_rmse, -1}, fwd, obs);
    PsoConfig pc;
    pc.swarm = 40;
    pc.iters = 40;
    pc.seed = 5;
    PsoConfig pc1 = pc;
    pc1.workers = 1;
    row("pso forward (40x40)",
        time_of([&] { (void)pso_minimize(ft, sc.bounds, pc1); }, 1),
        time_of([&] { (void)pso_minimize(ft, sc.bounds, pc); }, 1));
    return 0;
}
