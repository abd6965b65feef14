// Compares the serial reference sweep against the OpenMP fan-out on the
// reference topology and verifies that both produce the same report.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "iftw/scenario.hpp"

using namespace iftw;

namespace {

ScenarioFile make_scenario(double x_step, double y_step) {
    ScenarioFile sc;
    sc.config.road_width_m = 20;
    sc.config.road_length_m = 300;
    sc.config.theta_deg = 50;
    sc.config.phi_deg = 30;
    sc.config.slot_ticks = 100;
    sc.config.control_slot_ticks = 4;
    sc.config.detection_interval_ticks = 32;
    SweepGrid g;
    g.x_min = 0;
    g.x_max = 300;
    g.x_step = x_step;
    g.y_min = 0;
    g.y_max = 20;
    g.y_step = y_step;
    g.radii = {0.5, 1, 2, 3};
    sc.sweep = g;
    return sc;
}

double run_timed(const ScenarioFile& sc, int workers, SweepReport& out) {
    const auto t0 = std::chrono::steady_clock::now();
    out = run_sweep(sc, workers);
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    double step = argc > 1 ? std::atof(argv[1]) : 1.0;
    if (step <= 0) step = 1.0;
    const ScenarioFile sc = make_scenario(step, step);

    int max_workers = 4;
#ifdef _OPENMP
    max_workers = omp_get_max_threads();
#endif

    SweepReport serial;
    const double t_serial = run_timed(sc, 1, serial);
    std::printf("%-22s %8zu cells  %8.3f s  (%.0f cells/s)\n",
                "serial reference", serial.cells.size(), t_serial,
                serial.cells.size() / t_serial);

    for (int w = 2; w <= max_workers; w *= 2) {
        SweepReport par;
        const double t_par = run_timed(sc, w, par);
        const bool same = par.table_tsv() == serial.table_tsv();
        std::printf("%-19s %2d  %8zu cells  %8.3f s  (%.0f cells/s)  "
                    "speedup %.2fx  report %s\n",
                    "openmp workers", w, par.cells.size(), t_par,
                    par.cells.size() / t_par, t_serial / t_par,
                    same ? "identical" : "DIFFERS");
        if (!same) return 1;
    }
    return 0;
}
