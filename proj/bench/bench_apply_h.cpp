// Timing comparison between the OpenMP apply_h kernel and the serial
// reference, on synthetic models large enough for the parallel path to
// matter. Usage: bench_apply_h [num_states] [num_actions] [iters]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "replay_shaper/effective_model.hpp"
#include "replay_shaper/replay.hpp"
#include "replay_shaper/verify.hpp"

using namespace replay_shaper;

namespace {

double time_loop(const EffectiveModel& model, const QTable& q0, int iters, bool serial,
                 double& checksum) {
    QTable q = q0;
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i) q = serial ? apply_h_serial(model, q) : apply_h(model, q);
    auto stop = std::chrono::steady_clock::now();
    checksum = q.max_norm();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    int num_states = argc > 1 ? std::atoi(argv[1]) : 2000;
    int num_actions = argc > 2 ? std::atoi(argv[2]) : 8;
    int iters = argc > 3 ? std::atoi(argv[3]) : 200;

    Rng rng(7);
    auto mdp = random_mdp(rng, num_states, num_actions, 0.95);
    auto w = random_weights(mdp, rng);
    auto model = effective_model(mdp, w, 0.5);

    QTable q0(num_states, num_actions);
    std::uniform_real_distribution<double> unif(-50.0, 50.0);
    for (double& x : q0.data()) x = unif(rng);

    // warm up once so first-touch page faults do not land in the timed loop
    double sum_serial = 0.0, sum_parallel = 0.0;
    (void)apply_h(model, q0);
    double t_serial = time_loop(model, q0, iters, true, sum_serial);
    double t_parallel = time_loop(model, q0, iters, false, sum_parallel);

    std::printf("states=%d actions=%d iters=%d\n", num_states, num_actions, iters);
    std::printf("serial:   %9.2f ms  (%.4f ms/iter)\n", t_serial, t_serial / iters);
    std::printf("parallel: %9.2f ms  (%.4f ms/iter)  speedup %.2fx\n", t_parallel,
                t_parallel / iters, t_serial / t_parallel);
    if (sum_serial != sum_parallel)
        std::printf("note: checksums differ by %.3e (floating-point reduction order)\n",
                    sum_serial - sum_parallel);
    return 0;
}
