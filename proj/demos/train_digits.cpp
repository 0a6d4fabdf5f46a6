// Trains the 64-16-10 digits network once in floating point, maps it
// directly onto tiles and retrains it hardware-aware, then reports test
// error over one year of drift.
#include <aimc/desk.hpp>

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv)
{
    using namespace aimc;
    RunConfig cfg;
    cfg.threads = 4;
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
    const DeskRun run = run_desk_seed(cfg, seed);
    std::printf("FP test error %.2f%%\n", 100.0 * run.fp_error);
    std::printf("%12s %10s %10s\n", "t [s]", "direct", "hwa");
    for (std::size_t k = 0; k < run.direct.size(); ++k)
        std::printf("%12.0f %9.2f%% %9.2f%%\n", run.direct[k].t_eval, 100.0 * run.direct[k].mean_error,
                    100.0 * run.hwa[k].mean_error);
}
