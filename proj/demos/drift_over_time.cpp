// Programs one 512x512 layer and prints its MVM error from 1 s to 1 year,
// with and without global drift compensation.
#include <aimc/analysis.hpp>

#include <cstdio>

int main()
{
    using namespace aimc;
    const double times[] = {1.0, 60.0, 3600.0, 86400.0, 2592000.0, 31536000.0};
    std::printf("%12s %14s %14s\n", "t [s]", "compensated", "uncompensated");
    for (const double t : times) {
        MvmProtocol p;
        p.t_eval = t;
        p.n_realizations = 3;
        p.threads = 3;
        const double on = standard_mvm_error(p).epsilon_m;
        p.drift_compensation = false;
        const double off = standard_mvm_error(p).epsilon_m;
        std::printf("%12.0f %14.4f %14.4f\n", t, on, off);
    }
}
