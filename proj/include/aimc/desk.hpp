#ifndef AIMC_DESK_HPP
#define AIMC_DESK_HPP

#include <aimc/config.hpp>
#include <aimc/datasets.hpp>
#include <aimc/hwa.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aimc {

/// The bundled classification task and its network shape.
struct DeskTask {
    Dataset train;
    Dataset test;
    std::vector<int> sizes;
};

inline DeskTask make_desk_task(const std::string& task, int hidden, double test_fraction, std::uint64_t split_seed)
{
    DeskTask t;
    Dataset all;
    if (task == "digits" || task == "digits-wide") {
        all = load_digits();
        const int h = task == "digits" ? hidden : 600;
        t.sizes = {static_cast<int>(all.dim()), h, all.num_classes};
    } else if (task == "spirals") {
        all = make_spirals(300, 3, 0.05, split_seed);
        t.sizes = {2, hidden, hidden, 3};
    } else {
        throw std::invalid_argument("unknown task " + task);
    }
    auto [train, test] = train_test_split(all, test_fraction, split_seed);
    t.train = std::move(train);
    t.test = std::move(test);
    return t;
}

/// Seed of run k of a multi-seed experiment.
inline std::uint64_t desk_seed(std::uint64_t seed, std::size_t k) { return derive_seed(seed, "desk.run", k); }

struct DeskRun {
    std::uint64_t seed = 0;
    double fp_error = 0.0;
    std::vector<TimeRecord> direct;
    std::vector<TimeRecord> hwa;
    FpNetwork fp;
    InferenceNetwork direct_net;
    HwaNetwork hwa_net;
    std::vector<EpochRecord> hwa_history;
};

/// Trains the FP reference, maps it directly, retrains it hardware-aware
/// and evaluates both analog versions at every configured time.
inline DeskRun run_desk_seed(const RunConfig& cfg, std::uint64_t seed, bool with_hwa = true)
{
    const HwaExperiment& h = cfg.hwa;
    const DeskTask task = make_desk_task(h.task, h.hidden, h.test_fraction, seed);
    DeskRun run;
    run.seed = seed;
    run.fp = FpNetwork::init(task.sizes, derive_seed(seed, "fp"));
    train_fp(run.fp, task.train, nullptr, h.fp_recipe, derive_seed(seed, "fp.train"));
    run.fp_error = classification_error(run.fp.forward(task.test.features), task.test.labels);

    const TileConfig& tile = cfg.protocol.tile;
    DirectMapOptions dm;
    dm.clip_sigmas = h.direct_clip_sigmas;
    dm.input_range_batches = h.schedule.input_range_init_batches;
    dm.batch_size = h.hwa_recipe.batch_size;
    dm.input_range_cap = h.schedule.input_range_cap;
    run.direct_net = direct_map(run.fp, task.train, tile, dm);
    run.direct = evaluate_at_time(run.direct_net, task.test, h.eval_times, h.eval_repeats, cfg.protocol.pcm,
                                  cfg.protocol.faults, derive_seed(seed, "eval.direct"), cfg.threads);
    if (!with_hwa)
        return run;

    run.hwa_net = make_hwa_network(run.fp, task.train, tile, cfg.protocol.pcm, h.schedule, h.hwa_recipe.batch_size,
                                   h.learn_gamma_tilde, h.learn_kappa);
    run.hwa_history = train_hwa(run.hwa_net, task.train, nullptr, h.hwa_recipe, h.schedule, derive_seed(seed, "hwa.train"),
                                h.distill ? &run.fp : nullptr, h.distill_spec);
    run.hwa = evaluate_at_time(to_inference(run.hwa_net, tile), task.test, h.eval_times, h.eval_repeats,
                               cfg.protocol.pcm, cfg.protocol.faults, derive_seed(seed, "eval.hwa"), cfg.threads);
    return run;
}

} // namespace aimc

#endif // AIMC_DESK_HPP
