#ifndef AIMC_CLI_HPP
#define AIMC_CLI_HPP

#include <aimc/analysis.hpp>
#include <aimc/checkpoint.hpp>
#include <aimc/config.hpp>
#include <aimc/csv.hpp>
#include <aimc/desk.hpp>
#include <aimc/parallel.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aimc {

namespace cli_detail {

struct Options {
    std::string command;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "results";
    std::optional<int> repeats;
    std::optional<int> threads;
    std::string config_path;
    std::vector<std::string> sets;
    bool disable_all = false;
    std::optional<double> t_eval;
    bool no_compensation = false;
    std::vector<int> bits{2, 3, 4, 5, 6, 7, 8};
    std::string operand = "weights";
    std::string param = "all";
    std::optional<double> target;
    std::vector<double> betas{0.5, 1.0, 2.0, 4.0, 8.0};
    int instances = 200;
    std::string checkpoint;
};

inline std::string fixed(double v, int prec = 4)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

inline RunConfig build_config(const Options& o)
{
    RunConfig c;
    if (!o.config_path.empty())
        load_config_file(o.config_path, c);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError(kv, "expected key=value");
        set_config_value(c, config_detail::trim(kv.substr(0, eq)), config_detail::trim(kv.substr(eq + 1)));
    }
    if (o.disable_all) {
        const int rows = c.protocol.tile.max_rows;
        const int cols = c.protocol.tile.max_cols;
        c.protocol.tile = TileConfig::ideal();
        c.protocol.tile.max_rows = rows;
        c.protocol.tile.max_cols = cols;
        c.protocol.pcm = noiseless_pcm();
        c.protocol.faults = DeviceFaultSpec{};
    }
    if (o.seed)
        c.seed = *o.seed;
    if (o.threads)
        c.threads = *o.threads;
    if (o.t_eval)
        c.protocol.t_eval = *o.t_eval;
    if (o.no_compensation)
        c.protocol.drift_compensation = false;
    if (o.target)
        c.sensitivity.target = *o.target;
    c.protocol.seed = c.seed;
    c.protocol.threads = c.threads;
    validate_config(c);
    return c;
}

class Report {
public:
    Report(const Options& o, const RunConfig& c) : opt_(o), cfg_(c)
    {
        std::filesystem::create_directories(o.out_dir);
    }

    std::vector<std::pair<std::string, std::string>> metadata() const
    {
        return {{"aimc", opt_.command}, {"config_hash", config_hash(cfg_)}, {"seed", std::to_string(cfg_.seed)}};
    }

    std::ofstream open(const std::string& name) const
    {
        const auto path = std::filesystem::path(opt_.out_dir) / name;
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot write " + path.string());
        return f;
    }

    std::ostringstream summary;

    void finish(std::ostream& out)
    {
        auto f = open(opt_.command + "_summary.txt");
        f << summary.str();
        out << summary.str();
    }

private:
    const Options& opt_;
    const RunConfig& cfg_;
};

inline void cmd_mvm_error(const Options& o, RunConfig c, std::ostream& out)
{
    if (o.repeats)
        c.protocol.n_realizations = *o.repeats;
    Report rep(o, c);
    const MvmErrorReport r = standard_mvm_error(c.protocol);
    {
        auto f = rep.open("mvm-error.csv");
        CsvWriter w(f, rep.metadata(), {"realization", "epsilon"});
        for (std::size_t k = 0; k < r.per_realization.size(); ++k)
            w.row({static_cast<long long>(k), r.per_realization[k]});
    }
    rep.summary << "standard MVM error, " << c.protocol.cols << "x" << c.protocol.rows << " weights, "
                << c.protocol.n_realizations << " realizations, t_eval=" << c.protocol.t_eval << " s"
                << (c.protocol.drift_compensation ? "" : " (no drift compensation)") << "\n";
    rep.summary << "epsilon_m=" << csv_number(r.epsilon_m) << " sem=" << csv_number(r.sem) << "\n";
    rep.finish(out);
}

inline FixedPointOperand parse_operand(const std::string& s)
{
    if (s == "weights")
        return FixedPointOperand::weights;
    if (s == "inputs")
        return FixedPointOperand::inputs;
    if (s == "both")
        return FixedPointOperand::both;
    throw std::invalid_argument("unknown operand " + s + " (weights, inputs or both)");
}

inline void cmd_fixed_point(const Options& o, RunConfig c, std::ostream& out)
{
    if (!o.t_eval)
        c.protocol.t_eval = drift_boost_time;
    if (o.repeats)
        c.protocol.n_realizations = *o.repeats;
    const FixedPointOperand what = parse_operand(o.operand);
    Report rep(o, c);
    const MvmErrorReport analog = standard_mvm_error(c.protocol);
    std::vector<std::pair<int, MvmErrorReport>> fx;
    for (const int b : o.bits)
        fx.emplace_back(b, fixed_point_baseline(b, what, c.protocol));
    {
        auto f = rep.open("fixed-point.csv");
        CsvWriter w(f, rep.metadata(), {"model", "bits", "operand", "epsilon", "sem"});
        w.row({std::string("analog"), 0LL, std::string("none"), analog.epsilon_m, analog.sem});
        for (const auto& [b, r] : fx)
            w.row({std::string("fixed_point"), static_cast<long long>(b), o.operand, r.epsilon_m, r.sem});
    }
    rep.summary << "analog epsilon_m=" << csv_number(analog.epsilon_m) << " sem=" << csv_number(analog.sem)
                << " at t_eval=" << c.protocol.t_eval << " s\n";
    for (const auto& [b, r] : fx)
        rep.summary << "fixed point " << b << " bit (" << o.operand << "): epsilon=" << fixed(r.epsilon_m) << "\n";
    // Equivalent precision by log-linear interpolation between neighbouring bit widths.
    std::optional<double> eq;
    for (std::size_t k = 1; k < fx.size() && !eq; ++k) {
        const double e0 = fx[k - 1].second.epsilon_m;
        const double e1 = fx[k].second.epsilon_m;
        if (e0 >= analog.epsilon_m && analog.epsilon_m >= e1 && e0 > e1) {
            const double u = std::log(e0 / analog.epsilon_m) / std::log(e0 / e1);
            eq = fx[k - 1].first + u * (fx[k].first - fx[k - 1].first);
        }
    }
    if (eq)
        rep.summary << "equivalent_bits=" << fixed(*eq, 2) << "\n";
    else
        rep.summary << "equivalent_bits=outside the scanned range\n";
    rep.finish(out);
}

inline void cmd_sensitivity(const Options& o, RunConfig c, std::ostream& out)
{
    if (o.repeats)
        c.protocol.n_realizations = *o.repeats;
    std::vector<std::string> names;
    if (o.param == "all")
        for (const auto& p : boost_registry())
            names.push_back(p.name);
    else
        names.push_back(find_boost_parameter(o.param).name);
    Report rep(o, c);
    std::vector<SensitivityResult> res;
    for (const auto& n : names)
        res.push_back(boost_to_target(n, c.sensitivity.target, c.protocol, c.sensitivity.boost));
    {
        auto f = rep.open("sensitivity.csv");
        CsvWriter w(f, rep.metadata(),
                    {"parameter", "boost_factor", "boosted_value", "baseline_epsilon", "achieved_epsilon",
                     "target_epsilon", "converged"});
        for (const auto& r : res)
            w.row({r.parameter, r.boost_factor, boosted_value(r.parameter, r.boost_factor, c.protocol),
                   r.baseline_epsilon, r.achieved_epsilon, r.target_epsilon, static_cast<long long>(r.bounded)});
    }
    {
        auto f = rep.open("sensitivity_trace.csv");
        CsvWriter w(f, rep.metadata(), {"parameter", "scale", "epsilon"});
        for (const auto& r : res)
            for (const auto& [s, e] : r.trace)
                w.row({r.parameter, s, e});
    }
    rep.summary << "boost to epsilon_m=" << csv_number(c.sensitivity.target) << "\n";
    for (const auto& r : res) {
        rep.summary << std::left << std::setw(14) << r.parameter << " boost=" << std::setw(10)
                    << csv_number(r.boost_factor) << " value=" << std::setw(12)
                    << csv_number(boosted_value(r.parameter, r.boost_factor, c.protocol))
                    << " epsilon_m=" << fixed(r.achieved_epsilon);
        if (!r.bounded)
            rep.summary << (r.baseline_epsilon > r.target_epsilon ? "  (baseline already above target)"
                                                                  : "  (target not reached)");
        rep.summary << "\n";
    }
    rep.finish(out);
}

inline double chance_error(const DeskTask& t) { return 1.0 - 1.0 / static_cast<double>(t.train.num_classes); }

inline void cmd_threshold(const Options& o, RunConfig c, std::ostream& out)
{
    if (o.repeats)
        c.hwa.eval_repeats = *o.repeats;
    std::vector<std::string> names;
    if (o.param == "all")
        for (const auto& p : boost_registry())
            names.push_back(p.name);
    else
        names.push_back(find_boost_parameter(o.param).name);

    const std::uint64_t seed = desk_seed(c.seed, 0);
    const DeskTask task = make_desk_task(c.hwa.task, c.hwa.hidden, c.hwa.test_fraction, seed);
    const DeskRun run = run_desk_seed(c, seed);
    const double chance = chance_error(task);
    const auto grid = log_grid(c.threshold.lo, c.threshold.hi, c.threshold.points);
    Report rep(o, c);

    struct Row {
        std::string name;
        ThresholdResult res;
        std::vector<double> errors;
    };
    std::vector<Row> rows;
    for (const auto& name : names) {
        const BoostParameter& param = find_boost_parameter(name);
        Row row{name, {}, {}};
        auto accuracy = [&](double s) {
            const MvmProtocol p = param.boosted(c.protocol, s);
            const auto rec = evaluate_at_time(to_inference(run.hwa_net, p.tile), task.test, {p.t_eval},
                                              c.hwa.eval_repeats, p.pcm, p.faults, derive_seed(seed, "threshold"),
                                              c.threads, p.drift_compensation);
            row.errors.push_back(rec[0].mean_error);
            return normalized_accuracy(rec[0].mean_error, run.fp_error, chance);
        };
        const double base = accuracy(1.0);
        row.errors.clear();
        row.res = threshold_scan(grid, accuracy, base, c.threshold.level);
        rows.push_back(std::move(row));
    }
    {
        auto f = rep.open("threshold.csv");
        CsvWriter w(f, rep.metadata(), {"parameter", "scale", "boosted_value", "test_error", "relative_accuracy"});
        for (const auto& r : rows)
            for (std::size_t k = 0; k < r.res.curve.size(); ++k)
                w.row({r.name, r.res.curve[k].first, boosted_value(r.name, r.res.curve[k].first, c.protocol),
                       r.errors[k], r.res.curve[k].second});
    }
    rep.summary << "iso-accuracy thresholds (" << csv_number(100.0 * c.threshold.level)
                << "% of the unboosted normalized accuracy), " << c.hwa.task << " network, FP error "
                << fixed(100.0 * run.fp_error, 2) << "%\n";
    for (const auto& r : rows) {
        rep.summary << std::left << std::setw(14) << r.name << " x*=";
        if (r.res.x_star)
            rep.summary << csv_number(*r.res.x_star) << " value="
                        << csv_number(boosted_value(r.name, *r.res.x_star, c.protocol));
        else
            rep.summary << ">" << csv_number(r.res.range_bound) << " (open-ended)";
        rep.summary << "\n";
    }
    rep.finish(out);
}

inline void cmd_kurtosis(const Options& o, RunConfig c, std::ostream& out)
{
    if (!o.t_eval)
        c.protocol.t_eval = drift_boost_time;
    c.protocol.n_realizations = o.repeats ? *o.repeats : 20;
    Report rep(o, c);
    const auto pts = kurtosis_sweep(c.protocol, o.betas);
    {
        auto f = rep.open("kurtosis.csv");
        CsvWriter w(f, rep.metadata(), {"beta", "excess_kurtosis", "sample_excess_kurtosis", "epsilon", "sem"});
        for (const auto& p : pts)
            w.row({p.beta, p.analytic_kurtosis, p.sample_kurtosis, p.error.epsilon_m, p.error.sem});
    }
    rep.summary << "MVM error vs weight-distribution shape at t_eval=" << c.protocol.t_eval << " s, "
                << c.protocol.n_realizations << " realizations\n";
    bool monotone = true;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const auto& p = pts[k];
        rep.summary << "beta=" << std::left << std::setw(5) << csv_number(p.beta) << " kurtosis=" << std::setw(8)
                    << fixed(p.analytic_kurtosis, 3) << " epsilon_m=" << fixed(p.error.epsilon_m) << " +- "
                    << fixed(p.error.sem) << "\n";
        if (k > 0) {
            const auto& q = pts[k - 1].error;
            if (p.error.epsilon_m - 2.0 * p.error.sem > q.epsilon_m + 2.0 * q.sem)
                monotone = false;
        }
    }
    rep.summary << "monotone_non_increasing=" << (monotone ? "yes" : "no") << "\n";
    rep.finish(out);
}

inline void cmd_irdrop_check(const Options& o, RunConfig c, std::ostream& out)
{
    Report rep(o, c);
    const IrDropCheckReport r = irdrop_check(c.protocol, o.instances);
    {
        auto f = rep.open("irdrop-check.csv");
        CsvWriter w(f, rep.metadata(), {"instance", "relative_deviation"});
        for (std::size_t k = 0; k < r.relative_deviation.size(); ++k)
            w.row({static_cast<long long>(k), r.relative_deviation[k]});
    }
    rep.summary << "quadratic IR-drop approximation vs exact solve, " << o.instances << " instances\n";
    rep.summary << "median_relative_deviation=" << csv_number(r.median_relative_deviation) << "\n";
    rep.summary << "random_median_abs_deviation=" << csv_number(r.random_median_abs) << "\n";
    rep.summary << "graded_deviation=" << csv_number(r.graded_deviation) << " ratio=" << fixed(r.graded_ratio, 1)
                << "\n";
    rep.finish(out);
}

struct ModelTimes {
    std::string model;
    std::vector<std::vector<TimeRecord>> per_seed;
};

inline void write_time_rows(CsvWriter& w, const ModelTimes& m, const std::vector<std::uint64_t>& seeds)
{
    for (std::size_t s = 0; s < m.per_seed.size(); ++s)
        for (const auto& rec : m.per_seed[s])
            w.row({static_cast<long long>(s), std::to_string(seeds[s]), m.model, rec.t_eval, rec.mean_error, rec.sem});
}

inline MeanSem seed_mean(const ModelTimes& m, std::size_t t)
{
    std::vector<double> v;
    for (const auto& s : m.per_seed)
        v.push_back(s[t].mean_error);
    return mean_sem(v);
}

inline void cmd_hwa_train(const Options& o, RunConfig c, std::ostream& out)
{
    if (o.repeats)
        c.hwa.eval_repeats = *o.repeats;
    const auto n = static_cast<std::size_t>(c.hwa.seeds);
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t k = 0; k < n; ++k)
        seeds[k] = desk_seed(c.seed, k);
    std::vector<DeskRun> runs(n);
    RunConfig inner = c;
    inner.threads = 1;
    parallel_for(n, c.threads, [&](std::size_t k) { runs[k] = run_desk_seed(inner, seeds[k]); });

    ModelTimes direct{"direct", {}};
    ModelTimes hwa{"hwa", {}};
    std::vector<double> fp;
    for (const auto& r : runs) {
        direct.per_seed.push_back(r.direct);
        hwa.per_seed.push_back(r.hwa);
        fp.push_back(r.fp_error);
    }
    Report rep(o, c);
    {
        auto f = rep.open("hwa-train.csv");
        CsvWriter w(f, rep.metadata(), {"run", "seed", "model", "t_eval", "test_error", "sem"});
        for (std::size_t s = 0; s < n; ++s)
            w.row({static_cast<long long>(s), std::to_string(seeds[s]), std::string("fp"), 0.0, fp[s], 0.0});
        write_time_rows(w, direct, seeds);
        write_time_rows(w, hwa, seeds);
    }
    {
        auto f = rep.open("hwa-train_history.csv");
        CsvWriter w(f, rep.metadata(), {"run", "epoch", "train_loss", "train_error"});
        for (std::size_t s = 0; s < n; ++s)
            for (const auto& e : runs[s].hwa_history)
                w.row({static_cast<long long>(s), static_cast<long long>(e.epoch), e.train_loss, e.train_error});
    }
    const MeanSem fp_ms = mean_sem(fp);
    const double chance = 1.0 - 1.0 / static_cast<double>(runs.empty() ? 2 : runs[0].fp.layers.back().w.rows());
    rep.summary << c.hwa.task << " network, " << n << " seeds, test error in % (mean +- SEM over seeds)\n";
    rep.summary << "fp              " << fixed(100.0 * fp_ms.mean, 2) << " +- " << fixed(100.0 * fp_ms.sem, 2) << "\n";
    rep.summary << "t_eval[s]       direct              hwa                 A*(direct) A*(hwa)\n";
    for (std::size_t t = 0; t < c.hwa.eval_times.size(); ++t) {
        const MeanSem d = seed_mean(direct, t);
        const MeanSem h = seed_mean(hwa, t);
        rep.summary << std::left << std::setw(16) << csv_number(c.hwa.eval_times[t]) << std::setw(20)
                    << (fixed(100.0 * d.mean, 2) + " +- " + fixed(100.0 * d.sem, 2)) << std::setw(20)
                    << (fixed(100.0 * h.mean, 2) + " +- " + fixed(100.0 * h.sem, 2)) << std::setw(11)
                    << fixed(normalized_accuracy(d.mean, fp_ms.mean, chance), 3)
                    << fixed(normalized_accuracy(h.mean, fp_ms.mean, chance), 3) << "\n";
    }
    if (!o.checkpoint.empty() && !runs.empty()) {
        Checkpoint ck = checkpoint_from(runs[0].hwa_net);
        ck.task = c.hwa.task;
        ck.hidden = c.hwa.hidden;
        ck.test_fraction = c.hwa.test_fraction;
        ck.split_seed = seeds[0];
        save_checkpoint(o.checkpoint, ck);
        rep.summary << "checkpoint of run 0 written to " << o.checkpoint << "\n";
    }
    rep.finish(out);
}

inline void write_single_eval(Report& rep, const std::string& name, const std::vector<TimeRecord>& recs,
                              const std::vector<std::pair<std::string, std::string>>& meta)
{
    auto f = rep.open(name + ".csv");
    CsvWriter w(f, meta, {"t_eval", "test_error", "sem"});
    for (const auto& r : recs)
        w.row({r.t_eval, r.mean_error, r.sem});
    for (const auto& r : recs)
        rep.summary << "t_eval=" << std::left << std::setw(12) << csv_number(r.t_eval)
                    << " test_error=" << fixed(100.0 * r.mean_error, 2) << "% +- " << fixed(100.0 * r.sem, 2)
                    << "%\n";
}

inline void cmd_evaluate(const Options& o, RunConfig c, std::ostream& out)
{
    if (o.checkpoint.empty())
        throw std::invalid_argument("evaluate needs --checkpoint");
    if (o.repeats)
        c.hwa.eval_repeats = *o.repeats;
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const DeskTask task = make_desk_task(ck.task, ck.hidden, ck.test_fraction, ck.split_seed);
    if (ck.layers.front().weights.cols() != task.test.dim())
        throw std::invalid_argument("checkpoint input size does not match task " + ck.task);
    Report rep(o, c);
    const auto recs = evaluate_at_time(inference_from(ck, c.protocol.tile), task.test, c.hwa.eval_times,
                                       c.hwa.eval_repeats, c.protocol.pcm, c.protocol.faults,
                                       derive_seed(c.seed, "evaluate"), c.threads, c.protocol.drift_compensation);
    rep.summary << "checkpoint " << o.checkpoint << " (" << ck.task << ", " << ck.layers.size() << " layers), "
                << c.hwa.eval_repeats << " repeats\n";
    write_single_eval(rep, "evaluate", recs, rep.metadata());
    rep.finish(out);
}

inline void cmd_direct_map(const Options& o, RunConfig c, std::ostream& out)
{
    if (o.repeats)
        c.hwa.eval_repeats = *o.repeats;
    const std::uint64_t seed = desk_seed(c.seed, 0);
    const DeskRun run = run_desk_seed(c, seed, false);
    Report rep(o, c);
    rep.summary << c.hwa.task << " network mapped directly, FP error " << fixed(100.0 * run.fp_error, 2) << "%\n";
    write_single_eval(rep, "direct-map", run.direct, rep.metadata());
    if (!o.checkpoint.empty()) {
        Checkpoint ck = checkpoint_from(run.direct_net);
        ck.task = c.hwa.task;
        ck.hidden = c.hwa.hidden;
        ck.test_fraction = c.hwa.test_fraction;
        ck.split_seed = seed;
        save_checkpoint(o.checkpoint, ck);
        rep.summary << "checkpoint written to " << o.checkpoint << "\n";
    }
    rep.finish(out);
}

} // namespace cli_detail

/// Runs the aimc command line. Exit codes: 0 success, 2 bad configuration
/// or arguments, 3 numeric or runtime failure.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    using namespace cli_detail;
    Options o;
    CLI::App app{"Analog in-memory computing crossbar simulator", "aimc"};
    app.require_subcommand(1);

    auto common = [&o](CLI::App* s) {
        s->add_option("--seed", o.seed, "global seed (default 0 or run.seed)");
        s->add_option("--out", o.out_dir, "output directory")->capture_default_str();
        s->add_option("--repeats", o.repeats, "realizations or evaluation repeats");
        s->add_option("--threads", o.threads, "worker threads");
        s->add_option("--config", o.config_path, "INI configuration file");
        s->add_option("--set", o.sets, "override one configuration key, section.key=value");
        s->add_flag("--disable-all", o.disable_all, "switch every nonideality off");
    };
    auto sub = [&](const std::string& name, const std::string& desc) {
        CLI::App* s = app.add_subcommand(name, desc);
        common(s);
        s->callback([&o, name] { o.command = name; });
        return s;
    };

    CLI::App* mvm = sub("mvm-error", "standard MVM error of the crossbar model");
    mvm->add_option("--t-eval", o.t_eval, "seconds after programming");
    mvm->add_flag("--no-compensation", o.no_compensation, "skip global drift compensation");

    CLI::App* fxp = sub("fixed-point", "analog MVM error against fixed-point baselines");
    fxp->add_option("--t-eval", o.t_eval, "seconds after programming (default 3600)");
    fxp->add_option("--bits", o.bits, "bit widths")->delimiter(',');
    fxp->add_option("--operand", o.operand, "weights, inputs or both")->capture_default_str();

    CLI::App* sens = sub("sensitivity", "boost one nonideality until the MVM error reaches a target");
    sens->add_option("--param", o.param, "parameter name or 'all'")->capture_default_str();
    sens->add_option("--target", o.target, "target MVM error (default 0.20)");
    sens->add_option("--t-eval", o.t_eval, "seconds after programming");

    CLI::App* thr = sub("threshold", "iso-accuracy boost threshold of a trained network");
    thr->add_option("--param", o.param, "parameter name or 'all'")->capture_default_str();
    thr->add_option("--t-eval", o.t_eval, "seconds after programming");

    CLI::App* kur = sub("kurtosis", "MVM error against generalized-normal weight shape");
    kur->add_option("--betas", o.betas, "shape parameters")->delimiter(',');
    kur->add_option("--t-eval", o.t_eval, "seconds after programming (default 3600)");

    CLI::App* ir = sub("irdrop-check", "quadratic IR-drop approximation against the exact solve");
    ir->add_option("--instances", o.instances, "random instances")->capture_default_str();

    CLI::App* hwa = sub("hwa-train", "FP, direct-mapped and hardware-aware trained networks over seeds");
    hwa->add_option("--checkpoint", o.checkpoint, "write the first run's trained network here");

    CLI::App* ev = sub("evaluate", "evaluate a saved network over time");
    ev->add_option("--checkpoint", o.checkpoint, "checkpoint directory")->required();
    ev->add_flag("--no-compensation", o.no_compensation, "skip global drift compensation");

    CLI::App* dm = sub("direct-map", "train FP, map directly and evaluate over time");
    dm->add_option("--checkpoint", o.checkpoint, "write the mapped network here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        const RunConfig c = build_config(o);
        if (o.command == "mvm-error")
            cmd_mvm_error(o, c, out);
        else if (o.command == "fixed-point")
            cmd_fixed_point(o, c, out);
        else if (o.command == "sensitivity")
            cmd_sensitivity(o, c, out);
        else if (o.command == "threshold")
            cmd_threshold(o, c, out);
        else if (o.command == "kurtosis")
            cmd_kurtosis(o, c, out);
        else if (o.command == "irdrop-check")
            cmd_irdrop_check(o, c, out);
        else if (o.command == "hwa-train")
            cmd_hwa_train(o, c, out);
        else if (o.command == "evaluate")
            cmd_evaluate(o, c, out);
        else if (o.command == "direct-map")
            cmd_direct_map(o, c, out);
        return 0;
    } catch (const ConfigError& e) {
        err << "aimc: configuration error at key '" << e.key() << "': " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "aimc: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "aimc: " << e.what() << "\n";
        return 3;
    }
}

} // namespace aimc

#endif // AIMC_CLI_HPP
