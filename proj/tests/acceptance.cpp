// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include "gradcheck.hpp"

#include <aimc/aimc.hpp>
#include <aimc/cli.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace aimc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int threads()
{
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string fmt(const char* f, auto... v)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, v...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cli(std::vector<std::string> args, std::string* out = nullptr)
{
    args.insert(args.begin(), "aimc");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int code = run(static_cast<int>(argv.size()), argv.data(), o, e);
    if (out)
        *out = o.str() + e.str();
    return code;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("aimc_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

double sample_std(const Matrix& m)
{
    const double mean = m.mean();
    return std::sqrt((m.array() - mean).square().sum() / static_cast<double>(m.size() - 1));
}

Verdict standard_mvm_error_criterion()
{
    const auto dir = scratch("ac1");
    const auto t0 = std::chrono::steady_clock::now();
    std::string out;
    const int code = cli({"mvm-error", "--out", dir.string(), "--threads", std::to_string(threads())}, &out);
    const double secs = seconds_since(t0);
    fs::remove_all(dir);
    const auto pos = out.find("epsilon_m=");
    if (code != 0 || pos == std::string::npos)
        return {false, "mvm-error failed: " + out};
    const double eps = std::stod(out.substr(pos + 10));
    return {std::abs(eps - 0.15) <= 0.015 && secs < 60.0, fmt("eps*=%.4f (target 0.15 +- 0.015), %.1f s", eps, secs)};
}

Verdict bit_equivalence_criterion()
{
    const auto t0 = std::chrono::steady_clock::now();
    MvmProtocol p;
    p.threads = threads();
    p.t_eval = 3600.0;
    const double analog = standard_mvm_error(p).epsilon_m;
    const double e3 = fixed_point_baseline(3, FixedPointOperand::weights, p).epsilon_m;
    const double e4 = fixed_point_baseline(4, FixedPointOperand::weights, p).epsilon_m;
    const double e5 = fixed_point_baseline(5, FixedPointOperand::weights, p).epsilon_m;
    const double secs = seconds_since(t0);
    return {e5 < analog && analog < e3 && secs < 120.0,
            fmt("eps*(1 h)=%.4f, fixed point 3/4/5 bit = %.4f/%.4f/%.4f, %.1f s", analog, e3, e4, e5, secs)};
}

Verdict sensitivity_criterion()
{
    MvmProtocol p;
    p.threads = threads();
    bool ok = true;
    double ir_factor = 0.0;
    std::string worst;
    double worst_gap = 0.0;
    for (const auto& param : boost_registry()) {
        const SensitivityResult r = boost_to_target(param.name, 0.20, p);
        const double gap = std::abs(r.achieved_epsilon - 0.20);
        if (!r.bounded || gap > 0.005)
            ok = false;
        if (gap >= worst_gap) {
            worst_gap = gap;
            worst = param.name;
        }
        if (param.name == "ir_drop")
            ir_factor = r.boost_factor;
        std::printf("      %-13s boost %9.4g  eps %.4f%s\n", param.name.c_str(), r.boost_factor, r.achieved_epsilon,
                    r.bounded ? "" : "  (not converged)");
    }
    ok = ok && ir_factor >= 8.0 && ir_factor <= 16.0;
    return {ok, fmt("IR-drop boost %.2f (target [8, 16]); largest miss %.4f (%s)", ir_factor, worst_gap,
                    worst.c_str())};
}

Verdict output_noise_bin_criterion()
{
    const TileConfig c;
    const double ratio = output_noise_bin_ratio(c);
    return {std::abs(ratio - 1.0) <= 0.02,
            fmt("sigma_out / half ADC bin = %.4f / %.5f = %.4f", c.out_noise, 0.5 * c.output_step(), ratio)};
}

Verdict noise_statistics_criterion()
{
    PcmModelParams p;
    double worst = 0.0;
    for (const double frac : {0.1, 0.5, 1.0}) {
        RandomStream rng(1, "acceptance.prog", static_cast<std::uint64_t>(frac * 1000));
        const double g = frac * p.g_max;
        const Matrix gp = program_conductances(Matrix::Constant(1000, 100, g), p, rng);
        worst = std::max(worst, std::abs(sample_std(gp) / programming_noise_std(g, p) - 1.0));
    }
    PcmModelParams r = p;
    r.prog_noise_scale = 0.0;
    r.drift_scale = 0.0;
    for (const double frac : {0.05, 0.3, 0.9}) {
        const double g = frac * r.g_max;
        RandomStream prog(2), faults(3), drift(4), read(5, "acceptance.read", static_cast<std::uint64_t>(frac * 1000));
        const PcmArray arr(Matrix::Constant(1000, 100, g), r, {}, prog, faults, drift);
        const double sd = sample_std(arr.realize(3600.0, read));
        worst = std::max(worst, std::abs(sd / read_noise_std(g, r.read_noise_time(3600.0), r) - 1.0));
    }
    return {worst <= 0.02, fmt("largest relative std mismatch %.4f over 6 levels at N=1e5", worst)};
}

Verdict irdrop_criterion()
{
    MvmProtocol p;
    p.threads = threads();
    const IrDropCheckReport r = irdrop_check(p, 200);
    return {r.median_relative_deviation <= 0.25 && r.graded_ratio > 10.0,
            fmt("median relative deviation %.4f (tolerance 0.25); graded case %.3f = %.0fx random median",
                r.median_relative_deviation, r.graded_deviation, r.graded_ratio)};
}

Verdict kurtosis_criterion()
{
    MvmProtocol p;
    p.threads = threads();
    p.t_eval = 3600.0;
    p.n_realizations = 20;
    const auto pts = kurtosis_sweep(p, {0.5, 1.0, 2.0, 4.0, 8.0});
    bool ok = true;
    std::string series;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        series += fmt("%s%.4f+-%.4f", k ? ", " : "", pts[k].error.epsilon_m, pts[k].error.sem);
        if (k > 0) {
            const auto& a = pts[k - 1].error;
            const auto& b = pts[k].error;
            if (b.epsilon_m - 2.0 * b.sem > a.epsilon_m + 2.0 * a.sem)
                ok = false;
        }
    }
    return {ok, "eps(beta=0.5,1,2,4,8) = " + series};
}

Verdict drift_compensation_criterion()
{
    TileConfig c;
    c.out_noise = 0.0;
    c.w_noise = 0.0;
    c.ir_drop_scale = 0.0;
    PcmModelParams pcm = noiseless_pcm();
    pcm.drift_scale = 1.0;
    RandomStream wr(1);
    Matrix w(512, 512);
    for (Eigen::Index k = 0; k < w.size(); ++k)
        w(k) = 0.246 * wr.normal();
    w /= w.cwiseAbs().maxCoeff();
    Matrix x(512, 100);
    for (Eigen::Index k = 0; k < x.size(); ++k)
        x(k) = wr.uniform(-1.0, 1.0);
    TileStreams streams(2);
    ProgrammedTile tile(w, c, pcm, {}, streams);
    tile.devices().set_uniform_drift(0.05);
    const Periphery per = Periphery::unit(512);
    const Matrix probes = make_drift_probes(512);
    RandomStream rng(3);
    tile.realize(0.0, rng);
    drift_comp_calibrate(tile, probes, c, rng);
    const Matrix y0 = tile_forward(tile, x, per, c, rng);
    tile.realize(365.0 * 86400.0, rng);
    const double factor = drift_comp_apply(tile, probes, c, rng);
    const Matrix y1 = tile_forward(tile, x, per, c, rng);
    const double bin = factor * c.output_step();
    const Matrix diff = (y1 - y0).cwiseAbs();
    const double dev = diff.maxCoeff();
    // components clipped by the ADC before drift cannot be restored by a global scale
    const auto clipped = (y0.array().abs() >= c.out_bound).eval();
    const double dev_unclipped = (clipped).select(0.0, diff.array()).maxCoeff();
    return {dev <= bin, fmt("max |y(1 y) - y(0)| = %.4f, compensated ADC bin %.4f (factor %.4f); "
                            "%ld of %ld outputs at ADC full scale before drift, max deviation elsewhere %.4f",
                            dev, bin, factor, static_cast<long>(clipped.count()), static_cast<long>(y0.size()),
                            dev_unclipped)};
}

Verdict hwa_criterion()
{
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    cfg.hwa.eval_times = {3600.0};
    const std::size_t n = static_cast<std::size_t>(cfg.hwa.seeds);
    std::vector<DeskRun> runs(n);
    parallel_for(n, threads(), [&](std::size_t k) { runs[k] = run_desk_seed(cfg, desk_seed(cfg.seed, k)); });
    std::vector<double> fp, direct, hwa;
    for (const auto& r : runs) {
        fp.push_back(r.fp_error);
        direct.push_back(r.direct[0].mean_error);
        hwa.push_back(r.hwa[0].mean_error);
    }
    const MeanSem f = mean_sem(fp), d = mean_sem(direct), h = mean_sem(hwa);
    const double pooled = std::sqrt(d.sem * d.sem + h.sem * h.sem);
    const double secs = seconds_since(t0);
    const bool ok = h.mean < d.mean - 2.0 * pooled && (h.mean - f.mean) < (d.mean - f.mean) && secs < 900.0;
    return {ok, fmt("1 h test error: HWA %.2f%%, direct %.2f%%, pooled SEM %.2f%%, FP %.2f%% (%zu seeds, %.0f s)",
                    100.0 * h.mean, 100.0 * d.mean, 100.0 * pooled, 100.0 * f.mean, n, secs)};
}

Verdict gradient_criterion()
{
    double worst = 0.0;
    int checked = 0;
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const auto r = gradcheck::standard_gradient_check(seed);
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
    }
    return {worst < 1e-4, fmt("max relative error %.2e over %d partials", worst, checked)};
}

Verdict determinism_criterion()
{
    struct Case {
        std::string command;
        std::vector<std::string> args;
        std::string csv;
    };
    const std::vector<Case> cases{
        {"mvm-error", {"--seed", "7", "--t-eval", "3600", "--repeats", "3"}, "mvm-error.csv"},
        {"hwa-train", {"--seed", "7", "--set", "hwa.seeds=2", "--set", "hwa.eval_times=1,86400"}, "hwa-train.csv"},
    };
    std::string detail;
    bool ok = true;
    for (const auto& c : cases) {
        std::string first;
        bool same = true;
        for (int rep = 0; rep < 2; ++rep) {
            const auto dir = scratch("ac11_" + std::to_string(rep));
            std::vector<std::string> a{c.command, "--out", dir.string(), "--threads", rep ? std::to_string(threads()) : "1"};
            a.insert(a.end(), c.args.begin(), c.args.end());
            if (cli(a) != 0)
                same = false;
            const std::string csv = slurp(dir / c.csv);
            fs::remove_all(dir);
            if (rep == 0)
                first = csv;
            else if (csv != first || csv.empty())
                same = false;
        }
        ok = ok && same;
        detail += (detail.empty() ? "" : ", ") + c.command + (same ? " identical" : " differs");
    }
    return {ok, detail};
}

Verdict normalized_accuracy_criterion()
{
    const double a = normalized_accuracy(11.68, 5.80, 90.0);
    return {std::abs(a - 0.930) < 5e-4, fmt("A*(fp=5.80, test=11.68, chance=90) = %.4f", a)};
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"standard MVM error", standard_mvm_error_criterion},
        {"bit equivalence", bit_equivalence_criterion},
        {"sensitivity boost", sensitivity_criterion},
        {"output noise vs ADC bin", output_noise_bin_criterion},
        {"noise statistics", noise_statistics_criterion},
        {"IR-drop oracle", irdrop_criterion},
        {"kurtosis trend", kurtosis_criterion},
        {"drift compensation identity", drift_compensation_criterion},
        {"HWA training benefit", hwa_criterion},
        {"gradient check", gradient_criterion},
        {"determinism", determinism_criterion},
        {"normalized accuracy", normalized_accuracy_criterion},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Verdict v;
        try {
            v = criteria[k].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("AC%-2zu %s  %-28s %s\n", k + 1, v.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                    v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
