#ifndef AIMC_ANALYSIS_HPP
#define AIMC_ANALYSIS_HPP

#include <aimc/mapping.hpp>
#include <aimc/parallel.hpp>
#include <aimc/pcm_device.hpp>
#include <aimc/quantize.hpp>
#include <aimc/random.hpp>
#include <aimc/tile.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aimc {

/// eps_M = mean_k ||y_k - y~_k|| / mean_k ||y_k||, one sample per column.
inline double mvm_error(const Matrix& ideal, const Matrix& actual)
{
    if (ideal.rows() != actual.rows() || ideal.cols() != actual.cols())
        throw std::invalid_argument("mvm_error: shape mismatch");
    if (ideal.cols() == 0)
        throw std::invalid_argument("mvm_error: need at least one output vector");
    const double denom = ideal.colwise().norm().mean();
    if (!(denom > 0.0))
        throw std::domain_error("mvm_error: ideal outputs are all zero");
    return (ideal - actual).colwise().norm().mean() / denom;
}

struct MeanSem {
    double mean = 0.0;
    double sem = 0.0;
};

inline MeanSem mean_sem(const std::vector<double>& v)
{
    MeanSem r;
    if (v.empty())
        return r;
    double s = 0.0;
    for (const double x : v)
        s += x;
    r.mean = s / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (const double x : v)
            ss += (x - r.mean) * (x - r.mean);
        r.sem = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
    return r;
}

/// Settings of the standard MVM error experiment.
struct MvmProtocol {
    TileConfig tile;
    PcmModelParams pcm;
    DeviceFaultSpec faults;
    Eigen::Index rows = 512;  ///< inputs
    Eigen::Index cols = 512;  ///< outputs
    double weight_std = 0.246;
    std::optional<GenNormSpec> weight_dist;  ///< gennorm weights instead of Gaussian
    Eigen::Index n_inputs = 100;
    Eigen::Index n_realizations = 10;
    ScaleMode scale_mode = ScaleMode::per_tile;
    double t_eval = 0.0;
    bool drift_compensation = true;
    std::uint64_t seed = 0;
    int threads = 1;

    /// Every nonideality off and both converters bypassed.
    static MvmProtocol ideal()
    {
        MvmProtocol p;
        p.tile = TileConfig::ideal();
        p.pcm = noiseless_pcm();
        return p;
    }
};

struct MvmErrorReport {
    double epsilon_m = 0.0;
    double sem = 0.0;
    Eigen::Index n_mvm = 0;
    double t_eval = 0.0;
    std::vector<double> per_realization;
};

/// Weights and inputs of realization r of the standard protocol.
inline std::pair<Matrix, Matrix> protocol_operands(const MvmProtocol& p, std::uint64_t r)
{
    RandomStream wrng(p.seed, "protocol.weights", r);
    Matrix w(p.cols, p.rows);
    if (p.weight_dist) {
        w = sample_gennorm(*p.weight_dist, p.cols, p.rows, wrng);
    } else {
        for (Eigen::Index k = 0; k < w.size(); ++k)
            w(k) = p.weight_std * wrng.normal();
    }
    RandomStream xrng(p.seed, "protocol.inputs", r);
    Matrix x(p.rows, p.n_inputs);
    for (Eigen::Index k = 0; k < x.size(); ++k)
        x(k) = xrng.uniform(-1.0, 1.0);
    return {std::move(w), std::move(x)};
}

template <typename PerRealization>
MvmErrorReport run_realizations(const MvmProtocol& p, PerRealization&& one)
{
    if (p.n_realizations < 1 || p.n_inputs < 1)
        throw std::invalid_argument("MvmProtocol: need at least one realization and one input");
    std::vector<double> eps(static_cast<std::size_t>(p.n_realizations));
    parallel_for(eps.size(), p.threads, [&](std::size_t r) { eps[r] = one(static_cast<std::uint64_t>(r)); });
    const MeanSem ms = mean_sem(eps);
    MvmErrorReport rep;
    rep.epsilon_m = ms.mean;
    rep.sem = ms.sem;
    rep.n_mvm = p.n_inputs * p.n_realizations;
    rep.t_eval = p.t_eval;
    rep.per_realization = std::move(eps);
    return rep;
}

/// eps*_M: Gaussian (or gennorm) weights mapped onto one tile, uniform
/// inputs in [-1, 1], alpha = 1. Each realization draws its own weights,
/// inputs, devices and MVM noise; the reported SEM is over realizations.
/// With drift compensation the reference is taken right after programming.
inline MvmErrorReport standard_mvm_error(const MvmProtocol& p)
{
    p.tile.validate();
    p.pcm.validate();
    p.faults.validate();
    return run_realizations(p, [&](std::uint64_t r) {
        const auto [w, x] = protocol_operands(p, r);
        MappingOptions opt;
        opt.scale_mode = p.scale_mode;
        opt.max_rows = p.tile.max_rows;
        opt.max_cols = p.tile.max_cols;
        AnalogLayer layer(map_weights(w, opt), p.tile);
        layer.program(p.pcm, p.faults, derive_seed(p.seed, "protocol.program", r));
        if (p.drift_compensation) {
            layer.realize(0.0, derive_seed(p.seed, "protocol.read0", r));
            layer.calibrate_drift(derive_seed(p.seed, "protocol.probe0", r));
        }
        layer.realize(p.t_eval, derive_seed(p.seed, "protocol.read", r));
        if (p.drift_compensation)
            layer.apply_drift_compensation(derive_seed(p.seed, "protocol.probe", r));
        RandomStream mvm_rng(p.seed, "protocol.mvm", r);
        return mvm_error(w * x, layer.forward(x, mvm_rng));
    });
}

enum class FixedPointOperand { weights, inputs, both };

/// Symmetric per-tensor quantization: scale by max |m|, quantize on [-1, 1].
inline Matrix quantize_tensor(const Matrix& m, int bits)
{
    const double scale = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    if (!(scale > 0.0))
        return m;
    return m.unaryExpr([&](double v) { return scale * quantize(v / scale, 1.0, bits); });
}

/// Digital fixed-point MVM on the standard operands.
inline MvmErrorReport fixed_point_baseline(int bits, FixedPointOperand what, const MvmProtocol& p)
{
    if (bits < 2)
        throw std::domain_error("fixed_point_baseline: need at least 2 bits");
    return run_realizations(p, [&](std::uint64_t r) {
        const auto [w, x] = protocol_operands(p, r);
        const bool qw = what != FixedPointOperand::inputs;
        const bool qx = what != FixedPointOperand::weights;
        const Matrix wq = qw ? quantize_tensor(w, bits) : w;
        const Matrix xq = qx ? x.unaryExpr([&](double v) { return quantize(v, 1.0, bits); }) : x;
        return mvm_error(w * x, wq * xq);
    });
}

/// sigma_out over half of one ADC bin.
inline double output_noise_bin_ratio(const TileConfig& c) { return c.out_noise / (0.5 * c.output_step()); }

/// A nonideality whose strength can be scaled by a boost factor s >= 1.
///
/// Parameters with a nonzero default are multiplied by s. Parameters whose
/// default is 0 are set to (s - 1) * unit so that s = 1 is the standard
/// model.
struct BoostParameter {
    std::string name;
    std::string description;
    double unit = 0.0;  ///< 0 for multiplicative parameters
    std::function<void(MvmProtocol&, double)> apply;

    /// Protocol with the parameter boosted by s.
    MvmProtocol boosted(const MvmProtocol& base, double s) const
    {
        MvmProtocol p = base;
        apply(p, s);
        return p;
    }
};

/// Evaluation time of the drift boost (with global compensation).
inline constexpr double drift_boost_time = 3600.0;

inline const std::vector<BoostParameter>& boost_registry()
{
    static const std::vector<BoostParameter> registry = [] {
        std::vector<BoostParameter> r;
        auto add = [&r](std::string name, std::string desc, double unit, std::function<void(MvmProtocol&, double)> f) {
            r.push_back({std::move(name), std::move(desc), unit, std::move(f)});
        };
        add("out_noise", "additive output noise sigma_out", 0.0, [](MvmProtocol& p, double s) { p.tile.out_noise *= s; });
        add("w_noise", "short-term weight noise sigma_w0", 0.0, [](MvmProtocol& p, double s) { p.tile.w_noise *= s; });
        add("prog_noise", "programming noise scale", 0.0, [](MvmProtocol& p, double s) { p.pcm.prog_noise_scale *= s; });
        add("read_noise", "1/f read noise scale", 0.0, [](MvmProtocol& p, double s) { p.pcm.read_noise_scale *= s; });
        add("drift", "drift exponent scale, evaluated at 1 h with global compensation", 0.0, [](MvmProtocol& p, double s) {
            p.pcm.drift_scale *= s;
            p.t_eval = drift_boost_time;
            p.drift_compensation = true;
        });
        add("ir_drop", "IR-drop scale", 0.0, [](MvmProtocol& p, double s) { p.tile.ir_drop_scale *= s; });
        add("dac_bits", "DAC step width (reported as effective bits)", 0.0,
            [](MvmProtocol& p, double s) { p.tile.dac_step_scale *= s; });
        add("adc_bits", "ADC step width (reported as effective bits)", 0.0,
            [](MvmProtocol& p, double s) { p.tile.adc_step_scale *= s; });
        add("s_shape", "S-shaped ADC mean curvature mu_zeta", 0.01,
            [](MvmProtocol& p, double s) { p.tile.s_shape_mu += (s - 1.0) * 0.01; });
        add("polarity", "negative-phase weight asymmetry sigma_a", 0.01,
            [](MvmProtocol& p, double s) { p.tile.polarity_sigma += (s - 1.0) * 0.01; });
        add("stuck_reset", "fraction of devices stuck at reset", 0.001,
            [](MvmProtocol& p, double s) { p.faults.frac_stuck_reset += (s - 1.0) * 0.001; });
        add("stuck_set", "fraction of devices stuck at set", 0.001,
            [](MvmProtocol& p, double s) { p.faults.frac_stuck_set += (s - 1.0) * 0.001; });
        add("stuck_random", "fraction of devices stuck at a random level", 0.001,
            [](MvmProtocol& p, double s) { p.faults.frac_stuck_random += (s - 1.0) * 0.001; });
        return r;
    }();
    return registry;
}

inline const BoostParameter& find_boost_parameter(const std::string& name)
{
    for (const auto& b : boost_registry())
        if (b.name == name)
            return b;
    throw std::invalid_argument("unknown sensitivity parameter: " + name);
}

/// The protocol a parameter is boosted from (the drift boost starts from
/// the 1 h compensated model).
inline MvmProtocol boost_baseline(const BoostParameter& param, const MvmProtocol& base)
{
    return param.boosted(base, 1.0);
}

struct SensitivityResult {
    std::string parameter;
    double boost_factor = 1.0;
    double achieved_epsilon = 0.0;
    double baseline_epsilon = 0.0;
    double target_epsilon = 0.0;
    bool bounded = true;  ///< false: target not reached within the bracket
    double accuracy_drop = 0.0;
    std::optional<double> x_star;
    std::vector<std::pair<double, double>> trace;  ///< (scale, epsilon) in evaluation order
};

struct BoostOptions {
    double tolerance = 0.002;
    double max_scale = 1e4;
    int max_bisections = 40;
};

/// Finds s with eps*_M(s) = target by bracket expansion over 1, 2, 4, ...
/// followed by bisection in log(s). Every evaluation uses the same seeds,
/// so eps(s) is a deterministic function.
inline SensitivityResult boost_to_target(const std::string& name, double target, const MvmProtocol& base,
                                         const BoostOptions& opt = {})
{
    const BoostParameter& param = find_boost_parameter(name);
    SensitivityResult res;
    res.parameter = name;
    res.target_epsilon = target;
    auto eval = [&](double s) {
        const double e = standard_mvm_error(param.boosted(base, s)).epsilon_m;
        res.trace.emplace_back(s, e);
        return e;
    };
    auto finish = [&](double s, double e, bool bounded) {
        res.boost_factor = s;
        res.achieved_epsilon = e;
        res.bounded = bounded;
        return res;
    };
    const double e1 = eval(1.0);
    res.baseline_epsilon = e1;
    if (std::abs(e1 - target) <= opt.tolerance)
        return finish(1.0, e1, true);
    if (e1 > target)
        return finish(1.0, e1, false);

    double lo = 1.0;
    double hi = 2.0;
    double e_hi = eval(hi);
    while (e_hi < target - opt.tolerance) {
        lo = hi;
        if (hi >= opt.max_scale)
            return finish(hi, e_hi, false);
        hi = std::min(hi * 2.0, opt.max_scale);
        e_hi = eval(hi);
    }
    if (std::abs(e_hi - target) <= opt.tolerance)
        return finish(hi, e_hi, true);

    double best_s = hi;
    double best_e = e_hi;
    for (int it = 0; it < opt.max_bisections; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double e = eval(mid);
        if (std::abs(e - target) < std::abs(best_e - target)) {
            best_s = mid;
            best_e = e;
        }
        if (std::abs(e - target) <= opt.tolerance)
            return finish(mid, e, true);
        (e < target ? lo : hi) = mid;
        if (hi / lo < 1.0 + 1e-9)
            break;
    }
    return finish(best_s, best_e, std::abs(best_e - target) <= opt.tolerance);
}

/// Boosted value of the parameter in its own units (effective bits for the
/// converter boosts).
inline double boosted_value(const std::string& name, double s, const MvmProtocol& base)
{
    const MvmProtocol p = find_boost_parameter(name).boosted(base, s);
    if (name == "out_noise")
        return p.tile.out_noise;
    if (name == "w_noise")
        return p.tile.w_noise;
    if (name == "prog_noise")
        return p.pcm.prog_noise_scale;
    if (name == "read_noise")
        return p.pcm.read_noise_scale;
    if (name == "drift")
        return p.pcm.drift_scale;
    if (name == "ir_drop")
        return p.tile.ir_drop_scale;
    if (name == "dac_bits")
        return effective_bits(p.tile.dac_bits, p.tile.dac_step_scale);
    if (name == "adc_bits")
        return effective_bits(p.tile.adc_bits, p.tile.adc_step_scale);
    if (name == "s_shape")
        return p.tile.s_shape_mu;
    if (name == "polarity")
        return p.tile.polarity_sigma;
    if (name == "stuck_reset")
        return p.faults.frac_stuck_reset;
    if (name == "stuck_set")
        return p.faults.frac_stuck_set;
    return p.faults.frac_stuck_random;
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        throw std::invalid_argument("median of an empty set");
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2)
        return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

struct IrDropCheckReport {
    double median_relative_deviation = 0.0;  ///< median over instances
    std::vector<double> relative_deviation;  ///< per instance
    double random_median_abs = 0.0;          ///< median |dy_exact| over all random columns
    double graded_deviation = 0.0;           ///< |dy_exact| of the graded column
    double graded_ratio = 0.0;               ///< graded_deviation / random_median_abs
};

/// Quadratic approximation against the exact nodal solve.
///
/// Each random instance is a rows x cols Gaussian matrix (std weight_std)
/// scaled to max-abs 1 and one uniform input vector; its relative deviation
/// is median_i |approx_i - exact_i| / median_i |exact_i|. The graded case is
/// one column with weights rising linearly from -1 (nearest the readout) to
/// 1 and every input at 1, whose ideal output is 0.
inline IrDropCheckReport irdrop_check(const MvmProtocol& p, int instances)
{
    if (instances < 1)
        throw std::invalid_argument("irdrop_check: need at least one instance");
    const double gamma = p.tile.ir_gamma;
    const double scale = p.tile.ir_drop_scale;
    IrDropCheckReport rep;
    rep.relative_deviation.resize(static_cast<std::size_t>(instances));
    std::vector<std::vector<double>> exact_abs(static_cast<std::size_t>(instances));
    parallel_for(static_cast<std::size_t>(instances), p.threads, [&](std::size_t r) {
        RandomStream rng(p.seed, "irdrop.instance", r);
        Matrix w(p.cols, p.rows);
        for (Eigen::Index k = 0; k < w.size(); ++k)
            w(k) = p.weight_std * rng.normal();
        w /= w.cwiseAbs().maxCoeff();
        Vector x(p.rows);
        for (Eigen::Index k = 0; k < x.size(); ++k)
            x(k) = rng.uniform(-1.0, 1.0);
        const Vector approx = ir_drop_approx(w, x, gamma, scale);
        const Vector exact = scale * ir_drop_exact(w, x, gamma);
        std::vector<double> diff(static_cast<std::size_t>(w.rows()));
        std::vector<double> ex(static_cast<std::size_t>(w.rows()));
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            diff[static_cast<std::size_t>(i)] = std::abs(approx(i) - exact(i));
            ex[static_cast<std::size_t>(i)] = std::abs(exact(i));
        }
        const double denom = median(ex);
        rep.relative_deviation[r] = denom > 0.0 ? median(diff) / denom : 0.0;
        exact_abs[r] = std::move(ex);
    });
    rep.median_relative_deviation = median(rep.relative_deviation);
    std::vector<double> all;
    for (const auto& v : exact_abs)
        all.insert(all.end(), v.begin(), v.end());
    rep.random_median_abs = median(all);
    Matrix graded(1, p.rows);
    for (Eigen::Index j = 0; j < p.rows; ++j)
        graded(0, j) = p.rows > 1 ? -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(p.rows - 1) : 0.0;
    rep.graded_deviation = std::abs(scale * ir_drop_exact(graded, Vector::Ones(p.rows), gamma)(0));
    rep.graded_ratio = rep.random_median_abs > 0.0 ? rep.graded_deviation / rep.random_median_abs : 0.0;
    return rep;
}

struct KurtosisPoint {
    double beta = 0.0;
    double analytic_kurtosis = 0.0;
    double sample_kurtosis = 0.0;  ///< mean over realizations of the weight matrices
    MvmErrorReport error;
};

/// eps_M for generalized-normal weights of each shape beta.
inline std::vector<KurtosisPoint> kurtosis_sweep(const MvmProtocol& base, const std::vector<double>& betas)
{
    std::vector<KurtosisPoint> out;
    for (const double beta : betas) {
        MvmProtocol p = base;
        p.weight_dist = GenNormSpec{beta, 1.0, 0.0};
        KurtosisPoint pt;
        pt.beta = beta;
        pt.analytic_kurtosis = gennorm_excess_kurtosis(beta);
        double k = 0.0;
        for (Eigen::Index r = 0; r < p.n_realizations; ++r)
            k += excess_kurtosis(protocol_operands(p, static_cast<std::uint64_t>(r)).first.reshaped());
        pt.sample_kurtosis = k / static_cast<double>(p.n_realizations);
        pt.error = standard_mvm_error(p);
        out.push_back(std::move(pt));
    }
    return out;
}

/// 1 - (test - fp) / (chance - fp).
inline double normalized_accuracy(double test_err, double fp_err, double chance_err)
{
    if (!(chance_err > fp_err))
        throw std::domain_error("normalized_accuracy: chance error must exceed the FP error");
    return 1.0 - (test_err - fp_err) / (chance_err - fp_err);
}

struct ThresholdResult {
    std::optional<double> x_star;
    bool open_ended = false;
    double range_bound = 0.0;
    std::vector<std::pair<double, double>> curve;  ///< (scale, normalized accuracy)
};

/// Log-spaced grid of `points` values from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int points)
{
    if (!(lo > 0.0) || !(hi >= lo) || points < 1)
        throw std::invalid_argument("log_grid: need 0 < lo <= hi and points >= 1");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k)
        g[static_cast<std::size_t>(k)] =
            points == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(points - 1));
    return g;
}

/// Evaluates accuracy(s) over the grid in order, normalizes by
/// baseline_acc and returns the first crossing below `level`, linearly
/// interpolated between the two grid points around it.
inline ThresholdResult threshold_scan(const std::vector<double>& grid, const std::function<double(double)>& accuracy,
                                      double baseline_acc, double level = 0.99)
{
    if (grid.empty())
        throw std::invalid_argument("threshold_scan: empty grid");
    if (!(baseline_acc > 0.0))
        throw std::domain_error("threshold_scan: baseline accuracy must be positive");
    ThresholdResult res;
    for (const double s : grid) {
        const double a = accuracy(s) / baseline_acc;
        if (!res.curve.empty() && !res.x_star) {
            const auto [s0, a0] = res.curve.back();
            if (a0 >= level && a < level)
                res.x_star = s0 + (a0 - level) / (a0 - a) * (s - s0);
        }
        if (res.curve.empty() && a < level)
            res.x_star = s;
        res.curve.emplace_back(s, a);
    }
    if (!res.x_star) {
        res.open_ended = true;
        res.range_bound = grid.back();
    }
    return res;
}

} // namespace aimc

#endif // AIMC_ANALYSIS_HPP
