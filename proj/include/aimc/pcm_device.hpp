#ifndef AIMC_PCM_DEVICE_HPP
#define AIMC_PCM_DEVICE_HPP

#include <aimc/random.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace aimc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// clip(a * ln(x) + b, y_min, y_max). Arguments below 1e-6 are raised to
/// 1e-6 so that x = 0 lands on the clip ceiling instead of ln(0).
struct ClippedLinearFit {
    double a = 0.0;
    double b = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;

    static constexpr double min_argument = 1e-6;

    double operator()(double x) const
    {
        const double y = a * std::log(std::max(x, min_argument)) + b;
        return std::clamp(y, y_min, y_max);
    }

    void validate() const
    {
        if (!(y_min <= y_max))
            throw std::invalid_argument("ClippedLinearFit: y_min > y_max");
    }
};

/// Hardware-calibrated PCM statistics. Conductances in µS, times in seconds.
struct PcmModelParams {
    double prog_c0 = 0.26348;
    double prog_c1 = 1.9650;
    double prog_c2 = -1.1731;
    double g_max = 25.0;
    double g_min = 0.0;
    double t0 = 20.0;
    ClippedLinearFit mu_nu_fit{-0.0155, 0.0244, 0.049, 0.1};
    ClippedLinearFit sigma_nu_fit{-0.0125, -0.0059, 0.008, 0.045};
    double readnoise_c1 = 0.0088;
    double readnoise_c2 = -0.65;
    double readnoise_c3 = 0.2;
    double t_read = 250e-9;

    // Multipliers for sensitivity studies; 1 is the calibrated model.
    double prog_noise_scale = 1.0;
    double drift_scale = 1.0;
    double read_noise_scale = 1.0;

    void validate() const
    {
        if (!(g_max > g_min) || g_min < 0.0)
            throw std::invalid_argument("PcmModelParams: need g_max > g_min >= 0");
        if (!(t0 > 0.0))
            throw std::invalid_argument("PcmModelParams: t0 must be positive");
        if (!(t_read > 0.0))
            throw std::invalid_argument("PcmModelParams: t_read must be positive");
        if (prog_noise_scale < 0.0 || drift_scale < 0.0 || read_noise_scale < 0.0)
            throw std::invalid_argument("PcmModelParams: noise scales must be non-negative");
        mu_nu_fit.validate();
        sigma_nu_fit.validate();
    }

    /// Time over which 1/f read noise has accumulated when the array is read
    /// t_eval seconds after programming completed (programming ends at t0).
    double read_noise_time(double t_eval) const { return t_eval + t0; }
};

enum class FaultKind : std::uint8_t { none = 0, stuck_reset, stuck_set, stuck_random };

struct DeviceFaultSpec {
    double frac_stuck_reset = 0.0;
    double frac_stuck_set = 0.0;
    double frac_stuck_random = 0.0;

    bool any() const { return frac_stuck_reset > 0.0 || frac_stuck_set > 0.0 || frac_stuck_random > 0.0; }

    void validate() const
    {
        for (const double f : {frac_stuck_reset, frac_stuck_set, frac_stuck_random})
            if (f < 0.0 || f > 1.0)
                throw std::invalid_argument("DeviceFaultSpec: fractions must lie in [0, 1]");
        if (frac_stuck_reset + frac_stuck_set + frac_stuck_random > 1.0 + 1e-12)
            throw std::invalid_argument("DeviceFaultSpec: fractions sum above 1");
    }
};

using FaultMask = Eigen::Matrix<FaultKind, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

inline void check_target(double g, const PcmModelParams& p)
{
    if (!(g >= 0.0 && g <= p.g_max))
        throw std::domain_error("PCM target conductance outside [0, g_max]");
}

} // namespace detail

/// Standard deviation of the programming error for target conductance g (µS).
inline double programming_noise_std(double g_target, const PcmModelParams& p)
{
    detail::check_target(g_target, p);
    const double x = g_target / p.g_max;
    return p.prog_c0 + p.prog_c1 * x + p.prog_c2 * x * x;
}

/// g_P = g + s * sigma_P(g) * xi, clipped below at g_min. One normal draw per
/// device regardless of the noise scale.
inline Matrix program_conductances(const Matrix& g_targets, const PcmModelParams& p, RandomStream& rng)
{
    Matrix out(g_targets.rows(), g_targets.cols());
    for (Eigen::Index k = 0; k < g_targets.size(); ++k) {
        const double g = g_targets(k);
        const double sigma = programming_noise_std(g, p) * p.prog_noise_scale;
        out(k) = std::max(p.g_min, g + sigma * rng.normal());
    }
    return out;
}

inline double drift_mean(double g_target, const PcmModelParams& p) { return p.mu_nu_fit(g_target / p.g_max); }

inline double drift_std(double g_target, const PcmModelParams& p) { return p.sigma_nu_fit(g_target / p.g_max); }

/// nu ~ N(mu_nu(g), sigma_nu(g)), clipped below at 0, times drift_scale.
inline Matrix sample_drift_coefficients(const Matrix& g_targets, const PcmModelParams& p, RandomStream& rng)
{
    Matrix nu(g_targets.rows(), g_targets.cols());
    for (Eigen::Index k = 0; k < g_targets.size(); ++k) {
        const double g = g_targets(k);
        detail::check_target(g, p);
        const double v = drift_mean(g, p) + drift_std(g, p) * rng.normal();
        nu(k) = std::max(0.0, v) * p.drift_scale;
    }
    return nu;
}

/// Power-law drift g_P * ((t + t0) / t0)^(-nu).
inline double drift_conductance(double g_programmed, double nu, double t_eval, const PcmModelParams& p)
{
    if (t_eval < 0.0)
        throw std::domain_error("drift_conductance: negative evaluation time");
    return g_programmed * std::pow((t_eval + p.t0) / p.t0, -nu);
}

/// Q_s(g) = clip(c1 * (g / g_max)^c2, 0, c3).
inline double read_noise_qs(double g_target, const PcmModelParams& p)
{
    const double x = g_target / p.g_max;
    if (x <= 0.0)
        return p.readnoise_c3;
    return std::clamp(p.readnoise_c1 * std::pow(x, p.readnoise_c2), 0.0, p.readnoise_c3);
}

/// sqrt(ln((t + T_read) / (2 T_read))), or 0 when t <= T_read.
inline double read_noise_time_factor(double t, const PcmModelParams& p)
{
    if (t <= p.t_read)
        return 0.0;
    return std::sqrt(std::log((t + p.t_read) / (2.0 * p.t_read)));
}

/// 1/f read-noise std after noise has accumulated for time t (seconds).
inline double read_noise_std(double g_target, double t, const PcmModelParams& p)
{
    detail::check_target(g_target, p);
    return g_target * read_noise_qs(g_target, p) * read_noise_time_factor(t, p) * p.read_noise_scale;
}

/// Draws fault locations uniformly without replacement. The first
/// round(f_reset N) shuffled positions are stuck at reset, the next
/// round(f_set N) at set, then round(f_random N) at a random level.
inline FaultMask draw_faults(Eigen::Index rows, Eigen::Index cols, const DeviceFaultSpec& spec, RandomStream& rng)
{
    spec.validate();
    FaultMask mask = FaultMask::Constant(rows, cols, FaultKind::none);
    const auto n = static_cast<std::size_t>(rows * cols);
    if (!spec.any() || n == 0)
        return mask;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Fisher-Yates with our own index draws so the permutation is the same
    // on every standard library.
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.index(i + 1)]);
    const auto count = [n](double f) { return std::min(n, static_cast<std::size_t>(std::llround(f * static_cast<double>(n)))); };
    const std::size_t n_reset = count(spec.frac_stuck_reset);
    const std::size_t n_set = std::min(n - n_reset, count(spec.frac_stuck_set));
    const std::size_t n_random = std::min(n - n_reset - n_set, count(spec.frac_stuck_random));
    std::size_t k = 0;
    for (; k < n_reset; ++k)
        mask(static_cast<Eigen::Index>(order[k])) = FaultKind::stuck_reset;
    for (; k < n_reset + n_set; ++k)
        mask(static_cast<Eigen::Index>(order[k])) = FaultKind::stuck_set;
    for (; k < n_reset + n_set + n_random; ++k)
        mask(static_cast<Eigen::Index>(order[k])) = FaultKind::stuck_random;
    return mask;
}

/// Programmed state of an array of active PCM devices.
///
/// Faulted devices are overridden after programming: stuck-reset devices sit
/// at 0 and neither drift nor pick up read noise, stuck-set and stuck-random
/// devices drift and are read like any other device at their stuck level.
class PcmArray {
public:
    PcmArray() = default;

    /// `prog_rng` draws programming noise, `fault_rng` fault positions and
    /// stuck-random levels, `drift_rng` the drift exponents.
    PcmArray(const Matrix& g_targets, const PcmModelParams& params, const DeviceFaultSpec& faults,
             RandomStream& prog_rng, RandomStream& fault_rng, RandomStream& drift_rng)
        : params_(params)
    {
        params_.validate();
        g_programmed_ = program_conductances(g_targets, params_, prog_rng);
        effective_targets_ = g_targets;
        faults_ = draw_faults(g_targets.rows(), g_targets.cols(), faults, fault_rng);
        if (faults.any()) {
            for (Eigen::Index k = 0; k < faults_.size(); ++k) {
                switch (faults_(k)) {
                case FaultKind::stuck_reset:
                    g_programmed_(k) = 0.0;
                    effective_targets_(k) = 0.0;
                    break;
                case FaultKind::stuck_set:
                    g_programmed_(k) = params_.g_max;
                    effective_targets_(k) = params_.g_max;
                    break;
                case FaultKind::stuck_random: {
                    const double g = fault_rng.uniform(0.0, params_.g_max);
                    g_programmed_(k) = g;
                    effective_targets_(k) = g;
                    break;
                }
                case FaultKind::none:
                    break;
                }
            }
        }
        nu_ = sample_drift_coefficients(effective_targets_, params_, drift_rng);
        read_prefactor_.resize(g_targets.rows(), g_targets.cols());
        for (Eigen::Index k = 0; k < g_targets.size(); ++k) {
            const double g = effective_targets_(k);
            read_prefactor_(k) = g * read_noise_qs(g, params_) * params_.read_noise_scale;
        }
    }

    /// Conductances read at t_eval seconds after programming completed:
    /// clip(g_D(t_eval) + sigma_read * xi, g_min, inf).
    Matrix realize(double t_eval, RandomStream& read_rng) const
    {
        if (t_eval < 0.0)
            throw std::domain_error("PcmArray::realize: negative evaluation time");
        const double log_ratio = std::log((t_eval + params_.t0) / params_.t0);
        const double time_factor = read_noise_time_factor(params_.read_noise_time(t_eval), params_);
        Matrix g(g_programmed_.rows(), g_programmed_.cols());
        for (Eigen::Index k = 0; k < g.size(); ++k) {
            const double xi = read_rng.normal();
            if (faults_(k) == FaultKind::stuck_reset) {
                g(k) = 0.0;
                continue;
            }
            const double drifted = g_programmed_(k) * std::exp(-nu_(k) * log_ratio);
            g(k) = std::max(params_.g_min, drifted + read_prefactor_(k) * time_factor * xi);
        }
        return g;
    }

    const Matrix& programmed() const noexcept { return g_programmed_; }
    const Matrix& targets() const noexcept { return effective_targets_; }
    const Matrix& drift_coefficients() const noexcept { return nu_; }
    const FaultMask& faults() const noexcept { return faults_; }
    const PcmModelParams& params() const noexcept { return params_; }

    /// Replaces every drift exponent (used for controlled drift experiments).
    void set_uniform_drift(double nu) { nu_.setConstant(nu); }

private:
    PcmModelParams params_;
    Matrix g_programmed_;
    Matrix effective_targets_;
    Matrix nu_;
    Matrix read_prefactor_;
    FaultMask faults_;
};

/// Program, fault, drift and read in one call, all draws from one stream.
inline Matrix realize_conductances(const Matrix& g_targets, double t_eval, const PcmModelParams& params,
                                   const DeviceFaultSpec& faults, RandomStream& rng)
{
    const PcmArray array(g_targets, params, faults, rng, rng, rng);
    return array.realize(t_eval, rng);
}

} // namespace aimc

#endif // AIMC_PCM_DEVICE_HPP
