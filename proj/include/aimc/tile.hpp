#ifndef AIMC_TILE_HPP
#define AIMC_TILE_HPP

#include <aimc/ir_drop.hpp>
#include <aimc/pcm_device.hpp>
#include <aimc/quantize.hpp>
#include <aimc/random.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace aimc {

enum class IrDropMode { approximate, exact };

/// Nonideality and range parameters of one crossbar tile. Defaults are the
/// standard PCM inference model.
struct TileConfig {
    int dac_bits = 8;
    int adc_bits = 8;
    bool dac_enabled = true;  ///< false bypasses input quantization and clipping
    bool adc_enabled = true;  ///< false bypasses output quantization and clipping
    double dac_step_scale = 1.0;
    double adc_step_scale = 1.0;
    double out_bound = 10.0;
    double out_noise = 0.04;
    double w_noise = 0.0175;
    double ir_drop_scale = 1.0;
    double ir_gamma = 0.35 * 5e-6;  ///< wire resistance (Ohm) times g_max (S)
    IrDropMode ir_drop_mode = IrDropMode::approximate;
    double s_shape_mu = 0.0;
    double s_shape_sigma = 0.0;
    double polarity_sigma = 0.0;
    int max_rows = 512;
    int max_cols = 512;
    double v_read = 0.2;
    double drift_comp_max_factor = 10.0;

    void validate() const
    {
        if (dac_bits < 2 || adc_bits < 2)
            throw std::invalid_argument("TileConfig: converters need at least 2 bits");
        if (!(out_bound > 0.0))
            throw std::invalid_argument("TileConfig: out_bound must be positive");
        if (!(dac_step_scale > 0.0) || !(adc_step_scale > 0.0))
            throw std::invalid_argument("TileConfig: step scales must be positive");
        for (const double v : {out_noise, w_noise, ir_drop_scale, ir_gamma, s_shape_mu, s_shape_sigma, polarity_sigma})
            if (!(v >= 0.0))
                throw std::invalid_argument("TileConfig: noise scales must be non-negative");
        if (max_rows < 1 || max_cols < 1)
            throw std::invalid_argument("TileConfig: tile size must be positive");
        if (!(v_read > 0.0))
            throw std::invalid_argument("TileConfig: v_read must be positive");
        if (!(drift_comp_max_factor >= 1.0))
            throw std::invalid_argument("TileConfig: drift_comp_max_factor must be >= 1");
    }

    /// Every nonideality off and both converters bypassed.
    static TileConfig ideal()
    {
        TileConfig c;
        c.dac_enabled = false;
        c.adc_enabled = false;
        c.out_noise = 0.0;
        c.w_noise = 0.0;
        c.ir_drop_scale = 0.0;
        return c;
    }

    double input_step() const { return quantization_step(1.0, dac_bits) * dac_step_scale; }
    double output_step() const { return quantization_step(out_bound, adc_bits) * adc_step_scale; }
};

/// PCM parameters with programming noise, drift and read noise switched off.
inline PcmModelParams noiseless_pcm()
{
    PcmModelParams p;
    p.prog_noise_scale = 0.0;
    p.drift_scale = 0.0;
    p.read_noise_scale = 0.0;
    return p;
}

/// Independent streams used while programming one tile.
struct TileStreams {
    RandomStream programming;
    RandomStream faults;
    RandomStream drift;
    RandomStream polarity;
    RandomStream adc_shape;

    explicit TileStreams(std::uint64_t seed, std::uint64_t tile_index = 0)
        : programming(seed, "tile.programming", tile_index),
          faults(seed, "tile.faults", tile_index),
          drift(seed, "tile.drift", tile_index),
          polarity(seed, "tile.polarity", tile_index),
          adc_shape(seed, "tile.adc_shape", tile_index)
    {}
};

/// Digital periphery of one tile: y = beta + alpha * gamma_i * ADC(...).
struct Periphery {
    double alpha = 1.0;
    Vector gamma;
    Vector beta;

    static Periphery unit(Eigen::Index out_size)
    {
        return {1.0, Vector::Ones(out_size), Vector::Zero(out_size)};
    }
};

/// One programmed crossbar tile.
///
/// Weights are stored out x in: row i is crossbar column i (one output),
/// column j is crossbar row j (one input). Realized weights are the
/// normalized signed conductances g/g_max * sign(w) at the last realization
/// time; they are not clipped above.
class ProgrammedTile {
public:
    ProgrammedTile() = default;

    /// Programs `normalized_weights` (entries in [-1, 1]) onto PCM devices.
    ProgrammedTile(const Matrix& normalized_weights, const TileConfig& config, const PcmModelParams& pcm,
                   const DeviceFaultSpec& faults, TileStreams& streams)
    {
        config.validate();
        check_shape(normalized_weights, config);
        if (normalized_weights.size() > 0 && normalized_weights.cwiseAbs().maxCoeff() > 1.0)
            throw std::domain_error("ProgrammedTile: normalized weights must lie in [-1, 1]");
        sign_ = normalized_weights.unaryExpr([](double w) { return w < 0.0 ? -1.0 : 1.0; });
        const Matrix targets = normalized_weights.cwiseAbs() * pcm.g_max;
        devices_ = PcmArray(targets, pcm, faults, streams.programming, streams.faults, streams.drift);
        draw_shape_and_polarity(config, streams);
        weights_ = normalized_weights;
    }

    /// A tile whose realized weights are exactly `weights` and never change.
    static ProgrammedTile exact(const Matrix& weights, const TileConfig& config, std::uint64_t seed = 0)
    {
        config.validate();
        check_shape(weights, config);
        ProgrammedTile tile;
        tile.weights_ = weights;
        tile.sign_ = weights.unaryExpr([](double w) { return w < 0.0 ? -1.0 : 1.0; });
        TileStreams streams(seed);
        tile.draw_shape_and_polarity(config, streams);
        tile.realized_at_ = 0.0;
        return tile;
    }

    /// Applies drift and long-term read noise for evaluation time t_eval.
    /// Clears the drift compensation factor (the reference is kept).
    void realize(double t_eval, RandomStream& read_rng)
    {
        if (devices_.programmed().size() == 0) {
            realized_at_ = t_eval;
            comp_factor_ = 1.0;
            return;
        }
        const Matrix g = devices_.realize(t_eval, read_rng);
        weights_ = (g / devices_.params().g_max).cwiseProduct(sign_);
        realized_at_ = t_eval;
        comp_factor_ = 1.0;
    }

    Eigen::Index in_size() const noexcept { return weights_.cols(); }
    Eigen::Index out_size() const noexcept { return weights_.rows(); }

    const Matrix& weights() const noexcept { return weights_; }
    const PcmArray& devices() const noexcept { return devices_; }
    PcmArray& devices() noexcept { return devices_; }
    const Vector& adc_shape() const noexcept { return zeta_; }
    double adc_shape_prefactor() const noexcept { return shape_prefactor_; }
    const Matrix& polarity_factors() const noexcept { return polarity_; }
    bool has_polarity() const noexcept { return polarity_.size() > 0; }
    std::optional<double> realized_at() const noexcept { return realized_at_; }

    std::optional<double> drift_reference() const noexcept { return s_ref_; }
    void set_drift_reference(std::optional<double> s) noexcept { s_ref_ = s; }
    double drift_factor() const noexcept { return comp_factor_; }
    void set_drift_factor(double f) noexcept { comp_factor_ = f; }

private:
    static void check_shape(const Matrix& w, const TileConfig& config)
    {
        if (w.cols() > config.max_rows || w.rows() > config.max_cols)
            throw std::invalid_argument("ProgrammedTile: weight block exceeds the tile size");
    }

    void draw_shape_and_polarity(const TileConfig& config, TileStreams& streams)
    {
        const Eigen::Index d_out = sign_.rows();
        zeta_.resize(d_out);
        for (Eigen::Index i = 0; i < d_out; ++i)
            zeta_(i) = config.s_shape_mu * (1.0 + config.s_shape_sigma * streams.adc_shape.normal());
        shape_prefactor_ = 1.0;
        if (d_out > 0 && config.s_shape_mu > 0.0) {
            const double s = 1.0 + 2.0 / static_cast<double>(d_out) * zeta_.cwiseAbs().sum();
            shape_prefactor_ = s * s;
        }
        if (config.polarity_sigma > 0.0) {
            polarity_.resize(sign_.rows(), sign_.cols());
            for (Eigen::Index k = 0; k < polarity_.size(); ++k)
                polarity_(k) = config.polarity_sigma * streams.polarity.normal();
        } else {
            polarity_.resize(0, 0);
        }
    }

    Matrix sign_;
    PcmArray devices_;
    Matrix weights_;
    Matrix polarity_;
    Vector zeta_;
    double shape_prefactor_ = 1.0;
    std::optional<double> realized_at_;
    std::optional<double> s_ref_;
    double comp_factor_ = 1.0;
};

/// S-shaped ADC response P * z / (1 + |zeta_i z|), P = (1 + 2/d_out sum|zeta|)^2.
inline Matrix s_shape_adc(const Matrix& z, const Vector& zeta)
{
    if (z.rows() != zeta.size())
        throw std::invalid_argument("s_shape_adc: shape mismatch");
    const Eigen::Index d_out = zeta.size();
    double prefactor = 1.0;
    if (d_out > 0) {
        const double s = 1.0 + 2.0 / static_cast<double>(d_out) * zeta.cwiseAbs().sum();
        prefactor = s * s;
    }
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index b = 0; b < z.cols(); ++b)
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            out(i, b) = prefactor * z(i, b) / (1.0 + std::abs(zeta(i) * z(i, b)));
    return out;
}

namespace detail {

inline Matrix ir_drop(const Matrix& w, const Matrix& x, const TileConfig& config)
{
    if (config.ir_drop_scale == 0.0 || config.ir_gamma == 0.0)
        return Matrix::Zero(w.rows(), x.cols());
    if (config.ir_drop_mode == IrDropMode::approximate)
        return ir_drop_approx(w, x, config.ir_gamma, config.ir_drop_scale);
    Matrix dy(w.rows(), x.cols());
    for (Eigen::Index b = 0; b < x.cols(); ++b)
        dy.col(b) = config.ir_drop_scale * ir_drop_exact(w, x.col(b), config.ir_gamma);
    return dy;
}

} // namespace detail

/// Analog MVM of a batch of DAC-level inputs (in x batch, entries in [-1, 1]).
///
/// y_i = sigma_out xi_i + f_i(dIR_i + sum_j w_ij x_j + sigma~_i xi'_i), with the
/// short-term weight noise referred to the output,
/// sigma~_i = sigma_w0 sqrt(sum_j |w_ij| x_j^2). Two normals are drawn per
/// output and sample (weight noise first) whatever the noise settings. With
/// polarity asymmetry the positive and negative inputs are integrated in two
/// phases, negative-phase weights scaled by (1 + a_ij).
inline Matrix analog_mvm(const ProgrammedTile& tile, const Matrix& x, const TileConfig& config, RandomStream& rng)
{
    if (x.rows() != tile.in_size())
        throw std::invalid_argument("analog_mvm: input size does not match the tile");
    const Matrix& w = tile.weights();
    Matrix z;
    Matrix variance;
    if (!tile.has_polarity()) {
        z = w * x + detail::ir_drop(w, x, config);
        if (config.w_noise > 0.0)
            variance = w.cwiseAbs() * x.cwiseAbs2();
    } else {
        const Matrix x_pos = x.cwiseMax(0.0);
        const Matrix x_neg = x.cwiseMin(0.0);
        const Matrix w_neg = w.cwiseProduct((tile.polarity_factors().array() + 1.0).matrix());
        z = w * x_pos + w_neg * x_neg + detail::ir_drop(w, x_pos, config) + detail::ir_drop(w_neg, x_neg, config);
        if (config.w_noise > 0.0)
            variance = w.cwiseAbs() * x_pos.cwiseAbs2() + w_neg.cwiseAbs() * x_neg.cwiseAbs2();
    }

    Matrix out_noise(z.rows(), z.cols());
    for (Eigen::Index b = 0; b < z.cols(); ++b) {
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double xi_w = rng.normal();
            const double xi_out = rng.normal();
            if (config.w_noise > 0.0)
                z(i, b) += config.w_noise * std::sqrt(variance(i, b)) * xi_w;
            out_noise(i, b) = config.out_noise * xi_out;
        }
    }
    if (config.s_shape_mu > 0.0)
        z = s_shape_adc(z, tile.adc_shape());
    return z + out_noise;
}

template <typename Derived>
    requires(Derived::ColsAtCompileTime == 1)
Vector analog_mvm(const ProgrammedTile& tile, const Eigen::MatrixBase<Derived>& x, const TileConfig& config,
                  RandomStream& rng)
{
    return analog_mvm(tile, Matrix(x), config, rng).col(0);
}

/// Input DAC: Q_1(x / alpha), or x / alpha when bypassed.
inline Matrix dac_convert(const Matrix& x, double alpha, const TileConfig& config)
{
    if (!(alpha > 0.0))
        throw std::domain_error("dac_convert: input range alpha must be positive");
    if (!config.dac_enabled)
        return x / alpha;
    return x.unaryExpr([&](double v) { return quantize(v / alpha, 1.0, config.dac_bits, config.dac_step_scale); });
}

/// Output ADC: Q_{b_out}(y), or y when bypassed.
inline Matrix adc_convert(const Matrix& y, const TileConfig& config)
{
    if (!config.adc_enabled)
        return y;
    return y.unaryExpr(
        [&](double v) { return quantize(v, config.out_bound, config.adc_bits, config.adc_step_scale); });
}

/// Digital ADC codes (in analog units) for DAC-level inputs.
inline Matrix tile_readout(const ProgrammedTile& tile, const Matrix& x_dac, const TileConfig& config, RandomStream& rng)
{
    return adc_convert(analog_mvm(tile, x_dac, config, rng), config);
}

/// Full tile: y_i = beta_i + alpha * gamma_i * c * Q_adc(F(Q_dac(x / alpha))),
/// where c is the tile's drift compensation factor (1 when not calibrated).
/// x: in x batch in data units.
inline Matrix tile_forward(const ProgrammedTile& tile, const Matrix& x, const Periphery& periphery,
                           const TileConfig& config, RandomStream& rng)
{
    if (periphery.gamma.size() != tile.out_size() || periphery.beta.size() != tile.out_size())
        throw std::invalid_argument("tile_forward: periphery size does not match the tile");
    const Matrix y = tile_readout(tile, dac_convert(x, periphery.alpha, config), config, rng);
    const Vector scale = periphery.gamma * (periphery.alpha * tile.drift_factor());
    return (y.array().colwise() * scale.array()).colwise() + periphery.beta.array();
}

template <typename Derived>
    requires(Derived::ColsAtCompileTime == 1)
Vector tile_forward(const ProgrammedTile& tile, const Eigen::MatrixBase<Derived>& x, const Periphery& periphery,
                    const TileConfig& config, RandomStream& rng)
{
    return tile_forward(tile, Matrix(x), periphery, config, rng).col(0);
}

/// Default drift-compensation probes: `count` vectors uniform in [-1, 1].
inline Matrix make_drift_probes(Eigen::Index in_size, Eigen::Index count = 10, std::uint64_t seed = 0x0d21f7)
{
    RandomStream rng(seed, "drift_probes");
    Matrix probes(in_size, count);
    for (Eigen::Index k = 0; k < probes.size(); ++k)
        probes(k) = rng.uniform(-1.0, 1.0);
    return probes;
}

/// Records s_ref = sum_{i,k} |y_i^(k)| of the probes read through the full
/// analog path. Call right after programming. An all-zero response
/// disables compensation.
inline double drift_comp_calibrate(ProgrammedTile& tile, const Matrix& probes, const TileConfig& config,
                                   RandomStream& rng)
{
    const double s_ref = tile_readout(tile, probes, config, rng).cwiseAbs().sum();
    tile.set_drift_reference(s_ref > 0.0 ? std::optional<double>(s_ref) : std::nullopt);
    tile.set_drift_factor(1.0);
    return s_ref;
}

/// Measures s_t on the tile's current (drifted) state and sets the global
/// compensation factor s_ref / s_t, capped at config.drift_comp_max_factor.
inline double drift_comp_apply(ProgrammedTile& tile, const Matrix& probes, const TileConfig& config, RandomStream& rng)
{
    const auto s_ref = tile.drift_reference();
    if (!s_ref) {
        tile.set_drift_factor(1.0);
        return 1.0;
    }
    const double s_t = tile_readout(tile, probes, config, rng).cwiseAbs().sum();
    const double factor = s_t > 0.0 ? std::min(*s_ref / s_t, config.drift_comp_max_factor) : config.drift_comp_max_factor;
    tile.set_drift_factor(factor);
    return factor;
}

} // namespace aimc

#endif // AIMC_TILE_HPP
