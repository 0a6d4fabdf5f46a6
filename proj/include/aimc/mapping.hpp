#ifndef AIMC_MAPPING_HPP
#define AIMC_MAPPING_HPP

#include <aimc/pcm_device.hpp>
#include <aimc/random.hpp>
#include <aimc/tile.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace aimc {

/// Splits n into ceil(n / max_size) contiguous chunks whose sizes differ by
/// at most one (larger chunks first).
inline std::vector<Eigen::Index> split_sizes(Eigen::Index n, Eigen::Index max_size)
{
    if (max_size < 1)
        throw std::invalid_argument("split_sizes: max_size must be positive");
    if (n <= 0)
        return {};
    const Eigen::Index parts = (n + max_size - 1) / max_size;
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(parts), n / parts);
    for (Eigen::Index k = 0; k < n % parts; ++k)
        ++sizes[static_cast<std::size_t>(k)];
    return sizes;
}

/// Population standard deviation of all entries.
inline double matrix_std(const Matrix& w)
{
    if (w.size() == 0)
        return 0.0;
    const double mean = w.mean();
    return std::sqrt((w.array() - mean).square().mean());
}

enum class ScaleMode { per_column, per_tile };

struct MappingOptions {
    std::optional<double> clip_sigmas;  ///< clip W at +-k std(W) before scaling
    ScaleMode scale_mode = ScaleMode::per_column;
    int max_rows = 512;  ///< inputs per tile
    int max_cols = 512;  ///< outputs per tile
};

/// One tile-sized block of a normalized weight matrix.
struct TileBlock {
    Eigen::Index in_offset = 0;
    Eigen::Index out_offset = 0;
    Matrix weights;  ///< out_size x in_size, entries in [-1, 1]
};

/// Result of mapping a logical out x in weight matrix W onto tiles.
struct MappedWeights {
    Eigen::Index in_size = 0;
    Eigen::Index out_size = 0;
    Vector gamma;           ///< per output; gamma_i * w_norm_ij = w_ij
    Matrix normalized;      ///< W / gamma, unsplit
    std::vector<TileBlock> blocks;
    double alpha_hint = 1.0;

    /// Conductance targets (µS) of one block; signs are kept separately.
    Matrix g_targets(std::size_t block, double g_max) const { return blocks.at(block).weights.cwiseAbs() * g_max; }
};

/// Splits a normalized matrix into tile blocks (input dimension outer).
inline std::vector<TileBlock> split_into_tiles(const Matrix& normalized, int max_rows, int max_cols)
{
    std::vector<TileBlock> blocks;
    Eigen::Index in_off = 0;
    for (const Eigen::Index in_n : split_sizes(normalized.cols(), max_rows)) {
        Eigen::Index out_off = 0;
        for (const Eigen::Index out_n : split_sizes(normalized.rows(), max_cols)) {
            blocks.push_back({in_off, out_off, normalized.block(out_off, in_off, out_n, in_n)});
            out_off += out_n;
        }
        in_off += in_n;
    }
    return blocks;
}

/// Maps W (out x in, y = W x) to normalized tile weights and digital scales.
///
/// gamma_i = max_j |w_ij| per output (or one max over the matrix in
/// per-tile mode); all-zero outputs get gamma_i = 1.
inline MappedWeights map_weights(const Matrix& w, const MappingOptions& options = {})
{
    if (w.size() == 0)
        throw std::invalid_argument("map_weights: empty weight matrix");
    Matrix clipped = w;
    if (options.clip_sigmas) {
        if (!(*options.clip_sigmas > 0.0))
            throw std::invalid_argument("map_weights: clip_sigmas must be positive");
        const double bound = *options.clip_sigmas * matrix_std(w);
        if (bound > 0.0)
            clipped = w.cwiseMax(-bound).cwiseMin(bound);
    }
    MappedWeights m;
    m.in_size = w.cols();
    m.out_size = w.rows();
    if (options.scale_mode == ScaleMode::per_column) {
        m.gamma = clipped.cwiseAbs().rowwise().maxCoeff();
        for (Eigen::Index i = 0; i < m.gamma.size(); ++i)
            if (!(m.gamma(i) > 0.0))
                m.gamma(i) = 1.0;
    } else {
        const double g = clipped.cwiseAbs().maxCoeff();
        m.gamma = Vector::Constant(w.rows(), g > 0.0 ? g : 1.0);
    }
    m.normalized = (clipped.array().colwise() / m.gamma.array()).matrix();
    m.blocks = split_into_tiles(m.normalized, options.max_rows, options.max_cols);
    return m;
}

/// Re-normalizes every output row of `normalized` to max-abs 1 and folds the
/// factor into `gamma`. Rows that are entirely zero are left alone.
inline void remap_weights(Matrix& normalized, Vector& gamma)
{
    if (gamma.size() != normalized.rows())
        throw std::invalid_argument("remap_weights: gamma size mismatch");
    for (Eigen::Index i = 0; i < normalized.rows(); ++i) {
        const double m = normalized.row(i).cwiseAbs().maxCoeff();
        if (m > 0.0 && m != 1.0) {
            normalized.row(i) /= m;
            gamma(i) *= m;
        }
    }
}

/// A logical weight matrix programmed onto one or more tiles, with its
/// digital periphery. Tiles along the input dimension are summed digitally;
/// alpha is shared by the whole layer.
class AnalogLayer {
public:
    AnalogLayer() = default;

    AnalogLayer(const MappedWeights& mapped, const TileConfig& config, double alpha = 1.0,
                std::optional<Vector> beta = std::nullopt)
        : mapped_(mapped), config_(config), alpha_(alpha)
    {
        config_.validate();
        if (!(alpha > 0.0))
            throw std::invalid_argument("AnalogLayer: alpha must be positive");
        gamma_ = mapped.gamma;
        beta_ = beta ? *beta : Vector::Zero(mapped.out_size);
        if (beta_.size() != mapped.out_size)
            throw std::invalid_argument("AnalogLayer: beta size mismatch");
        for (Eigen::Index i = 0; i < gamma_.size(); ++i)
            if (!(gamma_(i) > 0.0))
                throw std::invalid_argument("AnalogLayer: gamma must be positive");
    }

    /// Programs every tile. Tile k draws from streams derived from (seed, k).
    void program(const PcmModelParams& pcm, const DeviceFaultSpec& faults, std::uint64_t seed)
    {
        tiles_.clear();
        tiles_.reserve(mapped_.blocks.size());
        for (std::size_t k = 0; k < mapped_.blocks.size(); ++k) {
            TileStreams streams(seed, k);
            tiles_.emplace_back(mapped_.blocks[k].weights, config_, pcm, faults, streams);
        }
    }

    /// Uses the normalized weights exactly (no device model).
    void program_exact(std::uint64_t seed = 0)
    {
        tiles_.clear();
        for (std::size_t k = 0; k < mapped_.blocks.size(); ++k)
            tiles_.push_back(ProgrammedTile::exact(mapped_.blocks[k].weights, config_, derive_seed(seed, "tile", k)));
    }

    void realize(double t_eval, std::uint64_t seed)
    {
        for (std::size_t k = 0; k < tiles_.size(); ++k) {
            RandomStream rng(seed, "tile.read", k);
            tiles_[k].realize(t_eval, rng);
        }
    }

    /// Calibrates every tile's drift reference on its own probe set.
    void calibrate_drift(std::uint64_t seed, Eigen::Index n_probes = 10)
    {
        for (std::size_t k = 0; k < tiles_.size(); ++k) {
            RandomStream rng(seed, "drift.calibrate", k);
            drift_comp_calibrate(tiles_[k], probes(k, n_probes), config_, rng);
        }
    }

    void apply_drift_compensation(std::uint64_t seed, Eigen::Index n_probes = 10)
    {
        for (std::size_t k = 0; k < tiles_.size(); ++k) {
            RandomStream rng(seed, "drift.apply", k);
            drift_comp_apply(tiles_[k], probes(k, n_probes), config_, rng);
        }
    }

    /// x: in x batch in data units. Returns out x batch.
    Matrix forward(const Matrix& x, RandomStream& rng) const
    {
        if (x.rows() != mapped_.in_size)
            throw std::invalid_argument("AnalogLayer::forward: input size mismatch");
        if (tiles_.size() != mapped_.blocks.size())
            throw std::logic_error("AnalogLayer::forward: layer not programmed");
        Matrix y = Matrix::Zero(mapped_.out_size, x.cols());
        for (std::size_t k = 0; k < tiles_.size(); ++k) {
            const TileBlock& b = mapped_.blocks[k];
            const ProgrammedTile& tile = tiles_[k];
            const Eigen::Index n_out = tile.out_size();
            const Periphery p{alpha_, gamma_.segment(b.out_offset, n_out), Vector::Zero(n_out)};
            y.middleRows(b.out_offset, n_out) += tile_forward(tile, Matrix(x.middleRows(b.in_offset, tile.in_size())), p, config_, rng);
        }
        return y.colwise() + beta_;
    }

    const MappedWeights& mapped() const noexcept { return mapped_; }
    const TileConfig& config() const noexcept { return config_; }
    const std::vector<ProgrammedTile>& tiles() const noexcept { return tiles_; }
    std::vector<ProgrammedTile>& tiles() noexcept { return tiles_; }
    double alpha() const noexcept { return alpha_; }
    const Vector& gamma() const noexcept { return gamma_; }
    const Vector& beta() const noexcept { return beta_; }

    /// gamma_i * w_norm_ij, the logical weights the layer represents.
    Matrix logical_weights() const { return (mapped_.normalized.array().colwise() * gamma_.array()).matrix(); }

private:
    Matrix probes(std::size_t k, Eigen::Index n) const
    {
        return make_drift_probes(tiles_[k].in_size(), n, derive_seed(0x0d21f7, "probes", k));
    }

    MappedWeights mapped_;
    TileConfig config_;
    double alpha_ = 1.0;
    Vector gamma_;
    Vector beta_;
    std::vector<ProgrammedTile> tiles_;
};

/// Generalized normal distribution with density proportional to
/// exp(-(|x - mu| / alpha)^beta).
struct GenNormSpec {
    double beta_shape = 2.0;
    double alpha_scale = 1.0;
    double mu = 0.0;

    void validate() const
    {
        if (!(beta_shape > 0.0) || !(alpha_scale > 0.0))
            throw std::invalid_argument("GenNormSpec: beta_shape and alpha_scale must be positive");
    }
};

/// |X - mu| / alpha = G^(1/beta) with G ~ Gamma(1/beta, 1), random sign.
inline Vector sample_gennorm(const GenNormSpec& spec, Eigen::Index n, RandomStream& rng)
{
    spec.validate();
    Vector out(n);
    const double shape = 1.0 / spec.beta_shape;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double mag = std::pow(rng.gamma(shape), shape);
        const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        out(k) = spec.mu + spec.alpha_scale * sign * mag;
    }
    return out;
}

inline Matrix sample_gennorm(const GenNormSpec& spec, Eigen::Index rows, Eigen::Index cols, RandomStream& rng)
{
    const Vector v = sample_gennorm(spec, rows * cols, rng);
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Gamma(5/b) Gamma(1/b) / Gamma(3/b)^2 - 3.
inline double gennorm_excess_kurtosis(double beta_shape)
{
    if (!(beta_shape > 0.0))
        throw std::domain_error("gennorm_excess_kurtosis: beta must be positive");
    return std::exp(std::lgamma(5.0 / beta_shape) + std::lgamma(1.0 / beta_shape) -
                    2.0 * std::lgamma(3.0 / beta_shape)) -
           3.0;
}

/// m4 / m2^2 - 3 from central sample moments.
template <typename Derived>
double excess_kurtosis(const Eigen::DenseBase<Derived>& samples)
{
    const Eigen::Index n = samples.size();
    if (n < 4)
        throw std::domain_error("excess_kurtosis: need at least 4 samples");
    const double mean = samples.derived().array().mean();
    const auto centered = samples.derived().array() - mean;
    const double m2 = centered.square().mean();
    const double m4 = centered.square().square().mean();
    if (!(m2 > 0.0))
        throw std::domain_error("excess_kurtosis: zero variance");
    return m4 / (m2 * m2) - 3.0;
}

} // namespace aimc

#endif // AIMC_MAPPING_HPP
