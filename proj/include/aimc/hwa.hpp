#ifndef AIMC_HWA_HPP
#define AIMC_HWA_HPP

#include <aimc/analysis.hpp>
#include <aimc/datasets.hpp>
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
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aimc {

struct HwaSchedule {
    int noise_ramp_epochs = 5;
    double prog_noise_scale_final = 1.0;
    int remap_every = 1;  ///< epochs between remaps; 0 disables
    double input_range_decay = 0.01;
    int input_range_init_batches = 10;
    double input_range_cap = 10.0;
    int noise_refresh_per_batch = 1;
    double drop_connect = 0.0;
    bool dynamic_management = false;  ///< not implemented; enabling is an error

    void validate() const
    {
        if (noise_ramp_epochs < 0 || remap_every < 0 || input_range_init_batches < 0)
            throw std::invalid_argument("HwaSchedule: counts must be non-negative");
        if (noise_refresh_per_batch < 1)
            throw std::invalid_argument("HwaSchedule: noise_refresh_per_batch must be >= 1");
        if (!(prog_noise_scale_final >= 0.0) || !(input_range_decay >= 0.0))
            throw std::invalid_argument("HwaSchedule: scales must be non-negative");
        if (!(input_range_cap > 0.0))
            throw std::invalid_argument("HwaSchedule: input_range_cap must be positive");
        if (!(drop_connect >= 0.0 && drop_connect < 1.0))
            throw std::invalid_argument("HwaSchedule: drop_connect must be in [0, 1)");
        if (dynamic_management)
            throw std::invalid_argument("HwaSchedule: dynamic noise/bound management is not supported");
    }
};

/// Linear ramp of the injected noise: 0 at progress 0, 1 from `ramp_epochs`.
inline double noise_ramp(double epoch_progress, int ramp_epochs)
{
    if (ramp_epochs <= 0)
        return 1.0;
    return std::clamp(epoch_progress / static_cast<double>(ramp_epochs), 0.0, 1.0);
}

struct DistillSpec {
    double temperature = 10.0;
    double mixture = 0.75;

    void validate() const
    {
        if (!(temperature > 0.0))
            throw std::invalid_argument("DistillSpec: temperature must be positive");
        if (!(mixture >= 0.0 && mixture <= 1.0))
            throw std::invalid_argument("DistillSpec: mixture must be in [0, 1]");
    }
};

// ---------------------------------------------------------------- losses

/// Column-wise log-softmax of logits / T.
inline Matrix log_softmax(const Matrix& logits, double temperature = 1.0)
{
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
        const Vector z = logits.col(b) / temperature;
        const double m = z.maxCoeff();
        const double lse = m + std::log((z.array() - m).exp().sum());
        out.col(b) = z.array() - lse;
    }
    return out;
}

inline void check_labels(const Matrix& logits, const std::vector<int>& labels)
{
    if (static_cast<Eigen::Index>(labels.size()) != logits.cols())
        throw std::invalid_argument("loss: label count does not match the batch");
    for (const int y : labels)
        if (y < 0 || y >= logits.rows())
            throw std::invalid_argument("loss: label out of range");
}

/// Mean cross-entropy; optionally the gradient w.r.t. the logits.
inline double cross_entropy(const Matrix& logits, const std::vector<int>& labels, Matrix* grad = nullptr)
{
    check_labels(logits, labels);
    const Matrix lp = log_softmax(logits);
    const double n = static_cast<double>(logits.cols());
    double loss = 0.0;
    for (Eigen::Index b = 0; b < logits.cols(); ++b)
        loss -= lp(labels[static_cast<std::size_t>(b)], b);
    if (grad) {
        *grad = lp.array().exp();
        for (Eigen::Index b = 0; b < logits.cols(); ++b)
            (*grad)(labels[static_cast<std::size_t>(b)], b) -= 1.0;
        *grad /= n;
    }
    return loss / n;
}

/// mixture * T^2 * KL(softmax(teacher/T) || softmax(student/T))
///   + (1 - mixture) * CE(student, labels), averaged over the batch.
inline double distill_loss(const Matrix& student, const Matrix& teacher, const std::vector<int>& labels,
                           const DistillSpec& spec, Matrix* grad = nullptr)
{
    spec.validate();
    if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
        throw std::invalid_argument("distill_loss: student and teacher shapes differ");
    const double t = spec.temperature;
    const double n = static_cast<double>(student.cols());
    Matrix ce_grad;
    const double ce = cross_entropy(student, labels, grad ? &ce_grad : nullptr);
    const Matrix lt = log_softmax(teacher, t);
    const Matrix ls = log_softmax(student, t);
    const double kl = (lt.array().exp() * (lt - ls).array()).sum() / n;
    if (grad)
        *grad = spec.mixture * t * (ls.array().exp() - lt.array().exp()).matrix() / n + (1.0 - spec.mixture) * ce_grad;
    return spec.mixture * t * t * kl + (1.0 - spec.mixture) * ce;
}

inline std::vector<int> predict(const Matrix& logits)
{
    std::vector<int> out(static_cast<std::size_t>(logits.cols()));
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
        Eigen::Index k = 0;
        logits.col(b).maxCoeff(&k);
        out[static_cast<std::size_t>(b)] = static_cast<int>(k);
    }
    return out;
}

inline double classification_error(const Matrix& logits, const std::vector<int>& labels)
{
    check_labels(logits, labels);
    const auto p = predict(logits);
    std::size_t wrong = 0;
    for (std::size_t k = 0; k < p.size(); ++k)
        wrong += p[k] != labels[k];
    return static_cast<double>(wrong) / static_cast<double>(p.size());
}

// ------------------------------------------------------------ input range

/// Mean over all calibration vectors of max_j |x_j|, capped; 1 if that
/// mean is zero. Each matrix is one batch with samples in columns.
inline double init_input_range(const std::vector<Matrix>& batches, double cap = 10.0)
{
    if (batches.empty())
        throw std::invalid_argument("init_input_range: need at least one batch");
    double sum = 0.0;
    Eigen::Index count = 0;
    for (const Matrix& b : batches) {
        if (b.cols() == 0)
            continue;
        sum += b.cwiseAbs().colwise().maxCoeff().sum();
        count += b.cols();
    }
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    if (!(mean > 0.0))
        return 1.0;
    return std::min(mean, cap);
}

// --------------------------------------------------------- FP reference

struct FpLayer {
    Matrix w;  ///< out x in
    Vector b;
};

/// Plain floating-point MLP with ReLU hidden layers.
struct FpNetwork {
    std::vector<FpLayer> layers;

    /// He-uniform initialization for layer sizes {in, hidden..., out}.
    static FpNetwork init(const std::vector<int>& sizes, std::uint64_t seed)
    {
        if (sizes.size() < 2)
            throw std::invalid_argument("FpNetwork: need at least input and output sizes");
        FpNetwork net;
        RandomStream rng(seed, "fp.init");
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            if (sizes[l] < 1 || sizes[l + 1] < 1)
                throw std::invalid_argument("FpNetwork: layer sizes must be positive");
            const double lim = std::sqrt(6.0 / sizes[l]);
            FpLayer layer{Matrix(sizes[l + 1], sizes[l]), Vector::Zero(sizes[l + 1])};
            for (Eigen::Index k = 0; k < layer.w.size(); ++k)
                layer.w(k) = rng.uniform(-lim, lim);
            net.layers.push_back(std::move(layer));
        }
        return net;
    }

    /// Returns logits; `inputs` (if given) receives each layer's input.
    Matrix forward(const Matrix& x, std::vector<Matrix>* inputs = nullptr) const
    {
        Matrix h = x;
        if (inputs)
            inputs->clear();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (inputs)
                inputs->push_back(h);
            Matrix z = (layers[l].w * h).colwise() + layers[l].b;
            h = l + 1 < layers.size() ? Matrix(z.cwiseMax(0.0)) : z;
        }
        return h;
    }
};

struct TrainRecipe {
    int epochs = 40;
    int batch_size = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    double lr_scale = 0.05;     ///< learning rate of gamma~ and kappa~
    double lr_alpha = 0.01;     ///< learning rate of the input range
    double kappa_decay = 1e-3;  ///< weight decay of kappa~

    void validate() const
    {
        if (epochs < 0 || batch_size < 1)
            throw std::invalid_argument("TrainRecipe: need epochs >= 0 and batch_size >= 1");
        if (!(lr >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(lr_scale >= 0.0) || !(lr_alpha >= 0.0))
            throw std::invalid_argument("TrainRecipe: invalid learning rate or momentum");
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_error = 0.0;
    double val_error = 0.0;
};

namespace detail {

inline std::vector<Eigen::Index> shuffled(Eigen::Index n, RandomStream& rng)
{
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.index(i)]);
    return idx;
}

inline void gather(const Dataset& d, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end, Matrix& x,
                   std::vector<int>& y)
{
    x.resize(d.dim(), static_cast<Eigen::Index>(end - begin));
    y.resize(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
        x.col(static_cast<Eigen::Index>(k - begin)) = d.features.col(idx[k]);
        y[k - begin] = d.labels[static_cast<std::size_t>(idx[k])];
    }
}

inline void check_finite(double loss, int epoch)
{
    if (!std::isfinite(loss))
        throw std::runtime_error("training diverged: non-finite loss in epoch " + std::to_string(epoch));
}

} // namespace detail

/// SGD with momentum on the cross-entropy loss.
inline std::vector<EpochRecord> train_fp(FpNetwork& net, const Dataset& train, const Dataset* val,
                                         const TrainRecipe& recipe, std::uint64_t seed)
{
    recipe.validate();
    std::vector<EpochRecord> history;
    std::vector<FpLayer> vel;
    for (const auto& l : net.layers)
        vel.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
    Matrix x;
    std::vector<int> y;
    for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
        RandomStream rng(seed, "fp.shuffle", static_cast<std::uint64_t>(epoch));
        const auto idx = detail::shuffled(train.size(), rng);
        double loss_sum = 0.0;
        std::size_t wrong = 0;
        for (std::size_t s = 0; s < idx.size(); s += static_cast<std::size_t>(recipe.batch_size)) {
            detail::gather(train, idx, s, std::min(idx.size(), s + static_cast<std::size_t>(recipe.batch_size)), x, y);
            std::vector<Matrix> inputs;
            const Matrix logits = net.forward(x, &inputs);
            Matrix g;
            const double loss = cross_entropy(logits, y, &g);
            detail::check_finite(loss, epoch);
            loss_sum += loss * static_cast<double>(y.size());
            wrong += static_cast<std::size_t>(std::lround(classification_error(logits, y) * static_cast<double>(y.size())));
            for (std::size_t l = net.layers.size(); l-- > 0;) {
                FpLayer& layer = net.layers[l];
                const Matrix gw = g * inputs[l].transpose() + recipe.weight_decay * layer.w;
                const Vector gb = g.rowwise().sum();
                if (l > 0)
                    g = (layer.w.transpose() * g).cwiseProduct((inputs[l].array() > 0.0).cast<double>().matrix());
                vel[l].w = recipe.momentum * vel[l].w + gw;
                vel[l].b = recipe.momentum * vel[l].b + gb;
                layer.w -= recipe.lr * vel[l].w;
                layer.b -= recipe.lr * vel[l].b;
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(idx.size());
        rec.train_error = static_cast<double>(wrong) / static_cast<double>(idx.size());
        rec.val_error = val ? classification_error(net.forward(val->features), val->labels) : 0.0;
        history.push_back(rec);
    }
    return history;
}

// ------------------------------------------------ trainable analog layer

struct LayerGrads {
    Matrix w;
    Vector gamma_tilde;
    double kappa_tilde = 0.0;
    double alpha = 0.0;
    Vector beta;
};

/// Everything the backward pass needs from one forward call.
struct LayerContext {
    const void* owner = nullptr;
    std::uint64_t version = 0;
    Matrix x;            ///< raw input
    Matrix x_dac;        ///< clipped (and quantized) x / alpha
    Matrix in_mask;      ///< 1 where |x / alpha| < 1
    Matrix w_eff;        ///< perturbed weights used forward
    Matrix y_sum;        ///< sum over tiles of the ADC outputs
    std::vector<Matrix> out_mask;  ///< per tile: 1 where the ADC did not saturate
    std::vector<Matrix> noise_w;   ///< per tile: short-term noise normals
    std::vector<Matrix> variance;  ///< per tile: sum_j |w| x^2
};

/// One analog linear layer in training form.
///
/// Output: beta_i + alpha * gamma_i * sum_tiles ADC(W~ Q(clip(x / alpha)) + noise),
/// gamma_i = c_aws * gamma~_i * kappa, kappa = kappa~ / b_out when learned
/// (else 1). W~ is the reference weight plus the cached programming-noise
/// perturbation, times the drop-connect mask. During training the input and
/// output clips are always active; dac_enabled / adc_enabled only switch
/// quantization.
class TrainableAnalogLayer {
public:
    Matrix w;             ///< reference normalized weights, out x in, in [-1, 1]
    Vector gamma_tilde;
    double kappa_tilde = 1.0;
    double c_aws = 1.0;
    double alpha = 1.0;
    Vector beta;
    bool learn_gamma_tilde = true;
    bool learn_kappa = true;
    TileConfig tile;
    PcmModelParams pcm;

    TrainableAnalogLayer() = default;

    /// Initial mapping w_norm = W / max_j |w_ij|, gamma_i = max_j |w_ij|.
    TrainableAnalogLayer(const Matrix& w_fp, const Vector& bias, const TileConfig& tile_config, const PcmModelParams& pcm_params,
                         double input_range, bool learn_gamma = true, bool learn_k = true)
        : learn_gamma_tilde(learn_gamma), learn_kappa(learn_k), tile(tile_config), pcm(pcm_params)
    {
        tile.validate();
        pcm.validate();
        if (!(input_range > 0.0))
            throw std::invalid_argument("TrainableAnalogLayer: input range must be positive");
        if (bias.size() != w_fp.rows())
            throw std::invalid_argument("TrainableAnalogLayer: bias size mismatch");
        const MappedWeights m = map_weights(w_fp);
        w = m.normalized;
        c_aws = std::sqrt(3.0 / static_cast<double>(w.cols()));
        kappa_tilde = learn_kappa ? tile.out_bound : 1.0;
        gamma_tilde = m.gamma / (c_aws * kappa());
        alpha = input_range;
        beta = bias;
    }

    double kappa() const { return learn_kappa ? kappa_tilde / tile.out_bound : 1.0; }
    Vector gamma() const { return gamma_tilde * (c_aws * kappa()); }
    std::uint64_t version() const noexcept { return version_; }
    const Matrix& perturbation() const noexcept { return delta_; }

    /// Draws a new programming-noise perturbation of strength `prog_scale`
    /// and a new drop-connect mask. Invalidates outstanding contexts.
    void refresh_noise(double prog_scale, double drop_fraction, RandomStream& rng)
    {
        delta_.resize(w.rows(), w.cols());
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            const double g = std::min(std::abs(w(k)), 1.0) * pcm.g_max;
            delta_(k) = prog_scale * programming_noise_std(g, pcm) / pcm.g_max * rng.normal();
        }
        if (drop_fraction > 0.0) {
            drop_.resize(w.rows(), w.cols());
            for (Eigen::Index k = 0; k < w.size(); ++k)
                drop_(k) = rng.uniform01() < drop_fraction ? 0.0 : 1.0;
        } else {
            drop_.resize(0, 0);
        }
        ++version_;
    }

    void clear_noise()
    {
        delta_.resize(0, 0);
        drop_.resize(0, 0);
        ++version_;
    }

    Matrix effective_weights() const
    {
        Matrix we = delta_.size() ? Matrix(w + delta_) : w;
        if (drop_.size())
            we = we.cwiseProduct(drop_);
        return we;
    }

    /// Forward pass on a batch (in x B). Draws two normals per tile, output
    /// and sample (short-term weight noise, then output noise).
    Matrix forward(const Matrix& x, LayerContext& ctx, RandomStream& rng) const
    {
        if (x.rows() != w.cols())
            throw std::invalid_argument("TrainableAnalogLayer::forward: input size mismatch");
        ctx.owner = this;
        ctx.version = version_;
        ctx.x = x;
        const Matrix xs = x / alpha;
        ctx.in_mask = (xs.array().abs() < 1.0).cast<double>();
        ctx.x_dac = xs.unaryExpr([this](double v) {
            return tile.dac_enabled ? quantize(v, 1.0, tile.dac_bits, tile.dac_step_scale) : std::clamp(v, -1.0, 1.0);
        });
        ctx.w_eff = effective_weights();
        ctx.y_sum = Matrix::Zero(w.rows(), x.cols());
        ctx.out_mask.clear();
        ctx.noise_w.clear();
        ctx.variance.clear();
        const double b = tile.out_bound;
        Eigen::Index off = 0;
        for (const Eigen::Index n : split_sizes(w.cols(), tile.max_rows)) {
            const auto wc = ctx.w_eff.middleCols(off, n);
            const auto xc = ctx.x_dac.middleRows(off, n);
            Matrix y = wc * xc;
            Matrix var = wc.cwiseAbs() * xc.cwiseAbs2();
            Matrix xi(y.rows(), y.cols());
            for (Eigen::Index s = 0; s < y.cols(); ++s) {
                for (Eigen::Index i = 0; i < y.rows(); ++i) {
                    xi(i, s) = rng.normal();
                    const double xi_out = rng.normal();
                    y(i, s) += tile.w_noise * std::sqrt(var(i, s)) * xi(i, s) + tile.out_noise * xi_out;
                }
            }
            ctx.out_mask.push_back((y.array().abs() < b).cast<double>());
            ctx.y_sum += y.unaryExpr([&](double v) {
                return tile.adc_enabled ? quantize(v, b, tile.adc_bits, tile.adc_step_scale) : std::clamp(v, -b, b);
            });
            ctx.noise_w.push_back(std::move(xi));
            ctx.variance.push_back(std::move(var));
            off += n;
        }
        const Vector scale = gamma() * alpha;
        return (ctx.y_sum.array().colwise() * scale.array()).matrix().colwise() + beta;
    }

    /// Gradients for a context produced by forward() on this layer in its
    /// current state. Straight-through: quantizers pass the gradient,
    /// clipped inputs and saturated outputs get none.
    LayerGrads backward(const LayerContext& ctx, const Matrix& grad_out, Matrix* grad_x = nullptr) const
    {
        if (ctx.owner != this || ctx.version != version_)
            throw std::logic_error("TrainableAnalogLayer::backward: context does not belong to this layer state");
        if (grad_out.rows() != w.rows() || grad_out.cols() != ctx.x.cols())
            throw std::invalid_argument("TrainableAnalogLayer::backward: gradient shape mismatch");
        LayerGrads g;
        const Vector gam = gamma();
        g.beta = grad_out.rowwise().sum();
        const Vector gy = grad_out.cwiseProduct(ctx.y_sum).rowwise().sum();
        const Vector d_gamma = alpha * gy;
        g.gamma_tilde = learn_gamma_tilde ? Vector(d_gamma * (c_aws * kappa())) : Vector::Zero(w.rows());
        g.kappa_tilde = learn_kappa ? d_gamma.dot(gamma_tilde) * c_aws / tile.out_bound : 0.0;
        g.alpha = gam.dot(gy);

        const Matrix h = (grad_out.array().colwise() * (gam * alpha).array()).matrix();
        Matrix dw_eff = Matrix::Zero(w.rows(), w.cols());
        Matrix dx_dac = Matrix::Zero(w.cols(), ctx.x.cols());
        Eigen::Index off = 0;
        std::size_t t = 0;
        for (const Eigen::Index n : split_sizes(w.cols(), tile.max_rows)) {
            const auto wc = ctx.w_eff.middleCols(off, n);
            const auto xc = ctx.x_dac.middleRows(off, n);
            const Matrix d = h.cwiseProduct(ctx.out_mask[t]);
            dw_eff.middleCols(off, n) += d * xc.transpose();
            dx_dac.middleRows(off, n) += wc.transpose() * d;
            if (tile.w_noise > 0.0) {
                Matrix e(d.rows(), d.cols());
                for (Eigen::Index k = 0; k < e.size(); ++k) {
                    const double v = ctx.variance[t](k);
                    e(k) = v > 0.0 ? d(k) * tile.w_noise * ctx.noise_w[t](k) / (2.0 * std::sqrt(v)) : 0.0;
                }
                const Matrix sign = wc.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
                dw_eff.middleCols(off, n) += sign.cwiseProduct(e * xc.cwiseAbs2().transpose());
                dx_dac.middleRows(off, n) += 2.0 * xc.cwiseProduct(wc.cwiseAbs().transpose() * e);
            }
            off += n;
            ++t;
        }
        g.w = drop_.size() ? Matrix(dw_eff.cwiseProduct(drop_)) : dw_eff;
        const Matrix dxs = dx_dac.cwiseProduct(ctx.in_mask);
        g.alpha -= dxs.cwiseProduct(ctx.x).sum() / (alpha * alpha);
        if (grad_x)
            *grad_x = dxs / alpha;
        return g;
    }

    void clip_weights()
    {
        w = w.cwiseMax(-1.0).cwiseMin(1.0);
        ++version_;
    }

    /// Column max-abs renormalization; gamma_i * w_ij is unchanged.
    void remap()
    {
        remap_weights(w, gamma_tilde);
        ++version_;
    }

    /// Marks parameters as changed (call after an optimizer step).
    void touch() noexcept { ++version_; }

private:
    Matrix delta_;
    Matrix drop_;
    std::uint64_t version_ = 0;
};

/// A stack of trainable analog layers with ReLU between them.
struct HwaNetwork {
    std::vector<TrainableAnalogLayer> layers;

    Matrix forward(const Matrix& x, std::vector<LayerContext>& ctx, RandomStream& rng) const
    {
        ctx.resize(layers.size());
        Matrix h = x;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            h = layers[l].forward(h, ctx[l], rng);
            if (l + 1 < layers.size())
                h = h.cwiseMax(0.0);
        }
        return h;
    }

    std::vector<LayerGrads> backward(const std::vector<LayerContext>& ctx, const Matrix& grad_logits) const
    {
        std::vector<LayerGrads> grads(layers.size());
        Matrix g = grad_logits;
        for (std::size_t l = layers.size(); l-- > 0;) {
            Matrix gx;
            grads[l] = layers[l].backward(ctx[l], g, l > 0 ? &gx : nullptr);
            if (l > 0)
                g = gx.cwiseProduct((ctx[l].x.array() > 0.0).cast<double>().matrix());
        }
        return grads;
    }

    void refresh_noise(double prog_scale, double drop_fraction, RandomStream& rng)
    {
        for (auto& l : layers)
            l.refresh_noise(prog_scale, drop_fraction, rng);
    }
};

/// Maps a trained FP network to HWA training form. Each layer's input
/// range is initialized from the FP activations of the first
/// `schedule.input_range_init_batches` training batches.
inline HwaNetwork make_hwa_network(const FpNetwork& fp, const Dataset& train, const TileConfig& tile,
                                   const PcmModelParams& pcm, const HwaSchedule& schedule, int batch_size,
                                   bool learn_gamma = true, bool learn_kappa = true);

namespace detail {

/// Inputs of every layer of `fp` for the first `n_batches` batches.
inline std::vector<std::vector<Matrix>> layer_input_batches(const FpNetwork& fp, const Dataset& d, int n_batches,
                                                            int batch_size)
{
    std::vector<std::vector<Matrix>> per_layer(fp.layers.size());
    const Eigen::Index bs = std::max(1, batch_size);
    const Eigen::Index n = std::max(1, n_batches);
    for (Eigen::Index k = 0; k < n && k * bs < d.size(); ++k) {
        const Eigen::Index cols = std::min(bs, d.size() - k * bs);
        std::vector<Matrix> inputs;
        fp.forward(d.features.middleCols(k * bs, cols), &inputs);
        for (std::size_t l = 0; l < inputs.size(); ++l)
            per_layer[l].push_back(inputs[l]);
    }
    return per_layer;
}

} // namespace detail

inline HwaNetwork make_hwa_network(const FpNetwork& fp, const Dataset& train, const TileConfig& tile,
                                   const PcmModelParams& pcm, const HwaSchedule& schedule, int batch_size,
                                   bool learn_gamma, bool learn_kappa)
{
    schedule.validate();
    const auto calib = detail::layer_input_batches(fp, train, schedule.input_range_init_batches, batch_size);
    HwaNetwork net;
    for (std::size_t l = 0; l < fp.layers.size(); ++l) {
        const double alpha = init_input_range(calib[l], schedule.input_range_cap);
        net.layers.emplace_back(fp.layers[l].w, fp.layers[l].b, tile, pcm, alpha, learn_gamma, learn_kappa);
    }
    return net;
}

/// HWA training: noisy forward, straight-through backward, SGD with
/// momentum on the reference weights, clip to [-1, 1] after every update,
/// periodic remapping. With a teacher the loss is the distillation mixture.
inline std::vector<EpochRecord> train_hwa(HwaNetwork& net, const Dataset& train, const Dataset* val,
                                          const TrainRecipe& recipe, const HwaSchedule& schedule,
                                          std::uint64_t seed, const FpNetwork* teacher = nullptr,
                                          const DistillSpec& distill = {})
{
    recipe.validate();
    schedule.validate();
    if (teacher)
        distill.validate();
    struct Velocity {
        Matrix w;
        Vector gamma_tilde;
        double kappa_tilde = 0.0;
        double alpha = 0.0;
        Vector beta;
    };
    std::vector<Velocity> vel;
    for (const auto& l : net.layers)
        vel.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.w.rows()), 0.0, 0.0, Vector::Zero(l.w.rows())});

    RandomStream noise_rng(seed, "hwa.noise");
    RandomStream mvm_rng(seed, "hwa.mvm");
    std::vector<EpochRecord> history;
    Matrix x;
    std::vector<int> y;
    std::vector<LayerContext> ctx;
    const auto bs = static_cast<std::size_t>(recipe.batch_size);
    const std::size_t n = static_cast<std::size_t>(train.size());
    const std::size_t n_batches = (n + bs - 1) / bs;
    for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
        RandomStream shuffle_rng(seed, "hwa.shuffle", static_cast<std::uint64_t>(epoch));
        const auto idx = detail::shuffled(train.size(), shuffle_rng);
        double loss_sum = 0.0;
        double wrong = 0.0;
        for (std::size_t bi = 0; bi < n_batches; ++bi) {
            const double progress = epoch + static_cast<double>(bi) / static_cast<double>(n_batches);
            const double scale = noise_ramp(progress, schedule.noise_ramp_epochs) * schedule.prog_noise_scale_final;
            const std::size_t begin = bi * bs;
            const std::size_t end = std::min(n, begin + bs);
            std::vector<LayerGrads> total;
            const auto k_parts = static_cast<std::size_t>(std::min<std::size_t>(schedule.noise_refresh_per_batch, end - begin));
            for (std::size_t part = 0; part < k_parts; ++part) {
                const std::size_t pb = begin + (end - begin) * part / k_parts;
                const std::size_t pe = begin + (end - begin) * (part + 1) / k_parts;
                detail::gather(train, idx, pb, pe, x, y);
                net.refresh_noise(scale, schedule.drop_connect, noise_rng);
                const Matrix logits = net.forward(x, ctx, mvm_rng);
                Matrix g;
                const double loss = teacher ? distill_loss(logits, teacher->forward(x), y, distill, &g)
                                            : cross_entropy(logits, y, &g);
                detail::check_finite(loss, epoch);
                const double weight = static_cast<double>(pe - pb) / static_cast<double>(end - begin);
                loss_sum += loss * static_cast<double>(pe - pb);
                wrong += classification_error(logits, y) * static_cast<double>(pe - pb);
                auto grads = net.backward(ctx, g * weight);
                if (total.empty()) {
                    total = std::move(grads);
                } else {
                    for (std::size_t l = 0; l < total.size(); ++l) {
                        total[l].w += grads[l].w;
                        total[l].gamma_tilde += grads[l].gamma_tilde;
                        total[l].kappa_tilde += grads[l].kappa_tilde;
                        total[l].alpha += grads[l].alpha;
                        total[l].beta += grads[l].beta;
                    }
                }
            }
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                TrainableAnalogLayer& layer = net.layers[l];
                const LayerGrads& g = total[l];
                Velocity& v = vel[l];
                v.w = recipe.momentum * v.w + g.w;
                v.beta = recipe.momentum * v.beta + g.beta;
                layer.w -= recipe.lr * v.w;
                layer.beta -= recipe.lr * v.beta;
                if (layer.learn_gamma_tilde) {
                    v.gamma_tilde = recipe.momentum * v.gamma_tilde + g.gamma_tilde;
                    layer.gamma_tilde -= recipe.lr_scale * v.gamma_tilde;
                    layer.gamma_tilde = layer.gamma_tilde.cwiseMax(1e-8);
                }
                if (layer.learn_kappa) {
                    v.kappa_tilde = recipe.momentum * v.kappa_tilde + g.kappa_tilde + recipe.kappa_decay * layer.kappa_tilde;
                    layer.kappa_tilde = std::max(1e-6, layer.kappa_tilde - recipe.lr_scale * v.kappa_tilde);
                }
                const double ga = layer.alpha * g.alpha + schedule.input_range_decay * layer.alpha;
                v.alpha = recipe.momentum * v.alpha + ga;
                layer.alpha = std::clamp(layer.alpha - recipe.lr_alpha * v.alpha, 1e-3, schedule.input_range_cap);
                layer.clip_weights();
            }
        }
        if (schedule.remap_every > 0 && (epoch + 1) % schedule.remap_every == 0)
            for (auto& l : net.layers)
                l.remap();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.train_error = wrong / static_cast<double>(n);
        if (val) {
            RandomStream val_rng(seed, "hwa.val", static_cast<std::uint64_t>(epoch));
            net.refresh_noise(schedule.prog_noise_scale_final, 0.0, val_rng);
            rec.val_error = classification_error(net.forward(val->features, ctx, val_rng), val->labels);
        }
        history.push_back(rec);
    }
    for (auto& l : net.layers)
        l.clear_noise();
    return history;
}

// ------------------------------------------------------------- inference

/// Analog layers with ReLU between them, for inference evaluation.
struct InferenceNetwork {
    std::vector<AnalogLayer> layers;

    void program(const PcmModelParams& pcm, const DeviceFaultSpec& faults, std::uint64_t seed)
    {
        for (std::size_t l = 0; l < layers.size(); ++l)
            layers[l].program(pcm, faults, derive_seed(seed, "layer.program", l));
    }

    void realize(double t_eval, std::uint64_t seed)
    {
        for (std::size_t l = 0; l < layers.size(); ++l)
            layers[l].realize(t_eval, derive_seed(seed, "layer.read", l));
    }

    void calibrate_drift(std::uint64_t seed)
    {
        for (std::size_t l = 0; l < layers.size(); ++l)
            layers[l].calibrate_drift(derive_seed(seed, "layer.calibrate", l));
    }

    void apply_drift_compensation(std::uint64_t seed)
    {
        for (std::size_t l = 0; l < layers.size(); ++l)
            layers[l].apply_drift_compensation(derive_seed(seed, "layer.compensate", l));
    }

    Matrix forward(const Matrix& x, RandomStream& rng) const
    {
        Matrix h = x;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            h = layers[l].forward(h, rng);
            if (l + 1 < layers.size())
                h = h.cwiseMax(0.0);
        }
        return h;
    }
};

/// Builds mapped weights from an already normalized matrix and its scales.
inline MappedWeights mapped_from_normalized(const Matrix& normalized, const Vector& gamma, int max_rows, int max_cols)
{
    MappedWeights m;
    m.in_size = normalized.cols();
    m.out_size = normalized.rows();
    m.gamma = gamma;
    m.normalized = normalized.cwiseMax(-1.0).cwiseMin(1.0);
    m.blocks = split_into_tiles(m.normalized, max_rows, max_cols);
    return m;
}

/// Inference form of a trained HWA network.
inline InferenceNetwork to_inference(const HwaNetwork& net, const TileConfig& tile)
{
    InferenceNetwork inf;
    for (const auto& l : net.layers)
        inf.layers.emplace_back(mapped_from_normalized(l.w, l.gamma(), tile.max_rows, tile.max_cols), tile, l.alpha, l.beta);
    return inf;
}

struct DirectMapOptions {
    double clip_sigmas = 2.5;
    int input_range_batches = 10;
    int batch_size = 32;
    double input_range_cap = 10.0;
};

/// Direct mapping of an FP network without retraining: weights clipped at
/// clip_sigmas * std per layer, column-wise scales, input ranges calibrated
/// on training activations.
inline InferenceNetwork direct_map(const FpNetwork& fp, const Dataset& train, const TileConfig& tile,
                                   const DirectMapOptions& opt = {})
{
    const auto calib = detail::layer_input_batches(fp, train, opt.input_range_batches, opt.batch_size);
    InferenceNetwork inf;
    for (std::size_t l = 0; l < fp.layers.size(); ++l) {
        MappingOptions mo;
        mo.clip_sigmas = opt.clip_sigmas;
        mo.max_rows = tile.max_rows;
        mo.max_cols = tile.max_cols;
        inf.layers.emplace_back(map_weights(fp.layers[l].w, mo), tile, init_input_range(calib[l], opt.input_range_cap),
                                fp.layers[l].b);
    }
    return inf;
}

struct TimeRecord {
    double t_eval = 0.0;
    double mean_error = 0.0;
    double sem = 0.0;
    std::vector<double> errors;  ///< one per repeat
};

/// Test error at each evaluation time. Each repeat programs the network
/// afresh, calibrates global drift compensation right after programming,
/// and for every t_eval realizes drift and read noise, compensates and
/// classifies the test set.
inline std::vector<TimeRecord> evaluate_at_time(const InferenceNetwork& net, const Dataset& test,
                                                const std::vector<double>& times, int repeats,
                                                const PcmModelParams& pcm, const DeviceFaultSpec& faults,
                                                std::uint64_t seed, int threads = 1, bool drift_compensation = true)
{
    if (repeats < 1)
        throw std::invalid_argument("evaluate_at_time: need at least one repeat");
    std::vector<std::vector<double>> err(static_cast<std::size_t>(repeats), std::vector<double>(times.size()));
    parallel_for(static_cast<std::size_t>(repeats), threads, [&](std::size_t r) {
        InferenceNetwork copy = net;
        copy.program(pcm, faults, derive_seed(seed, "eval.program", r));
        if (drift_compensation) {
            copy.realize(0.0, derive_seed(seed, "eval.read0", r));
            copy.calibrate_drift(derive_seed(seed, "eval.probe0", r));
        }
        for (std::size_t k = 0; k < times.size(); ++k) {
            const std::uint64_t idx = r * times.size() + k;
            copy.realize(times[k], derive_seed(seed, "eval.read", idx));
            if (drift_compensation)
                copy.apply_drift_compensation(derive_seed(seed, "eval.probe", idx));
            RandomStream rng(seed, "eval.mvm", idx);
            err[r][k] = classification_error(copy.forward(test.features, rng), test.labels);
        }
    });
    std::vector<TimeRecord> out;
    for (std::size_t k = 0; k < times.size(); ++k) {
        TimeRecord rec;
        rec.t_eval = times[k];
        for (std::size_t r = 0; r < err.size(); ++r)
            rec.errors.push_back(err[r][k]);
        const MeanSem ms = mean_sem(rec.errors);
        rec.mean_error = ms.mean;
        rec.sem = ms.sem;
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace aimc

#endif // AIMC_HWA_HPP
