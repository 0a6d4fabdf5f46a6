#include "gradcheck.hpp"

#include <aimc/datasets.hpp>
#include <aimc/hwa.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace aimc;

namespace {

TileConfig quiet_tile()
{
    TileConfig t = TileConfig::ideal();
    t.out_bound = 1e6;
    return t;
}

PcmModelParams quiet_pcm()
{
    PcmModelParams p;
    p.prog_c0 = p.prog_c1 = p.prog_c2 = 0.0;
    return p;
}

Matrix uniform(Eigen::Index r, Eigen::Index c, double lo, double hi, std::uint64_t seed)
{
    RandomStream rng(seed);
    Matrix m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k)
        m(k) = rng.uniform(lo, hi);
    return m;
}

} // namespace

TEST(InputRange, Initialization)
{
    EXPECT_DOUBLE_EQ(init_input_range({Matrix::Constant(4, 8, 3.0)}), 3.0);
    EXPECT_DOUBLE_EQ(init_input_range({Matrix::Constant(4, 8, 50.0)}), 10.0);
    EXPECT_DOUBLE_EQ(init_input_range({Matrix::Zero(4, 8)}), 1.0);
}

TEST(NoiseRamp, Endpoints)
{
    EXPECT_EQ(noise_ramp(0.0, 5), 0.0);
    EXPECT_EQ(noise_ramp(5.0, 5), 1.0);
    EXPECT_EQ(noise_ramp(9.0, 5), 1.0);
    EXPECT_DOUBLE_EQ(noise_ramp(2.5, 5), 0.5);
    EXPECT_EQ(noise_ramp(0.0, 0), 1.0);
}

TEST(NoiseRamp, InjectedStdFollowsScale)
{
    const TrainableAnalogLayer base(uniform(50, 40, -1, 1, 1), Vector::Zero(50), TileConfig{}, PcmModelParams{}, 1.0);
    TrainableAnalogLayer l = base;
    RandomStream rng(2);
    l.refresh_noise(0.0, 0.0, rng);
    EXPECT_EQ(l.perturbation().cwiseAbs().maxCoeff(), 0.0);
    l.refresh_noise(1.0, 0.0, rng);
    // normalized programming noise of |w| = 1 devices is sigma_P(g_max) / g_max
    double num = 0.0, den = 0.0;
    for (Eigen::Index k = 0; k < l.w.size(); ++k) {
        const double s = programming_noise_std(std::abs(l.w(k)) * l.pcm.g_max, l.pcm) / l.pcm.g_max;
        num += l.perturbation()(k) * l.perturbation()(k);
        den += s * s;
    }
    EXPECT_NEAR(num / den, 1.0, 0.05);
}

TEST(Distill, TeacherEqualsStudent)
{
    const Matrix s = uniform(10, 6, -3, 3, 3);
    const std::vector<int> y{0, 1, 2, 3, 4, 5};
    EXPECT_NEAR(distill_loss(s, s, y, {}), 0.25 * cross_entropy(s, y), 1e-12);
}

TEST(Distill, ZeroMixtureIsCrossEntropy)
{
    const Matrix s = uniform(10, 6, -3, 3, 4);
    const Matrix t = uniform(10, 6, -3, 3, 5);
    const std::vector<int> y{9, 8, 7, 6, 5, 4};
    Matrix g1, g2;
    EXPECT_NEAR(distill_loss(s, t, y, {10.0, 0.0}, &g1), cross_entropy(s, y, &g2), 1e-12);
    EXPECT_TRUE(g1.isApprox(g2));
}

TEST(Distill, LargeLogitsStayFinite)
{
    Matrix s = Matrix::Zero(10, 2);
    s(0, 0) = 100.0;
    s(3, 1) = -100.0;
    const Matrix t = Matrix::Zero(10, 2);
    Matrix g;
    const double loss = distill_loss(s, t, {1, 2}, {}, &g);
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_TRUE(g.allFinite());
}

TEST(Distill, GradientMatchesFiniteDifferences)
{
    const Matrix s = uniform(5, 3, -2, 2, 6);
    const Matrix t = uniform(5, 3, -2, 2, 7);
    const std::vector<int> y{1, 4, 0};
    Matrix g;
    distill_loss(s, t, y, {}, &g);
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        Matrix a = s, b = s;
        a(k) += 1e-6;
        b(k) -= 1e-6;
        EXPECT_NEAR(g(k), (distill_loss(a, t, y, {}) - distill_loss(b, t, y, {})) / 2e-6, 1e-6);
    }
}

TEST(AnalogLayerTraining, NoiselessForwardIsLinear)
{
    const Matrix w = uniform(6, 5, -1, 1, 8);
    const Vector b = uniform(6, 1, -1, 1, 9).col(0);
    const TrainableAnalogLayer l(w, b, quiet_tile(), quiet_pcm(), 1.0);
    const Matrix x = uniform(5, 4, -1, 1, 10);
    LayerContext ctx;
    RandomStream rng(11);
    EXPECT_TRUE(l.forward(x, ctx, rng).isApprox((w * x).colwise() + b, 1e-12));
    EXPECT_NEAR(l.c_aws, std::sqrt(3.0 / 5.0), 1e-15);
}

TEST(AnalogLayerTraining, NoiselessGradientsAreLinearLayerGradients)
{
    const Matrix w = uniform(3, 4, -1, 1, 12);
    TrainableAnalogLayer l(w, Vector::Zero(3), quiet_tile(), quiet_pcm(), 1.0);
    const Matrix x = uniform(4, 2, -0.9, 0.9, 13);
    const Matrix c = uniform(3, 2, -1, 1, 14);
    LayerContext ctx;
    RandomStream rng(15);
    l.forward(x, ctx, rng);
    Matrix gx;
    const LayerGrads g = l.backward(ctx, c, &gx);
    // dL/dw_norm = gamma * alpha * c x^T
    const Matrix expected = (c * x.transpose()).array().colwise() * l.gamma().array();
    EXPECT_TRUE(g.w.isApprox(expected, 1e-12));
    EXPECT_TRUE(gx.isApprox(w.transpose() * c, 1e-12));
}

TEST(AnalogLayerTraining, GradientsMatchFiniteDifferences)
{
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto r = gradcheck::standard_gradient_check(seed);
        EXPECT_GT(r.checked, 30);
        EXPECT_LT(r.max_rel_error, 1e-4) << seed;
    }
}

TEST(AnalogLayerTraining, ClippedInputGetsNoGradient)
{
    TrainableAnalogLayer l(uniform(3, 2, -1, 1, 16), Vector::Zero(3), quiet_tile(), quiet_pcm(), 1.0);
    Matrix x(2, 1);
    x << 5.0, 0.3;
    LayerContext ctx;
    RandomStream rng(17);
    l.forward(x, ctx, rng);
    Matrix gx;
    l.backward(ctx, Matrix::Ones(3, 1), &gx);
    EXPECT_EQ(gx(0), 0.0);
    EXPECT_NE(gx(1), 0.0);
}

TEST(AnalogLayerTraining, CachedPerturbationFreshOutputNoise)
{
    TrainableAnalogLayer l(uniform(8, 6, -1, 1, 18), Vector::Zero(8), TileConfig{}, PcmModelParams{}, 1.0);
    RandomStream noise(19), mvm(20);
    l.refresh_noise(1.0, 0.0, noise);
    const Matrix x = uniform(6, 3, -1, 1, 21);
    LayerContext c1, c2;
    const Matrix y1 = l.forward(x, c1, mvm);
    const Matrix y2 = l.forward(x, c2, mvm);
    EXPECT_EQ(c1.w_eff, c2.w_eff);
    EXPECT_NE(y1, y2);
}

TEST(AnalogLayerTraining, StaleContextIsRejected)
{
    TrainableAnalogLayer l(uniform(2, 2, -1, 1, 22), Vector::Zero(2), TileConfig{}, PcmModelParams{}, 1.0);
    LayerContext ctx;
    RandomStream rng(23);
    l.forward(Matrix::Zero(2, 1), ctx, rng);
    l.refresh_noise(1.0, 0.0, rng);
    EXPECT_THROW(l.backward(ctx, Matrix::Ones(2, 1)), std::logic_error);
}

TEST(AnalogLayerTraining, DropConnectZeroesWeights)
{
    TrainableAnalogLayer l(uniform(40, 50, 0.5, 1, 24), Vector::Zero(40), TileConfig{}, quiet_pcm(), 1.0);
    RandomStream rng(25);
    l.refresh_noise(0.0, 0.1, rng);
    const double zeros = (l.effective_weights().array() == 0.0).cast<double>().mean();
    EXPECT_NEAR(zeros, 0.1, 0.03);
}

TEST(HwaSchedule, DynamicManagementIsRejected)
{
    HwaSchedule s;
    s.dynamic_management = true;
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

namespace {

struct Tiny {
    Dataset train, test;
    FpNetwork fp;
};

Tiny tiny_task()
{
    Tiny t;
    auto [train, test] = train_test_split(make_spirals(60, 3, 0.05, 1), 0.25, 1);
    t.train = train;
    t.test = test;
    t.fp = FpNetwork::init({2, 16, 3}, 2);
    TrainRecipe r;
    r.epochs = 30;
    train_fp(t.fp, t.train, nullptr, r, 3);
    return t;
}

} // namespace

TEST(TrainHwa, ZeroLearningRateKeepsWeights)
{
    const Tiny t = tiny_task();
    HwaSchedule s;
    s.remap_every = 0;
    HwaNetwork net = make_hwa_network(t.fp, t.train, TileConfig{}, PcmModelParams{}, s, 32);
    const HwaNetwork before = net;
    TrainRecipe r;
    r.epochs = 2;
    r.lr = r.lr_scale = r.lr_alpha = 0.0;
    train_hwa(net, t.train, nullptr, r, s, 4);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        EXPECT_EQ(net.layers[l].w, before.layers[l].w);
        EXPECT_EQ(net.layers[l].alpha, before.layers[l].alpha);
    }
}

TEST(TrainHwa, RemapKeepsUnitColumnsAndIsDeterministic)
{
    const Tiny t = tiny_task();
    const HwaSchedule s;
    TrainRecipe r;
    r.epochs = 3;
    HwaNetwork a = make_hwa_network(t.fp, t.train, TileConfig{}, PcmModelParams{}, s, 32);
    HwaNetwork b = a;
    const auto ha = train_hwa(a, t.train, &t.test, r, s, 5, &t.fp);
    const auto hb = train_hwa(b, t.train, &t.test, r, s, 5, &t.fp);
    ASSERT_EQ(ha.size(), 3u);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        EXPECT_TRUE(a.layers[l].w.cwiseAbs().rowwise().maxCoeff().isApprox(Vector::Ones(a.layers[l].w.rows())));
        EXPECT_EQ(a.layers[l].w, b.layers[l].w);
    }
    EXPECT_EQ(ha.back().val_error, hb.back().val_error);
}

TEST(Inference, DisabledNonidealitiesAreTimeInvariant)
{
    const Tiny t = tiny_task();
    const TileConfig ideal = TileConfig::ideal();
    const InferenceNetwork net = direct_map(t.fp, t.train, ideal);
    const auto recs = evaluate_at_time(net, t.test, {1.0, 3600.0, 3.15e7}, 2, noiseless_pcm(), {}, 6);
    const double fp_err = classification_error(t.fp.forward(t.test.features), t.test.labels);
    for (const auto& r : recs) {
        EXPECT_EQ(r.mean_error, recs[0].mean_error);
        EXPECT_LE(std::abs(r.mean_error - fp_err), 0.1);
    }
    EXPECT_EQ(recs[1].errors, evaluate_at_time(net, t.test, {1.0, 3600.0, 3.15e7}, 2, noiseless_pcm(), {}, 6)[1].errors);
}
