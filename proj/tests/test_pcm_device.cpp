#include <aimc/pcm_device.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace aimc;

namespace {

double sample_std(const Matrix& m)
{
    const double mean = m.mean();
    return std::sqrt((m.array() - mean).square().sum() / static_cast<double>(m.size() - 1));
}

} // namespace

TEST(ProgrammingNoise, ClosedForm)
{
    const PcmModelParams p;
    EXPECT_NEAR(programming_noise_std(0.0, p), 0.26348, 1e-12);
    EXPECT_NEAR(programming_noise_std(p.g_max, p), 1.05538, 1e-12);
    EXPECT_NEAR(programming_noise_std(0.5 * p.g_max, p), 0.26348 + 1.9650 * 0.5 - 1.1731 * 0.25, 1e-12);
    EXPECT_NEAR(programming_noise_std(0.5 * p.g_max, p), 0.952705, 1e-9);
}

TEST(ProgrammingNoise, ZeroCoefficientsGiveTargets)
{
    PcmModelParams p;
    p.prog_c0 = p.prog_c1 = p.prog_c2 = 0.0;
    RandomStream rng(3);
    const Matrix g = Matrix::Zero(4, 5);
    EXPECT_EQ(program_conductances(g, p, rng), g);
}

TEST(ProgrammingNoise, MonteCarloMatchesClosedForm)
{
    const PcmModelParams p;
    for (const double frac : {0.1, 0.5, 1.0}) {
        RandomStream rng(11, "prog", static_cast<std::uint64_t>(frac * 100));
        const double g = frac * p.g_max;
        const Matrix gp = program_conductances(Matrix::Constant(1000, 100, g), p, rng);
        const double expected = programming_noise_std(g, p);
        EXPECT_NEAR(sample_std(gp) / expected, 1.0, 0.02) << frac;
    }
}

TEST(ProgrammingNoise, SameSeedSameDevice)
{
    const PcmModelParams p;
    RandomStream a(5), b(5);
    const Matrix g = Matrix::Constant(1, 1, 12.0);
    EXPECT_EQ(program_conductances(g, p, a)(0), program_conductances(g, p, b)(0));
}

TEST(ProgrammingNoise, ClippedAtGmin)
{
    const PcmModelParams p;
    RandomStream rng(8);
    EXPECT_GE(program_conductances(Matrix::Zero(100, 100), p, rng).minCoeff(), 0.0);
}

TEST(Drift, CoefficientFits)
{
    const PcmModelParams p;
    EXPECT_NEAR(drift_mean(p.g_max, p), 0.049, 1e-12);
    EXPECT_NEAR(drift_mean(std::exp(-4.0) * p.g_max, p), -0.0155 * -4.0 + 0.0244, 1e-12);
    EXPECT_NEAR(drift_mean(std::exp(-4.0) * p.g_max, p), 0.0864, 1e-12);
    EXPECT_NEAR(drift_std(p.g_max, p), 0.008, 1e-12);
    // ln 0 is evaluated at the smallest argument, so the ceiling applies
    EXPECT_NEAR(drift_mean(0.0, p), 0.1, 1e-12);
}

TEST(Drift, PowerLaw)
{
    const PcmModelParams p;
    EXPECT_EQ(drift_conductance(10.0, 0.05, 0.0, p), 10.0);
    EXPECT_EQ(drift_conductance(10.0, 0.0, 1e6, p), 10.0);
    EXPECT_NEAR(drift_conductance(10.0, 0.05, 3600.0, p), 10.0 * std::pow(181.0, -0.05), 1e-12);
    EXPECT_NEAR(drift_conductance(10.0, 0.05, 3600.0, p), 7.71, 5e-3);
}

TEST(Drift, ExponentsNonNegative)
{
    PcmModelParams p;
    p.sigma_nu_fit = ClippedLinearFit{0.0, 0.2, 0.2, 0.2};
    RandomStream rng(2);
    EXPECT_GE(sample_drift_coefficients(Matrix::Constant(100, 100, 1.0), p, rng).minCoeff(), 0.0);
}

TEST(ReadNoise, QsFit)
{
    const PcmModelParams p;
    EXPECT_EQ(read_noise_std(0.0, 3600.0, p), 0.0);
    EXPECT_NEAR(read_noise_qs(0.01 * p.g_max, p), 0.0088 * std::pow(0.01, -0.65), 1e-12);
    EXPECT_NEAR(read_noise_qs(0.01 * p.g_max, p), 0.175583, 1e-6);
    EXPECT_NEAR(read_noise_qs(1e-9 * p.g_max, p), 0.2, 1e-12);
}

TEST(ReadNoise, MonteCarloMatchesClosedForm)
{
    // drift and programming off so the only spread is read noise
    PcmModelParams p;
    p.prog_noise_scale = 0.0;
    p.drift_scale = 0.0;
    const double t = 3600.0;
    for (const double frac : {0.05, 0.3, 0.9}) {
        const double g = frac * p.g_max;
        RandomStream prog(1), faults(2), drift(3), read(4, "read", static_cast<std::uint64_t>(frac * 100));
        const PcmArray arr(Matrix::Constant(1000, 100, g), p, {}, prog, faults, drift);
        const Matrix r = arr.realize(t, read);
        const double expected = read_noise_std(g, p.read_noise_time(t), p);
        EXPECT_NEAR(sample_std(r) / expected, 1.0, 0.02) << frac;
    }
}

TEST(Realize, NoiselessIsIdentity)
{
    PcmModelParams p;
    p.prog_noise_scale = p.drift_scale = p.read_noise_scale = 0.0;
    RandomStream rng(9);
    Matrix g(3, 3);
    g << 0, 5, 10, 15, 20, 25, 1, 2, 3;
    EXPECT_TRUE(realize_conductances(g, 86400.0, p, {}, rng).isApprox(g, 1e-15));
}

TEST(Realize, AllStuckResetIsZeroForever)
{
    const PcmModelParams p;
    DeviceFaultSpec f;
    f.frac_stuck_reset = 1.0;
    for (const double t : {0.0, 3600.0, 3.15e7}) {
        RandomStream rng(1);
        EXPECT_EQ(realize_conductances(Matrix::Constant(20, 20, 25.0), t, p, f, rng).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Realize, FaultCountsExact)
{
    DeviceFaultSpec f;
    f.frac_stuck_set = 0.1;
    f.frac_stuck_random = 0.05;
    RandomStream rng(4);
    const FaultMask m = draw_faults(20, 50, f, rng);
    int set = 0, random = 0;
    for (Eigen::Index k = 0; k < m.size(); ++k) {
        set += m(k) == FaultKind::stuck_set;
        random += m(k) == FaultKind::stuck_random;
    }
    EXPECT_EQ(set, 100);
    EXPECT_EQ(random, 50);
}

TEST(Realize, MeanDecaysAfterOneHour)
{
    const PcmModelParams p;
    RandomStream rng(6);
    const Matrix g = realize_conductances(Matrix::Constant(200, 200, p.g_max), 3600.0, p, {}, rng);
    EXPECT_LT(g.mean(), p.g_max);
}
