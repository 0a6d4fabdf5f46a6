#ifndef AIMC_QUANTIZE_HPP
#define AIMC_QUANTIZE_HPP

#include <cmath>
#include <stdexcept>

namespace aimc {

/// Constrains z to [lo, hi].
inline double clip(double z, double lo, double hi)
{
    if (lo > hi)
        throw std::domain_error("clip: lower bound exceeds upper bound");
    if (z <= lo)
        return lo;
    if (z >= hi)
        return hi;
    return z;
}

/// Number of quantization steps spanning [-b, b] for a q-bit converter.
/// One code is dropped so that zero is a level: 2^q - 1 levels, 2^q - 2 steps.
inline double quantization_steps(int bits)
{
    if (bits < 2)
        throw std::domain_error("quantize: need at least 2 bits");
    return std::ldexp(1.0, bits) - 2.0;
}

/// Step width of the q-bit quantizer with bound b.
inline double quantization_step(double bound, int bits)
{
    return 2.0 * bound / quantization_steps(bits);
}

/// Uniform symmetric quantizer with 2^q - 1 levels on [-b, b].
///
/// Scales, rounds (ties away from zero), clips and rescales. `step_scale`
/// widens the step continuously (1 is the nominal q-bit grid); the clip
/// bound is unchanged.
inline double quantize(double z, double bound, int bits, double step_scale = 1.0)
{
    const double steps = quantization_steps(bits) / step_scale;
    const double half_range = 2.0 * bound;
    const double level = std::round(z * steps / half_range);
    const double value = level * half_range / steps;
    return value <= -bound ? -bound : (value >= bound ? bound : value);
}

/// Effective bit count of a q-bit quantizer whose step was scaled by s.
inline double effective_bits(int bits, double step_scale)
{
    return std::log2(quantization_steps(bits) / step_scale + 2.0);
}

} // namespace aimc

#endif // AIMC_QUANTIZE_HPP
