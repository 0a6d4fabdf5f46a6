#ifndef AIMC_RANDOM_HPP
#define AIMC_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace aimc {

/// SplitMix64 finalizer. Used to expand one user seed into independent
/// per-purpose seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept
{
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed of the stream named `purpose` derived from `seed`.
///
/// derive_seed(s, name) = splitmix64(s ^ fnv1a(name)); the same (seed, name)
/// pair always gives the same stream, and streams with different names do
/// not share draws.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) noexcept
{
    return splitmix64(seed ^ fnv1a(purpose));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) noexcept
{
    return splitmix64(derive_seed(seed, purpose) + splitmix64(index + 1));
}

/// A seeded random stream. Owned by exactly one caller at a time.
class RandomStream {
public:
    using engine_type = std::mt19937_64;

    explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

    RandomStream(std::uint64_t seed, std::string_view purpose) : engine_(derive_seed(seed, purpose)) {}

    RandomStream(std::uint64_t seed, std::string_view purpose, std::uint64_t index)
        : engine_(derive_seed(seed, purpose, index))
    {}

    double normal() { return normal_(engine_); }

    double uniform(double lo, double hi)
    {
        return lo + (hi - lo) * std::generate_canonical<double, 53>(engine_);
    }

    double uniform01() { return std::generate_canonical<double, 53>(engine_); }

    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n)
    {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

    std::uint64_t next() { return engine_(); }

    engine_type& engine() noexcept { return engine_; }

private:
    engine_type engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace aimc

#endif // AIMC_RANDOM_HPP
