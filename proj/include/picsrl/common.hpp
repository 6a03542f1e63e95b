#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace picsrl {

using Rng = std::mt19937_64;

// Failure classes map onto CLI exit codes (config 2, infeasible 3, numerical 4).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer. Used to derive independent sub-stream seeds so that
/// changing one consumer of randomness never shifts another.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

// Named streams, so call sites read as intent rather than magic numbers.
namespace stream {
inline constexpr std::uint64_t field = 1;
inline constexpr std::uint64_t noise = 2;
inline constexpr std::uint64_t pool = 3;
inline constexpr std::uint64_t bootstrap = 4;
inline constexpr std::uint64_t member = 5;
inline constexpr std::uint64_t episode = 6;
inline constexpr std::uint64_t policy = 7;
inline constexpr std::uint64_t training = 8;
inline constexpr std::uint64_t test_year = 9;
inline constexpr std::uint64_t permutation = 10;
inline constexpr std::uint64_t dqn = 11;
}  // namespace stream

inline double standard_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace picsrl
