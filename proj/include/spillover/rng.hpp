#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace spillover {

/// SplitMix64 finaliser; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Combines a parent key with a child index into a new independent key.
std::uint64_t derive_key(std::uint64_t parent, std::uint64_t child);

/// Counter-based generator: output k is mix64(key + (k+1)*golden). The key fixes
/// the stream, so results never depend on which thread draws them.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(derive_key(seed, stream)) {}
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform on the open interval (0,1).
    double uniform();
    double normal();

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// Stream tags keep data, bootstrap, fold and policy draws disjoint.
namespace stream {
inline constexpr std::uint64_t kData = 0x44415441ULL;
inline constexpr std::uint64_t kBootstrap = 0x424f4f54ULL;
inline constexpr std::uint64_t kFolds = 0x464f4c44ULL;
inline constexpr std::uint64_t kReplication = 0x5245504cULL;
inline constexpr std::uint64_t kOracle = 0x4f52434cULL;
}  // namespace stream

}  // namespace spillover
