#include "spillover/rng.hpp"

namespace spillover {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t derive_key(std::uint64_t parent, std::uint64_t child) {
    return mix64(mix64(parent + kGolden) ^ (child * 0xd1b54a32d192ed03ULL + 0x2545f4914f6cdd1dULL));
}

CounterRng::result_type CounterRng::operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() {
    // 53 random mantissa bits, shifted by half an ulp so 0 is never produced.
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() { return normal_(*this); }

}  // namespace spillover
