#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace automo {

// splitmix64 finalizer; used to derive independent stream seeds from a
// master seed plus a path of tags. The standard library distributions are
// implementation-defined, so sampling is done by hand to keep runs
// reproducible across toolchains.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
    return derive_seed(mix64(seed ^ mix64(tag)), rest...);
}

// Named stream tags so call sites do not collide by accident.
namespace stream {
inline constexpr std::uint64_t kInitArch   = 0x11;
inline constexpr std::uint64_t kInitWeights = 0x12;
inline constexpr std::uint64_t kCloneGate  = 0x21;
inline constexpr std::uint64_t kMutate     = 0x22;
inline constexpr std::uint64_t kTta        = 0x31;
inline constexpr std::uint64_t kEvaluate   = 0x32;
inline constexpr std::uint64_t kSynth      = 0x41;
inline constexpr std::uint64_t kTune       = 0x51;
inline constexpr std::uint64_t kAttackEval = 0x61;
}  // namespace stream

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform on the open interval (0, 1); never returns an exact endpoint
    double uniform01() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // inclusive integer range
    long uniform_int(long lo, long hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<long>(gen_() % span);
    }

    // standard normal via Box-Muller; one value carried between calls
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace automo
