#pragma once

#include <cstdint>
#include <random>

namespace tgc {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic stream keyed by (seed, index, tag). Streams with different keys are
/// independent of each other and of generation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t index = 0, std::uint64_t tag = 0)
        : engine_(mix64(mix64(mix64(seed) ^ index) ^ (tag * 0xd1b54a32d192ed03ULL))) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    /// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Purpose tags for keyed streams.
enum class RngTag : std::uint64_t {
    scene_layout = 1,
    scene_shape = 2,
    scene_noise = 3,
    model_init = 10,
    split = 11,
    epoch_order = 12,
    gradcheck = 20,
};

inline Rng make_rng(std::uint64_t seed, std::uint64_t index, RngTag tag) {
    return Rng(seed, index, static_cast<std::uint64_t>(tag));
}

}  // namespace tgc
