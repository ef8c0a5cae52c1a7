// Counter-based random streams: trajectory t's variates depend only on
// (master_seed, t), never on scheduling or worker count.

#pragma once

#include <cstdint>

namespace qheat::rng {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Stream {
public:
    Stream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
        : state_(mix64(mix64(master_seed ^ 0xA0761D6478BD642FULL) ^ stream_id)) {}

    std::uint64_t next_u64() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    // uniform in [0, 1)
    double next_unit() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1), safe as argument of log
    double next_unit_open() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

} // namespace qheat::rng
