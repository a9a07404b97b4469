#ifndef MMV_RNG_HPP
#define MMV_RNG_HPP

#include <cmath>
#include <cstdint>

namespace mmv {

/// Counter-based substream generator (splitmix64 scrambler).
///
/// Each (master seed, stream index) pair addresses an independent substream,
/// so per-path noise is identical whether paths are evaluated serially, in
/// parallel, or out of order.
class PathRng {
public:
    PathRng(std::uint64_t master_seed, std::uint64_t stream)
        : state_(mix(master_seed + 0x9E3779B97F4A7C15ULL * (stream + 1)) ^
                 mix(master_seed ^ 0xD1B54A32D192ED03ULL)) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform draw in the open interval (0, 1).
    double next_uniform() {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; pairs are cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mmv

#endif  // MMV_RNG_HPP
