#pragma once

#include <array>
#include <cstdint>

namespace oilwater {

/// Output block of one keyed-PRF evaluation: 256 bits as four 64-bit lanes.
struct PrfBlock {
    std::array<std::uint64_t, 4> x;
};

/// Philox-4x64 with 10 rounds: a counter-based keyed pseudo-random function.
///
/// Evaluation is a pure function of (key, counter), so draws addressed by
/// counters can be queried in any order, from any thread, and replayed
/// bit-exactly. Constants and round structure follow Salmon et al.,
/// "Parallel random numbers: as easy as 1, 2, 3" (SC'11).
class Philox4x64 {
public:
    Philox4x64(std::uint64_t key0, std::uint64_t key1) : k0_(key0), k1_(key1) {}

    /// Identifier recorded in run provenance.
    static constexpr const char* id() { return "philox4x64-10"; }

    PrfBlock block(std::uint64_t c0, std::uint64_t c1, std::uint64_t c2,
                   std::uint64_t c3) const {
        std::uint64_t x0 = c0, x1 = c1, x2 = c2, x3 = c3;
        std::uint64_t k0 = k0_, k1 = k1_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t hi0 = mulhi(kMult0, x0);
            const std::uint64_t lo0 = kMult0 * x0;
            const std::uint64_t hi1 = mulhi(kMult1, x2);
            const std::uint64_t lo1 = kMult1 * x2;
            const std::uint64_t y0 = hi1 ^ x1 ^ k0;
            const std::uint64_t y1 = lo1;
            const std::uint64_t y2 = hi0 ^ x3 ^ k1;
            const std::uint64_t y3 = lo0;
            x0 = y0;
            x1 = y1;
            x2 = y2;
            x3 = y3;
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return PrfBlock{{x0, x1, x2, x3}};
    }

    /// First lane only; enough for one 64-bit word of randomness.
    std::uint64_t word(std::uint64_t c0, std::uint64_t c1, std::uint64_t c2,
                       std::uint64_t c3) const {
        return block(c0, c1, c2, c3).x[0];
    }

    std::uint64_t key0() const { return k0_; }
    std::uint64_t key1() const { return k1_; }

private:
    static std::uint64_t mulhi(std::uint64_t a, std::uint64_t b) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(a) * b) >> 64);
    }

    static constexpr std::uint64_t kMult0 = 0xD2E7470EE14C6C93ULL;
    static constexpr std::uint64_t kMult1 = 0xCA5A826395121157ULL;
    static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

    std::uint64_t k0_;
    std::uint64_t k1_;
};

/// SplitMix64 step, used for deriving per-run seeds from (base, n, replicate).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace oilwater
