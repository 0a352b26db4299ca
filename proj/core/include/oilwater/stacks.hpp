#pragma once

#include <array>
#include <atomic>
#include <bit>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>

#include "oilwater/prf.hpp"

namespace oilwater {

enum class Species : std::uint32_t { oil = 0, water = 1 };

/// Plain: one stack pair (X, Y) per lattice site.
/// Merged: d=1 variant where sites 3Z +/- 1 share a sign-flipped stack
/// anchored at the nearest multiple of 3; sites in 3Z keep plain stacks.
enum class StackMode { plain, merged };

struct StackError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Address of one pre-committed +/-1 draw: (site, firing ordinal, species,
/// axis). Equal addresses always yield the same draw under the same seed.
struct StackAddress {
    std::array<std::int64_t, 4> site{};  // coordinates 0..dim-1
    std::uint64_t index = 1;             // firing ordinal k >= 1
    Species species = Species::oil;
    std::uint32_t axis = 0;  // coordinate axis, 0 in d=1
};

/// A signed unit move in d >= 2: +/- e_axis.
struct UnitStep {
    std::uint32_t axis;
    int sign;  // +1 or -1
};

/// Deterministic, seed-keyed source of the infinite +/-1 stacks.
///
/// Every draw is a pure function of (seed, address) evaluated through a
/// counter-based PRF, so no stack storage exists, query order is irrelevant,
/// and concurrent reads need no synchronization. Sign draws are packed 64 per
/// PRF word, which lets batch operations take exact partial sums of the same
/// bits the per-firing path reads.
class StackSource {
public:
    explicit StackSource(std::uint64_t seed, StackMode mode = StackMode::plain,
                         int dimension = 1)
        : prf_(seed, kKeySalt), seed_(seed), mode_(mode), dim_(dimension) {
        if (dimension < 1 || dimension > 4)
            throw StackError("StackSource: dimension must be in [1,4]");
        if (mode == StackMode::merged && dimension != 1)
            throw StackError("StackSource: merged stacks are defined in d=1 only");
    }

    std::uint64_t seed() const { return seed_; }
    StackMode mode() const { return mode_; }
    int dimension() const { return dim_; }
    static constexpr const char* prf_id() { return Philox4x64::id(); }

    /// +/-1 move component for the given address (d=1 movement draw).
    int draw_move(const StackAddress& a) const {
        if (a.index == 0) throw StackError("draw_move: index must be >= 1");
        int v = sign_at(pack_site(a.site), a.index, a.species, a.axis);
        return apply_fault(v);
    }

    /// d>=2 movement draw: a uniformly chosen signed unit vector, built from
    /// an axis sub-draw and a sign sub-draw.
    UnitStep draw_step(std::span<const std::int64_t> site, std::uint64_t index,
                       Species s) const {
        const std::uint64_t c0 = pack_coords01(site);
        const std::uint64_t c1 = pack_coords23(site);
        const std::uint32_t axis = draw_axis(c0, c1, index, s);
        const std::uint64_t w =
            sign_word(c0, c1, (index - 1) / 64, s, axis, kDomainSign);
        int sign = bit_sign(w, (index - 1) % 64);
        return UnitStep{axis, apply_fault(sign)};
    }

    /// Merged-stack draw for a firing site in 3Z +/- 1; the shared stack lives
    /// at the anchor (the adjacent multiple of 3) and is negated for sites in
    /// 3Z + 1. merged_index counts firings from the pair {anchor-1, anchor+1}
    /// jointly. Sites in 3Z use plain stacks and are rejected here.
    int merged_draw(std::int64_t firing_site, std::uint64_t merged_index,
                    Species s) const {
        if (mode_ != StackMode::merged)
            throw StackError("merged_draw: source is not in merged mode");
        if (merged_index == 0)
            throw StackError("merged_draw: index must be >= 1");
        const int r = mod3(firing_site);
        if (r == 0)
            throw StackError("merged_draw: sites in 3Z use plain stacks");
        const std::int64_t anchor = (r == 2) ? firing_site + 1 : firing_site - 1;
        const int flip = (r == 2) ? +1 : -1;  // 3Z-1 reads +X, 3Z+1 reads -X
        const std::uint64_t w =
            sign_word(static_cast<std::uint64_t>(anchor), 0,
                      (merged_index - 1) / 64, s, 0, kDomainMerged);
        return apply_fault(flip * bit_sign(w, (merged_index - 1) % 64));
    }

    /// Delta^x(k): among the first k oil and k water draws at `site`, the
    /// number that moved right minus k. |Delta| <= k, Delta(0) = 0.
    std::int64_t prefix_imbalance(std::int64_t site, std::int64_t k) const {
        if (k < 0) throw StackError("prefix_imbalance: k must be >= 0");
        if (k == 0) return 0;
        return right_moves(site, Species::oil, 1, static_cast<std::uint64_t>(k)) +
               right_moves(site, Species::water, 1, static_cast<std::uint64_t>(k)) -
               k;
    }

    /// Number of +1 draws among sign indices [first, first+count-1] at a d=1
    /// site. Exactly the partial sum the per-firing path would accumulate.
    std::int64_t right_moves(std::int64_t site, Species s, std::uint64_t first,
                             std::uint64_t count) const {
        return popcount_range(static_cast<std::uint64_t>(site), 0, s, 0,
                              kDomainSign, first, count);
    }

    /// Same partial sum over a merged stack at an anchor in 3Z (raw draws,
    /// before any site-dependent sign flip).
    std::int64_t merged_right_moves(std::int64_t anchor, Species s,
                                    std::uint64_t first, std::uint64_t count) const {
        return popcount_range(static_cast<std::uint64_t>(anchor), 0, s, 0,
                              kDomainMerged, first, count);
    }

    /// Exact Binomial(k, 1/2) for the batched engine, keyed by
    /// (site, visit ordinal, species, stage); independent of the stacks.
    std::int64_t batch_heads(std::uint64_t packed_site, std::uint64_t visit,
                             Species s, std::uint32_t stage, std::uint64_t k) const {
        std::int64_t heads = 0;
        for (std::uint64_t chunk = 0; chunk * 64 < k; ++chunk) {
            std::uint64_t w = word(packed_site, chunk + 1, visit,
                                   tag(kDomainBatch, s, stage));
            const std::uint64_t left = k - chunk * 64;
            if (left < 64) w &= (1ULL << left) - 1;
            heads += std::popcount(w);
        }
        return heads;
    }

    /// Auxiliary uniform word for firing-policy selection draws.
    std::uint64_t policy_word(std::uint64_t step) const {
        return word(0, 0, step, tag(kDomainPolicy, Species::oil, 0));
    }

    static std::uint64_t pack2(std::int64_t x, std::int64_t y) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(
                    static_cast<std::int32_t>(x)))
                << 32) |
               static_cast<std::uint32_t>(static_cast<std::int32_t>(y));
    }

    // ---- test hooks ----------------------------------------------------

    /// Test stub: every +/-1 draw returns +1 (axis draws unaffected).
    void force_all_moves_positive(bool on) { force_plus_ = on; }

    /// Fault injection for verification-suite self-tests: flips the result of
    /// the nth single-draw query. Arming this deliberately breaks the
    /// pure-function contract; never used outside test/verify builds.
    void arm_query_fault(std::uint64_t nth) {
        fault_at_ = nth;
        fault_counter_ = std::make_shared<std::atomic<std::uint64_t>>(0);
    }

private:
    static constexpr std::uint64_t kKeySalt = 0x6F696C2B77617465ULL;

    static constexpr std::uint32_t kDomainSign = 1;
    static constexpr std::uint32_t kDomainAxis = 2;
    static constexpr std::uint32_t kDomainAxisReject = 3;
    static constexpr std::uint32_t kDomainMerged = 4;
    static constexpr std::uint32_t kDomainBatch = 5;
    static constexpr std::uint32_t kDomainPolicy = 6;

    static std::uint64_t tag(std::uint32_t domain, Species s, std::uint32_t extra) {
        return static_cast<std::uint64_t>(domain) |
               (static_cast<std::uint64_t>(s) << 8) |
               (static_cast<std::uint64_t>(extra) << 16);
    }

    static int mod3(std::int64_t x) {
        return static_cast<int>(((x % 3) + 3) % 3);
    }

    std::uint64_t pack_site(const std::array<std::int64_t, 4>& site) const {
        if (dim_ == 1) return static_cast<std::uint64_t>(site[0]);
        return pack_coords01(std::span<const std::int64_t>(site.data(), dim_));
    }

    static std::uint64_t pack_coords01(std::span<const std::int64_t> site) {
        std::int64_t a = site[0];
        std::int64_t b = site.size() > 1 ? site[1] : 0;
        return pack2(a, b);
    }

    static std::uint64_t pack_coords23(std::span<const std::int64_t> site) {
        if (site.size() <= 2) return 0;
        std::int64_t a = site[2];
        std::int64_t b = site.size() > 3 ? site[3] : 0;
        return pack2(a, b);
    }

    std::uint64_t word(std::uint64_t c0, std::uint64_t c1, std::uint64_t c2,
                       std::uint64_t c3) const {
        return prf_.word(c0, c1, c2, c3);
    }

    std::uint64_t sign_word(std::uint64_t c0, std::uint64_t c1,
                            std::uint64_t block, Species s, std::uint32_t axis,
                            std::uint32_t domain) const {
        if (force_plus_) return ~0ULL;
        return word(c0, c1, block, tag(domain, s, axis));
    }

    static int bit_sign(std::uint64_t w, std::uint64_t bit) {
        return ((w >> bit) & 1) ? +1 : -1;
    }

    int sign_at(std::uint64_t packed_site, std::uint64_t index, Species s,
                std::uint32_t axis) const {
        const std::uint64_t w =
            sign_word(packed_site, 0, (index - 1) / 64, s, axis, kDomainSign);
        return bit_sign(w, (index - 1) % 64);
    }

    std::uint32_t draw_axis(std::uint64_t c0, std::uint64_t c1,
                            std::uint64_t index, Species s) const {
        if (dim_ == 1) return 0;
        if (dim_ == 2 || dim_ == 4) {
            const std::uint32_t bits_per = (dim_ == 2) ? 1 : 2;
            const std::uint64_t per_word = 64 / bits_per;
            const std::uint64_t w = word(c0, c1, (index - 1) / per_word,
                                         tag(kDomainAxis, s, 0));
            const std::uint64_t off = ((index - 1) % per_word) * bits_per;
            return static_cast<std::uint32_t>((w >> off) & ((1u << bits_per) - 1));
        }
        // d=3: rejection over 2-bit groups; one word almost always suffices.
        for (std::uint32_t attempt = 0;; ++attempt) {
            const std::uint64_t w =
                word(c0, c1, index, tag(kDomainAxisReject, s, attempt));
            for (int g = 0; g < 32; ++g) {
                const std::uint32_t v =
                    static_cast<std::uint32_t>((w >> (2 * g)) & 3u);
                if (v < 3) return v;
            }
        }
    }

    std::int64_t popcount_range(std::uint64_t c0, std::uint64_t c1, Species s,
                                std::uint32_t axis, std::uint32_t domain,
                                std::uint64_t first, std::uint64_t count) const {
        if (count == 0) return 0;
        const std::uint64_t last = first + count - 1;  // inclusive, 1-based
        std::int64_t total = 0;
        for (std::uint64_t block = (first - 1) / 64; block <= (last - 1) / 64;
             ++block) {
            std::uint64_t w = sign_word(c0, c1, block, s, axis, domain);
            const std::uint64_t base = block * 64 + 1;
            const std::uint64_t lo = (first > base) ? first - base : 0;
            const std::uint64_t hi = (last < base + 63) ? last - base : 63;
            std::uint64_t mask = ~0ULL;
            if (hi < 63) mask = (1ULL << (hi + 1)) - 1;
            mask &= ~((1ULL << lo) - 1);
            total += std::popcount(w & mask);
        }
        return total;
    }

    int apply_fault(int v) const {
        if (fault_counter_) {
            const std::uint64_t q =
                fault_counter_->fetch_add(1, std::memory_order_relaxed) + 1;
            if (q == fault_at_) return -v;
        }
        return v;
    }

    Philox4x64 prf_;
    std::uint64_t seed_;
    StackMode mode_;
    int dim_;
    bool force_plus_ = false;
    std::uint64_t fault_at_ = 0;
    std::shared_ptr<std::atomic<std::uint64_t>> fault_counter_;
};

}  // namespace oilwater
