#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "oilwater/lattice.hpp"
#include "oilwater/run.hpp"
#include "oilwater/stacks.hpp"

namespace oilwater {

/// Dense signed tally on Z with on-demand growth; reads outside return 0.
class Tally1D {
public:
    std::int64_t at(std::int64_t x) const {
        std::int64_t i = x - lo_;
        return (i >= 0 && i < static_cast<std::int64_t>(v_.size())) ? v_[i] : 0;
    }
    std::int64_t& ref(std::int64_t x) {
        if (v_.empty()) {
            lo_ = x - 8;
            v_.assign(17, 0);
        } else if (x < lo_ || x >= lo_ + static_cast<std::int64_t>(v_.size())) {
            grow(x);
        }
        return v_[static_cast<std::size_t>(x - lo_)];
    }
    std::int64_t lo() const { return lo_; }
    std::int64_t hi() const { return lo_ + static_cast<std::int64_t>(v_.size()); }
    bool empty() const { return v_.empty(); }

private:
    void grow(std::int64_t x) {
        std::int64_t nlo = lo_, nhi = lo_ + static_cast<std::int64_t>(v_.size());
        while (x < nlo) nlo -= (nhi - nlo);
        while (x >= nhi) nhi += (nhi - nlo);
        std::vector<std::int64_t> nv(static_cast<std::size_t>(nhi - nlo), 0);
        std::copy(v_.begin(), v_.end(), nv.begin() + (lo_ - nlo));
        v_ = std::move(nv);
        lo_ = nlo;
    }
    std::int64_t lo_ = 0;
    std::vector<std::int64_t> v_;
};

/// Default nontermination guard: 100 * 16 n^4 firings, saturating.
std::int64_t default_firing_budget(std::int64_t n);

/// The d=1 engine: holds the configuration, odometer and ledgers, and
/// executes single firings, exact stack-sum batches, or visit-keyed batches.
class Engine1D {
public:
    struct Options {
        StackMode mode = StackMode::plain;
        bool trajectory = false;  // per-firing ledger (exact dynamics only)
        bool flux = false;        // edge crossings + arrival counts
        std::int64_t series_cap = std::int64_t(1) << 20;
        std::int64_t window_half_cap = std::int64_t(1) << 22;
    };

    Engine1D(std::int64_t n, std::uint64_t seed, Options opt = {});

    StackSource& source() { return src_; }
    const Config1D& config() const { return cfg_; }
    std::int64_t n() const { return cfg_.n(); }
    std::int64_t tau() const { return tau_; }
    std::int64_t pair_count() const { return pairs_; }
    std::int64_t u(std::int64_t x) const { return u_.at(x); }

    bool is_legal(std::int64_t x) const { return cfg_.pairs(x) >= 1; }

    /// Fire one oil-water pair from x. Throws IllegalSiteError when no pair
    /// is present (a policy bug, not a data condition).
    void fire_pair(std::int64_t x);

    /// Fire k pairs from x in one step using the exact partial sums of the
    /// same stack draws; end state is identical to k fire_pair calls.
    void fire_batch(std::int64_t x, std::int64_t k);

    /// Batched-engine visit: fires all pairs at x with Binomial(k,1/2) splits
    /// keyed by (site, visit ordinal). Distributionally equivalent to the
    /// exact dynamics, not bit-equal.
    void fire_visit(std::int64_t x);

    bool window_capped() const { return cfg_.window_half() > opt_.window_half_cap; }

    /// Assemble the record (trims profiles, computes summary statistics).
    RunRecord snapshot() const;

private:
    void apply_moves(std::int64_t x, std::int64_t k, std::int64_t oil_right,
                     std::int64_t water_right);
    std::int64_t local_pairs(std::int64_t x) const {
        return cfg_.pairs(x - 1) + cfg_.pairs(x) + cfg_.pairs(x + 1);
    }
    void push_series();

    StackSource src_;
    Config1D cfg_;
    Options opt_;
    Tally1D u_;
    Tally1D visits_;        // batched-mode visit ordinals
    Tally1D merged_fired_;  // merged ordinals, indexed by anchor/3
    Tally1D returns_;
    Tally1D right_, left_, entries_;
    std::int64_t tau_ = 0;
    std::int64_t pairs_ = 0;
    Trajectory traj_;
    std::int64_t series_stride_ = 1;
    std::int64_t series_next_ = 0;
};

/// Full run description consumed by run_to_fixation.
struct RunParams {
    std::int64_t n = 0;
    int dim = 1;
    std::uint64_t seed = 0;
    PolicyKind policy = PolicyKind::leftmost;
    EngineKind engine = EngineKind::exact;
    StackMode mode = StackMode::plain;
    bool observables = false;  // ledgers appropriate to dim/engine
    bool record_sequence = false;
    std::int64_t budget = 0;  // 0 = default_firing_budget(n)
    std::int64_t window_half_cap = 0;  // 0 = per-dimension default
    std::int64_t series_cap = std::int64_t(1) << 20;
    std::vector<std::int64_t> script;  // scripted policy: d=1 firing sites
};

/// Run until no site holds both species (or a guard trips). Deterministic in
/// (params); for a fixed seed and the exact engine the odometer and final
/// configuration do not depend on the policy.
RunRecord run_to_fixation(const RunParams& params);

struct AbelianReport {
    bool ok = false;
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    std::vector<PolicyKind> policies;
    std::vector<std::int64_t> mismatch_sites;
    std::vector<std::int64_t> taus;
    std::string summary() const;
};

/// Runs the exact engine once per policy and compares odometers and final
/// configurations bitwise.
AbelianReport verify_abelian(std::int64_t n, std::uint64_t seed,
                             const std::vector<PolicyKind>& policies, int dim = 1,
                             StackMode mode = StackMode::plain);

struct LeastActionReport {
    bool ok = false;
    std::int64_t prefix_length = 0;
    std::int64_t complete_tau = 0;
    std::vector<std::int64_t> violation_sites;
};

/// Executes a legal prefix (throws IllegalPrefixError otherwise) and checks
/// its odometer is pointwise dominated by the complete run's odometer.
LeastActionReport verify_least_action(std::int64_t n, std::uint64_t seed,
                                      const std::vector<std::int64_t>& prefix,
                                      PolicyKind complete_policy);

/// Firing sites of a complete run under `policy` (for building prefixes).
std::vector<std::int64_t> firing_sequence(std::int64_t n, std::uint64_t seed,
                                          PolicyKind policy);

/// Adversarial prefix: fire `site` for as long as it stays legal (up to cap).
std::vector<std::int64_t> single_site_prefix(std::int64_t n, std::uint64_t seed,
                                             std::int64_t site,
                                             std::int64_t cap = 1 << 20);

}  // namespace oilwater
