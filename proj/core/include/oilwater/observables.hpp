#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oilwater/run.hpp"

namespace oilwater {

/// Total number of co-located oil-water pairs in the final configuration.
std::int64_t pair_count(const RunRecord& run);

/// Class of the pair-count increment given the signed imbalances of the
/// firing site's neighbors: 1 if lr<0, 2 if exactly one is 0, 3 if both are
/// 0, 4 if lr>0.
int classify_increment(std::int64_t l, std::int64_t r);

/// Conditional drift of the pair count for a class, in quarter units
/// (class 2 -> -1, class 3 -> -2, classes 1 and 4 -> 0).
int drift_quarters(int cls);

/// Fold one firing at x into the trajectory: bumps the class count, credits
/// Returns to type-0 neighbors, and checks the realized increment lies in
/// the support of the classified law (violations signal an engine bug).
void record_firing(Trajectory& traj, std::int64_t x, std::int64_t l,
                   std::int64_t r, std::int64_t delta_p);

/// Returns = N2 + 2 N3; equals the independent per-site tally on every run.
std::int64_t returns_total(const Trajectory& traj);

struct DriftCheck {
    std::int64_t drift_quarter_sum = 0;  // 4 * sum of conditional drifts
    std::int64_t returns = 0;
    bool ok = false;  // drift_quarter_sum + returns == 0, exactly
};
DriftCheck empirical_drift_check(const Trajectory& traj);

/// Signed per-site imbalance g(x) = eta_oil - eta_water at fixation.
struct TypedProfile {
    std::int64_t x0 = 0;
    std::vector<std::int64_t> g;
    std::int64_t at(std::int64_t x) const {
        std::int64_t i = x - x0;
        return (i >= 0 && i < static_cast<std::int64_t>(g.size())) ? g[i] : 0;
    }
    /// +1 oil, 0, -1 water.
    int type_at(std::int64_t x) const {
        std::int64_t v = at(x);
        return (v > 0) - (v < 0);
    }
};
TypedProfile final_imbalance(const RunRecord& run);

/// Number of particles fixating outside [-r, r].
std::int64_t fixated_outside(const RunRecord& run, double r);

struct HeightBase {
    std::int64_t height = 0;
    std::int64_t base_lo = 0, base_hi = -1;  // empty if base_hi < base_lo
};
HeightBase height_and_base(const RunRecord& run);

/// Exact mass bookkeeping at every site: 2n delta_0(x) + entries(x) - 2u(x)
/// = |g_tau(x)|, and its discrete-Laplacian rearrangement.
struct LaplaceCheck {
    std::int64_t sites_checked = 0;
    std::int64_t violations = 0;
    std::int64_t first_bad_site = 0;
    bool ok = false;
};
LaplaceCheck laplacian_identity_check(const RunRecord& run);

/// Exact flux identity for every x >= 0: D_{x,x+1} - D_{x+1,x} equals the
/// number of particles fixating right of x. The pair (u(0), D_{0,1}) whose
/// equality holds only in expectation is reported, never asserted.
struct FluxCheck {
    std::int64_t sites_checked = 0;
    std::int64_t violations = 0;
    std::int64_t first_bad_site = 0;
    std::int64_t u0 = 0;
    std::int64_t d01 = 0;  // statistical companion of u0
    bool ok = false;
};
FluxCheck net_flux_check(const RunRecord& run);

/// Recomputes g_tau from the stacks alone (oil/water sent toward x within
/// the first u(x -/+ 1) firings of each neighbor) and compares with the
/// configuration readout. Applicable to plain-mode exact runs.
struct ReconstructionCheck {
    bool applicable = false;
    std::int64_t sites_checked = 0;
    std::int64_t violations = 0;
    bool ok = false;
};
ReconstructionCheck stack_reconstruction_check(const RunRecord& run,
                                               const StackSource& src);

/// All exact per-run identities, checked with zero tolerance.
struct IdentityReport {
    bool has_trajectory = false;
    bool has_flux = false;
    bool p0_ok = true, ptau_ok = true, sum_z_ok = true;
    bool class_total_ok = true, returns_ok = true, drift_ok = true;
    bool conservation_ok = true, completeness_ok = true, tau_sum_ok = true;
    LaplaceCheck laplace;
    FluxCheck flux;
    ReconstructionCheck reconstruction;
    bool ok() const;
    std::string summary() const;
};
IdentityReport verify_run_identities(const RunRecord& run,
                                     const StackSource* src = nullptr);

/// Monte Carlo statistics of the lazy walk (hold w.p. 1/2, +/-1 w.p. 1/4):
/// mean sup_{i<t}|R_i|, mean |R_t|, and the frequency of
/// Zeros(0.9 t) > 0.1 sqrt(t), counting R_0.
struct LazyWalkStats {
    std::int64_t t = 0;
    std::int64_t trials = 0;
    double mean_sup_abs = 0;
    double mean_abs_final = 0;
    double zero_success_rate = 0;
};
LazyWalkStats lazy_walk_stats(std::int64_t t, std::int64_t trials,
                              std::uint64_t seed = 1);

}  // namespace oilwater
