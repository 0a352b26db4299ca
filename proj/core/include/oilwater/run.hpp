#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "oilwater/stacks.hpp"

namespace oilwater {

enum class PolicyKind {
    leftmost,
    rightmost,
    uniform_random,
    sweep_parallel,
    scripted,
};

enum class EngineKind { exact, batched };

enum class Anomaly { none, firing_budget_exhausted, window_cap_exceeded };

const char* to_string(PolicyKind p);
const char* to_string(EngineKind e);
const char* to_string(StackMode m);
const char* to_string(Anomaly a);

/// Per-firing pair-count statistics of one run (d=1, exact engine).
/// Class indices follow the four conditional increment laws of the pair
/// count, keyed by the signed imbalance of the firing site's neighbors.
struct Trajectory {
    std::vector<std::int64_t> pair_series;  // P_t, subsampled by `stride`
    std::int64_t stride = 1;
    std::array<std::int64_t, 4> class_counts{};  // N_1..N_4
    std::int64_t returns_total = 0;              // independent per-site tally
    std::int64_t returns_base = 0;
    std::vector<std::int64_t> returns_by_site;
    std::int64_t delta_p_sum = 0;  // running sum of realized increments
};

/// Per-edge particle crossings and per-site arrival counts (d=1).
/// Edge i spans (edge_base+i, edge_base+i+1); `right[i]` counts crossings
/// left-to-right, `left[i]` the reverse. Each firing contributes exactly two
/// crossing events.
struct FluxLedger {
    std::int64_t edge_base = 0;
    std::vector<std::int64_t> right;
    std::vector<std::int64_t> left;
    std::int64_t entry_base = 0;
    std::vector<std::int64_t> entries;

    std::int64_t right_at(std::int64_t x) const {
        std::int64_t i = x - edge_base;
        return (i >= 0 && i < static_cast<std::int64_t>(right.size())) ? right[i] : 0;
    }
    std::int64_t left_at(std::int64_t x) const {
        std::int64_t i = x - edge_base;
        return (i >= 0 && i < static_cast<std::int64_t>(left.size())) ? left[i] : 0;
    }
    std::int64_t entries_at(std::int64_t x) const {
        std::int64_t i = x - entry_base;
        return (i >= 0 && i < static_cast<std::int64_t>(entries.size())) ? entries[i]
                                                                         : 0;
    }
};

/// Everything one run produces: provenance, odometer, final configuration,
/// stopping time and optional observable ledgers.
struct RunRecord {
    // provenance
    std::int64_t n = 0;
    int dim = 1;
    std::uint64_t seed = 0;
    PolicyKind policy = PolicyKind::leftmost;
    EngineKind engine = EngineKind::exact;
    StackMode mode = StackMode::plain;
    std::string prf_id;

    // outcome
    std::int64_t tau = 0;
    Anomaly anomaly = Anomaly::none;
    std::int64_t budget = 0;
    bool complete = false;  // false for scripted prefixes / anomalous stops

    // d=1 dense profiles over [x0, x0+len)
    std::int64_t x0 = 0;
    std::vector<std::int64_t> odometer;
    std::vector<std::int64_t> oil;
    std::vector<std::int64_t> water;

    // d>=2 sparse cells (sites with firings or particles)
    struct Cell {
        std::array<std::int32_t, 4> x{};
        std::int64_t u = 0, oil = 0, water = 0;
    };
    std::vector<Cell> cells;

    // summary statistics
    std::int64_t height = 0;
    std::int64_t base_lo = 0, base_hi = -1;  // d=1 {x: u(x)>0}; empty if hi<lo
    std::array<std::int32_t, 4> base_box_lo{}, base_box_hi{};  // d>=2
    double support_radius = 0;  // particles: max |x| (d=1) or Euclidean norm
    std::int64_t rightmost = std::numeric_limits<std::int64_t>::min();

    std::optional<Trajectory> trajectory;
    std::optional<FluxLedger> flux;

    /// Firing sites in execution order; kept only on request (prefix building).
    std::vector<std::int64_t> sequence;

    double wall_time = 0;

    // d=1 profile accessors (0 outside the stored window)
    std::int64_t u_at(std::int64_t x) const { return window_at(odometer, x); }
    std::int64_t oil_at(std::int64_t x) const { return window_at(oil, x); }
    std::int64_t water_at(std::int64_t x) const { return window_at(water, x); }
    std::int64_t g_at(std::int64_t x) const { return oil_at(x) - water_at(x); }

private:
    std::int64_t window_at(const std::vector<std::int64_t>& v, std::int64_t x) const {
        std::int64_t i = x - x0;
        return (i >= 0 && i < static_cast<std::int64_t>(v.size())) ? v[i] : 0;
    }
};

}  // namespace oilwater
