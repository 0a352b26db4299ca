#include "oilwater/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "oilwater/observables.hpp"

namespace oilwater {

const char* to_string(PolicyKind p) {
    switch (p) {
        case PolicyKind::leftmost: return "leftmost";
        case PolicyKind::rightmost: return "rightmost";
        case PolicyKind::uniform_random: return "uniform-random";
        case PolicyKind::sweep_parallel: return "sweep-parallel";
        case PolicyKind::scripted: return "scripted";
    }
    return "?";
}

const char* to_string(EngineKind e) {
    return e == EngineKind::exact ? "exact" : "batched";
}

const char* to_string(StackMode m) {
    return m == StackMode::plain ? "plain" : "merged";
}

const char* to_string(Anomaly a) {
    switch (a) {
        case Anomaly::none: return "none";
        case Anomaly::firing_budget_exhausted: return "firing-budget-exhausted";
        case Anomaly::window_cap_exceeded: return "window-cap-exceeded";
    }
    return "?";
}

std::int64_t default_firing_budget(std::int64_t n) {
    if (n <= 1) return 1600;
    unsigned __int128 b = 1600;
    for (int i = 0; i < 4; ++i) {
        b *= static_cast<unsigned __int128>(n);
        if (b > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max()))
            return std::numeric_limits<std::int64_t>::max();
    }
    return static_cast<std::int64_t>(b);
}

// ---------------------------------------------------------------------------
// Engine1D

Engine1D::Engine1D(std::int64_t n, std::uint64_t seed, Options opt)
    : src_(seed, opt.mode, 1), cfg_(n), opt_(opt) {
    if (n < 0) throw EngineError("Engine1D: n must be >= 0");
    pairs_ = n;
    if (opt_.trajectory) {
        traj_.pair_series.push_back(pairs_);  // P_0 = n
        series_next_ = series_stride_;
    }
}

void Engine1D::push_series() {
    if (tau_ != series_next_) return;
    traj_.pair_series.push_back(pairs_);
    series_next_ += series_stride_;
    if (static_cast<std::int64_t>(traj_.pair_series.size()) > opt_.series_cap) {
        std::vector<std::int64_t> half;
        half.reserve(traj_.pair_series.size() / 2 + 1);
        for (std::size_t i = 0; i < traj_.pair_series.size(); i += 2)
            half.push_back(traj_.pair_series[i]);
        traj_.pair_series = std::move(half);
        series_stride_ *= 2;
        traj_.stride = series_stride_;
        series_next_ =
            static_cast<std::int64_t>(traj_.pair_series.size()) * series_stride_;
    }
}

void Engine1D::fire_pair(std::int64_t x) {
    if (!is_legal(x))
        throw IllegalSiteError("fire_pair: no oil-water pair at site " +
                               std::to_string(x));
    int sx, sy;
    const int r3 = static_cast<int>(((x % 3) + 3) % 3);
    if (src_.mode() == StackMode::merged && r3 != 0) {
        const std::int64_t anchor = (r3 == 2) ? x + 1 : x - 1;
        const std::int64_t ord = ++merged_fired_.ref(anchor / 3);
        sx = src_.merged_draw(x, static_cast<std::uint64_t>(ord), Species::oil);
        sy = src_.merged_draw(x, static_cast<std::uint64_t>(ord), Species::water);
    } else {
        StackAddress a;
        a.site[0] = x;
        a.index = static_cast<std::uint64_t>(u_.at(x)) + 1;
        a.species = Species::oil;
        sx = src_.draw_move(a);
        a.species = Species::water;
        sy = src_.draw_move(a);
    }

    const std::int64_t l = cfg_.g(x - 1);
    const std::int64_t r = cfg_.g(x + 1);
    const std::int64_t before = local_pairs(x);
    cfg_.remove(x, false, 1);
    cfg_.remove(x, true, 1);
    cfg_.add(x + sx, false, 1);
    cfg_.add(x + sy, true, 1);
    const std::int64_t dp = local_pairs(x) - before;
    pairs_ += dp;
    u_.ref(x) += 1;
    ++tau_;

    if (opt_.flux) {
        if (sx > 0) ++right_.ref(x); else ++left_.ref(x - 1);
        if (sy > 0) ++right_.ref(x); else ++left_.ref(x - 1);
        ++entries_.ref(x + sx);
        ++entries_.ref(x + sy);
    }
    if (opt_.trajectory) {
        record_firing(traj_, x, l, r, dp);
        push_series();
    }
}

void Engine1D::fire_batch(std::int64_t x, std::int64_t k) {
    if (k < 0) throw InsufficientPairsError("fire_batch: negative batch size");
    if (cfg_.pairs(x) < k)
        throw InsufficientPairsError("fire_batch: fewer than " + std::to_string(k) +
                                     " pairs at site " + std::to_string(x));
    if (k == 0) return;
    if (opt_.trajectory)
        throw EngineError("fire_batch: per-firing trajectory requires fire_pair");
    if (src_.mode() != StackMode::plain)
        throw EngineError("fire_batch: requires plain stacks");
    const std::uint64_t first = static_cast<std::uint64_t>(u_.at(x)) + 1;
    const std::int64_t oil_right =
        src_.right_moves(x, Species::oil, first, static_cast<std::uint64_t>(k));
    const std::int64_t water_right =
        src_.right_moves(x, Species::water, first, static_cast<std::uint64_t>(k));
    apply_moves(x, k, oil_right, water_right);
}

void Engine1D::fire_visit(std::int64_t x) {
    const std::int64_t k = cfg_.pairs(x);
    if (k <= 0) return;
    if (opt_.trajectory)
        throw EngineError("fire_visit: per-firing trajectory requires fire_pair");
    if (src_.mode() != StackMode::plain)
        throw EngineError("fire_visit: requires plain stacks");
    const std::int64_t v = ++visits_.ref(x);
    const std::int64_t oil_right =
        src_.batch_heads(static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(v),
                         Species::oil, 0, static_cast<std::uint64_t>(k));
    const std::int64_t water_right =
        src_.batch_heads(static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(v),
                         Species::water, 0, static_cast<std::uint64_t>(k));
    apply_moves(x, k, oil_right, water_right);
}

void Engine1D::apply_moves(std::int64_t x, std::int64_t k, std::int64_t oil_right,
                           std::int64_t water_right) {
    const std::int64_t before = local_pairs(x);
    cfg_.remove(x, false, k);
    cfg_.remove(x, true, k);
    if (oil_right > 0) cfg_.add(x + 1, false, oil_right);
    if (k - oil_right > 0) cfg_.add(x - 1, false, k - oil_right);
    if (water_right > 0) cfg_.add(x + 1, true, water_right);
    if (k - water_right > 0) cfg_.add(x - 1, true, k - water_right);
    pairs_ += local_pairs(x) - before;
    u_.ref(x) += k;
    tau_ += k;
    if (opt_.flux) {
        right_.ref(x) += oil_right + water_right;
        left_.ref(x - 1) += 2 * k - oil_right - water_right;
        entries_.ref(x + 1) += oil_right + water_right;
        entries_.ref(x - 1) += 2 * k - oil_right - water_right;
    }
}

namespace {

void tally_to_vector(const Tally1D& t, std::int64_t& base,
                     std::vector<std::int64_t>& out) {
    std::int64_t lo = t.lo(), hi = t.hi();
    while (lo < hi && t.at(lo) == 0) ++lo;
    while (hi > lo && t.at(hi - 1) == 0) --hi;
    base = lo;
    out.clear();
    out.reserve(static_cast<std::size_t>(hi - lo));
    for (std::int64_t x = lo; x < hi; ++x) out.push_back(t.at(x));
}

}  // namespace

RunRecord Engine1D::snapshot() const {
    RunRecord rec;
    rec.n = cfg_.n();
    rec.dim = 1;
    rec.seed = src_.seed();
    rec.mode = src_.mode();
    rec.prf_id = StackSource::prf_id();
    rec.tau = tau_;
    rec.complete = (pairs_ == 0);

    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    for (std::int64_t x = u_.lo(); x < u_.hi(); ++x) {
        if (u_.at(x) > 0) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    for (std::int64_t x = cfg_.support_lo(); x <= cfg_.support_hi(); ++x) {
        if (cfg_.oil(x) + cfg_.water(x) > 0) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    if (lo <= hi) {
        rec.x0 = lo;
        const std::size_t len = static_cast<std::size_t>(hi - lo + 1);
        rec.odometer.resize(len);
        rec.oil.resize(len);
        rec.water.resize(len);
        for (std::int64_t x = lo; x <= hi; ++x) {
            rec.odometer[static_cast<std::size_t>(x - lo)] = u_.at(x);
            rec.oil[static_cast<std::size_t>(x - lo)] = cfg_.oil(x);
            rec.water[static_cast<std::size_t>(x - lo)] = cfg_.water(x);
        }
    }

    rec.base_lo = 0;
    rec.base_hi = -1;
    for (std::size_t i = 0; i < rec.odometer.size(); ++i) {
        if (rec.odometer[i] > 0) {
            const std::int64_t x = rec.x0 + static_cast<std::int64_t>(i);
            if (rec.base_hi < rec.base_lo) rec.base_lo = x;
            rec.base_hi = x;
            rec.height = std::max(rec.height, rec.odometer[i]);
        }
    }
    rec.support_radius = 0;
    for (std::size_t i = 0; i < rec.oil.size(); ++i) {
        if (rec.oil[i] + rec.water[i] > 0) {
            const std::int64_t x = rec.x0 + static_cast<std::int64_t>(i);
            rec.support_radius =
                std::max(rec.support_radius, static_cast<double>(std::abs(x)));
            rec.rightmost = std::max(rec.rightmost, x);
        }
    }

    if (opt_.trajectory) rec.trajectory = traj_;
    if (opt_.flux) {
        FluxLedger f;
        tally_to_vector(right_, f.edge_base, f.right);
        // align the left array to the same edge indexing
        std::int64_t lbase;
        std::vector<std::int64_t> lv;
        tally_to_vector(left_, lbase, lv);
        const std::int64_t b = std::min(f.edge_base, lbase);
        const std::int64_t e =
            std::max(f.edge_base + static_cast<std::int64_t>(f.right.size()),
                     lbase + static_cast<std::int64_t>(lv.size()));
        std::vector<std::int64_t> rv2(static_cast<std::size_t>(e - b), 0);
        std::vector<std::int64_t> lv2(static_cast<std::size_t>(e - b), 0);
        for (std::size_t i = 0; i < f.right.size(); ++i)
            rv2[static_cast<std::size_t>(f.edge_base - b) + i] = f.right[i];
        for (std::size_t i = 0; i < lv.size(); ++i)
            lv2[static_cast<std::size_t>(lbase - b) + i] = lv[i];
        f.edge_base = b;
        f.right = std::move(rv2);
        f.left = std::move(lv2);
        tally_to_vector(entries_, f.entry_base, f.entries);
        rec.flux = std::move(f);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Policy scaffolding (d=1 exact engine)

namespace {

struct IndexedSet {
    std::vector<std::int64_t> items;
    std::unordered_map<std::int64_t, std::size_t> pos;

    bool contains(std::int64_t x) const { return pos.count(x) != 0; }
    std::size_t size() const { return items.size(); }

    void insert(std::int64_t x) {
        if (contains(x)) return;
        pos[x] = items.size();
        items.push_back(x);
    }
    void erase(std::int64_t x) {
        auto it = pos.find(x);
        if (it == pos.end()) return;
        const std::size_t i = it->second;
        const std::int64_t last = items.back();
        items[i] = last;
        pos[last] = i;
        items.pop_back();
        pos.erase(it);
    }
};

std::uint64_t bounded_pick(const StackSource& src, std::uint64_t& step,
                           std::uint64_t bound) {
    const std::uint64_t umax = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t rem = (umax % bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
        const std::uint64_t w = src.policy_word(step++);
        if (rem == 0 || w <= umax - rem) return w % bound;
    }
}

struct Guard {
    std::int64_t budget;
    Anomaly anomaly = Anomaly::none;
    bool stop(const Engine1D& eng) {
        if (eng.pair_count() > 0 && eng.tau() >= budget) {
            anomaly = Anomaly::firing_budget_exhausted;
            return true;
        }
        if (eng.window_capped()) {
            anomaly = Anomaly::window_cap_exceeded;
            return true;
        }
        return false;
    }
};

RunRecord run_1d(const RunParams& p) {
    Engine1D::Options opt;
    opt.mode = p.mode;
    opt.flux = p.observables;
    opt.trajectory = p.observables && p.engine == EngineKind::exact &&
                     p.policy != PolicyKind::scripted;
    opt.series_cap = p.series_cap;
    if (p.window_half_cap > 0) opt.window_half_cap = p.window_half_cap;

    Engine1D eng(p.n, p.seed, opt);
    Guard guard{p.budget > 0 ? p.budget : default_firing_budget(p.n)};
    std::vector<std::int64_t> seq;

    auto fire = [&](std::int64_t x) {
        eng.fire_pair(x);
        if (p.record_sequence) seq.push_back(x);
    };

    if (p.policy == PolicyKind::scripted) {
        for (std::int64_t x : p.script) {
            if (guard.stop(eng)) break;
            if (!eng.is_legal(x))
                throw IllegalPrefixError("scripted prefix fires illegal site " +
                                         std::to_string(x));
            fire(x);
        }
    } else if (p.engine == EngineKind::batched) {
        std::deque<std::int64_t> queue;
        Tally1D inq;
        if (eng.pair_count() > 0) {
            queue.push_back(0);
            inq.ref(0) = 1;
        }
        while (!queue.empty()) {
            if (guard.stop(eng)) break;
            const std::int64_t x = queue.front();
            queue.pop_front();
            inq.ref(x) = 0;
            if (!eng.is_legal(x)) continue;
            eng.fire_visit(x);
            for (std::int64_t y : {x - 1, x + 1}) {
                if (eng.is_legal(y) && !inq.at(y)) {
                    queue.push_back(y);
                    inq.ref(y) = 1;
                }
            }
        }
    } else if (p.policy == PolicyKind::leftmost ||
               p.policy == PolicyKind::rightmost) {
        std::set<std::int64_t> active;
        if (eng.is_legal(0)) active.insert(0);
        while (eng.pair_count() > 0) {
            if (guard.stop(eng)) break;
            const std::int64_t x = (p.policy == PolicyKind::leftmost)
                                       ? *active.begin()
                                       : *active.rbegin();
            fire(x);
            for (std::int64_t y = x - 1; y <= x + 1; ++y) {
                if (eng.is_legal(y)) active.insert(y);
                else active.erase(y);
            }
        }
    } else if (p.policy == PolicyKind::uniform_random) {
        IndexedSet active;
        std::uint64_t step = 0;
        if (eng.is_legal(0)) active.insert(0);
        while (eng.pair_count() > 0) {
            if (guard.stop(eng)) break;
            const std::size_t i = static_cast<std::size_t>(
                bounded_pick(eng.source(), step, active.size()));
            const std::int64_t x = active.items[i];
            fire(x);
            for (std::int64_t y = x - 1; y <= x + 1; ++y) {
                if (eng.is_legal(y)) active.insert(y);
                else active.erase(y);
            }
        }
    } else {  // sweep_parallel: fire one pair at every site of a frozen snapshot
        std::set<std::int64_t> active;
        if (eng.is_legal(0)) active.insert(0);
        while (eng.pair_count() > 0 && guard.anomaly == Anomaly::none) {
            const std::vector<std::int64_t> snapshot(active.begin(), active.end());
            for (std::int64_t x : snapshot) {
                if (guard.stop(eng)) break;
                fire(x);
                for (std::int64_t y = x - 1; y <= x + 1; ++y) {
                    if (eng.is_legal(y)) active.insert(y);
                    else active.erase(y);
                }
            }
        }
    }

    RunRecord rec = eng.snapshot();
    rec.policy = p.policy;
    rec.engine = p.engine;
    rec.anomaly = guard.anomaly;
    rec.budget = guard.budget;
    if (guard.anomaly != Anomaly::none) rec.complete = false;
    rec.sequence = std::move(seq);
    return rec;
}

// ---------------------------------------------------------------------------
// d >= 2 engine

std::uint64_t pack_ordered(const std::array<std::int32_t, 4>& c, int dim) {
    std::uint64_t k = 0;
    for (int a = 0; a < dim; ++a)
        k = (k << 16) |
            static_cast<std::uint16_t>(static_cast<std::int32_t>(c[a]) + 0x8000);
    return k;
}

std::array<std::int32_t, 4> unpack_ordered(std::uint64_t k, int dim) {
    std::array<std::int32_t, 4> c{};
    for (int a = dim - 1; a >= 0; --a) {
        c[a] = static_cast<std::int32_t>(k & 0xFFFF) - 0x8000;
        k >>= 16;
    }
    return c;
}

std::int32_t default_half_cap_nd(int dim) {
    switch (dim) {
        case 2: return 2048;
        case 3: return 64;
        default: return 12;
    }
}

struct EngineND {
    GridND grid;
    StackSource src;
    std::int64_t n;
    int dim;
    std::int64_t tau = 0;
    std::int64_t pairs;
    std::int32_t half_cap;
    bool capped = false;

    EngineND(const RunParams& p)
        : grid(p.dim, 8),
          src(p.seed, StackMode::plain, p.dim),
          n(p.n),
          dim(p.dim),
          pairs(p.n),
          half_cap(p.window_half_cap > 0
                       ? static_cast<std::int32_t>(p.window_half_cap)
                       : default_half_cap_nd(p.dim)) {
        const std::size_t origin = grid.flat({});
        grid.oil[origin] = n;
        grid.water[origin] = n;
    }

    std::int64_t min_pairs(std::size_t f) const {
        return std::min(grid.oil[f], grid.water[f]);
    }

    bool ensure_interior(const std::array<std::int32_t, 4>& c) {
        while (grid.on_boundary(c)) {
            if (grid.half() * 2 > half_cap) {
                capped = true;
                return false;
            }
            grid.regrow();
        }
        return true;
    }

    // Fires one pair from c; caller guarantees interior and legality.
    void fire_pair(const std::array<std::int32_t, 4>& c,
                   std::array<std::int32_t, 4>& dest_oil,
                   std::array<std::int32_t, 4>& dest_water) {
        const std::size_t f = grid.flat(c);
        std::array<std::int64_t, 4> site{};
        for (int a = 0; a < dim; ++a) site[a] = c[a];
        const std::uint64_t index = static_cast<std::uint64_t>(grid.u[f]) + 1;
        const UnitStep so =
            src.draw_step(std::span<const std::int64_t>(site.data(), dim), index,
                          Species::oil);
        const UnitStep sw =
            src.draw_step(std::span<const std::int64_t>(site.data(), dim), index,
                          Species::water);
        dest_oil = c;
        dest_oil[so.axis] += so.sign;
        dest_water = c;
        dest_water[sw.axis] += sw.sign;

        const std::size_t fo = grid.flat(dest_oil);
        const std::size_t fw = grid.flat(dest_water);
        const std::int64_t before =
            min_pairs(f) + min_pairs(fo) + (fw == fo ? 0 : min_pairs(fw));
        --grid.oil[f];
        --grid.water[f];
        ++grid.oil[fo];
        ++grid.water[fw];
        const std::int64_t after =
            min_pairs(f) + min_pairs(fo) + (fw == fo ? 0 : min_pairs(fw));
        pairs += after - before;
        ++grid.u[f];
        ++tau;
    }

    // Batched visit (d=2): multinomial split over the four directions via
    // exact Binomial(.,1/2) stages keyed by (site, visit, species, stage).
    void fire_visit(const std::array<std::int32_t, 4>& c) {
        const std::size_t f = grid.flat(c);
        const std::int64_t k = min_pairs(f);
        if (k <= 0) return;
        const std::int64_t v = ++grid.visits[f];
        const std::uint64_t key = StackSource::pack2(c[0], c[1]);

        static constexpr std::array<std::array<std::int32_t, 2>, 4> kDirs = {
            {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        std::array<std::size_t, 4> nb;
        for (int m = 0; m < 4; ++m) {
            std::array<std::int32_t, 4> d = c;
            d[0] += kDirs[m][0];
            d[1] += kDirs[m][1];
            nb[m] = grid.flat(d);
        }
        std::int64_t before = min_pairs(f);
        for (std::size_t g : nb) before += min_pairs(g);

        for (Species s : {Species::oil, Species::water}) {
            const std::int64_t ax0 =
                src.batch_heads(key, static_cast<std::uint64_t>(v), s, 0,
                                static_cast<std::uint64_t>(k));
            const std::int64_t px =
                src.batch_heads(key, static_cast<std::uint64_t>(v), s, 1,
                                static_cast<std::uint64_t>(ax0));
            const std::int64_t py =
                src.batch_heads(key, static_cast<std::uint64_t>(v), s, 2,
                                static_cast<std::uint64_t>(k - ax0));
            const std::array<std::int64_t, 4> move = {px, ax0 - px, py,
                                                      (k - ax0) - py};
            auto& dst = (s == Species::oil) ? grid.oil : grid.water;
            dst[f] -= k;
            for (int m = 0; m < 4; ++m) dst[nb[m]] += move[m];
        }

        std::int64_t after = min_pairs(f);
        for (std::size_t g : nb) after += min_pairs(g);
        pairs += after - before;
        grid.u[f] += k;
        tau += k;
    }

    RunRecord snapshot(const RunParams& p) const {
        RunRecord rec;
        rec.n = n;
        rec.dim = dim;
        rec.seed = src.seed();
        rec.mode = StackMode::plain;
        rec.prf_id = StackSource::prf_id();
        rec.tau = tau;
        rec.complete = (pairs == 0);
        rec.policy = p.policy;
        rec.engine = p.engine;

        bool first_base = true;
        double r2max = 0;
        for (std::size_t f = 0; f < grid.size(); ++f) {
            if (grid.oil[f] == 0 && grid.water[f] == 0 && grid.u[f] == 0) continue;
            RunRecord::Cell cell;
            cell.x = grid.coords(f);
            cell.u = grid.u[f];
            cell.oil = grid.oil[f];
            cell.water = grid.water[f];
            rec.cells.push_back(cell);
            rec.height = std::max(rec.height, cell.u);
            if (cell.u > 0) {
                for (int a = 0; a < dim; ++a) {
                    if (first_base) {
                        rec.base_box_lo[a] = rec.base_box_hi[a] = cell.x[a];
                    } else {
                        rec.base_box_lo[a] = std::min(rec.base_box_lo[a], cell.x[a]);
                        rec.base_box_hi[a] = std::max(rec.base_box_hi[a], cell.x[a]);
                    }
                }
                first_base = false;
            }
            if (cell.oil + cell.water > 0) {
                double r2 = 0;
                for (int a = 0; a < dim; ++a)
                    r2 += static_cast<double>(cell.x[a]) * cell.x[a];
                r2max = std::max(r2max, r2);
            }
        }
        rec.support_radius = std::sqrt(r2max);
        return rec;
    }
};

RunRecord run_nd(const RunParams& p) {
    if (p.policy == PolicyKind::scripted)
        throw EngineError("scripted policy is d=1 only");
    if (p.engine == EngineKind::batched && p.dim != 2)
        throw EngineError("batched engine supports d in {1,2}");
    if (p.mode == StackMode::merged)
        throw EngineError("merged stacks are d=1 only");

    EngineND eng(p);
    const std::int64_t budget =
        p.budget > 0 ? p.budget : default_firing_budget(p.n);
    Anomaly anomaly = Anomaly::none;

    if (p.engine == EngineKind::batched) {
        std::deque<std::uint64_t> queue;
        std::vector<std::uint8_t> inq(eng.grid.size(), 0);
        auto push = [&](const std::array<std::int32_t, 4>& c) {
            const std::size_t f = eng.grid.flat(c);
            if (inq[f]) return;
            if (eng.min_pairs(f) <= 0) return;
            inq[f] = 1;
            queue.push_back(pack_ordered(c, p.dim));
        };
        auto rebuild_flags = [&]() {
            inq.assign(eng.grid.size(), 0);
            for (std::uint64_t k : queue)
                inq[eng.grid.flat(unpack_ordered(k, p.dim))] = 1;
        };
        if (eng.pairs > 0) push({});
        while (!queue.empty()) {
            if (eng.pairs > 0 && eng.tau >= budget) {
                anomaly = Anomaly::firing_budget_exhausted;
                break;
            }
            const auto c = unpack_ordered(queue.front(), p.dim);
            queue.pop_front();
            const std::size_t old_cells = eng.grid.size();
            if (!eng.ensure_interior(c)) {
                anomaly = Anomaly::window_cap_exceeded;
                break;
            }
            if (eng.grid.size() != old_cells) rebuild_flags();
            const std::size_t f = eng.grid.flat(c);
            inq[f] = 0;
            if (eng.min_pairs(f) <= 0) continue;
            eng.fire_visit(c);
            for (int a = 0; a < p.dim; ++a) {
                for (int s : {-1, +1}) {
                    auto nb = c;
                    nb[a] += s;
                    push(nb);
                }
            }
        }
    } else {
        std::set<std::uint64_t> active;
        std::uint64_t step = 0;
        auto refresh = [&](const std::array<std::int32_t, 4>& c) {
            const std::uint64_t k = pack_ordered(c, p.dim);
            if (eng.min_pairs(eng.grid.flat(c)) >= 1) active.insert(k);
            else active.erase(k);
        };
        if (eng.pairs > 0) active.insert(pack_ordered({}, p.dim));

        auto fire_at = [&](const std::array<std::int32_t, 4>& c) -> bool {
            if (!eng.ensure_interior(c)) {
                anomaly = Anomaly::window_cap_exceeded;
                return false;
            }
            std::array<std::int32_t, 4> dest_oil, dest_water;
            eng.fire_pair(c, dest_oil, dest_water);
            refresh(c);
            refresh(dest_oil);
            refresh(dest_water);
            return true;
        };

        while (eng.pairs > 0 && anomaly == Anomaly::none) {
            if (eng.tau >= budget) {
                anomaly = Anomaly::firing_budget_exhausted;
                break;
            }
            if (p.policy == PolicyKind::sweep_parallel) {
                const std::vector<std::uint64_t> snapshot(active.begin(),
                                                          active.end());
                for (std::uint64_t k : snapshot) {
                    if (eng.tau >= budget) {
                        anomaly = Anomaly::firing_budget_exhausted;
                        break;
                    }
                    if (!fire_at(unpack_ordered(k, p.dim))) break;
                }
            } else {
                std::uint64_t key;
                if (p.policy == PolicyKind::leftmost) key = *active.begin();
                else if (p.policy == PolicyKind::rightmost) key = *active.rbegin();
                else {
                    std::size_t i = static_cast<std::size_t>(
                        bounded_pick(eng.src, step, active.size()));
                    auto it = active.begin();
                    std::advance(it, static_cast<std::ptrdiff_t>(i));
                    key = *it;
                }
                if (!fire_at(unpack_ordered(key, p.dim))) break;
            }
        }
    }

    RunRecord rec = eng.snapshot(p);
    rec.anomaly = anomaly;
    rec.budget = budget;
    if (anomaly != Anomaly::none) rec.complete = false;
    return rec;
}

}  // namespace

RunRecord run_to_fixation(const RunParams& p) {
    if (p.n < 0) throw EngineError("run_to_fixation: n must be >= 0");
    if (p.dim < 1 || p.dim > 4)
        throw EngineError("run_to_fixation: dim must be in [1,4]");
    if (p.mode == StackMode::merged && p.dim != 1)
        throw EngineError("run_to_fixation: merged stacks are d=1 only");
    if (p.mode == StackMode::merged && p.engine == EngineKind::batched)
        throw EngineError("run_to_fixation: merged mode requires the exact engine");

    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec = (p.dim == 1) ? run_1d(p) : run_nd(p);
    const auto t1 = std::chrono::steady_clock::now();
    rec.wall_time = std::chrono::duration<double>(t1 - t0).count();
    return rec;
}

// ---------------------------------------------------------------------------
// Verification drivers

namespace {

/// Collect sites where two d=1 records disagree on odometer or configuration.
std::vector<std::int64_t> record_mismatches(const RunRecord& a, const RunRecord& b) {
    std::vector<std::int64_t> bad;
    if (a.dim == 1) {
        const std::int64_t lo = std::min(a.x0, b.x0) - 1;
        const std::int64_t hi =
            std::max(a.x0 + static_cast<std::int64_t>(a.odometer.size()),
                     b.x0 + static_cast<std::int64_t>(b.odometer.size())) +
            1;
        for (std::int64_t x = lo; x < hi; ++x) {
            if (a.u_at(x) != b.u_at(x) || a.oil_at(x) != b.oil_at(x) ||
                a.water_at(x) != b.water_at(x))
                bad.push_back(x);
        }
        return bad;
    }
    auto key = [](const RunRecord::Cell& c) {
        return std::make_tuple(c.x[0], c.x[1], c.x[2], c.x[3]);
    };
    std::map<std::tuple<int, int, int, int>, std::array<std::int64_t, 3>> ma, mb;
    for (const auto& c : a.cells) ma[key(c)] = {c.u, c.oil, c.water};
    for (const auto& c : b.cells) mb[key(c)] = {c.u, c.oil, c.water};
    std::int64_t idx = 0;
    for (const auto& [k, v] : ma) {
        auto it = mb.find(k);
        if (it == mb.end() || it->second != v) bad.push_back(idx);
        ++idx;
    }
    for (const auto& [k, v] : mb)
        if (!ma.count(k)) bad.push_back(-1);
    return bad;
}

}  // namespace

std::string AbelianReport::summary() const {
    std::string s = "abelian n=" + std::to_string(n) + " seed=" + std::to_string(seed);
    s += ok ? ": ok" : ": MISMATCH at " + std::to_string(mismatch_sites.size()) +
                           " site(s)";
    return s;
}

AbelianReport verify_abelian(std::int64_t n, std::uint64_t seed,
                             const std::vector<PolicyKind>& policies, int dim,
                             StackMode mode) {
    AbelianReport rep;
    rep.n = n;
    rep.seed = seed;
    rep.policies = policies;
    rep.ok = true;
    if (policies.empty()) return rep;

    std::vector<RunRecord> runs;
    for (PolicyKind pk : policies) {
        RunParams p;
        p.n = n;
        p.dim = dim;
        p.seed = seed;
        p.policy = pk;
        p.engine = EngineKind::exact;
        p.mode = mode;
        runs.push_back(run_to_fixation(p));
        rep.taus.push_back(runs.back().tau);
    }
    for (std::size_t i = 1; i < runs.size(); ++i) {
        auto bad = record_mismatches(runs[0], runs[i]);
        if (!bad.empty() || runs[i].tau != runs[0].tau) {
            rep.ok = false;
            rep.mismatch_sites.insert(rep.mismatch_sites.end(), bad.begin(),
                                      bad.end());
        }
    }
    return rep;
}

LeastActionReport verify_least_action(std::int64_t n, std::uint64_t seed,
                                      const std::vector<std::int64_t>& prefix,
                                      PolicyKind complete_policy) {
    RunParams pref;
    pref.n = n;
    pref.seed = seed;
    pref.policy = PolicyKind::scripted;
    pref.script = prefix;
    const RunRecord partial = run_to_fixation(pref);  // throws if illegal

    RunParams full;
    full.n = n;
    full.seed = seed;
    full.policy = complete_policy;
    const RunRecord complete = run_to_fixation(full);

    LeastActionReport rep;
    rep.prefix_length = static_cast<std::int64_t>(prefix.size());
    rep.complete_tau = complete.tau;
    const std::int64_t lo = std::min(partial.x0, complete.x0) - 1;
    const std::int64_t hi =
        std::max(partial.x0 + static_cast<std::int64_t>(partial.odometer.size()),
                 complete.x0 + static_cast<std::int64_t>(complete.odometer.size())) +
        1;
    for (std::int64_t x = lo; x < hi; ++x)
        if (partial.u_at(x) > complete.u_at(x)) rep.violation_sites.push_back(x);
    rep.ok = rep.violation_sites.empty();
    return rep;
}

std::vector<std::int64_t> firing_sequence(std::int64_t n, std::uint64_t seed,
                                          PolicyKind policy) {
    RunParams p;
    p.n = n;
    p.seed = seed;
    p.policy = policy;
    p.record_sequence = true;
    return run_to_fixation(p).sequence;
}

std::vector<std::int64_t> single_site_prefix(std::int64_t n, std::uint64_t seed,
                                             std::int64_t site, std::int64_t cap) {
    Engine1D eng(n, seed);
    std::vector<std::int64_t> seq;
    while (eng.is_legal(site) && static_cast<std::int64_t>(seq.size()) < cap) {
        eng.fire_pair(site);
        seq.push_back(site);
    }
    return seq;
}

}  // namespace oilwater
