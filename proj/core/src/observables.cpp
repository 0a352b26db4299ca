#include "oilwater/observables.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oilwater/lattice.hpp"
#include "oilwater/prf.hpp"

namespace oilwater {

std::int64_t pair_count(const RunRecord& run) {
    std::int64_t p = 0;
    if (run.dim == 1) {
        for (std::size_t i = 0; i < run.oil.size(); ++i)
            p += std::min(run.oil[i], run.water[i]);
    } else {
        for (const auto& c : run.cells) p += std::min(c.oil, c.water);
    }
    return p;
}

int classify_increment(std::int64_t l, std::int64_t r) {
    const int sl = (l > 0) - (l < 0);
    const int sr = (r > 0) - (r < 0);
    if (sl * sr < 0) return 1;
    if (sl == 0 && sr == 0) return 3;
    if (sl == 0 || sr == 0) return 2;
    return 4;
}

int drift_quarters(int cls) {
    if (cls == 2) return -1;
    if (cls == 3) return -2;
    return 0;
}

namespace {

void bump_site(std::int64_t& base, std::vector<std::int64_t>& v, std::int64_t x) {
    if (v.empty()) {
        base = x - 4;
        v.assign(9, 0);
    } else if (x < base || x >= base + static_cast<std::int64_t>(v.size())) {
        std::int64_t nlo = base, nhi = base + static_cast<std::int64_t>(v.size());
        while (x < nlo) nlo -= (nhi - nlo);
        while (x >= nhi) nhi += (nhi - nlo);
        std::vector<std::int64_t> nv(static_cast<std::size_t>(nhi - nlo), 0);
        std::copy(v.begin(), v.end(), nv.begin() + (base - nlo));
        v = std::move(nv);
        base = nlo;
    }
    ++v[static_cast<std::size_t>(x - base)];
}

}  // namespace

void record_firing(Trajectory& traj, std::int64_t x, std::int64_t l,
                   std::int64_t r, std::int64_t delta_p) {
    const int cls = classify_increment(l, r);
    ++traj.class_counts[static_cast<std::size_t>(cls - 1)];
    if (l == 0) {
        bump_site(traj.returns_base, traj.returns_by_site, x - 1);
        ++traj.returns_total;
    }
    if (r == 0) {
        bump_site(traj.returns_base, traj.returns_by_site, x + 1);
        ++traj.returns_total;
    }
    traj.delta_p_sum += delta_p;

    bool in_support;
    switch (cls) {
        case 1: in_support = (delta_p >= -1 && delta_p <= 1); break;
        case 2:
        case 3: in_support = (delta_p == -1 || delta_p == 0); break;
        default: in_support = (delta_p == 0); break;
    }
    if (!in_support)
        throw SupportViolationError("realized pair-count increment " +
                                    std::to_string(delta_p) +
                                    " outside the support of class " +
                                    std::to_string(cls));
}

std::int64_t returns_total(const Trajectory& traj) {
    std::int64_t total = 0;
    for (std::int64_t v : traj.returns_by_site) total += v;
    return total;
}

DriftCheck empirical_drift_check(const Trajectory& traj) {
    DriftCheck c;
    c.drift_quarter_sum = drift_quarters(2) * traj.class_counts[1] +
                          drift_quarters(3) * traj.class_counts[2];
    c.returns = traj.returns_total;
    c.ok = (c.drift_quarter_sum + c.returns == 0);
    return c;
}

TypedProfile final_imbalance(const RunRecord& run) {
    TypedProfile p;
    p.x0 = run.x0;
    p.g.resize(run.oil.size());
    for (std::size_t i = 0; i < run.oil.size(); ++i)
        p.g[i] = run.oil[i] - run.water[i];
    return p;
}

std::int64_t fixated_outside(const RunRecord& run, double r) {
    std::int64_t f = 0;
    for (std::size_t i = 0; i < run.oil.size(); ++i) {
        const std::int64_t x = run.x0 + static_cast<std::int64_t>(i);
        if (static_cast<double>(std::abs(x)) > r)
            f += std::abs(run.oil[i] - run.water[i]);
    }
    return f;
}

HeightBase height_and_base(const RunRecord& run) {
    HeightBase hb;
    for (std::size_t i = 0; i < run.odometer.size(); ++i) {
        if (run.odometer[i] > 0) {
            const std::int64_t x = run.x0 + static_cast<std::int64_t>(i);
            if (hb.base_hi < hb.base_lo) hb.base_lo = x;
            hb.base_hi = x;
            hb.height = std::max(hb.height, run.odometer[i]);
        }
    }
    return hb;
}

LaplaceCheck laplacian_identity_check(const RunRecord& run) {
    if (!run.flux)
        throw EngineError("laplacian_identity_check: run carries no flux ledger");
    LaplaceCheck c;
    const std::int64_t lo = run.x0 - 2;
    const std::int64_t hi = run.x0 + static_cast<std::int64_t>(run.oil.size()) + 2;
    for (std::int64_t x = lo; x <= hi; ++x) {
        const std::int64_t u = run.u_at(x);
        const std::int64_t entries = run.flux->entries_at(x);
        const std::int64_t lhs =
            2 * run.n * (x == 0 ? 1 : 0) + entries - 2 * u;
        const std::int64_t rhs = std::abs(run.g_at(x));
        // discrete-Laplacian rearrangement of the same bookkeeping
        const std::int64_t lap = run.u_at(x - 1) + run.u_at(x + 1) - 2 * u;
        const std::int64_t lap_rhs = rhs - 2 * run.n * (x == 0 ? 1 : 0) +
                                     (entries - run.u_at(x - 1) - run.u_at(x + 1));
        ++c.sites_checked;
        if (lhs != rhs || lap != lap_rhs) {
            if (c.violations == 0) c.first_bad_site = x;
            ++c.violations;
        }
    }
    c.ok = (c.violations == 0);
    return c;
}

FluxCheck net_flux_check(const RunRecord& run) {
    if (!run.flux)
        throw EngineError("net_flux_check: run carries no flux ledger");
    FluxCheck c;
    const std::int64_t hi = run.x0 + static_cast<std::int64_t>(run.oil.size()) + 2;
    // suffix sums of |g| from the right edge down to 0
    std::int64_t tail = 0;
    for (std::int64_t x = hi; x >= 0; --x) {
        // tail = sum_{y > x} |g(y)|
        const std::int64_t net = run.flux->right_at(x) - run.flux->left_at(x);
        ++c.sites_checked;
        if (net != tail) {
            if (c.violations == 0) c.first_bad_site = x;
            ++c.violations;
        }
        tail += std::abs(run.g_at(x));
    }
    c.u0 = run.u_at(0);
    c.d01 = run.flux->right_at(0);
    c.ok = (c.violations == 0);
    return c;
}

ReconstructionCheck stack_reconstruction_check(const RunRecord& run,
                                               const StackSource& src) {
    ReconstructionCheck c;
    c.applicable = (run.dim == 1 && run.mode == StackMode::plain &&
                    run.engine == EngineKind::exact && run.complete &&
                    src.mode() == StackMode::plain);
    if (!c.applicable) return c;
    const std::int64_t lo = run.x0 - 1;
    const std::int64_t hi = run.x0 + static_cast<std::int64_t>(run.oil.size());
    for (std::int64_t x = lo; x <= hi; ++x) {
        const std::uint64_t ul = static_cast<std::uint64_t>(run.u_at(x - 1));
        const std::uint64_t ur = static_cast<std::uint64_t>(run.u_at(x + 1));
        std::int64_t rec = 0;
        if (ul > 0) {
            rec += src.right_moves(x - 1, Species::oil, 1, ul) -
                   src.right_moves(x - 1, Species::water, 1, ul);
        }
        if (ur > 0) {
            const std::int64_t oil_left =
                static_cast<std::int64_t>(ur) -
                src.right_moves(x + 1, Species::oil, 1, ur);
            const std::int64_t water_left =
                static_cast<std::int64_t>(ur) -
                src.right_moves(x + 1, Species::water, 1, ur);
            rec += oil_left - water_left;
        }
        ++c.sites_checked;
        if (rec != run.g_at(x)) ++c.violations;
    }
    c.ok = (c.violations == 0);
    return c;
}

bool IdentityReport::ok() const {
    bool good = conservation_ok && completeness_ok && tau_sum_ok;
    if (has_trajectory)
        good = good && p0_ok && ptau_ok && sum_z_ok && class_total_ok &&
               returns_ok && drift_ok;
    if (has_flux) good = good && laplace.ok && flux.ok;
    if (reconstruction.applicable) good = good && reconstruction.ok;
    return good;
}

std::string IdentityReport::summary() const {
    std::ostringstream os;
    os << (ok() ? "identities ok" : "IDENTITY VIOLATIONS");
    os << " [conservation " << (conservation_ok ? "ok" : "BAD")
       << ", completeness " << (completeness_ok ? "ok" : "BAD") << ", tau=sum(u) "
       << (tau_sum_ok ? "ok" : "BAD");
    if (has_trajectory) {
        os << ", P0 " << (p0_ok ? "ok" : "BAD") << ", Ptau "
           << (ptau_ok ? "ok" : "BAD") << ", sumZ " << (sum_z_ok ? "ok" : "BAD")
           << ", sumN " << (class_total_ok ? "ok" : "BAD") << ", returns "
           << (returns_ok ? "ok" : "BAD") << ", drift "
           << (drift_ok ? "ok" : "BAD");
    }
    if (has_flux) {
        os << ", mass " << (laplace.ok ? "ok" : "BAD") << ", flux "
           << (flux.ok ? "ok" : "BAD");
    }
    if (reconstruction.applicable)
        os << ", reconstruction " << (reconstruction.ok ? "ok" : "BAD");
    os << "]";
    return os.str();
}

IdentityReport verify_run_identities(const RunRecord& run, const StackSource* src) {
    IdentityReport rep;
    rep.has_trajectory = run.trajectory.has_value();
    rep.has_flux = run.flux.has_value();

    std::int64_t oil_total = 0, water_total = 0, u_total = 0;
    if (run.dim == 1) {
        for (std::int64_t v : run.oil) oil_total += v;
        for (std::int64_t v : run.water) water_total += v;
        for (std::int64_t v : run.odometer) u_total += v;
    } else {
        for (const auto& c : run.cells) {
            oil_total += c.oil;
            water_total += c.water;
            u_total += c.u;
        }
    }
    rep.conservation_ok = (oil_total == run.n && water_total == run.n);
    rep.tau_sum_ok = (u_total == run.tau);
    rep.completeness_ok = !run.complete || (pair_count(run) == 0);

    if (rep.has_trajectory) {
        const Trajectory& t = *run.trajectory;
        rep.p0_ok = t.pair_series.empty() || t.pair_series.front() == run.n;
        rep.ptau_ok = !run.complete || pair_count(run) == 0;
        rep.sum_z_ok = !run.complete || t.delta_p_sum == -run.n;
        rep.class_total_ok =
            (t.class_counts[0] + t.class_counts[1] + t.class_counts[2] +
             t.class_counts[3]) == run.tau;
        const std::int64_t by_formula =
            t.class_counts[1] + 2 * t.class_counts[2];
        rep.returns_ok =
            (t.returns_total == by_formula && returns_total(t) == by_formula);
        rep.drift_ok = empirical_drift_check(t).ok;
    }
    if (rep.has_flux && run.dim == 1) {
        rep.laplace = laplacian_identity_check(run);
        rep.flux = net_flux_check(run);
    }
    if (src != nullptr) rep.reconstruction = stack_reconstruction_check(run, *src);
    return rep;
}

LazyWalkStats lazy_walk_stats(std::int64_t t, std::int64_t trials,
                              std::uint64_t seed) {
    LazyWalkStats out;
    out.t = t;
    out.trials = trials;
    if (trials <= 0) return out;

    const Philox4x64 prf(seed, 0x6C617A79574C4BULL);
    const std::int64_t zero_horizon =
        static_cast<std::int64_t>(std::floor(0.9 * static_cast<double>(t)));
    const double zero_threshold = 0.1 * std::sqrt(static_cast<double>(t));

    double sum_sup = 0, sum_abs = 0;
    std::int64_t successes = 0;
    for (std::int64_t trial = 0; trial < trials; ++trial) {
        std::int64_t r = 0, sup = 0, zeros = 1;  // counts R_0 = 0
        std::uint64_t w = 0;
        for (std::int64_t i = 1; i <= t; ++i) {
            if (std::abs(r) > sup) sup = std::abs(r);  // sup over i < t
            const std::uint64_t phase = static_cast<std::uint64_t>(i - 1) % 32;
            if (phase == 0)
                w = prf.word(static_cast<std::uint64_t>(trial), 0,
                             static_cast<std::uint64_t>(i - 1) / 32, 0);
            const std::uint64_t b = (w >> (2 * phase)) & 3;
            if ((b & 2) == 0) r += (b & 1) ? 1 : -1;  // hold w.p. 1/2
            if (i <= zero_horizon && r == 0) ++zeros;
        }
        sum_sup += static_cast<double>(sup);
        sum_abs += static_cast<double>(std::abs(r));
        if (static_cast<double>(zeros) > zero_threshold) ++successes;
    }
    out.mean_sup_abs = sum_sup / static_cast<double>(trials);
    out.mean_abs_final = sum_abs / static_cast<double>(trials);
    out.zero_success_rate =
        static_cast<double>(successes) / static_cast<double>(trials);
    return out;
}

}  // namespace oilwater
