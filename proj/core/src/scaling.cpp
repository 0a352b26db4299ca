#include "oilwater/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oilwater {

namespace {

constexpr double kPi = std::numbers::pi;

double rhs_sqrt(double w) { return std::sqrt(2.0 * std::max(w, 0.0) / kPi); }

// Coefficient of the first-order free-boundary reduction f' = -c4 f^{3/4}.
const double kC4 = std::pow(32.0 / (9.0 * kPi), 0.25);

// One RK4 step of df/ds = c4 * f^{3/4} (s measured from the support edge).
double rk4_reduction_step(double f, double h) {
    auto g = [](double v) { return kC4 * std::pow(std::max(v, 0.0), 0.75); };
    const double k1 = g(f);
    const double k2 = g(f + 0.5 * h * k1);
    const double k3 = g(f + 0.5 * h * k2);
    const double k4 = g(f + h * k3);
    return f + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

double closed_form_support() { return std::cbrt(18.0 * kPi); }

double closed_form_w(double xi) {
    const double c = closed_form_support();
    const double a = std::abs(xi);
    if (a >= c) return 0.0;
    const double d = c - a;
    return d * d * d * d / (72.0 * kPi);
}

double ScalingProfile::value(double xi) const {
    const double a = std::abs(xi);
    if (w.empty() || mesh <= 0) return 0.0;
    const double j = a / mesh;
    const std::size_t j0 = static_cast<std::size_t>(j);
    if (j0 + 1 >= w.size()) return (j0 < w.size()) ? w[j0] : 0.0;
    const double frac = j - static_cast<double>(j0);
    return w[j0] * (1.0 - frac) + w[j0 + 1] * frac;
}

double ScalingProfile::derivative(double xi) const {
    if (wp.empty() || mesh <= 0) return 0.0;
    const double a = std::abs(xi);
    const double j = a / mesh;
    const std::size_t j0 = static_cast<std::size_t>(j);
    double d;
    if (j0 + 1 >= wp.size()) d = (j0 < wp.size()) ? wp[j0] : 0.0;
    else {
        const double frac = j - static_cast<double>(j0);
        d = wp[j0] * (1.0 - frac) + wp[j0 + 1] * frac;
    }
    return (xi < 0) ? -d : d;
}

ScalingProfile ScalingProfile::closed_form(double mesh, double xmax) {
    if (mesh <= 0) throw SolverError("closed_form: mesh must be positive");
    ScalingProfile p;
    p.mesh = mesh;
    p.support_radius = closed_form_support();
    const std::size_t count = static_cast<std::size_t>(xmax / mesh) + 1;
    p.w.resize(count);
    p.wp.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double xi = mesh * static_cast<double>(j);
        p.w[j] = closed_form_w(xi);
        const double c = p.support_radius;
        p.wp[j] = (xi < c) ? -std::pow(c - xi, 3.0) / (18.0 * kPi) : 0.0;
    }
    return p;
}

ScalingProfile ode_bvp_solve(double mesh_step) {
    if (mesh_step <= 0) throw SolverError("ode_bvp_solve: mesh must be positive");
    const double h = mesh_step;

    // Integrate f upward from the corner until it passes the inner-slope
    // target f(s) = (9pi/32)^{1/3}, i.e. -c4 f^{3/4} = -1.
    const double target = std::cbrt(9.0 * kPi / 32.0);
    double s_lo = h;                   // distance from the support edge
    double f = h * h * h * h / (72.0 * kPi);  // local quartic expansion
    double f_lo = f;
    const double s_max = 64.0;
    while (f < target) {
        f_lo = f;
        f = rk4_reduction_step(f, h);
        s_lo += h;
        if (s_lo > s_max)
            throw SolverError("ode_bvp_solve: inner-slope bracket not found");
    }
    // refine the crossing inside the final step with Newton on the step size
    double s = s_lo - h;
    f = f_lo;
    double step = h * 0.5;
    for (int it = 0; it < 200 && std::abs(f - target) > 1e-16; ++it) {
        const double fs = rk4_reduction_step(f, step);
        const double deriv = kC4 * std::pow(std::max(f, 1e-300), 0.75);
        if (fs < target) {
            f = fs;
            s += step;
        }
        step = std::min(step * 0.5, std::abs(target - f) / deriv);
        if (step <= 0 || !std::isfinite(step)) break;
    }

    // Aligned output pass: seed one cell inside the edge and march to xi = 0.
    ScalingProfile p;
    p.mesh = h;
    p.support_radius = s;
    const std::size_t count = static_cast<std::size_t>(std::ceil(s / h)) + 2;
    p.w.assign(count, 0.0);
    p.wp.assign(count, 0.0);
    std::size_t jstar = static_cast<std::size_t>(s / h);  // last grid point inside
    while (static_cast<double>(jstar) * h >= s && jstar > 0) --jstar;
    const double sigma0 = s - static_cast<double>(jstar) * h;
    double fj = sigma0 * sigma0 * sigma0 * sigma0 / (72.0 * kPi);
    p.w[jstar] = fj;
    for (std::size_t j = jstar; j-- > 0;) {
        fj = rk4_reduction_step(fj, h);
        p.w[j] = fj;
    }
    for (std::size_t j = 0; j < count; ++j)
        p.wp[j] = -kC4 * std::pow(std::max(p.w[j], 0.0), 0.75);
    return p;
}

double green_kernel(int dim, double r) {
    switch (dim) {
        case 2: return std::log(1.0 / r) / (2.0 * kPi);
        case 3: return 1.0 / (4.0 * kPi * r);
        case 4: return 1.0 / (4.0 * kPi * kPi * r * r);
        default: throw SolverError("green_kernel: dim must be in {2,3,4}");
    }
}

double green_kernel_derivative(int dim, double r) {
    switch (dim) {
        case 2: return -1.0 / (2.0 * kPi * r);
        case 3: return -1.0 / (4.0 * kPi * r * r);
        case 4: return -1.0 / (2.0 * kPi * kPi * r * r * r);
        default: throw SolverError("green_kernel: dim must be in {2,3,4}");
    }
}

namespace {

struct ShootResult {
    int kind = 0;  // -1 undershoot (w hit 0), +1 overshoot (w' turned up)
    double stop_r = 0;
    std::vector<double> w, wp;  // filled only on demand
};

// RK4 on w'' = sqrt(2w/pi) - (d-1) w'/r from (r0, w0, wp0); stops when w
// crosses 0 (undershoot) or w' turns nonnegative (overshoot).
ShootResult shoot_radial(int dim, double r0, double w0, double wp0, double h,
                         double rmax, bool keep) {
    ShootResult res;
    double r = r0, w = w0, wp = wp0;
    auto f2 = [&](double rr, double ww, double pp) {
        double v = rhs_sqrt(ww);
        if (dim > 1) v -= (dim - 1) * pp / rr;
        return v;
    };
    if (keep) {
        res.w.push_back(w);
        res.wp.push_back(wp);
    }
    while (r < rmax) {
        const double k1w = wp, k1p = f2(r, w, wp);
        const double k2w = wp + 0.5 * h * k1p,
                     k2p = f2(r + 0.5 * h, w + 0.5 * h * k1w, wp + 0.5 * h * k1p);
        const double k3w = wp + 0.5 * h * k2p,
                     k3p = f2(r + 0.5 * h, w + 0.5 * h * k2w, wp + 0.5 * h * k2p);
        const double k4w = wp + h * k3p,
                     k4p = f2(r + h, w + h * k3w, wp + h * k3p);
        w += h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
        wp += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
        r += h;
        if (keep) {
            res.w.push_back(w);
            res.wp.push_back(wp);
        }
        if (w <= 0) {
            res.kind = -1;
            res.stop_r = r;
            return res;
        }
        if (wp >= 0) {
            res.kind = +1;
            res.stop_r = r;
            return res;
        }
    }
    res.kind = +1;  // survived to rmax while positive: too much mass
    res.stop_r = rmax;
    return res;
}

}  // namespace

RadialProfile radial_pde_solve(int dim, double mesh) {
    if (mesh <= 0) throw SolverError("radial_pde_solve: mesh must be positive");
    if (dim < 1 || dim > 4)
        throw SolverError("radial_pde_solve: dim must be in {1,2,3,4}");

    RadialProfile p;
    p.dim = dim;
    p.mesh = mesh;

    const double rmax = 64.0;
    double lo, hi;  // bisection bracket on the inner offset / center value
    double r0, wp0;
    if (dim == 1) {
        // flat reduction: shoot on w(0) with the slope condition w'(0+) = -1
        r0 = 0.0;
        wp0 = -1.0;
        lo = 1e-6;
        hi = 8.0;
    } else {
        r0 = 1e-3;  // Green-kernel matching radius
        wp0 = green_kernel_derivative(dim, r0);
        lo = -green_kernel(dim, r0);  // w(r0) = 0: certain undershoot
        hi = 64.0;
    }
    p.r0 = r0;

    auto level = [&](double c) {
        return (dim == 1) ? c : green_kernel(dim, r0) + c;
    };
    if (shoot_radial(dim, r0, level(lo), wp0, mesh, rmax, false).kind != -1)
        throw SolverError("radial_pde_solve: lower bracket is not an undershoot");
    if (shoot_radial(dim, r0, level(hi), wp0, mesh, rmax, false).kind != +1)
        throw SolverError("radial_pde_solve: upper bracket is not an overshoot");

    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;  // bracket at machine resolution
        const ShootResult r = shoot_radial(dim, r0, level(mid), wp0, mesh, rmax, false);
        if (r.kind == -1) lo = mid;
        else hi = mid;
    }

    const double offset = 0.5 * (lo + hi);
    ShootResult fin = shoot_radial(dim, r0, level(offset), wp0, mesh, rmax, true);
    p.inner_offset = offset;
    for (double& v : fin.w) v = std::max(v, 0.0);
    p.w = std::move(fin.w);
    p.wp = std::move(fin.wp);
    p.support_radius = fin.stop_r;
    return p;
}

double RadialProfile::value(double r) const {
    if (w.empty() || mesh <= 0 || r < r0) return 0.0;
    const double j = (r - r0) / mesh;
    const std::size_t j0 = static_cast<std::size_t>(j);
    if (j0 + 1 >= w.size()) return 0.0;
    const double frac = j - static_cast<double>(j0);
    return w[j0] * (1.0 - frac) + w[j0 + 1] * frac;
}

double green_matching_coefficient(const RadialProfile& p) {
    if (p.dim < 2) throw SolverError("green_matching_coefficient: needs d >= 2");
    // least squares of w = alpha g + beta over the innermost decade
    const double r_hi = 10.0 * p.r0;
    double sg = 0, sw = 0, sgg = 0, sgw = 0;
    std::size_t m = 0;
    for (std::size_t j = 0; j < p.w.size(); ++j) {
        const double r = p.r_at(j);
        if (r > r_hi) break;
        const double g = green_kernel(p.dim, r);
        sg += g;
        sw += p.w[j];
        sgg += g * g;
        sgw += g * p.w[j];
        ++m;
    }
    if (m < 3) throw SolverError("green_matching_coefficient: too few samples");
    const double dm = static_cast<double>(m);
    return (dm * sgw - sg * sw) / (dm * sgg - sg * sg);
}

namespace {

double fd_residual(const std::vector<double>& w, double h, double scale, int dim,
                   double r0, double support, double t) {
    // residual of v'' + (d-1)v'/x = sqrt(2v/pi), v = t^4 w(x/t) on mesh t*h
    double worst = 0;
    const double th = t * h;
    for (std::size_t j = 1; j + 1 < w.size(); ++j) {
        const double r = r0 + h * static_cast<double>(j);
        if (r > 0.95 * support || r < 0.05 * support) continue;
        if (w[j] <= 0) continue;
        const double v = scale * w[j], vm = scale * w[j - 1], vp = scale * w[j + 1];
        double res = (vm - 2 * v + vp) / (th * th) - rhs_sqrt(v);
        if (dim > 1) res += (dim - 1) * (vp - vm) / (2 * th * (t * r));
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

}  // namespace

RescaleReport rescale_check(const ScalingProfile& p, double t) {
    RescaleReport rep;
    rep.t = t;
    rep.residual_base = fd_residual(p.w, p.mesh, 1.0, 1, 0.0, p.support_radius, 1.0);
    rep.residual_scaled =
        fd_residual(p.w, p.mesh, t * t * t * t, 1, 0.0, p.support_radius, t);
    return rep;
}

RescaleReport rescale_check(const RadialProfile& p, double t) {
    RescaleReport rep;
    rep.t = t;
    rep.residual_base =
        fd_residual(p.w, p.mesh, 1.0, p.dim, p.r0, p.support_radius, 1.0);
    rep.residual_scaled =
        fd_residual(p.w, p.mesh, t * t * t * t, p.dim, p.r0, p.support_radius, t);
    return rep;
}

double integral_constraint(const ScalingProfile& p) {
    if (p.w.size() < 2) return 0.0;
    const std::size_t n = p.w.size() - 1;  // intervals
    auto f = [&](std::size_t j) { return rhs_sqrt(p.w[j]); };
    double total = 0;
    std::size_t m = (n % 2 == 0) ? n : n - 1;
    for (std::size_t j = 0; j + 2 <= m; j += 2)
        total += p.mesh / 3.0 * (f(j) + 4.0 * f(j + 1) + f(j + 2));
    if (n % 2 != 0)  // odd tail cell: trapezoid
        total += p.mesh * 0.5 * (f(n - 1) + f(n));
    return total;
}

ShootOutcome shoot_from_origin(double w0, double mesh) {
    const ShootResult r = shoot_radial(1, 0.0, w0, -1.0, mesh, 64.0, true);
    const double wend = r.w.empty() ? w0 : r.w.back();
    const double slope = r.wp.empty() ? -1.0 : r.wp.back();
    if (std::abs(wend) < 1e-8 && std::abs(slope) < 1e-6)
        return ShootOutcome::balanced;
    return (r.kind == -1) ? ShootOutcome::undershoot : ShootOutcome::overshoot;
}

QuarticFit fit_quartic_form(const ScalingProfile& p) {
    QuarticFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t j = 0; j < p.w.size(); ++j) {
        const double xi = p.mesh * static_cast<double>(j);
        if (xi > 0.9 * p.support_radius || p.w[j] <= 0) break;
        const double y = std::pow(p.w[j], 0.25);
        sx += xi;
        sy += y;
        sxx += xi * xi;
        sxy += xi * y;
        ++m;
    }
    if (m < 3) throw SolverError("fit_quartic_form: too few samples");
    const double dm = static_cast<double>(m);
    fit.a = (dm * sxy - sx * sy) / (dm * sxx - sx * sx);
    fit.b = (sy - fit.a * sx) / dm;
    double ss = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const double xi = p.mesh * static_cast<double>(j);
        const double e = std::pow(p.w[j], 0.25) - (fit.a * xi + fit.b);
        ss += e * e;
    }
    fit.rms = std::sqrt(ss / dm);
    return fit;
}

}  // namespace oilwater
