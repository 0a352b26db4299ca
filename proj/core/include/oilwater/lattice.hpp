#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oilwater {

struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IllegalSiteError : EngineError {
    using EngineError::EngineError;
};
struct InsufficientPairsError : EngineError {
    using EngineError::EngineError;
};
struct IllegalPrefixError : EngineError {
    using EngineError::EngineError;
};
struct SupportViolationError : EngineError {
    using EngineError::EngineError;
};

/// Dense per-site oil/water counts on Z over a window that grows on demand.
/// Conservation (each species sums to n) and nonnegativity hold throughout.
class Config1D {
public:
    explicit Config1D(std::int64_t n) : n_(n) {
        lo_ = -kInitialHalf;
        oil_.assign(2 * kInitialHalf + 1, 0);
        water_.assign(2 * kInitialHalf + 1, 0);
        oil_[idx(0)] = n;
        water_[idx(0)] = n;
        if (n > 0) {
            support_lo_ = support_hi_ = 0;
        }
    }

    std::int64_t n() const { return n_; }
    std::int64_t lo() const { return lo_; }
    std::int64_t hi() const { return lo_ + static_cast<std::int64_t>(oil_.size()); }

    std::int64_t oil(std::int64_t x) const { return inside(x) ? oil_[idx(x)] : 0; }
    std::int64_t water(std::int64_t x) const {
        return inside(x) ? water_[idx(x)] : 0;
    }
    std::int64_t g(std::int64_t x) const { return oil(x) - water(x); }
    std::int64_t pairs(std::int64_t x) const {
        return inside(x) ? std::min(oil_[idx(x)], water_[idx(x)]) : 0;
    }

    /// Occupied support bounds; lo > hi when empty.
    std::int64_t support_lo() const { return support_lo_; }
    std::int64_t support_hi() const { return support_hi_; }

    void add(std::int64_t x, bool is_water, std::int64_t count) {
        ensure(x);
        (is_water ? water_ : oil_)[idx(x)] += count;
        if (count > 0) {
            if (x < support_lo_) support_lo_ = x;
            if (x > support_hi_) support_hi_ = x;
        }
    }

    void remove(std::int64_t x, bool is_water, std::int64_t count) {
        auto& v = (is_water ? water_ : oil_);
        if (!inside(x) || v[idx(x)] < count)
            throw EngineError("Config1D: removing more particles than present");
        v[idx(x)] -= count;
    }

    /// Grow the window so x-1..x+1 are addressable.
    void ensure(std::int64_t x) {
        if (x - 1 >= lo_ && x + 1 < hi()) return;
        grow(x);
    }

    std::int64_t window_half() const {
        return static_cast<std::int64_t>(oil_.size()) / 2;
    }

private:
    static constexpr std::int64_t kInitialHalf = 16;

    bool inside(std::int64_t x) const { return x >= lo_ && x < hi(); }
    std::size_t idx(std::int64_t x) const { return static_cast<std::size_t>(x - lo_); }

    void grow(std::int64_t x) {
        std::int64_t half = window_half();
        while (x - 1 < -half || x + 1 >= half) half *= 2;
        std::vector<std::int64_t> noil(2 * half + 1, 0), nwater(2 * half + 1, 0);
        for (std::size_t i = 0; i < oil_.size(); ++i) {
            noil[static_cast<std::size_t>(lo_ + half) + i] = oil_[i];
            nwater[static_cast<std::size_t>(lo_ + half) + i] = water_[i];
        }
        oil_ = std::move(noil);
        water_ = std::move(nwater);
        lo_ = -half;
    }

    std::int64_t n_;
    std::int64_t lo_;
    std::vector<std::int64_t> oil_, water_;
    std::int64_t support_lo_ = 1, support_hi_ = 0;
};

/// Dense square grid over [-half, half]^d for d in {2,3,4}, regrown on
/// boundary contact.
class GridND {
public:
    GridND(int dim, std::int32_t half) : dim_(dim) { alloc(half); }

    int dim() const { return dim_; }
    std::int32_t half() const { return half_; }
    std::size_t size() const { return cells_; }

    std::size_t flat(const std::array<std::int32_t, 4>& x) const {
        std::size_t f = 0;
        for (int a = 0; a < dim_; ++a)
            f = f * side_ + static_cast<std::size_t>(x[a] + half_);
        return f;
    }

    std::array<std::int32_t, 4> coords(std::size_t f) const {
        std::array<std::int32_t, 4> x{};
        for (int a = dim_ - 1; a >= 0; --a) {
            x[a] = static_cast<std::int32_t>(f % side_) - half_;
            f /= side_;
        }
        return x;
    }

    bool on_boundary(const std::array<std::int32_t, 4>& x) const {
        for (int a = 0; a < dim_; ++a)
            if (x[a] <= -half_ + 1 || x[a] >= half_ - 1) return true;
        return false;
    }

    std::vector<std::int64_t> oil, water, u, visits;

    /// Double the half-width, relocating all cell data.
    void regrow() {
        GridND bigger(dim_, half_ * 2);
        for (std::size_t f = 0; f < cells_; ++f) {
            if (oil[f] == 0 && water[f] == 0 && u[f] == 0 && visits[f] == 0)
                continue;
            const std::size_t g = bigger.flat(coords(f));
            bigger.oil[g] = oil[f];
            bigger.water[g] = water[f];
            bigger.u[g] = u[f];
            bigger.visits[g] = visits[f];
        }
        *this = std::move(bigger);
    }

private:
    void alloc(std::int32_t half) {
        half_ = half;
        side_ = static_cast<std::size_t>(2 * half + 1);
        cells_ = 1;
        for (int a = 0; a < dim_; ++a) cells_ *= side_;
        oil.assign(cells_, 0);
        water.assign(cells_, 0);
        u.assign(cells_, 0);
        visits.assign(cells_, 0);
    }

    int dim_;
    std::int32_t half_ = 0;
    std::size_t side_ = 0;
    std::size_t cells_ = 0;
};

}  // namespace oilwater
