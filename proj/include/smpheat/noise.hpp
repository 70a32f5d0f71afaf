#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smpheat/error.hpp"

namespace smpheat {

namespace rng {

/// splitmix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ULL);
    h = mix64(h ^ (a * 0xd1b54a32d192ed03ULL));
    h = mix64(h ^ (b * 0xabc98388fb8fac03ULL));
    h = mix64(h ^ (c * 0x8cb92ba72f3d8dd7ULL));
    return h;
}

/// Uniform in (0,1) from a 64-bit key.
inline double uniform(std::uint64_t k) noexcept {
    return (static_cast<double>(k >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal keyed by (seed, a, b, c); Box-Muller on two hashed uniforms.
inline double normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    const std::uint64_t k = key(seed, a, b, c);
    const double u1 = uniform(k);
    const double u2 = uniform(mix64(k ^ 0x243f6a8885a308d3ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Small sequential generator for auxiliary randomness (bootstrap, random test fields).
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t stream = 0) : state_(key(seed, stream, 0x5eed, 0)) {}
    std::uint64_t next() noexcept { return mix64(state_++); }
    double uniform() noexcept { return rng::uniform(next()); }
    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    std::size_t index(std::size_t n) noexcept { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

private:
    std::uint64_t state_;
};

}  // namespace rng

/// Brownian increments Delta beta^i_n for paths x steps x directions, each N(0, dt).
///
/// Entries are a pure function of (seed, path, step, direction), so path p is the
/// same whatever n_paths is, and increments can be regenerated on demand instead
/// of stored. Writing an increment materializes the full array.
class NoiseGrid {
public:
    NoiseGrid() = default;

    NoiseGrid(std::uint64_t seed, std::size_t n_paths, std::size_t n_steps, std::size_t directions, double dt)
        : seed_(seed), paths_(n_paths), steps_(n_steps), directions_(directions), dt_(dt), sqrt_dt_(std::sqrt(dt)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t directions() const noexcept { return directions_; }
    double dt() const noexcept { return dt_; }
    bool materialized() const noexcept { return stored_.has_value(); }

    double increment(std::size_t path, std::size_t step, std::size_t direction) const {
        check(path, step, direction);
        if (stored_) return (*stored_)[offset(path, step, direction)];
        return generate(path, step, direction);
    }

    /// Writes the n_steps x directions increments of one path (row-major by step).
    void fill_path(std::size_t path, std::span<double> out) const {
        if (out.size() != steps_ * directions_) throw DimensionError("fill_path: buffer size mismatch");
        if (path >= paths_) throw DimensionError("path index out of range");
        if (stored_) {
            const double* src = stored_->data() + offset(path, 0, 0);
            std::copy(src, src + out.size(), out.begin());
            return;
        }
        for (std::size_t n = 0; n < steps_; ++n)
            for (std::size_t i = 0; i < directions_; ++i) out[n * directions_ + i] = generate(path, n, i);
    }

    void materialize() {
        if (stored_) return;
        std::vector<double> data(paths_ * steps_ * directions_);
        for (std::size_t p = 0; p < paths_; ++p)
            fill_path(p, std::span<double>(data.data() + p * steps_ * directions_, steps_ * directions_));
        stored_ = std::move(data);
    }

    void set_increment(std::size_t path, std::size_t step, std::size_t direction, double value) {
        check(path, step, direction);
        materialize();
        (*stored_)[offset(path, step, direction)] = value;
    }

    void fill(double value) {
        materialize();
        std::fill(stored_->begin(), stored_->end(), value);
    }

private:
    void check(std::size_t path, std::size_t step, std::size_t direction) const {
        if (path >= paths_ || step >= steps_ || direction >= directions_)
            throw DimensionError("noise index (" + std::to_string(path) + ", " + std::to_string(step) + ", " +
                                 std::to_string(direction) + ") out of range");
    }
    std::size_t offset(std::size_t path, std::size_t step, std::size_t direction) const {
        return (path * steps_ + step) * directions_ + direction;
    }
    double generate(std::size_t path, std::size_t step, std::size_t direction) const {
        return sqrt_dt_ * rng::normal(seed_, path, step, direction);
    }

    std::uint64_t seed_ = 0;
    std::size_t paths_ = 0;
    std::size_t steps_ = 0;
    std::size_t directions_ = 0;
    double dt_ = 0.0;
    double sqrt_dt_ = 0.0;
    std::optional<std::vector<double>> stored_;
};

inline NoiseGrid sample_noise(std::uint64_t seed, std::size_t n_paths, std::size_t n_steps, std::size_t directions,
                              double dt) {
    if (n_paths == 0 || n_steps == 0 || directions == 0)
        throw DimensionError("sample_noise: all dimensions must be positive");
    if (!(dt > 0.0)) throw DomainError("sample_noise: dt must be positive");
    return NoiseGrid(seed, n_paths, n_steps, directions, dt);
}

/// beta^i at the grid times t_0..t_N of one path; beta at time 0 is 0.
inline std::vector<double> brownian_path(const NoiseGrid& grid, std::size_t path, std::size_t direction) {
    if (path >= grid.paths() || direction >= grid.directions())
        throw DimensionError("brownian_path: index out of range");
    std::vector<double> out(grid.steps() + 1, 0.0);
    for (std::size_t n = 0; n < grid.steps(); ++n) out[n + 1] = out[n] + grid.increment(path, n, direction);
    return out;
}

}  // namespace smpheat
