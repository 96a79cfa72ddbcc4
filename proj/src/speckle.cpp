#include "sardine/speckle.hpp"

#include <cmath>

#include "sardine/rng.hpp"

namespace sardine {

const char* format_name(SpeckleFormat f) {
    return f == SpeckleFormat::amplitude ? "amplitude" : "intensity";
}

SpeckleFormat parse_format(const std::string& s) {
    if (s == "amplitude") return SpeckleFormat::amplitude;
    if (s == "intensity") return SpeckleFormat::intensity;
    throw UsageError("unknown format '" + s + "' (expected amplitude or intensity)");
}

void require_positive_finite(const Raster& r, const char* what) {
    if (r.height < 1 || r.width < 1) {
        throw ShapeError(std::string(what) + ": empty raster");
    }
    for (float v : r.values) {
        if (!(v > 0.0f) || !std::isfinite(v)) {
            throw DomainError(std::string(what) + ": values must be strictly positive and finite");
        }
    }
}

Raster simulate_speckle(const Raster& clean, const SpeckleConfig& cfg) {
    if (cfg.looks < 1) throw UsageError("simulate_speckle: looks must be >= 1");
    require_positive_finite(clean, "simulate_speckle clean");

    // One sequential row-major stream per seed keeps the field
    // bit-reproducible.
    rng::Stream rs(cfg.seed);
    const double inv_looks = 1.0 / static_cast<double>(cfg.looks);
    Raster noisy(clean.height, clean.width);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double n = rs.gamma_integer(cfg.looks) * inv_looks; // unit-mean intensity speckle
        const double x = static_cast<double>(clean.values[i]);
        noisy.values[i] = static_cast<float>(
            cfg.format == SpeckleFormat::intensity ? x * n : x * std::sqrt(n));
    }
    return noisy;
}

Raster log_transform(const Raster& y) {
    Raster out(y.height, y.width);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const float v = y.values[i];
        if (!(v > 0.0f) || !std::isfinite(v)) {
            throw DomainError("log_transform: input must be strictly positive and finite");
        }
        out.values[i] = std::log(v);
    }
    return out;
}

Raster exp_transform(const Raster& log_y) {
    Raster out(log_y.height, log_y.width);
    for (std::size_t i = 0; i < log_y.size(); ++i) {
        out.values[i] = std::exp(log_y.values[i]);
    }
    return out;
}

double digamma_integer(int n) {
    if (n < 1) throw UsageError("digamma_integer: argument must be >= 1");
    // Euler-Mascheroni constant.
    constexpr double euler_gamma = 0.57721566490153286060651209008240243;
    // Sum the harmonic series smallest-first.
    double h = 0.0;
    for (int k = n - 1; k >= 1; --k) h += 1.0 / static_cast<double>(k);
    return -euler_gamma + h;
}

double log_speckle_mean(const SpeckleConfig& cfg) {
    if (cfg.looks < 1) throw UsageError("log_speckle_mean: looks must be >= 1");
    const double c_intensity =
        digamma_integer(cfg.looks) - std::log(static_cast<double>(cfg.looks));
    return cfg.format == SpeckleFormat::intensity ? c_intensity : 0.5 * c_intensity;
}

Raster multilook(const std::vector<Raster>& stack, SpeckleFormat format) {
    if (stack.empty()) throw UsageError("multilook: empty stack");
    const int h = stack.front().height;
    const int w = stack.front().width;
    for (const Raster& r : stack) {
        if (r.height != h || r.width != w) {
            throw ShapeError("multilook: raster dims differ across the stack");
        }
        require_positive_finite(r, "multilook look");
    }
    if (stack.size() == 1) return stack.front();

    Raster out(h, w);
    const double inv_t = 1.0 / static_cast<double>(stack.size());
    const std::size_t count = out.size();
    for (std::size_t i = 0; i < count; ++i) {
        double acc = 0.0;
        if (format == SpeckleFormat::intensity) {
            for (const Raster& r : stack) acc += static_cast<double>(r.values[i]);
            out.values[i] = static_cast<float>(acc * inv_t);
        } else {
            for (const Raster& r : stack) {
                const double a = static_cast<double>(r.values[i]);
                acc += a * a;
            }
            out.values[i] = static_cast<float>(std::sqrt(acc * inv_t));
        }
    }
    return out;
}

} // namespace sardine
