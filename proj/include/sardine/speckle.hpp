#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sardine/errors.hpp"

namespace sardine {

enum class SpeckleFormat { amplitude, intensity };

const char* format_name(SpeckleFormat f);
SpeckleFormat parse_format(const std::string& s); // "amplitude" | "intensity"

struct SpeckleConfig {
    int looks = 1;
    SpeckleFormat format = SpeckleFormat::amplitude;
    std::uint64_t seed = 0;
};

// Single-channel 2-D image of strictly positive amplitudes/intensities.
struct Raster {
    int height = 0, width = 0;
    std::vector<float> values;

    Raster() = default;
    Raster(int h, int w, float fill = 0.0f)
        : height(h), width(w),
          values(static_cast<std::size_t>(h) * w, fill) {}

    std::size_t size() const { return values.size(); }
    float& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
    float at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

void require_positive_finite(const Raster& r, const char* what);

// Multiplies the clean image by fully developed speckle: per pixel,
// intensity speckle n ~ Gamma(L, 1/L) (unit mean); intensity output is
// x*n, amplitude output is x*sqrt(n) so the squared noise has unit mean.
// Sampling is a single sequential row-major stream per seed.
Raster simulate_speckle(const Raster& clean, const SpeckleConfig& cfg);

// Element-wise natural log / exp (the homomorphic transform pair).
Raster log_transform(const Raster& y);
Raster exp_transform(const Raster& log_y);

// psi(n) for integer n via the harmonic series: psi(n) = -gamma + H_{n-1}.
double digamma_integer(int n);

// E[log n] of the speckle in the configured format:
// intensity: psi(L) - ln L; amplitude: (psi(L) - ln L) / 2.
double log_speckle_mean(const SpeckleConfig& cfg);

// Per-pixel average in the intensity domain. Amplitude stacks are squared
// first and the result converted back, matching the radiometric definition
// of multilooking. A single-raster stack is returned unchanged.
Raster multilook(const std::vector<Raster>& stack, SpeckleFormat format);

} // namespace sardine
