#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sardine/speckle.hpp"

namespace sardine {

// Axis-aligned homogeneous region (row, col, height, width).
struct Block {
    int row = 0, col = 0, h = 0, w = 0;
};

// Parses a rectangles file: one "row col h w" per line, '#' comments.
std::vector<Block> read_blocks_file(const std::string& path);

// 10*log10(peak^2 / MSE) over amplitude values; identical images report
// +inf rather than erroring.
double psnr(const Raster& reference, const Raster& test, double peak);

// Mean local SSIM over all fully supported 11x11 windows, Gaussian
// weights sigma = 1.5, K1 = 0.01, K2 = 0.03, dynamic range = peak.
double ssim(const Raster& reference, const Raster& test, double peak);

struct EnlResult {
    std::vector<double> per_block;
    double mean = 0.0;
};

// ENL = mu^2 / sigma^2 per block, computed in intensity (amplitude input
// is squared first). Zero-variance blocks report +inf.
EnlResult enl(const Raster& image, const std::vector<Block>& blocks,
              SpeckleFormat format);

struct RatioMetricsResult {
    double ratio_mean = 0.0;
    double ratio_enl = 0.0;
    // Absent when the ratio image is degenerate (identity filter).
    std::optional<double> ratio_deviation;
    bool degenerate = false;
};

// Statistics of the ratio image r = noisy/filtered in intensity. An ideal
// filter leaves r as pure L-look speckle: mean 1, ENL L, deviation 0.
// ratio_deviation = (|mean - 1| + |ENL - L| / L) / 2.
RatioMetricsResult ratio_metrics(const Raster& noisy, const Raster& filtered,
                                 SpeckleFormat format, int looks);

// One evaluated image/clip; absent metrics stay absent in the CSV.
struct MetricReport {
    std::string image;
    std::optional<double> psnr_db;
    std::optional<double> ssim_value;
    std::optional<EnlResult> enl_blocks;
    std::optional<RatioMetricsResult> ratio;
};

std::string metric_csv_header();
std::string metric_csv_row(const MetricReport& report);

} // namespace sardine
