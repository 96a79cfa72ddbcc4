#include "sardine/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace sardine {

namespace {

void check_same_dims(const Raster& a, const Raster& b, const char* what) {
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError(std::string(what) + ": raster dims differ");
    }
}

double block_intensity(const Raster& img, SpeckleFormat format, std::size_t i) {
    const double v = static_cast<double>(img.values[i]);
    return format == SpeckleFormat::amplitude ? v * v : v;
}

// mu^2/sigma^2 with population variance, over the given intensity samples.
double enl_of(const std::vector<double>& intensity) {
    double sum = 0.0;
    for (double v : intensity) sum += v;
    const double mean = sum / static_cast<double>(intensity.size());
    double sq = 0.0;
    for (double v : intensity) {
        const double d = v - mean;
        sq += d * d;
    }
    const double var = sq / static_cast<double>(intensity.size());
    if (var == 0.0) return std::numeric_limits<double>::infinity();
    return mean * mean / var;
}

std::string format_cell(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

std::vector<Block> read_blocks_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open blocks file: " + path);
    std::vector<Block> blocks;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        Block b;
        if (!(ss >> b.row)) continue; // blank or comment-only line
        if (!(ss >> b.col >> b.h >> b.w)) {
            throw FormatError("blocks file line " + std::to_string(line_no) +
                              ": expected 'row col h w'");
        }
        blocks.push_back(b);
    }
    return blocks;
}

double psnr(const Raster& reference, const Raster& test, double peak) {
    check_same_dims(reference, test, "psnr");
    if (!(peak > 0.0)) throw UsageError("psnr: peak must be > 0");
    double se = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = static_cast<double>(reference.values[i]) -
                         static_cast<double>(test.values[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(reference.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Raster& reference, const Raster& test, double peak) {
    check_same_dims(reference, test, "ssim");
    if (!(peak > 0.0)) throw UsageError("ssim: peak must be > 0");
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    if (reference.height < win || reference.width < win) {
        throw UsageError("ssim: image smaller than the 11x11 window");
    }

    double weights[win * win];
    double wsum = 0.0;
    for (int y = 0; y < win; ++y) {
        for (int x = 0; x < win; ++x) {
            const double dy = y - (win - 1) / 2.0;
            const double dx = x - (win - 1) / 2.0;
            weights[y * win + x] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            wsum += weights[y * win + x];
        }
    }
    for (double& wv : weights) wv /= wsum;

    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    double total = 0.0;
    std::size_t windows = 0;
    for (int r = 0; r + win <= reference.height; ++r) {
        for (int c = 0; c + win <= reference.width; ++c) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int y = 0; y < win; ++y) {
                for (int x = 0; x < win; ++x) {
                    const double wv = weights[y * win + x];
                    const double xv = reference.at(r + y, c + x);
                    const double yv = test.at(r + y, c + x);
                    mx += wv * xv;
                    my += wv * yv;
                    sxx += wv * xv * xv;
                    syy += wv * yv * yv;
                    sxy += wv * xv * yv;
                }
            }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cov = sxy - mx * my;
            const double s = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                             ((mx * mx + my * my + c1) * (vx + vy + c2));
            total += s;
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

EnlResult enl(const Raster& image, const std::vector<Block>& blocks, SpeckleFormat format) {
    if (blocks.empty()) throw UsageError("enl: no blocks given");
    EnlResult result;
    result.per_block.reserve(blocks.size());
    double sum = 0.0;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const Block& b = blocks[bi];
        if (b.row < 0 || b.col < 0 || b.h < 1 || b.w < 1 ||
            b.row + b.h > image.height || b.col + b.w > image.width) {
            throw UsageError("enl: block " + std::to_string(bi) + " out of image bounds");
        }
        if (b.h * b.w < 64) {
            throw UsageError("enl: block " + std::to_string(bi) + " area < 64 pixels");
        }
        std::vector<double> vals;
        vals.reserve(static_cast<std::size_t>(b.h) * b.w);
        for (int r = b.row; r < b.row + b.h; ++r) {
            for (int c = b.col; c < b.col + b.w; ++c) {
                vals.push_back(block_intensity(image, format,
                                               static_cast<std::size_t>(r) * image.width + c));
            }
        }
        result.per_block.push_back(enl_of(vals));
        sum += result.per_block.back();
    }
    result.mean = sum / static_cast<double>(result.per_block.size());
    return result;
}

RatioMetricsResult ratio_metrics(const Raster& noisy, const Raster& filtered,
                                 SpeckleFormat format, int looks) {
    check_same_dims(noisy, filtered, "ratio_metrics");
    if (looks < 1) throw UsageError("ratio_metrics: looks must be >= 1");
    require_positive_finite(filtered, "ratio_metrics filtered");

    std::vector<double> ratio(noisy.size());
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        ratio[i] = block_intensity(noisy, format, i) / block_intensity(filtered, format, i);
    }

    RatioMetricsResult out;
    double sum = 0.0;
    for (double r : ratio) sum += r;
    out.ratio_mean = sum / static_cast<double>(ratio.size());
    out.ratio_enl = enl_of(ratio);

    if (std::isinf(out.ratio_enl)) {
        // Identity-like filter: the ratio image carries no speckle at all,
        // so the deviation score is undefined rather than zero.
        out.degenerate = true;
        out.ratio_deviation.reset();
    } else {
        out.ratio_deviation = 0.5 * (std::abs(out.ratio_mean - 1.0) +
                                     std::abs(out.ratio_enl - looks) / looks);
    }
    return out;
}

std::string metric_csv_header() {
    return "image,psnr_db,ssim,enl_mean,enl_blocks,ratio_mean,ratio_enl,ratio_deviation,notes\n";
}

std::string metric_csv_row(const MetricReport& report) {
    std::string row = report.image;
    row += ',';
    row += report.psnr_db ? format_cell(*report.psnr_db) : "";
    row += ',';
    row += report.ssim_value ? format_cell(*report.ssim_value) : "";
    row += ',';
    std::string notes;
    if (report.enl_blocks) {
        row += format_cell(report.enl_blocks->mean);
        row += ',';
        std::string joined;
        for (std::size_t i = 0; i < report.enl_blocks->per_block.size(); ++i) {
            if (i) joined += ';';
            joined += format_cell(report.enl_blocks->per_block[i]);
        }
        row += joined;
    } else {
        row += ',';
    }
    row += ',';
    if (report.ratio) {
        row += format_cell(report.ratio->ratio_mean);
        row += ',';
        row += format_cell(report.ratio->ratio_enl);
        row += ',';
        if (report.ratio->ratio_deviation) {
            row += format_cell(*report.ratio->ratio_deviation);
        }
        if (report.ratio->degenerate) notes = "degenerate_ratio";
    } else {
        row += ",,";
    }
    row += ',';
    row += notes;
    row += '\n';
    return row;
}

} // namespace sardine
