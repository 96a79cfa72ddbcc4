#include "sardine/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sardine/binio.hpp"
#include "sardine/rng.hpp"

namespace sardine {

namespace {

constexpr double kEligibleFraction = 0.99;
constexpr int kCandidateStride = 4;
constexpr float kImportFloorScale = 1e-3f;

std::vector<std::size_t> fisher_yates(std::size_t count, rng::Stream& rs) {
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    for (std::size_t i = count; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rs.below(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

void copy_window(const Raster& src, int row, int col, int patch, std::vector<float>& out) {
    out.resize(static_cast<std::size_t>(patch) * patch);
    for (int r = 0; r < patch; ++r) {
        const float* s = src.values.data() + static_cast<std::size_t>(row + r) * src.width + col;
        std::copy(s, s + patch, out.begin() + static_cast<std::size_t>(r) * patch);
    }
}

void sort_canonical(std::vector<PatchPair>& pairs) {
    std::sort(pairs.begin(), pairs.end(), [](const PatchPair& a, const PatchPair& b) {
        if (a.source_id != b.source_id) return a.source_id < b.source_id;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });
}

} // namespace

double ChangeMask::coverage() const {
    if (stable.empty()) return 0.0;
    std::size_t on = 0;
    for (auto v : stable) on += v != 0;
    return static_cast<double>(on) / static_cast<double>(stable.size());
}

ReferenceResult build_reference(const TemporalStack& stack, double threshold) {
    if (stack.looks.size() < 2) {
        throw UsageError("build_reference: need at least 2 temporal looks");
    }
    ReferenceResult out;
    out.reference = multilook(stack.looks, stack.format);

    const int h = out.reference.height;
    const int w = out.reference.width;
    out.mask.height = h;
    out.mask.width = w;
    out.mask.stable.assign(static_cast<std::size_t>(h) * w, 0);

    // Temporal coefficient of variation in intensity against the
    // theoretical single-look CV of 1; multiplicative noise makes this a
    // constant-false-alarm statistic.
    const double t = static_cast<double>(stack.looks.size());
    for (std::size_t i = 0; i < out.mask.stable.size(); ++i) {
        double sum = 0.0, sq = 0.0;
        for (const Raster& look : stack.looks) {
            double v = static_cast<double>(look.values[i]);
            if (stack.format == SpeckleFormat::amplitude) v *= v;
            sum += v;
            sq += v * v;
        }
        const double mean = sum / t;
        const double var = std::max(0.0, sq / t - mean * mean);
        const double cv = std::sqrt(var) / mean;
        out.mask.stable[i] = cv <= threshold ? 1 : 0;
    }
    return out;
}

double PatchSet::log_speckle_c() const {
    return log_speckle_mean(SpeckleConfig{looks, format, 0});
}

std::string dataset_report_text(const DatasetReport& report) {
    std::string text;
    char buf[128];
    auto add = [&](const char* key, long long v) {
        std::snprintf(buf, sizeof(buf), "%s=%lld\n", key, v);
        text += buf;
    };
    add("requested", report.requested);
    add("produced", report.produced);
    add("images_used", report.images_used);
    add("images_skipped", report.images_skipped);
    add("shortfall", report.shortfall);
    if (report.eligible_windows >= 0) add("eligible_windows", report.eligible_windows);
    if (report.mask_coverage >= 0.0) {
        std::snprintf(buf, sizeof(buf), "mask_coverage=%.6f\n", report.mask_coverage);
        text += buf;
    }
    for (const std::string& w : report.warnings) text += "warning=" + w + "\n";
    return text;
}

PatchSet make_synthetic_set(const std::vector<Raster>& clean_images,
                            const SpeckleConfig& cfg, int patches_per_image,
                            int patch, std::uint64_t seed, DatasetReport* report) {
    if (clean_images.empty()) throw UsageError("make_synthetic_set: no input images");
    if (patches_per_image < 1) throw UsageError("make_synthetic_set: patch count must be >= 1");
    if (patch < 1) throw UsageError("make_synthetic_set: patch size must be >= 1");

    PatchSet set;
    set.patch = patch;
    set.looks = cfg.looks;
    set.format = cfg.format;

    DatasetReport local;
    DatasetReport& rep = report ? *report : local;
    rep = DatasetReport{};
    rep.requested = patches_per_image * static_cast<int>(clean_images.size());

    for (std::size_t img = 0; img < clean_images.size(); ++img) {
        const Raster& clean = clean_images[img];
        if (clean.height < patch || clean.width < patch) {
            rep.images_skipped += 1;
            rep.warnings.push_back("image " + std::to_string(img) + " smaller than patch (" +
                                   std::to_string(clean.height) + "x" +
                                   std::to_string(clean.width) + "), skipped");
            continue;
        }
        // One speckle field per image; overlapping patches share it.
        SpeckleConfig img_cfg = cfg;
        img_cfg.seed = rng::derive(seed, 2 * img);
        const Raster noisy = simulate_speckle(clean, img_cfg);

        rng::Stream offsets(rng::derive(seed, 2 * img + 1));
        const std::uint64_t row_span = static_cast<std::uint64_t>(clean.height - patch) + 1;
        const std::uint64_t col_span = static_cast<std::uint64_t>(clean.width - patch) + 1;
        for (int k = 0; k < patches_per_image; ++k) {
            PatchPair pair;
            pair.source_id = static_cast<std::uint32_t>(img);
            pair.row = static_cast<std::uint32_t>(offsets.below(row_span));
            pair.col = static_cast<std::uint32_t>(offsets.below(col_span));
            copy_window(clean, static_cast<int>(pair.row), static_cast<int>(pair.col), patch,
                        pair.clean);
            copy_window(noisy, static_cast<int>(pair.row), static_cast<int>(pair.col), patch,
                        pair.noisy);
            set.pairs.push_back(std::move(pair));
        }
        rep.images_used += 1;
    }
    sort_canonical(set.pairs);
    rep.produced = static_cast<int>(set.pairs.size());
    rep.shortfall = rep.requested - rep.produced;
    return set;
}

PatchSet extract_real_patches(const Raster& reference, const Raster& noisy_look,
                              const ChangeMask& mask, SpeckleFormat format,
                              int noisy_looks, int count, int patch,
                              std::uint64_t seed, DatasetReport* report) {
    if (reference.height != noisy_look.height || reference.width != noisy_look.width ||
        reference.height != mask.height || reference.width != mask.width) {
        throw ShapeError("extract_real_patches: reference/noisy/mask dims differ");
    }
    if (count < 0) throw UsageError("extract_real_patches: count must be >= 0");
    if (patch < 1) throw UsageError("extract_real_patches: patch size must be >= 1");

    DatasetReport local;
    DatasetReport& rep = report ? *report : local;
    rep = DatasetReport{};
    rep.requested = count;
    rep.mask_coverage = mask.coverage();

    PatchSet set;
    set.patch = patch;
    set.looks = noisy_looks;
    set.format = format;

    if (reference.height < patch || reference.width < patch) {
        rep.warnings.push_back("image smaller than patch, no candidate windows");
        rep.shortfall = count;
        return set;
    }

    // Summed-area table of the mask for O(1) window coverage queries.
    const int h = mask.height, w = mask.width;
    std::vector<std::uint32_t> sat(static_cast<std::size_t>(h + 1) * (w + 1), 0);
    for (int r = 0; r < h; ++r) {
        std::uint32_t row_sum = 0;
        for (int c = 0; c < w; ++c) {
            row_sum += mask.stable[static_cast<std::size_t>(r) * w + c];
            sat[static_cast<std::size_t>(r + 1) * (w + 1) + (c + 1)] =
                sat[static_cast<std::size_t>(r) * (w + 1) + (c + 1)] + row_sum;
        }
    }
    auto window_stable = [&](int r, int c) {
        const std::size_t stride = static_cast<std::size_t>(w + 1);
        return sat[(r + patch) * stride + (c + patch)] - sat[(r + patch) * stride + c] -
               sat[r * stride + (c + patch)] + sat[r * stride + c];
    };

    const auto min_stable =
        static_cast<std::uint32_t>(std::ceil(kEligibleFraction * patch * patch));
    std::vector<std::pair<int, int>> eligible; // canonical row-major candidate order
    for (int r = 0; r + patch <= h; r += kCandidateStride) {
        for (int c = 0; c + patch <= w; c += kCandidateStride) {
            if (window_stable(r, c) >= min_stable) eligible.emplace_back(r, c);
        }
    }
    rep.eligible_windows = static_cast<int>(eligible.size());

    const std::size_t take = std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(count));
    rng::Stream rs(rng::derive(seed, 0));
    std::vector<std::size_t> order = fisher_yates(eligible.size(), rs);
    order.resize(take);
    std::sort(order.begin(), order.end()); // canonical output order

    for (std::size_t idx : order) {
        const auto [r, c] = eligible[idx];
        PatchPair pair;
        pair.source_id = 0;
        pair.row = static_cast<std::uint32_t>(r);
        pair.col = static_cast<std::uint32_t>(c);
        copy_window(reference, r, c, patch, pair.clean);
        copy_window(noisy_look, r, c, patch, pair.noisy);
        set.pairs.push_back(std::move(pair));
    }
    rep.produced = static_cast<int>(set.pairs.size());
    rep.shortfall = count - rep.produced;
    if (rep.shortfall > 0) {
        rep.warnings.push_back("only " + std::to_string(rep.produced) + " of " +
                               std::to_string(count) + " requested windows were eligible");
    }
    return set;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch) {
    rng::Stream rs(rng::derive(seed, 0x45504F43ull + static_cast<std::uint64_t>(epoch)));
    return fisher_yates(count, rs);
}

MinibatchStream::MinibatchStream(const PatchSet& set, int batch, std::uint64_t seed, int epoch)
    : set_(set), batch_(batch) {
    if (set.pairs.empty()) throw UsageError("minibatches: empty patch set");
    if (batch < 1) throw UsageError("minibatches: batch must be >= 1");
    order_ = epoch_order(set.pairs.size(), seed, epoch);
}

int MinibatchStream::batches_total() const {
    return static_cast<int>((order_.size() + batch_ - 1) / static_cast<std::size_t>(batch_));
}

bool MinibatchStream::next(Tensor4f& clean, Tensor4f& noisy) {
    if (cursor_ >= order_.size()) return false;
    const std::size_t take = std::min<std::size_t>(batch_, order_.size() - cursor_);
    const int patch = set_.patch;
    clean = Tensor4f(static_cast<int>(take), 1, patch, patch);
    noisy = Tensor4f(static_cast<int>(take), 1, patch, patch);
    for (std::size_t b = 0; b < take; ++b) {
        const PatchPair& pair = set_.pairs[order_[cursor_ + b]];
        std::copy(pair.clean.begin(), pair.clean.end(), clean.plane(static_cast<int>(b), 0));
        std::copy(pair.noisy.begin(), pair.noisy.end(), noisy.plane(static_cast<int>(b), 0));
    }
    cursor_ += take;
    return true;
}

// ---------------------------------------------------------------------------
// Raster I/O

namespace {

constexpr char kRasterMagic[4] = {'S', 'A', 'R', 'F'};
constexpr std::uint16_t kRasterVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 24;

Raster read_sarf(const std::vector<unsigned char>& body, const std::string& path) {
    ByteReader rd(body.data(), body.size());
    char magic[4];
    rd.bytes(magic, 4);
    const std::uint16_t version = rd.u16();
    if (version != kRasterVersion) {
        throw FormatError("unsupported SARF version in " + path);
    }
    const std::uint32_t height = rd.u32();
    const std::uint32_t width = rd.u32();
    const std::uint32_t channels = rd.u32();
    if (height == 0 || width == 0 || height > kMaxDim || width > kMaxDim) {
        throw FormatError("bad raster dimensions in " + path);
    }
    if (channels != 1) throw FormatError("expected single-channel raster in " + path);

    Raster r(static_cast<int>(height), static_cast<int>(width));
    if (rd.remaining() != r.size() * 4) throw FormatError("truncated file: " + path);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const float v = rd.f32();
        if (!std::isfinite(v)) throw FormatError("non-finite raster value in " + path);
        r.values[i] = v;
    }
    return r;
}

int pgm_token(std::istream& in) {
    // Skips whitespace and '#' comments, then reads one decimal token.
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch)) throw FormatError("malformed PGM header");
    long v = 0;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        if (v > (1L << 30)) throw FormatError("PGM header value overflow");
        ch = in.get();
    }
    return static_cast<int>(v);
}

Raster read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    char p = 0, five = 0;
    in.get(p);
    in.get(five);
    if (p != 'P' || five != '5') throw FormatError("not a binary PGM (P5): " + path);
    const int width = pgm_token(in);
    const int height = pgm_token(in);
    const int maxval = pgm_token(in);
    if (width < 1 || height < 1 || width > static_cast<int>(kMaxDim) ||
        height > static_cast<int>(kMaxDim)) {
        throw FormatError("bad PGM dimensions in " + path);
    }
    if (maxval < 1 || maxval > 65535) throw FormatError("bad PGM maxval in " + path);

    const bool wide = maxval > 255;
    const std::size_t count = static_cast<std::size_t>(width) * height;
    std::vector<unsigned char> raw(count * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw FormatError("truncated PGM payload: " + path);

    // Sample value becomes amplitude; zeros clamp to 1e-3 of full scale so
    // the log transform stays defined.
    const float floor = kImportFloorScale * static_cast<float>(maxval);
    Raster r(height, width);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned v = wide ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                : raw[i]; // 16-bit PGM is big-endian
        r.values[i] = std::max(static_cast<float>(v), floor);
    }
    return r;
}

} // namespace

void write_raster(const Raster& raster, const std::string& path) {
    if (raster.height < 1 || raster.width < 1) {
        throw UsageError("write_raster: empty raster");
    }
    for (float v : raster.values) {
        if (!std::isfinite(v)) throw FormatError("write_raster: non-finite value");
    }
    ByteWriter w;
    w.bytes(kRasterMagic, 4);
    w.u16(kRasterVersion);
    w.u32(static_cast<std::uint32_t>(raster.height));
    w.u32(static_cast<std::uint32_t>(raster.width));
    w.u32(1);
    for (float v : raster.values) w.f32(v);
    write_file_with_crc(path, std::move(w));
}

Raster read_raster(const std::string& path) {
    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw FormatError("cannot open: " + path);
        char head[2] = {0, 0};
        probe.read(head, 2);
        if (probe && head[0] == 'P' && head[1] == '5') return read_pgm(path);
    }
    const std::vector<unsigned char> body = read_file_checked(path);
    if (body.size() < 4 || std::memcmp(body.data(), kRasterMagic, 4) != 0) {
        throw FormatError("bad magic (expected SARF or P5 PGM): " + path);
    }
    return read_sarf(body, path);
}

// ---------------------------------------------------------------------------
// Patch-set I/O

namespace {
constexpr char kPatchMagic[4] = {'S', 'A', 'R', 'P'};
constexpr std::uint16_t kPatchVersion = 1;
} // namespace

void write_patch_set(const PatchSet& set, const std::string& path) {
    ByteWriter w;
    w.bytes(kPatchMagic, 4);
    w.u16(kPatchVersion);
    w.u32(static_cast<std::uint32_t>(set.pairs.size()));
    w.u16(static_cast<std::uint16_t>(set.looks));
    w.u8(set.format == SpeckleFormat::amplitude ? 0 : 1);
    w.u16(static_cast<std::uint16_t>(set.patch));
    const std::size_t block = static_cast<std::size_t>(set.patch) * set.patch;
    for (const PatchPair& p : set.pairs) {
        if (p.clean.size() != block || p.noisy.size() != block) {
            throw UsageError("write_patch_set: patch block size mismatch");
        }
        w.u32(p.source_id);
        w.u32(p.row);
        w.u32(p.col);
        for (float v : p.clean) w.f32(v);
        for (float v : p.noisy) w.f32(v);
    }
    write_file_with_crc(path, std::move(w));
}

PatchSet read_patch_set(const std::string& path) {
    const std::vector<unsigned char> body = read_file_checked(path);
    ByteReader rd(body.data(), body.size());
    char magic[4];
    rd.bytes(magic, 4);
    if (std::memcmp(magic, kPatchMagic, 4) != 0) {
        throw FormatError("bad magic (expected SARP): " + path);
    }
    if (rd.u16() != kPatchVersion) throw FormatError("unsupported SARP version in " + path);

    PatchSet set;
    const std::uint32_t count = rd.u32();
    set.looks = rd.u16();
    set.format = rd.u8() == 0 ? SpeckleFormat::amplitude : SpeckleFormat::intensity;
    set.patch = rd.u16();
    if (set.looks < 1 || set.patch < 1) throw FormatError("bad SARP header in " + path);

    const std::size_t block = static_cast<std::size_t>(set.patch) * set.patch;
    set.pairs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        PatchPair p;
        p.source_id = rd.u32();
        p.row = rd.u32();
        p.col = rd.u32();
        p.clean.resize(block);
        p.noisy.resize(block);
        for (float& v : p.clean) v = rd.f32();
        for (float& v : p.noisy) v = rd.f32();
        for (float v : p.clean) {
            if (!(v > 0.0f) || !std::isfinite(v)) {
                throw FormatError("non-positive patch value in " + path);
            }
        }
        for (float v : p.noisy) {
            if (!(v > 0.0f) || !std::isfinite(v)) {
                throw FormatError("non-positive patch value in " + path);
            }
        }
        set.pairs.push_back(std::move(p));
    }
    if (rd.remaining() != 0) throw FormatError("trailing bytes in " + path);
    return set;
}

} // namespace sardine
