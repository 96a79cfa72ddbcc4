#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sardine/speckle.hpp"
#include "sardine/tensor.hpp"

namespace sardine {

// Co-registered looks of one scene.
struct TemporalStack {
    std::vector<Raster> looks;
    SpeckleFormat format = SpeckleFormat::amplitude;
};

// true = temporally stable (usable for training).
struct ChangeMask {
    int height = 0, width = 0;
    std::vector<std::uint8_t> stable;

    bool at(int r, int c) const {
        return stable[static_cast<std::size_t>(r) * width + c] != 0;
    }
    double coverage() const;
};

struct ReferenceResult {
    Raster reference;
    ChangeMask mask;
};

// Multilooks the stack and masks pixels whose temporal coefficient of
// variation (in intensity) exceeds threshold times the theoretical
// single-look CV of 1.
ReferenceResult build_reference(const TemporalStack& stack, double threshold = 1.5);

struct PatchPair {
    std::uint32_t source_id = 0;
    std::uint32_t row = 0, col = 0;
    std::vector<float> clean, noisy; // patch*patch each, row-major
};

struct PatchSet {
    int patch = 40;
    int looks = 1; // looks of the noisy patches
    SpeckleFormat format = SpeckleFormat::amplitude;
    std::vector<PatchPair> pairs;

    // The log-speckle mean constant of the noisy patches.
    double log_speckle_c() const;
};

struct DatasetReport {
    int requested = 0;
    int produced = 0;
    int images_used = 0;
    int images_skipped = 0;
    int eligible_windows = -1;  // multitemporal mode only
    int shortfall = 0;
    double mask_coverage = -1.0; // multitemporal mode only
    std::vector<std::string> warnings;
};

std::string dataset_report_text(const DatasetReport& report);

// Synthetic pairs: speckle is injected once per source image, then
// patches_per_image windows are drawn at uniform in-bounds offsets.
// Images smaller than the patch are skipped with a warning.
PatchSet make_synthetic_set(const std::vector<Raster>& clean_images,
                            const SpeckleConfig& cfg, int patches_per_image,
                            int patch, std::uint64_t seed,
                            DatasetReport* report = nullptr);

// Real-data pairs from (reference, one noisy look): candidate offsets on
// a stride-4 grid, eligible when >= 99% of the window is mask-stable,
// sampled without replacement. Shortfalls return all eligible windows.
PatchSet extract_real_patches(const Raster& reference, const Raster& noisy_look,
                              const ChangeMask& mask, SpeckleFormat format,
                              int noisy_looks, int count, int patch,
                              std::uint64_t seed, DatasetReport* report = nullptr);

// Per-epoch reshuffled order, seeded by (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch);

// Iterates (clean, noisy) amplitude batches of shape (b,1,patch,patch);
// the final short batch is emitted. Log transforms happen downstream in
// the trainer.
class MinibatchStream {
public:
    MinibatchStream(const PatchSet& set, int batch, std::uint64_t seed, int epoch);

    // Fills the next batch; returns false when the epoch is exhausted.
    bool next(Tensor4f& clean, Tensor4f& noisy);

    int batches_total() const;

private:
    const PatchSet& set_;
    int batch_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// Native "SARF" raster format plus binary PGM (P5) import. Import maps
// 8/16-bit samples to amplitude, clamping 0 to 1e-3 of full scale so the
// log transform stays defined.
void write_raster(const Raster& raster, const std::string& path);
Raster read_raster(const std::string& path);

// "SARP" patch-set format.
void write_patch_set(const PatchSet& set, const std::string& path);
PatchSet read_patch_set(const std::string& path);

} // namespace sardine
