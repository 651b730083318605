#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gsam/tensor.hpp"

namespace gsam {

// Per-pixel class ids, matching an image's spatial dims.
struct LabelMask {
    int h = 0, w = 0;
    std::vector<uint8_t> ids;

    LabelMask() = default;
    LabelMask(int height, int width) : h(height), w(width), ids(static_cast<size_t>(height) * width, 0) {}
    uint8_t& at(int i, int j) { return ids[static_cast<size_t>(i) * w + j]; }
    uint8_t at(int i, int j) const { return ids[static_cast<size_t>(i) * w + j]; }
    bool operator==(const LabelMask& o) const { return h == o.h && w == o.w && ids == o.ids; }
};

struct Sample {
    Tensor image;      // [1, 3, H, W], values in [0, 1]
    LabelMask label;   // [H, W]
};

struct AugmentConfig {
    int crop_h = 64, crop_w = 64;
    bool pad_before_crop = false;   // pad by crop/8 per side, then crop
    bool hflip = true;
    bool rot90 = true;
    uint64_t seed = 0;
};

// Deterministic synthetic segmentation set: colored rectangles, ellipses and
// thin lines per class on a textured background, sizes spanning a few pixels
// to half the image so the multi-scale branches have something to gain.
std::vector<Sample> generate_shapes(int n, int h, int w, int num_classes, uint64_t seed);

// One geometric transform applied identically to image and label; labels are
// remapped by index only, never interpolated.
Sample augment(const Sample& sample, const AugmentConfig& cfg, std::mt19937_64& rng);

// Stable per-sample stream so augmentation stays deterministic regardless of
// processing order.
std::mt19937_64 sample_rng(uint64_t base_seed, int sample_index, int epoch);

// ---------------------------------------------------------------------------
// mIoU
// ---------------------------------------------------------------------------

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);

    void accumulate(const LabelMask& pred, const LabelMask& gt);
    long long total() const;
    long long at(int gt, int pred) const { return counts_[static_cast<size_t>(gt) * nc_ + pred]; }
    int num_classes() const { return nc_; }

    struct Iou {
        std::vector<double> per_class;   // NaN for classes absent from pred and gt
        std::vector<bool> present;
        double mean = 0.0;               // over present classes only
    };
    Iou iou() const;

private:
    int nc_ = 0;
    std::vector<long long> counts_;   // [gt][pred]
};

// Convenience single-pair wrapper: (per-class IoU, mean).
std::pair<std::vector<double>, double> miou(const LabelMask& pred, const LabelMask& gt,
                                            int num_classes);

// ---------------------------------------------------------------------------
// On-disk dataset: paired 8-bit PNGs plus a JSON manifest
// ---------------------------------------------------------------------------

struct DatasetMeta {
    int n = 0;
    int height = 0, width = 0;
    int num_classes = 0;
    uint64_t seed = 0;
};

void export_dataset(const std::string& dir, const std::vector<Sample>& samples,
                    const DatasetMeta& meta);
std::pair<std::vector<Sample>, DatasetMeta> import_dataset(const std::string& dir);

// Deterministic train/val split by index hash.
void split_dataset(const std::vector<Sample>& all, double val_fraction, uint64_t seed,
                   std::vector<Sample>& train, std::vector<Sample>& val);

}  // namespace gsam
