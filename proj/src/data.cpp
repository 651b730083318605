#include "gsam/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gsam/png_io.hpp"

namespace gsam {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic shape generator
// ---------------------------------------------------------------------------

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) r = c, g = x;
    else if (hp < 2) r = x, g = c;
    else if (hp < 3) g = c, b = x;
    else if (hp < 4) g = x, b = c;
    else if (hp < 5) r = x, b = c;
    else r = c, b = x;
    const double m = v - c;
    return {r + m, g + m, b + m};
}

Rgb class_color(int cls, int num_classes) {
    const int fg = num_classes - 1;
    const double hue = fg > 1 ? 360.0 * (cls - 1) / fg : 0.0;
    return hsv_to_rgb(hue, 0.85, 0.95);
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void paint(Sample& s, int i, int j, int cls, const Rgb& color, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> noise(-0.04, 0.04);
    s.image.at(0, 0, i, j) = clamp01(color.r + noise(rng));
    s.image.at(0, 1, i, j) = clamp01(color.g + noise(rng));
    s.image.at(0, 2, i, j) = clamp01(color.b + noise(rng));
    s.label.at(i, j) = static_cast<uint8_t>(cls);
}

void draw_rect(Sample& s, int cls, const Rgb& color, double cy, double cx, double size,
               std::mt19937_64& rng) {
    std::uniform_real_distribution<double> aspect(0.6, 1.5);
    const double a = 0.5 * size * aspect(rng);
    const double b = 0.5 * size * aspect(rng);
    const int h = s.label.h, w = s.label.w;
    for (int i = std::max(0, static_cast<int>(cy - a)); i <= std::min(h - 1, static_cast<int>(cy + a)); ++i)
        for (int j = std::max(0, static_cast<int>(cx - b)); j <= std::min(w - 1, static_cast<int>(cx + b)); ++j)
            paint(s, i, j, cls, color, rng);
}

void draw_ellipse(Sample& s, int cls, const Rgb& color, double cy, double cx, double size,
                  std::mt19937_64& rng) {
    std::uniform_real_distribution<double> aspect(0.6, 1.5);
    const double a = std::max(1.0, 0.5 * size * aspect(rng));
    const double b = std::max(1.0, 0.5 * size * aspect(rng));
    const int h = s.label.h, w = s.label.w;
    for (int i = std::max(0, static_cast<int>(cy - a)); i <= std::min(h - 1, static_cast<int>(cy + a)); ++i)
        for (int j = std::max(0, static_cast<int>(cx - b)); j <= std::min(w - 1, static_cast<int>(cx + b)); ++j) {
            const double dy = (i - cy) / a, dx = (j - cx) / b;
            if (dy * dy + dx * dx <= 1.0) paint(s, i, j, cls, color, rng);
        }
}

void draw_line(Sample& s, int cls, const Rgb& color, double cy, double cx, double size,
               std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle_d(0.0, M_PI);
    std::uniform_int_distribution<int> thick_d(1, 3);
    const double angle = angle_d(rng);
    const double half = 0.5 * std::max(3.0, size);
    const double t = thick_d(rng) * 0.5;
    const double y0 = cy - half * std::sin(angle), x0 = cx - half * std::cos(angle);
    const double y1 = cy + half * std::sin(angle), x1 = cx + half * std::cos(angle);
    const double len2 = (y1 - y0) * (y1 - y0) + (x1 - x0) * (x1 - x0);
    const int h = s.label.h, w = s.label.w;
    const int lo_i = std::max(0, static_cast<int>(std::min(y0, y1) - t - 1));
    const int hi_i = std::min(h - 1, static_cast<int>(std::max(y0, y1) + t + 1));
    const int lo_j = std::max(0, static_cast<int>(std::min(x0, x1) - t - 1));
    const int hi_j = std::min(w - 1, static_cast<int>(std::max(x0, x1) + t + 1));
    for (int i = lo_i; i <= hi_i; ++i)
        for (int j = lo_j; j <= hi_j; ++j) {
            double u = ((i - y0) * (y1 - y0) + (j - x0) * (x1 - x0)) / len2;
            u = std::min(1.0, std::max(0.0, u));
            const double py = y0 + u * (y1 - y0), px = x0 + u * (x1 - x0);
            const double d2 = (i - py) * (i - py) + (j - px) * (j - px);
            if (d2 <= t * t) paint(s, i, j, cls, color, rng);
        }
}

}  // namespace

std::mt19937_64 sample_rng(uint64_t base_seed, int sample_index, int epoch) {
    const uint64_t mixed = splitmix64(base_seed ^ splitmix64(static_cast<uint64_t>(sample_index)) ^
                                      splitmix64(0x5851F42D4C957F2DULL + static_cast<uint64_t>(epoch)));
    return std::mt19937_64(mixed);
}

std::vector<Sample> generate_shapes(int n, int h, int w, int num_classes, uint64_t seed) {
    if (n <= 0) throw std::invalid_argument("generate_shapes: n must be positive");
    if (h <= 0 || w <= 0) throw std::invalid_argument("generate_shapes: bad size");
    if (num_classes < 2 || num_classes > 255) {
        throw std::invalid_argument("generate_shapes: num_classes must be in [2, 255]");
    }

    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(n));
    for (int si = 0; si < n; ++si) {
        std::mt19937_64 rng = sample_rng(seed, si, 0);
        Sample s;
        s.image = Tensor({1, 3, h, w});
        s.label = LabelMask(h, w);

        // Textured background: soft gradient plus pixel noise.
        std::uniform_real_distribution<double> base_d(0.2, 0.4);
        std::uniform_real_distribution<double> noise(-0.06, 0.06);
        const double base = base_d(rng);
        const double gy = base_d(rng) * 0.3, gx = base_d(rng) * 0.3;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double v = base + gy * i / h + gx * j / w;
                for (int c = 0; c < 3; ++c) s.image.at(0, c, i, j) = clamp01(v + noise(rng));
            }

        // Every foreground class appears at least once, extra shapes random.
        std::vector<int> classes;
        for (int c = 1; c < num_classes; ++c) classes.push_back(c);
        std::shuffle(classes.begin(), classes.end(), rng);
        std::uniform_int_distribution<int> extra_d(1, 4);
        std::uniform_int_distribution<int> cls_d(1, num_classes - 1);
        const int extra = extra_d(rng);
        for (int e = 0; e < extra; ++e) classes.push_back(cls_d(rng));

        const double max_size = std::min(h, w) / 2.0;
        std::uniform_real_distribution<double> logsize_d(std::log(3.0), std::log(max_size));
        std::uniform_real_distribution<double> cy_d(0.0, h - 1.0), cx_d(0.0, w - 1.0);
        for (int cls : classes) {
            const Rgb color = class_color(cls, num_classes);
            const double size = std::exp(logsize_d(rng));
            const double cy = cy_d(rng), cx = cx_d(rng);
            switch ((cls - 1) % 3) {
                case 0: draw_rect(s, cls, color, cy, cx, size, rng); break;
                case 1: draw_ellipse(s, cls, color, cy, cx, size, rng); break;
                default: draw_line(s, cls, color, cy, cx, size, rng); break;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

namespace {

int reflect_index(int i, int n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - 1 - i;
    return i;
}

int clamp_index(int i, int n) { return std::min(n - 1, std::max(0, i)); }

Sample pad_sample(const Sample& s, int pad_h, int pad_w) {
    const int h = s.label.h, w = s.label.w;
    Sample out;
    out.image = Tensor({1, 3, h + 2 * pad_h, w + 2 * pad_w});
    out.label = LabelMask(h + 2 * pad_h, w + 2 * pad_w);
    for (int i = 0; i < h + 2 * pad_h; ++i)
        for (int j = 0; j < w + 2 * pad_w; ++j) {
            const int ri = reflect_index(i - pad_h, h), rj = reflect_index(j - pad_w, w);
            for (int c = 0; c < 3; ++c) out.image.at(0, c, i, j) = s.image.at(0, c, ri, rj);
            // labels replicate the edge instead of mirroring texture
            out.label.at(i, j) = s.label.at(clamp_index(i - pad_h, h), clamp_index(j - pad_w, w));
        }
    return out;
}

Sample crop_sample(const Sample& s, int top, int left, int ch, int cw) {
    Sample out;
    out.image = Tensor({1, 3, ch, cw});
    out.label = LabelMask(ch, cw);
    for (int i = 0; i < ch; ++i)
        for (int j = 0; j < cw; ++j) {
            for (int c = 0; c < 3; ++c) out.image.at(0, c, i, j) = s.image.at(0, c, top + i, left + j);
            out.label.at(i, j) = s.label.at(top + i, left + j);
        }
    return out;
}

Sample hflip_sample(const Sample& s) {
    const int h = s.label.h, w = s.label.w;
    Sample out;
    out.image = Tensor({1, 3, h, w});
    out.label = LabelMask(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            for (int c = 0; c < 3; ++c) out.image.at(0, c, i, j) = s.image.at(0, c, i, w - 1 - j);
            out.label.at(i, j) = s.label.at(i, w - 1 - j);
        }
    return out;
}

// One clockwise quarter turn: out[i][j] = in[h-1-j][i].
Sample rot90_sample(const Sample& s) {
    const int h = s.label.h, w = s.label.w;
    Sample out;
    out.image = Tensor({1, 3, w, h});
    out.label = LabelMask(w, h);
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < h; ++j) {
            for (int c = 0; c < 3; ++c) out.image.at(0, c, i, j) = s.image.at(0, c, h - 1 - j, i);
            out.label.at(i, j) = s.label.at(h - 1 - j, i);
        }
    return out;
}

}  // namespace

Sample augment(const Sample& sample, const AugmentConfig& cfg, std::mt19937_64& rng) {
    if (cfg.crop_h <= 0 || cfg.crop_w <= 0) throw std::invalid_argument("augment: bad crop size");

    Sample work = sample;
    if (cfg.pad_before_crop) {
        work = pad_sample(work, std::max(1, cfg.crop_h / 8), std::max(1, cfg.crop_w / 8));
    }
    if (cfg.crop_h > work.label.h || cfg.crop_w > work.label.w) {
        throw std::invalid_argument("augment: crop " + std::to_string(cfg.crop_h) + "x" +
                                    std::to_string(cfg.crop_w) + " larger than (padded) image " +
                                    std::to_string(work.label.h) + "x" + std::to_string(work.label.w));
    }

    std::uniform_int_distribution<int> top_d(0, work.label.h - cfg.crop_h);
    std::uniform_int_distribution<int> left_d(0, work.label.w - cfg.crop_w);
    const int top = top_d(rng), left = left_d(rng);
    work = crop_sample(work, top, left, cfg.crop_h, cfg.crop_w);

    if (cfg.hflip) {
        std::uniform_int_distribution<int> coin(0, 1);
        if (coin(rng)) work = hflip_sample(work);
    }
    if (cfg.rot90) {
        // Non-square crops only admit half turns, or batch dims would change.
        if (cfg.crop_h == cfg.crop_w) {
            std::uniform_int_distribution<int> quarter(0, 3);
            const int k = quarter(rng);
            for (int q = 0; q < k; ++q) work = rot90_sample(work);
        } else {
            std::uniform_int_distribution<int> coin(0, 1);
            if (coin(rng)) {
                work = rot90_sample(work);
                work = rot90_sample(work);
            }
        }
    }
    return work;
}

// ---------------------------------------------------------------------------
// Confusion matrix and mIoU
// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(int num_classes) : nc_(num_classes) {
    if (num_classes < 2) throw std::invalid_argument("ConfusionMatrix: num_classes must be >= 2");
    counts_.assign(static_cast<size_t>(nc_) * nc_, 0);
}

void ConfusionMatrix::accumulate(const LabelMask& pred, const LabelMask& gt) {
    if (pred.h != gt.h || pred.w != gt.w) {
        throw std::invalid_argument("ConfusionMatrix: pred/gt dims differ");
    }
    for (size_t i = 0; i < gt.ids.size(); ++i) {
        const int g = gt.ids[i], p = pred.ids[i];
        if (g >= nc_ || p >= nc_) throw std::invalid_argument("ConfusionMatrix: class id out of range");
        ++counts_[static_cast<size_t>(g) * nc_ + p];
    }
}

long long ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), 0LL);
}

ConfusionMatrix::Iou ConfusionMatrix::iou() const {
    if (total() == 0) throw std::invalid_argument("ConfusionMatrix: no pixels accumulated");
    Iou r;
    r.per_class.assign(static_cast<size_t>(nc_), std::nan(""));
    r.present.assign(static_cast<size_t>(nc_), false);
    double sum = 0.0;
    int n_present = 0;
    for (int c = 0; c < nc_; ++c) {
        const long long tp = at(c, c);
        long long fp = 0, fn = 0;
        for (int o = 0; o < nc_; ++o) {
            if (o == c) continue;
            fp += at(o, c);
            fn += at(c, o);
        }
        const long long denom = tp + fp + fn;
        if (denom == 0) continue;   // absent from both pred and gt: excluded
        r.present[static_cast<size_t>(c)] = true;
        r.per_class[static_cast<size_t>(c)] = static_cast<double>(tp) / static_cast<double>(denom);
        sum += r.per_class[static_cast<size_t>(c)];
        ++n_present;
    }
    r.mean = sum / n_present;
    return r;
}

std::pair<std::vector<double>, double> miou(const LabelMask& pred, const LabelMask& gt,
                                            int num_classes) {
    ConfusionMatrix cm(num_classes);
    cm.accumulate(pred, gt);
    const ConfusionMatrix::Iou r = cm.iou();
    return {r.per_class, r.mean};
}

// ---------------------------------------------------------------------------
// Dataset export / import
// ---------------------------------------------------------------------------

namespace {

std::string index_name(const char* stem, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%05d.png", stem, i);
    return buf;
}

pngio::Image8 image_to_png(const Tensor& image) {
    const int h = image.dim(2), w = image.dim(3);
    pngio::Image8 img;
    img.width = w;
    img.height = h;
    img.channels = 3;
    img.pixels.resize(static_cast<size_t>(h) * w * 3);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < 3; ++c) {
                const double v = clamp01(image.at(0, c, i, j));
                img.pixels[(static_cast<size_t>(i) * w + j) * 3 + c] =
                    static_cast<uint8_t>(std::lround(v * 255.0));
            }
    return img;
}

}  // namespace

void export_dataset(const std::string& dir, const std::vector<Sample>& samples,
                    const DatasetMeta& meta) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "labels");

    json manifest;
    manifest["n"] = meta.n;
    manifest["height"] = meta.height;
    manifest["width"] = meta.width;
    manifest["num_classes"] = meta.num_classes;
    manifest["seed"] = meta.seed;
    json images = json::array(), labels = json::array();

    for (size_t i = 0; i < samples.size(); ++i) {
        const std::string img_name = index_name("img", static_cast<int>(i));
        const std::string lab_name = index_name("lab", static_cast<int>(i));
        pngio::write_png((fs::path(dir) / "images" / img_name).string(),
                         image_to_png(samples[i].image));
        pngio::Image8 lab;
        lab.width = samples[i].label.w;
        lab.height = samples[i].label.h;
        lab.channels = 1;
        lab.pixels = samples[i].label.ids;
        pngio::write_png((fs::path(dir) / "labels" / lab_name).string(), lab);
        images.push_back("images/" + img_name);
        labels.push_back("labels/" + lab_name);
    }
    manifest["images"] = images;
    manifest["labels"] = labels;

    std::ofstream os(fs::path(dir) / "manifest.json");
    os << manifest.dump(2) << "\n";
    if (!os) throw std::runtime_error("export_dataset: manifest write failed");
}

std::pair<std::vector<Sample>, DatasetMeta> import_dataset(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw std::runtime_error("import_dataset: no manifest.json in " + dir);
    json manifest = json::parse(is);

    DatasetMeta meta;
    meta.n = manifest.at("n").get<int>();
    meta.height = manifest.at("height").get<int>();
    meta.width = manifest.at("width").get<int>();
    meta.num_classes = manifest.at("num_classes").get<int>();
    meta.seed = manifest.at("seed").get<uint64_t>();

    std::vector<Sample> samples;
    samples.reserve(static_cast<size_t>(meta.n));
    for (int i = 0; i < meta.n; ++i) {
        const std::string img_path = (fs::path(dir) / manifest.at("images").at(i).get<std::string>()).string();
        const std::string lab_path = (fs::path(dir) / manifest.at("labels").at(i).get<std::string>()).string();
        const pngio::Image8 img = pngio::read_png(img_path, 3);
        const pngio::Image8 lab = pngio::read_png(lab_path, 1);
        if (lab.width != img.width || lab.height != img.height) {
            throw std::runtime_error("import_dataset: image/label dims differ for index " +
                                     std::to_string(i));
        }
        Sample s;
        s.image = Tensor({1, 3, img.height, img.width});
        s.label = LabelMask(img.height, img.width);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    s.image.at(0, c, y, x) =
                        img.pixels[(static_cast<size_t>(y) * img.width + x) * 3 + c] / 255.0;
                }
                s.label.at(y, x) = lab.pixels[static_cast<size_t>(y) * lab.width + x];
            }
        samples.push_back(std::move(s));
    }
    return {std::move(samples), meta};
}

void split_dataset(const std::vector<Sample>& all, double val_fraction, uint64_t seed,
                   std::vector<Sample>& train, std::vector<Sample>& val) {
    std::vector<size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(splitmix64(seed ^ 0xA5A5A5A5ULL));
    std::shuffle(idx.begin(), idx.end(), rng);
    const size_t n_val = static_cast<size_t>(std::llround(val_fraction * all.size()));
    train.clear();
    val.clear();
    for (size_t k = 0; k < idx.size(); ++k) {
        (k < n_val ? val : train).push_back(all[idx[k]]);
    }
}

}  // namespace gsam
