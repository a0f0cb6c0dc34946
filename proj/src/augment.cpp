#include "uwgan/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "uwgan/error.hpp"

namespace uwgan {

std::string_view to_string(AugmentOp op) noexcept
{
    switch (op) {
    case AugmentOp::rotate:
        return "rotate";
    case AugmentOp::hflip:
        return "hflip";
    case AugmentOp::saturation:
        return "saturation";
    case AugmentOp::exposure:
        return "exposure";
    case AugmentOp::noise:
        return "noise";
    case AugmentOp::grayscale:
        return "grayscale";
    }
    return "rotate";
}

AugmentOp parse_augment_op(std::string_view s)
{
    for (auto op : all_augment_ops()) {
        if (to_string(op) == s) {
            return op;
        }
    }
    throw ValidationError("unknown augmentation op '" + std::string(s) + "'");
}

std::vector<AugmentOp> all_augment_ops()
{
    return {AugmentOp::rotate, AugmentOp::hflip, AugmentOp::saturation,
            AugmentOp::exposure, AugmentOp::noise, AugmentOp::grayscale};
}

namespace {

void check_range(const Range& r, const char* name)
{
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
        throw ValidationError(std::string("augment range '") + name + "' must be finite with lo <= hi");
    }
}

void check_probability(double p, const char* name)
{
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError(std::string(name) + " must lie in [0, 1]");
    }
}

float clamp01(double v)
{
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

double draw(Rng& rng, const Range& r)
{
    return r.lo == r.hi ? r.lo : uniform(rng, r.lo, r.hi);
}

// Bilinear sample with edge replication.
float sample(const ImageTensor& img, double fy, double fx, int c)
{
    fy = std::clamp(fy, 0.0, img.height() - 1.0);
    fx = std::clamp(fx, 0.0, img.width() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int x0 = static_cast<int>(fx);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const double ty = fy - y0, tx = fx - x0;
    const double top = img.at(y0, x0, c) * (1.0 - tx) + img.at(y0, x1, c) * tx;
    const double bottom = img.at(y1, x0, c) * (1.0 - tx) + img.at(y1, x1, c) * tx;
    return static_cast<float>(top * (1.0 - ty) + bottom * ty);
}

}  // namespace

void AugmentConfig::validate() const
{
    check_range(rotate_degrees, "rotate_degrees");
    check_range(saturation_factor, "saturation_factor");
    check_range(exposure_factor, "exposure_factor");
    check_range(noise_stddev, "noise_stddev");
    check_probability(probability, "augment probability");
    if (saturation_factor.lo < 0.0 || exposure_factor.lo < 0.0 || noise_stddev.lo < 0.0) {
        throw ValidationError("saturation, exposure and noise ranges must be non-negative");
    }
}

void DetectionPreprocessConfig::validate() const
{
    check_probability(hflip_prob, "hflip_prob");
    check_probability(salt_pepper_fraction, "salt_pepper_fraction");
    check_range(blur_sigma, "blur_sigma");
    if (blur_sigma.lo < 0.0) {
        throw ValidationError("blur sigma must be non-negative");
    }
}

// ------------------------------------------------------------ primitives

ImageTensor hflip(const ImageTensor& image)
{
    ImageTensor out(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                out.at(y, image.width() - 1 - x, c) = image.at(y, x, c);
            }
        }
    }
    return out;
}

ImageTensor rotate(const ImageTensor& image, double degrees)
{
    if (degrees == 0.0) {
        return image;
    }
    const double rad = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (image.height() - 1) / 2.0, cx = (image.width() - 1) / 2.0;
    ImageTensor out(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            // Inverse map from destination to source.
            const double dx = x - cx, dy = y - cy;
            const double sx = cs * dx + sn * dy + cx;
            const double sy = -sn * dx + cs * dy + cy;
            for (int c = 0; c < image.channels(); ++c) {
                out.at(y, x, c) = clamp01(sample(image, sy, sx, c));
            }
        }
    }
    return out;
}

ImageTensor adjust_saturation(const ImageTensor& image, double factor)
{
    if (factor == 1.0 || image.channels() != 3) {
        return image;
    }
    ImageTensor out = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const double r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
            const double v = std::max({r, g, b});
            const double mn = std::min({r, g, b});
            if (v <= 0.0 || v == mn) {
                continue;  // black or achromatic: saturation is zero
            }
            const double s = (v - mn) / v;
            const double s_new = std::clamp(s * factor, 0.0, 1.0);
            // Keeping H and V fixed, each channel sits at v - (v - ch) * s_new / s.
            const double k = s_new / s;
            out.at(y, x, 0) = clamp01(v - (v - r) * k);
            out.at(y, x, 1) = clamp01(v - (v - g) * k);
            out.at(y, x, 2) = clamp01(v - (v - b) * k);
        }
    }
    return out;
}

ImageTensor adjust_exposure(const ImageTensor& image, double factor)
{
    if (factor == 1.0) {
        return image;
    }
    ImageTensor out = image;
    for (auto& v : out.values()) {
        v = clamp01(v * factor);
    }
    return out;
}

ImageTensor add_gaussian_noise(const ImageTensor& image, double stddev, Rng& rng)
{
    if (stddev == 0.0) {
        return image;
    }
    std::normal_distribution<double> noise(0.0, stddev);
    ImageTensor out = image;
    for (auto& v : out.values()) {
        v = clamp01(v + noise(rng));
    }
    return out;
}

ImageTensor grayscale(const ImageTensor& image)
{
    if (image.channels() == 1) {
        return replicate_to_rgb(image);
    }
    ImageTensor out(image.height(), image.width(), 3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const float r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
            const float l = (r == g && g == b) ? r : clamp01(0.299 * r + 0.587 * g + 0.114 * b);
            out.at(y, x, 0) = l;
            out.at(y, x, 1) = l;
            out.at(y, x, 2) = l;
        }
    }
    return out;
}

ImageTensor gaussian_blur(const ImageTensor& image, double sigma)
{
    if (sigma <= 0.0) {
        return image;
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    }
    const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
    for (auto& k : kernel) {
        k /= norm;
    }
    const int h = image.height(), w = image.width(), ch = image.channels();
    std::vector<double> tmp(image.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[i + radius] * image.at(y, std::clamp(x + i, 0, w - 1), c);
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
            }
        }
    }
    ImageTensor out(h, w, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[i + radius] * tmp[(static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x) * ch + c];
                }
                out.at(y, x, c) = clamp01(acc);
            }
        }
    }
    return out;
}

ImageTensor zoom(const ImageTensor& image, double factor)
{
    if (factor == 1.0) {
        return image;
    }
    if (!(factor > 0.0)) {
        throw ValidationError("zoom factor must be positive");
    }
    const double cy = (image.height() - 1) / 2.0, cx = (image.width() - 1) / 2.0;
    ImageTensor out(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                out.at(y, x, c) = clamp01(sample(image, cy + (y - cy) / factor, cx + (x - cx) / factor, c));
            }
        }
    }
    return out;
}

ImageTensor salt_and_pepper(const ImageTensor& image, double fraction, Rng& rng, std::size_t* corrupted)
{
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ValidationError("salt-and-pepper fraction must be in [0, 1]");
    }
    const std::size_t pixels = image.pixels();
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pixels)));
    std::vector<std::size_t> idx(pixels);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first `count` entries are a uniform sample without replacement.
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pixels - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    ImageTensor out = image;
    std::bernoulli_distribution salt(0.5);
    const int ch = image.channels();
    for (std::size_t i = 0; i < count; ++i) {
        const float v = salt(rng) ? 1.0f : 0.0f;
        const int y = static_cast<int>(idx[i] / image.width());
        const int x = static_cast<int>(idx[i] % image.width());
        for (int c = 0; c < ch; ++c) {
            out.at(y, x, c) = v;
        }
    }
    if (corrupted != nullptr) {
        *corrupted = count;
    }
    return out;
}

// -------------------------------------------------------------- pipelines

ImageTensor apply_augment_op(const ImageTensor& image, AugmentOp op, const AugmentConfig& cfg, Rng& rng)
{
    switch (op) {
    case AugmentOp::rotate:
        return rotate(image, draw(rng, cfg.rotate_degrees));
    case AugmentOp::hflip:
        return hflip(image);
    case AugmentOp::saturation:
        return adjust_saturation(image, draw(rng, cfg.saturation_factor));
    case AugmentOp::exposure:
        return adjust_exposure(image, draw(rng, cfg.exposure_factor));
    case AugmentOp::noise:
        return add_gaussian_noise(image, draw(rng, cfg.noise_stddev), rng);
    case AugmentOp::grayscale:
        return grayscale(image);
    }
    return image;
}

AugmentResult classic_augment(const ImageTensor& image, const AugmentConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    AugmentResult result;
    result.image = image;
    if (cfg.ops.empty()) {
        result.warning = "no augmentation ops enabled; image returned unchanged";
        return result;
    }
    Rng rng(derive_seed(seed, {0xa06u}));
    for (auto op : all_augment_ops()) {
        if (std::find(cfg.ops.begin(), cfg.ops.end(), op) == cfg.ops.end()) {
            continue;
        }
        if (uniform(rng, 0.0, 1.0) < cfg.probability) {
            result.image = apply_augment_op(result.image, op, cfg, rng);
            result.applied.emplace_back(to_string(op));
        }
    }
    return result;
}

DomainDataset expand_dataset(const DomainDataset& ds, std::size_t target_count, const AugmentConfig& cfg,
                             std::uint64_t seed)
{
    cfg.validate();
    if (target_count < ds.size()) {
        throw ValidationError("target count " + std::to_string(target_count) + " is smaller than the dataset (" +
                              std::to_string(ds.size()) + ")");
    }
    DomainDataset out(ds.class_names());
    for (const auto& item : ds) {
        out.add(item);
    }
    if (target_count == ds.size()) {
        return out;
    }
    if (ds.empty()) {
        throw ValidationError("cannot expand an empty dataset");
    }
    if (cfg.ops.empty()) {
        throw ValidationError("cannot expand a dataset with no augmentation ops enabled");
    }
    for (std::size_t k = 0; out.size() < target_count; ++k) {
        const DomainImage& parent = ds[k % ds.size()];
        const std::uint64_t item_seed = derive_seed(seed, {0xe4a9du, k});
        Rng rng(item_seed);
        std::uniform_int_distribution<std::size_t> pick(0, cfg.ops.size() - 1);
        const AugmentOp op = cfg.ops[pick(rng)];

        DomainImage child;
        child.source_id = parent.source_id + "~aug" + std::to_string(k);
        child.domain = parent.domain;
        child.provenance = parent.provenance;
        child.class_id = parent.class_id;
        child.checkpoint_id = parent.checkpoint_id;
        child.augment = AugmentRecord{parent.source_id, {std::string(to_string(op))}, item_seed};
        child.pixels = std::make_shared<const ImageTensor>(apply_augment_op(parent.image(), op, cfg, rng));
        out.add(std::move(child));
    }
    return out;
}

DetectionResult detection_preprocess(const ImageTensor& image, const DetectionPreprocessConfig& cfg,
                                     std::uint64_t seed)
{
    cfg.validate();
    Rng rng(derive_seed(seed, {0xde7u}));
    DetectionResult r;
    r.flipped = uniform(rng, 0.0, 1.0) < cfg.hflip_prob;
    r.sigma = draw(rng, cfg.blur_sigma);
    r.image = r.flipped ? hflip(image) : image;
    r.image = gaussian_blur(r.image, r.sigma);
    r.image = salt_and_pepper(r.image, cfg.salt_pepper_fraction, rng, &r.corrupted);
    return r;
}

ImageTensor random_geometric(const ImageTensor& image, const GeometricJitter& jitter, Rng& rng)
{
    ImageTensor out = image;
    if (jitter.hflip && uniform(rng, 0.0, 1.0) < 0.5) {
        out = hflip(out);
    }
    if (jitter.max_rotation_degrees > 0.0) {
        out = rotate(out, uniform(rng, -jitter.max_rotation_degrees, jitter.max_rotation_degrees));
    }
    if (jitter.max_zoom > 0.0) {
        out = zoom(out, 1.0 + uniform(rng, -jitter.max_zoom, jitter.max_zoom));
    }
    return out;
}

}  // namespace uwgan
