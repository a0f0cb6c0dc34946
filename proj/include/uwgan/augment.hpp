#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uwgan/dataset.hpp"
#include "uwgan/image.hpp"
#include "uwgan/rng.hpp"

namespace uwgan {

enum class AugmentOp { rotate, hflip, saturation, exposure, noise, grayscale };

std::string_view to_string(AugmentOp op) noexcept;
AugmentOp parse_augment_op(std::string_view s);
std::vector<AugmentOp> all_augment_ops();

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Classic augmentation settings. Only the op kinds are prescribed; the
/// parameter ranges are defaults.
struct AugmentConfig {
    std::vector<AugmentOp> ops = all_augment_ops();
    Range rotate_degrees{-30.0, 30.0};
    Range saturation_factor{0.5, 1.5};
    Range exposure_factor{0.7, 1.3};
    Range noise_stddev{0.0, 0.05};
    double probability = 0.5;  // per-op, used by classic_augment

    void validate() const;
};

struct AugmentResult {
    ImageTensor image;
    std::vector<std::string> applied;
    std::optional<std::string> warning;
};

/// Applies each enabled op independently with `cfg.probability`, in the
/// canonical op order, with parameters drawn from the configured ranges.
AugmentResult classic_augment(const ImageTensor& image, const AugmentConfig& cfg, std::uint64_t seed);

/// Applies exactly one op with a parameter drawn from its range.
ImageTensor apply_augment_op(const ImageTensor& image, AugmentOp op, const AugmentConfig& cfg, Rng& rng);

/// Grows `ds` to exactly `target_count` items: originals first, then
/// augmented copies cycling through the originals, each with one op chosen
/// uniformly from the enabled set.
DomainDataset expand_dataset(const DomainDataset& ds, std::size_t target_count, const AugmentConfig& cfg,
                             std::uint64_t seed);

// Primitive transforms. All outputs are clamped to [0, 1].
ImageTensor hflip(const ImageTensor& image);
/// Rotation about the image center, bilinear, edges replicated, same extents.
ImageTensor rotate(const ImageTensor& image, double degrees);
/// Scales HSV saturation.
ImageTensor adjust_saturation(const ImageTensor& image, double factor);
ImageTensor adjust_exposure(const ImageTensor& image, double factor);
ImageTensor add_gaussian_noise(const ImageTensor& image, double stddev, Rng& rng);
/// Rec. 601 luma replicated to three channels.
ImageTensor grayscale(const ImageTensor& image);
/// Separable normalized Gaussian, radius ceil(3 sigma), edges replicated.
ImageTensor gaussian_blur(const ImageTensor& image, double sigma);
/// Centered zoom by `factor` (> 1 zooms in), bilinear, same extents.
ImageTensor zoom(const ImageTensor& image, double factor);

struct DetectionPreprocessConfig {
    double hflip_prob = 0.5;
    Range blur_sigma{0.0, 1.25};
    double salt_pepper_fraction = 0.08;

    void validate() const;
};

struct DetectionResult {
    ImageTensor image;
    bool flipped = false;
    double sigma = 0.0;
    std::size_t corrupted = 0;
};

/// Exactly round(fraction * H * W) distinct pixels go fully black or white.
ImageTensor salt_and_pepper(const ImageTensor& image, double fraction, Rng& rng, std::size_t* corrupted = nullptr);

/// Flip, then blur, then salt-and-pepper.
DetectionResult detection_preprocess(const ImageTensor& image, const DetectionPreprocessConfig& cfg,
                                     std::uint64_t seed);

/// Random flip / rotation / zoom used for the regularized classifier.
struct GeometricJitter {
    bool hflip = true;
    double max_rotation_degrees = 36.0;
    double max_zoom = 0.1;
};

ImageTensor random_geometric(const ImageTensor& image, const GeometricJitter& jitter, Rng& rng);

}  // namespace uwgan
