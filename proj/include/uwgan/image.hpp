#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "uwgan/tensor.hpp"

namespace uwgan {

/// HxWxC raster, interleaved, storage range [0, 1].
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int height, int width, int channels, float fill = 0.0f);
    ImageTensor(int height, int width, int channels, std::vector<float> values);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t pixels() const noexcept { return static_cast<std::size_t>(height_) * width_; }
    bool empty() const noexcept { return data_.empty(); }

    float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    std::size_t index(int y, int x, int c) const noexcept
    {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// Decodes PNG/JPEG (EXIF orientation applied, alpha dropped) into [0, 1].
/// When `to_rgb` is set, grayscale is replicated to three channels.
ImageTensor load_image(const std::filesystem::path& path, bool to_rgb = true);

/// Writes 8-bit PNG; values are clamped to [0, 1] and rounded.
void save_png(const ImageTensor& image, const std::filesystem::path& path);

/// Replicates a single channel to RGB; RGB passes through.
ImageTensor replicate_to_rgb(const ImageTensor& image);

ImageTensor resize_bilinear(const ImageTensor& image, int height, int width);

/// Aspect-preserving resize of the short side to `size`, then center crop.
ImageTensor resize_short_side_center_crop(const ImageTensor& image, int size);

/// Pixel rectangle [x0, x1) x [y0, y1); must lie inside the image.
ImageTensor crop(const ImageTensor& image, int x0, int y0, int x1, int y1);

/// Stacks equally sized RGB images into an NCHW batch in model range [-1, 1].
Tensor to_model_batch(std::span<const ImageTensor> images);

/// Inverse of to_model_batch, clamping to [0, 1].
std::vector<ImageTensor> from_model_batch(const Tensor& batch);

/// Stacks images into an NCHW batch keeping the storage range [0, 1].
Tensor to_unit_batch(std::span<const ImageTensor> images);

}  // namespace uwgan
