#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace uwgan {

/// NCHW extents. Feature vectors use (n, features, 1, 1).
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const noexcept
    {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t per_item() const noexcept
    {
        return static_cast<std::size_t>(c) * h * w;
    }
    std::size_t plane() const noexcept
    {
        return static_cast<std::size_t>(h) * w;
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense double-precision NCHW tensor with value semantics.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(int n, int c, int h, int w) noexcept { return data_[offset(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const noexcept { return data_[offset(n, c, h, w)]; }

    std::span<double> item(int n) noexcept
    {
        return std::span<double>(data_).subspan(n * shape_.per_item(), shape_.per_item());
    }
    std::span<const double> item(int n) const noexcept
    {
        return std::span<const double>(data_).subspan(n * shape_.per_item(), shape_.per_item());
    }

    /// Same data, new extents; total size must match.
    Tensor reshaped(Shape shape) const;

    void fill(double v);
    Tensor& operator+=(const Tensor& other);

    double sum() const;
    double mean() const;
    double min() const;
    double max() const;
    bool all_finite() const;

private:
    std::size_t offset(int n, int c, int h, int w) const noexcept
    {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    Shape shape_{};
    std::vector<double> data_;
};

/// Concatenates along the batch axis.
Tensor concat_batch(std::span<const Tensor> parts);

/// Batch rows [begin, begin + count).
Tensor slice_batch(const Tensor& t, int begin, int count);

}  // namespace uwgan
