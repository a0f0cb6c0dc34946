#include "uwgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uwgan/error.hpp"

namespace uwgan {

std::string to_string(const Shape& s)
{
    return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
           std::to_string(s.w);
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill)
{
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw ValidationError("negative tensor extent " + to_string(shape));
    }
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values))
{
    if (data_.size() != shape.numel()) {
        throw ValidationError("tensor data size " + std::to_string(data_.size()) +
                              " does not match shape " + to_string(shape));
    }
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape.numel() != data_.size()) {
        throw ValidationError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(shape, data_);
}

void Tensor::fill(double v)
{
    std::fill(data_.begin(), data_.end(), v);
}

Tensor& Tensor::operator+=(const Tensor& other)
{
    if (other.shape_ != shape_) {
        throw ValidationError("shape mismatch in +=: " + to_string(shape_) + " vs " +
                              to_string(other.shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

double Tensor::sum() const
{
    return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double Tensor::mean() const
{
    return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size());
}

double Tensor::min() const
{
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Tensor::max() const
{
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

bool Tensor::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor concat_batch(std::span<const Tensor> parts)
{
    if (parts.empty()) {
        return {};
    }
    Shape s = parts.front().shape();
    s.n = 0;
    for (const auto& p : parts) {
        const auto& ps = p.shape();
        if (ps.c != s.c || ps.h != s.h || ps.w != s.w) {
            throw ValidationError("concat_batch: incompatible shapes " + to_string(parts.front().shape()) +
                                  " and " + to_string(ps));
        }
        s.n += ps.n;
    }
    std::vector<double> values;
    values.reserve(s.numel());
    for (const auto& p : parts) {
        values.insert(values.end(), p.values().begin(), p.values().end());
    }
    return Tensor(s, std::move(values));
}

Tensor slice_batch(const Tensor& t, int begin, int count)
{
    const auto& s = t.shape();
    if (begin < 0 || count < 0 || begin + count > s.n) {
        throw ValidationError("slice_batch out of range on " + to_string(s));
    }
    auto first = t.values().begin() + static_cast<std::ptrdiff_t>(begin * s.per_item());
    std::vector<double> values(first, first + static_cast<std::ptrdiff_t>(count * s.per_item()));
    return Tensor(Shape{count, s.c, s.h, s.w}, std::move(values));
}

}  // namespace uwgan
