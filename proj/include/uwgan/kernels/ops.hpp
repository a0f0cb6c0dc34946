#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace uwgan::kernels {

/// Extents for per-plane kernels: `planes` = N*C independent HxW planes.
struct PlaneGeometry {
    int planes = 0;
    int h = 0;
    int w = 0;

    std::size_t plane_size() const noexcept { return static_cast<std::size_t>(h) * w; }
};

/// Dense layer extents: x is [batch][in], weight is [out][in].
struct DenseGeometry {
    int batch = 0;
    int in_features = 0;
    int out_features = 0;
};

namespace reference {

/// 2x2 max pooling, stride 2, floor division of odd extents. `argmax`
/// receives the in-plane index of each winner (ties: first in scan order).
void max_pool2_forward(const PlaneGeometry& g, std::span<const double> x, std::span<double> y,
                       std::span<std::int32_t> argmax);
void max_pool2_backward(const PlaneGeometry& g, std::span<const double> gy,
                        std::span<const std::int32_t> argmax, std::span<double> gx);

/// Per-plane normalization. Writes normalized output and 1/sigma per plane.
void instance_norm_forward(const PlaneGeometry& g, double eps, std::span<const double> x,
                           std::span<double> y, std::span<double> inv_std);
void instance_norm_backward(const PlaneGeometry& g, std::span<const double> y,
                            std::span<const double> inv_std, std::span<const double> gy,
                            std::span<double> gx);

void dense_forward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y);
/// gx overwritten (skipped if empty); gw, gb accumulated.
void dense_backward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> gy, std::span<double> gx, std::span<double> gw,
                    std::span<double> gb);

}  // namespace reference

namespace parallel {

void max_pool2_forward(const PlaneGeometry& g, std::span<const double> x, std::span<double> y,
                       std::span<std::int32_t> argmax);
void max_pool2_backward(const PlaneGeometry& g, std::span<const double> gy,
                        std::span<const std::int32_t> argmax, std::span<double> gx);
void instance_norm_forward(const PlaneGeometry& g, double eps, std::span<const double> x,
                           std::span<double> y, std::span<double> inv_std);
void instance_norm_backward(const PlaneGeometry& g, std::span<const double> y,
                            std::span<const double> inv_std, std::span<const double> gy,
                            std::span<double> gx);
void dense_forward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y);
void dense_backward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> gy, std::span<double> gx, std::span<double> gw,
                    std::span<double> gb);

}  // namespace parallel

}  // namespace uwgan::kernels
