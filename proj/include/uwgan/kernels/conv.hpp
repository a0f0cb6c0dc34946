#pragma once

#include <cstddef>
#include <span>

namespace uwgan::kernels {

/// Geometry of a square-kernel 2-D convolution over NCHW data with
/// symmetric zero padding. Weights are laid out [out][in][ky][kx].
struct ConvGeometry {
    int in_channels = 0;
    int in_h = 0;
    int in_w = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int pad = 0;

    int out_h() const noexcept { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const noexcept { return (in_w + 2 * pad - kernel) / stride + 1; }
    std::size_t in_size() const noexcept
    {
        return static_cast<std::size_t>(in_channels) * in_h * in_w;
    }
    std::size_t out_size() const noexcept
    {
        return static_cast<std::size_t>(out_channels) * out_h() * out_w();
    }
    std::size_t weight_size() const noexcept
    {
        return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
    }
};

/// Throws ValidationError if the geometry yields an empty output.
void validate(const ConvGeometry& g);

// Both namespaces expose the same contract:
//   forward:         y = conv(x, w) + b            (y overwritten; b may be empty)
//   backward_data:   gx = conv^T(gy, w)            (gx overwritten)
//   backward_filter: gw += dL/dw, gb += dL/db      (accumulating; gb may be empty)

/// Direct nested-loop kernels, serial. Kept as the test oracle.
namespace reference {
void conv2d_forward(const ConvGeometry& g, int batch, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b, std::span<double> y);
void conv2d_backward_data(const ConvGeometry& g, int batch, std::span<const double> gy,
                          std::span<const double> w, std::span<double> gx);
void conv2d_backward_filter(const ConvGeometry& g, int batch, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw, std::span<double> gb);
}  // namespace reference

/// im2col + GEMM kernels, OpenMP-parallel over the batch.
namespace parallel {
void conv2d_forward(const ConvGeometry& g, int batch, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b, std::span<double> y);
void conv2d_backward_data(const ConvGeometry& g, int batch, std::span<const double> gy,
                          std::span<const double> w, std::span<double> gx);
void conv2d_backward_filter(const ConvGeometry& g, int batch, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw, std::span<double> gb);
}  // namespace parallel

}  // namespace uwgan::kernels
