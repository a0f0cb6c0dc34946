#include "uwgan/kernels/conv.hpp"

#include <omp.h>

#include <algorithm>
#include <string>
#include <vector>

#include "uwgan/error.hpp"
#include "blas.hpp"

namespace uwgan::kernels {

void validate(const ConvGeometry& g)
{
    if (g.in_channels <= 0 || g.out_channels <= 0 || g.kernel <= 0 || g.stride <= 0 || g.pad < 0) {
        throw ValidationError("invalid convolution parameters");
    }
    if (g.in_h + 2 * g.pad < g.kernel || g.in_w + 2 * g.pad < g.kernel) {
        throw ValidationError("convolution kernel " + std::to_string(g.kernel) + " larger than padded input " +
                              std::to_string(g.in_h) + "x" + std::to_string(g.in_w));
    }
}

namespace reference {

void conv2d_forward(const ConvGeometry& g, int batch, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b, std::span<double> y)
{
    const int oh = g.out_h(), ow = g.out_w(), k = g.kernel;
    for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < g.out_channels; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = b.empty() ? 0.0 : b[o];
                    for (int c = 0; c < g.in_channels; ++c) {
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= g.in_h) {
                                continue;
                            }
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= g.in_w) {
                                    continue;
                                }
                                acc += w[((o * g.in_channels + c) * k + ky) * k + kx] *
                                       x[((static_cast<std::size_t>(n) * g.in_channels + c) * g.in_h + iy) * g.in_w + ix];
                            }
                        }
                    }
                    y[((static_cast<std::size_t>(n) * g.out_channels + o) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
}

void conv2d_backward_data(const ConvGeometry& g, int batch, std::span<const double> gy,
                          std::span<const double> w, std::span<double> gx)
{
    const int oh = g.out_h(), ow = g.out_w(), k = g.kernel;
    std::fill(gx.begin(), gx.begin() + static_cast<std::ptrdiff_t>(batch * g.in_size()), 0.0);
    for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < g.out_channels; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const double gv = gy[((static_cast<std::size_t>(n) * g.out_channels + o) * oh + oy) * ow + ox];
                    for (int c = 0; c < g.in_channels; ++c) {
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= g.in_h) {
                                continue;
                            }
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= g.in_w) {
                                    continue;
                                }
                                gx[((static_cast<std::size_t>(n) * g.in_channels + c) * g.in_h + iy) * g.in_w + ix] +=
                                    gv * w[((o * g.in_channels + c) * k + ky) * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_filter(const ConvGeometry& g, int batch, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw, std::span<double> gb)
{
    const int oh = g.out_h(), ow = g.out_w(), k = g.kernel;
    for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < g.out_channels; ++o) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const double gv = gy[((static_cast<std::size_t>(n) * g.out_channels + o) * oh + oy) * ow + ox];
                    if (!gb.empty()) {
                        gb[o] += gv;
                    }
                    for (int c = 0; c < g.in_channels; ++c) {
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy * g.stride - g.pad + ky;
                            if (iy < 0 || iy >= g.in_h) {
                                continue;
                            }
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * g.stride - g.pad + kx;
                                if (ix < 0 || ix >= g.in_w) {
                                    continue;
                                }
                                gw[((o * g.in_channels + c) * k + ky) * k + kx] +=
                                    gv * x[((static_cast<std::size_t>(n) * g.in_channels + c) * g.in_h + iy) * g.in_w + ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace reference

namespace parallel {

namespace {

// cols is (C*k*k) x (oh*ow), row-major.
void im2col(const ConvGeometry& g, const double* x, double* cols)
{
    const int oh = g.out_h(), ow = g.out_w(), k = g.kernel;
    const std::size_t spatial = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < g.in_channels; ++c) {
        const double* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * spatial;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    double* out = row + static_cast<std::size_t>(oy) * ow;
                    if (iy < 0 || iy >= g.in_h) {
                        std::fill(out, out + ow, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * g.in_w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        out[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col; accumulates into x.
void col2im(const ConvGeometry& g, const double* cols, double* x)
{
    const int oh = g.out_h(), ow = g.out_w(), k = g.kernel;
    const std::size_t spatial = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < g.in_channels; ++c) {
        double* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * spatial;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.in_h) {
                        continue;
                    }
                    const double* in = row + static_cast<std::size_t>(oy) * ow;
                    double* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.in_w) {
                            dst[ix] += in[ox];
                        }
                    }
                }
            }
        }
    }
}

std::size_t col_rows(const ConvGeometry& g)
{
    return static_cast<std::size_t>(g.in_channels) * g.kernel * g.kernel;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, int batch, std::span<const double> x,
                    std::span<const double> w, std::span<const double> b, std::span<double> y)
{
    const std::size_t rows = col_rows(g);
    const std::size_t spatial = static_cast<std::size_t>(g.out_h()) * g.out_w();
    const auto oc = static_cast<std::size_t>(g.out_channels);

#pragma omp parallel if (batch > 1)
    {
        std::vector<double> cols(rows * spatial);
#pragma omp for schedule(static)
        for (int n = 0; n < batch; ++n) {
            im2col(g, x.data() + n * g.in_size(), cols.data());
            double* out = y.data() + n * g.out_size();
            detail::gemm_nn(oc, spatial, rows, w.data(), cols.data(), out, false);
            if (!b.empty()) {
                for (std::size_t o = 0; o < oc; ++o) {
                    double* row = out + o * spatial;
                    for (std::size_t s = 0; s < spatial; ++s) {
                        row[s] += b[o];
                    }
                }
            }
        }
    }
}

void conv2d_backward_data(const ConvGeometry& g, int batch, std::span<const double> gy,
                          std::span<const double> w, std::span<double> gx)
{
    const std::size_t rows = col_rows(g);
    const std::size_t spatial = static_cast<std::size_t>(g.out_h()) * g.out_w();
    const auto oc = static_cast<std::size_t>(g.out_channels);

#pragma omp parallel if (batch > 1)
    {
        std::vector<double> cols(rows * spatial);
#pragma omp for schedule(static)
        for (int n = 0; n < batch; ++n) {
            detail::gemm_tn(oc, spatial, rows, w.data(), gy.data() + n * g.out_size(), cols.data(), false);
            double* dst = gx.data() + n * g.in_size();
            std::fill(dst, dst + g.in_size(), 0.0);
            col2im(g, cols.data(), dst);
        }
    }
}

void conv2d_backward_filter(const ConvGeometry& g, int batch, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw, std::span<double> gb)
{
    const std::size_t rows = col_rows(g);
    const std::size_t spatial = static_cast<std::size_t>(g.out_h()) * g.out_w();
    const auto oc = static_cast<std::size_t>(g.out_channels);

    // Per-thread partials summed in thread order, so results are
    // reproducible for a fixed thread count.
    std::vector<std::vector<double>> partial_w, partial_b;
#pragma omp parallel if (batch > 1)
    {
#pragma omp single
        {
            partial_w.assign(omp_get_num_threads(), std::vector<double>(oc * rows, 0.0));
            partial_b.assign(omp_get_num_threads(), std::vector<double>(oc, 0.0));
        }
        const int tid = omp_get_thread_num();
        std::vector<double> cols(rows * spatial);
#pragma omp for schedule(static)
        for (int n = 0; n < batch; ++n) {
            im2col(g, x.data() + n * g.in_size(), cols.data());
            const double* grad = gy.data() + n * g.out_size();
            detail::gemm_nt(oc, rows, spatial, grad, cols.data(), partial_w[tid].data(), true);
            if (!gb.empty()) {
                for (std::size_t o = 0; o < oc; ++o) {
                    partial_b[tid][o] += detail::sum(grad + o * spatial, spatial);
                }
            }
        }
    }
    for (std::size_t t = 0; t < partial_w.size(); ++t) {
        for (std::size_t i = 0; i < gw.size(); ++i) {
            gw[i] += partial_w[t][i];
        }
        if (!gb.empty()) {
            for (std::size_t o = 0; o < oc; ++o) {
                gb[o] += partial_b[t][o];
            }
        }
    }
}

}  // namespace parallel

}  // namespace uwgan::kernels
