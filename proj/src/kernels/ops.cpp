#include "uwgan/kernels/ops.hpp"

#include <algorithm>
#include <cmath>

#include "blas.hpp"

namespace uwgan::kernels {

namespace reference {

void max_pool2_forward(const PlaneGeometry& g, std::span<const double> x, std::span<double> y,
                       std::span<std::int32_t> argmax)
{
    const int oh = g.h / 2, ow = g.w / 2;
    for (int p = 0; p < g.planes; ++p) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                int best = -1;
                double best_v = 0.0;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (2 * oy + dy) * g.w + (2 * ox + dx);
                        const double v = x[p * g.plane_size() + idx];
                        if (best < 0 || v > best_v) {
                            best = idx;
                            best_v = v;
                        }
                    }
                }
                const std::size_t o = static_cast<std::size_t>(p) * oh * ow + oy * ow + ox;
                y[o] = best_v;
                argmax[o] = best;
            }
        }
    }
}

void max_pool2_backward(const PlaneGeometry& g, std::span<const double> gy,
                        std::span<const std::int32_t> argmax, std::span<double> gx)
{
    const std::size_t out_plane = static_cast<std::size_t>(g.h / 2) * (g.w / 2);
    std::fill(gx.begin(), gx.begin() + static_cast<std::ptrdiff_t>(g.planes * g.plane_size()), 0.0);
    for (int p = 0; p < g.planes; ++p) {
        for (std::size_t o = 0; o < out_plane; ++o) {
            gx[p * g.plane_size() + argmax[p * out_plane + o]] += gy[p * out_plane + o];
        }
    }
}

void instance_norm_forward(const PlaneGeometry& g, double eps, std::span<const double> x,
                           std::span<double> y, std::span<double> inv_std)
{
    const std::size_t m = g.plane_size();
    for (int p = 0; p < g.planes; ++p) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            mean += x[p * m + i];
        }
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = x[p * m + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(m);
        inv_std[p] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < m; ++i) {
            y[p * m + i] = (x[p * m + i] - mean) * inv_std[p];
        }
    }
}

void instance_norm_backward(const PlaneGeometry& g, std::span<const double> y,
                            std::span<const double> inv_std, std::span<const double> gy,
                            std::span<double> gx)
{
    const std::size_t m = g.plane_size();
    for (int p = 0; p < g.planes; ++p) {
        double mean_g = 0.0, mean_gy = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            mean_g += gy[p * m + i];
            mean_gy += gy[p * m + i] * y[p * m + i];
        }
        mean_g /= static_cast<double>(m);
        mean_gy /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            gx[p * m + i] = inv_std[p] * (gy[p * m + i] - mean_g - y[p * m + i] * mean_gy);
        }
    }
}

void dense_forward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y)
{
    for (int n = 0; n < g.batch; ++n) {
        for (int o = 0; o < g.out_features; ++o) {
            double acc = b.empty() ? 0.0 : b[o];
            for (int i = 0; i < g.in_features; ++i) {
                acc += w[static_cast<std::size_t>(o) * g.in_features + i] *
                       x[static_cast<std::size_t>(n) * g.in_features + i];
            }
            y[static_cast<std::size_t>(n) * g.out_features + o] = acc;
        }
    }
}

void dense_backward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> gy, std::span<double> gx, std::span<double> gw,
                    std::span<double> gb)
{
    for (int n = 0; n < g.batch; ++n) {
        for (int o = 0; o < g.out_features; ++o) {
            const double gv = gy[static_cast<std::size_t>(n) * g.out_features + o];
            if (!gb.empty()) {
                gb[o] += gv;
            }
            for (int i = 0; i < g.in_features; ++i) {
                gw[static_cast<std::size_t>(o) * g.in_features + i] +=
                    gv * x[static_cast<std::size_t>(n) * g.in_features + i];
            }
        }
    }
    if (gx.empty()) {
        return;
    }
    for (int n = 0; n < g.batch; ++n) {
        for (int i = 0; i < g.in_features; ++i) {
            double acc = 0.0;
            for (int o = 0; o < g.out_features; ++o) {
                acc += gy[static_cast<std::size_t>(n) * g.out_features + o] *
                       w[static_cast<std::size_t>(o) * g.in_features + i];
            }
            gx[static_cast<std::size_t>(n) * g.in_features + i] = acc;
        }
    }
}

}  // namespace reference

namespace parallel {

void max_pool2_forward(const PlaneGeometry& g, std::span<const double> x, std::span<double> y,
                       std::span<std::int32_t> argmax)
{
    const int oh = g.h / 2, ow = g.w / 2;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < g.planes; ++p) {
        const double* src = x.data() + p * g.plane_size();
        double* dst = y.data() + static_cast<std::size_t>(p) * oh * ow;
        std::int32_t* arg = argmax.data() + static_cast<std::size_t>(p) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const double* r0 = src + (2 * oy) * g.w;
            const double* r1 = r0 + g.w;
            for (int ox = 0; ox < ow; ++ox) {
                const int base = (2 * oy) * g.w + 2 * ox;
                int best = base;
                double v = r0[2 * ox];
                if (r0[2 * ox + 1] > v) {
                    v = r0[2 * ox + 1];
                    best = base + 1;
                }
                if (r1[2 * ox] > v) {
                    v = r1[2 * ox];
                    best = base + g.w;
                }
                if (r1[2 * ox + 1] > v) {
                    v = r1[2 * ox + 1];
                    best = base + g.w + 1;
                }
                dst[oy * ow + ox] = v;
                arg[oy * ow + ox] = best;
            }
        }
    }
}

void max_pool2_backward(const PlaneGeometry& g, std::span<const double> gy,
                        std::span<const std::int32_t> argmax, std::span<double> gx)
{
    const std::size_t out_plane = static_cast<std::size_t>(g.h / 2) * (g.w / 2);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < g.planes; ++p) {
        double* dst = gx.data() + p * g.plane_size();
        std::fill(dst, dst + g.plane_size(), 0.0);
        for (std::size_t o = 0; o < out_plane; ++o) {
            dst[argmax[p * out_plane + o]] += gy[p * out_plane + o];
        }
    }
}

void instance_norm_forward(const PlaneGeometry& g, double eps, std::span<const double> x,
                           std::span<double> y, std::span<double> inv_std)
{
    const std::size_t m = g.plane_size();
#pragma omp parallel for schedule(static)
    for (int p = 0; p < g.planes; ++p) {
        const double* in = x.data() + p * m;
        double* out = y.data() + p * m;
        const double mean = detail::sum(in, m) / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            out[i] = in[i] - mean;
        }
        const double var = detail::dot(out, out, m) / static_cast<double>(m);
        inv_std[p] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < m; ++i) {
            out[i] *= inv_std[p];
        }
    }
}

void instance_norm_backward(const PlaneGeometry& g, std::span<const double> y,
                            std::span<const double> inv_std, std::span<const double> gy,
                            std::span<double> gx)
{
    const std::size_t m = g.plane_size();
#pragma omp parallel for schedule(static)
    for (int p = 0; p < g.planes; ++p) {
        const double* norm = y.data() + p * m;
        const double* grad = gy.data() + p * m;
        double* out = gx.data() + p * m;
        const double mean_g = detail::sum(grad, m) / static_cast<double>(m);
        const double mean_gy = detail::dot(grad, norm, m) / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            out[i] = inv_std[p] * (grad[i] - mean_g - norm[i] * mean_gy);
        }
    }
}

void dense_forward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y)
{
    const auto nb = static_cast<std::size_t>(g.batch);
    const auto in = static_cast<std::size_t>(g.in_features);
    const auto out = static_cast<std::size_t>(g.out_features);
    detail::gemm_nt(nb, out, in, x.data(), w.data(), y.data(), false);
    if (!b.empty()) {
        for (std::size_t n = 0; n < nb; ++n) {
            for (std::size_t o = 0; o < out; ++o) {
                y[n * out + o] += b[o];
            }
        }
    }
}

void dense_backward(const DenseGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> gy, std::span<double> gx, std::span<double> gw,
                    std::span<double> gb)
{
    const auto nb = static_cast<std::size_t>(g.batch);
    const auto in = static_cast<std::size_t>(g.in_features);
    const auto out = static_cast<std::size_t>(g.out_features);
    detail::gemm_tn(nb, in, out, gy.data(), x.data(), gw.data(), true);
    if (!gb.empty()) {
        for (std::size_t n = 0; n < nb; ++n) {
            for (std::size_t o = 0; o < out; ++o) {
                gb[o] += gy[n * out + o];
            }
        }
    }
    if (!gx.empty()) {
        detail::gemm_nn(nb, in, out, gy.data(), w.data(), gx.data(), false);
    }
}

}  // namespace parallel

}  // namespace uwgan::kernels
