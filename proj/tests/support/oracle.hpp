#pragma once

// Independent checks: a cyclic Jacobi eigensolver in long double (no Eigen),
// and central finite differences over network parameters.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "uwgan/nn/network.hpp"
#include "uwgan/tensor.hpp"

namespace uwgan::testing {

using LdMatrix = std::vector<std::vector<long double>>;

struct Eigensystem {
    std::vector<long double> values;
    LdMatrix vectors;  // column k is the k-th eigenvector
};

inline Eigensystem jacobi_eigen(const Eigen::MatrixXd& a_in, int max_sweeps = 100)
{
    const int n = static_cast<int>(a_in.rows());
    LdMatrix a(n, std::vector<long double>(n));
    LdMatrix v(n, std::vector<long double>(n, 0.0L));
    for (int i = 0; i < n; ++i) {
        v[i][i] = 1.0L;
        for (int j = 0; j < n; ++j) {
            a[i][j] = a_in(i, j);
        }
    }
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        long double off = 0.0L, diag = 0.0L;
        for (int i = 0; i < n; ++i) {
            diag += a[i][i] * a[i][i];
            for (int j = i + 1; j < n; ++j) {
                off += a[i][j] * a[i][j];
            }
        }
        if (off <= 1e-36L * diag) {
            break;
        }
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0L) {
                    continue;
                }
                const long double theta = (a[q][q] - a[p][p]) / (2.0L * a[p][q]);
                const long double t = (theta >= 0 ? 1.0L : -1.0L) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
                const long double c = 1.0L / std::sqrt(t * t + 1.0L);
                const long double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const long double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const long double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const long double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Eigensystem out;
    out.vectors = v;
    for (int i = 0; i < n; ++i) {
        out.values.push_back(a[i][i]);
    }
    return out;
}

/// V diag(sqrt(max(l, 0))) V^T, in long double, rounded at the end.
inline Eigen::MatrixXd oracle_sqrtm(const Eigen::MatrixXd& a)
{
    const auto es = jacobi_eigen(a);
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            long double s = 0.0L;
            for (int k = 0; k < n; ++k) {
                const long double l = es.values[static_cast<std::size_t>(k)];
                s += es.vectors[i][k] * std::sqrt(l > 0 ? l : 0.0L) * es.vectors[j][k];
            }
            out(i, j) = static_cast<double>(s);
        }
    }
    return out;
}

/// tr sqrt(M) for symmetric PSD M via the oracle eigenvalues.
inline long double oracle_trace_sqrt(const Eigen::MatrixXd& m)
{
    long double s = 0.0L;
    for (long double l : jacobi_eigen(m).values) {
        s += std::sqrt(l > 0 ? l : 0.0L);
    }
    return s;
}

/// FID from two (mu, cov) pairs, all in long double except the inputs.
inline long double oracle_frechet(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& c1, const Eigen::VectorXd& mu2,
                                  const Eigen::MatrixXd& c2)
{
    const Eigen::MatrixXd s1 = oracle_sqrtm(c1);
    Eigen::MatrixXd inner = s1 * c2 * s1;
    inner = 0.5 * (inner + inner.transpose()).eval();
    long double d = 0.0L;
    for (int i = 0; i < mu1.size(); ++i) {
        const long double diff = static_cast<long double>(mu1(i)) - mu2(i);
        d += diff * diff;
        d += static_cast<long double>(c1(i, i)) + c2(i, i);
    }
    return d - 2.0L * oracle_trace_sqrt(inner);
}

/// Relative error in the usual max-normalized form.
inline double rel_error(double analytic, double numeric, double floor = 1e-8)
{
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
    return std::fabs(analytic - numeric) / denom;
}

/// Central difference of `f` w.r.t. every entry of `x`.
inline Tensor numeric_gradient(const std::function<double()>& f, Tensor& x, double h = 1e-5)
{
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

struct GradCheck {
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::size_t checked = 0;
};

/// Compares accumulated param grads of `nets` against central differences
/// of `f`. Grads must already hold the analytic values. An entry counts as
/// a miss only if both relative error and absolute error (against `atol`)
/// are large, so exact zeros on both sides don't blow up the ratio.
inline GradCheck check_param_grads(const std::function<double()>& f, std::vector<nn::Network*> nets,
                                   double h = 1e-5, double atol = 1e-9)
{
    GradCheck out;
    for (auto* net : nets) {
        for (auto& ref : net->parameters()) {
            Tensor& v = ref.param->value;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double keep = v[i];
                v[i] = keep + h;
                const double up = f();
                v[i] = keep - h;
                const double down = f();
                v[i] = keep;
                const double num = (up - down) / (2.0 * h);
                const double ana = ref.param->grad[i];
                const double abs_err = std::fabs(num - ana);
                out.max_abs = std::max(out.max_abs, abs_err);
                if (abs_err > atol) {
                    out.max_rel = std::max(out.max_rel, rel_error(ana, num));
                }
                ++out.checked;
            }
        }
    }
    return out;
}

}  // namespace uwgan::testing
