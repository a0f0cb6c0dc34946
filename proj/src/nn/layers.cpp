#include "uwgan/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "uwgan/error.hpp"
#include "uwgan/kernels/ops.hpp"

namespace uwgan::nn {

namespace {

template <typename T>
const T& cache_as(const Cache& cache)
{
    const auto* c = dynamic_cast<const T*>(&cache);
    if (c == nullptr) {
        throw ValidationError("backward called with a cache from a different layer");
    }
    return *c;
}

struct InputCache final : Cache {
    Tensor input;
};

struct OutputCache final : Cache {
    Tensor output;
};

struct ShapeCache final : Cache {
    Shape input_shape;
};

void require_channels(const Shape& in, int channels, const char* layer)
{
    if (in.c != channels) {
        throw ValidationError(std::string(layer) + " expects " + std::to_string(channels) +
                              " input channels, got " + to_string(in));
    }
}

void store_input(CachePtr* cache, const Tensor& x)
{
    if (cache != nullptr) {
        auto c = std::make_unique<InputCache>();
        c->input = x;
        *cache = std::move(c);
    }
}

void store_output(CachePtr* cache, const Tensor& y)
{
    if (cache != nullptr) {
        auto c = std::make_unique<OutputCache>();
        c->output = y;
        *cache = std::move(c);
    }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      has_bias_(bias),
      weight_(Shape{out_channels, in_channels, kernel, kernel}),
      bias_(bias ? Shape{out_channels, 1, 1, 1} : Shape{})
{
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || pad < 0) {
        throw ValidationError("invalid Conv2d parameters");
    }
}

kernels::ConvGeometry Conv2d::geometry(const Shape& in) const
{
    kernels::ConvGeometry g{in_, in.h, in.w, out_, kernel_, stride_, pad_};
    kernels::validate(g);
    return g;
}

Shape Conv2d::output_shape(const Shape& in) const
{
    require_channels(in, in_, "Conv2d");
    const auto g = geometry(in);
    return {in.n, out_, g.out_h(), g.out_w()};
}

Tensor Conv2d::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    const Shape out_shape = output_shape(x.shape());
    Tensor y(out_shape);
    kernels::parallel::conv2d_forward(geometry(x.shape()), x.shape().n, x.values(), weight_.value.values(),
                                      has_bias_ ? bias_.value.values() : std::span<const double>{}, y.values());
    store_input(cache, x);
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, const Cache& cache)
{
    const Tensor& x = cache_as<InputCache>(cache).input;
    const auto g = geometry(x.shape());
    Tensor gx(x.shape());
    kernels::parallel::conv2d_backward_data(g, x.shape().n, grad_out.values(), weight_.value.values(), gx.values());
    kernels::parallel::conv2d_backward_filter(g, x.shape().n, x.values(), grad_out.values(), weight_.grad.values(),
                                              has_bias_ ? bias_.grad.values() : std::span<double>{});
    return gx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out)
{
    out.push_back({prefix + "weight", &weight_});
    if (has_bias_) {
        out.push_back({prefix + "bias", &bias_});
    }
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad,
                                 int output_pad, bool bias)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      output_pad_(output_pad),
      has_bias_(bias),
      weight_(Shape{in_channels, out_channels, kernel, kernel}),
      bias_(bias ? Shape{out_channels, 1, 1, 1} : Shape{})
{
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || pad < 0 || output_pad < 0 ||
        output_pad >= stride) {
        throw ValidationError("invalid ConvTranspose2d parameters");
    }
}

Shape ConvTranspose2d::output_shape(const Shape& in) const
{
    require_channels(in, in_, "ConvTranspose2d");
    const int h = (in.h - 1) * stride_ - 2 * pad_ + kernel_ + output_pad_;
    const int w = (in.w - 1) * stride_ - 2 * pad_ + kernel_ + output_pad_;
    if (h <= 0 || w <= 0) {
        throw ValidationError("ConvTranspose2d output would be empty for input " + to_string(in));
    }
    return {in.n, out_, h, w};
}

kernels::ConvGeometry ConvTranspose2d::adjoint_geometry(const Shape& in) const
{
    const Shape o = output_shape(in);
    kernels::ConvGeometry g{out_, o.h, o.w, in_, kernel_, stride_, pad_};
    kernels::validate(g);
    if (g.out_h() != in.h || g.out_w() != in.w) {
        throw ValidationError("ConvTranspose2d geometry is not invertible for input " + to_string(in));
    }
    return g;
}

Tensor ConvTranspose2d::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    const auto g = adjoint_geometry(x.shape());
    Tensor y(output_shape(x.shape()));
    kernels::parallel::conv2d_backward_data(g, x.shape().n, x.values(), weight_.value.values(), y.values());
    if (has_bias_) {
        const auto& s = y.shape();
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                double* p = y.data() + (static_cast<std::size_t>(n) * s.c + c) * s.plane();
                const double b = bias_.value[c];
                for (std::size_t i = 0; i < s.plane(); ++i) {
                    p[i] += b;
                }
            }
        }
    }
    store_input(cache, x);
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out, const Cache& cache)
{
    const Tensor& x = cache_as<InputCache>(cache).input;
    const auto g = adjoint_geometry(x.shape());
    const int batch = x.shape().n;
    Tensor gx(x.shape());
    kernels::parallel::conv2d_forward(g, batch, grad_out.values(), weight_.value.values(), {}, gx.values());
    // Roles swap: the adjoint conv's input is our output gradient and its
    // output is our input.
    kernels::parallel::conv2d_backward_filter(g, batch, grad_out.values(), x.values(), weight_.grad.values(), {});
    if (has_bias_) {
        const auto& s = grad_out.shape();
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                const double* p = grad_out.data() + (static_cast<std::size_t>(n) * s.c + c) * s.plane();
                double acc = 0.0;
                for (std::size_t i = 0; i < s.plane(); ++i) {
                    acc += p[i];
                }
                bias_.grad[c] += acc;
            }
        }
    }
    return gx;
}

void ConvTranspose2d::collect(const std::string& prefix, std::vector<ParamRef>& out)
{
    out.push_back({prefix + "weight", &weight_});
    if (has_bias_) {
        out.push_back({prefix + "bias", &bias_});
    }
}

// ------------------------------------------------------- ReflectionPad2d

Shape ReflectionPad2d::output_shape(const Shape& in) const
{
    if (pad_ >= in.h || pad_ >= in.w) {
        throw ValidationError("reflection pad " + std::to_string(pad_) + " too large for " + to_string(in));
    }
    return {in.n, in.c, in.h + 2 * pad_, in.w + 2 * pad_};
}

namespace {
inline int reflect(int i, int n)
{
    if (i < 0) {
        return -i;
    }
    if (i >= n) {
        return 2 * (n - 1) - i;
    }
    return i;
}
}  // namespace

Tensor ReflectionPad2d::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    const Shape in = x.shape();
    Tensor y(output_shape(in));
    const Shape out = y.shape();
    const int planes = in.n * in.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = x.data() + p * in.plane();
        double* dst = y.data() + p * out.plane();
        for (int oy = 0; oy < out.h; ++oy) {
            const int iy = reflect(oy - pad_, in.h);
            for (int ox = 0; ox < out.w; ++ox) {
                dst[oy * out.w + ox] = src[iy * in.w + reflect(ox - pad_, in.w)];
            }
        }
    }
    if (cache != nullptr) {
        auto c = std::make_unique<ShapeCache>();
        c->input_shape = in;
        *cache = std::move(c);
    }
    return y;
}

Tensor ReflectionPad2d::backward(const Tensor& grad_out, const Cache& cache)
{
    const Shape in = cache_as<ShapeCache>(cache).input_shape;
    const Shape out = grad_out.shape();
    Tensor gx(in);
    const int planes = in.n * in.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = grad_out.data() + p * out.plane();
        double* dst = gx.data() + p * in.plane();
        for (int oy = 0; oy < out.h; ++oy) {
            const int iy = reflect(oy - pad_, in.h);
            for (int ox = 0; ox < out.w; ++ox) {
                dst[iy * in.w + reflect(ox - pad_, in.w)] += src[oy * out.w + ox];
            }
        }
    }
    return gx;
}

// -------------------------------------------------------- InstanceNorm2d

namespace {
struct NormCache final : Cache {
    Tensor normalized;
    std::vector<double> inv_std;
};
}  // namespace

Tensor InstanceNorm2d::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    const Shape s = x.shape();
    if (s.plane() < 2) {
        throw ValidationError("InstanceNorm2d needs at least 2 spatial elements, got " + to_string(s));
    }
    const kernels::PlaneGeometry g{s.n * s.c, s.h, s.w};
    Tensor y(s);
    std::vector<double> inv_std(static_cast<std::size_t>(g.planes));
    kernels::parallel::instance_norm_forward(g, eps_, x.values(), y.values(), inv_std);
    if (cache != nullptr) {
        auto c = std::make_unique<NormCache>();
        c->normalized = y;
        c->inv_std = std::move(inv_std);
        *cache = std::move(c);
    }
    return y;
}

Tensor InstanceNorm2d::backward(const Tensor& grad_out, const Cache& cache)
{
    const auto& c = cache_as<NormCache>(cache);
    const Shape s = c.normalized.shape();
    Tensor gx(s);
    kernels::parallel::instance_norm_backward({s.n * s.c, s.h, s.w}, c.normalized.values(), c.inv_std,
                                              grad_out.values(), gx.values());
    return gx;
}

// ------------------------------------------------------------ activations

Tensor ReLU::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
    store_output(cache, y);
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out, const Cache& cache)
{
    const Tensor& y = cache_as<OutputCache>(cache).output;
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        gx[i] = y[i] > 0.0 ? grad_out[i] : 0.0;
    }
    return gx;
}

Tensor LeakyReLU::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] > 0.0 ? x[i] : slope_ * x[i];
    }
    store_input(cache, x);
    return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out, const Cache& cache)
{
    const Tensor& x = cache_as<InputCache>(cache).input;
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        gx[i] = x[i] > 0.0 ? grad_out[i] : slope_ * grad_out[i];
    }
    return gx;
}

Tensor Tanh::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::tanh(x[i]);
    }
    store_output(cache, y);
    return y;
}

Tensor Tanh::backward(const Tensor& grad_out, const Cache& cache)
{
    const Tensor& y = cache_as<OutputCache>(cache).output;
    Tensor gx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        gx[i] = grad_out[i] * (1.0 - y[i] * y[i]);
    }
    return gx;
}

// ------------------------------------------------------------- MaxPool2d

namespace {
struct PoolCache final : Cache {
    Shape input_shape;
    std::vector<std::int32_t> argmax;
};
}  // namespace

Shape MaxPool2d::output_shape(const Shape& in) const
{
    if (in.h < 2 || in.w < 2) {
        throw ValidationError("MaxPool2d needs at least 2x2 input, got " + to_string(in));
    }
    return {in.n, in.c, in.h / 2, in.w / 2};
}

Tensor MaxPool2d::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    const Shape s = x.shape();
    Tensor y(output_shape(s));
    std::vector<std::int32_t> argmax(y.size());
    kernels::parallel::max_pool2_forward({s.n * s.c, s.h, s.w}, x.values(), y.values(), argmax);
    if (cache != nullptr) {
        auto c = std::make_unique<PoolCache>();
        c->input_shape = s;
        c->argmax = std::move(argmax);
        *cache = std::move(c);
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out, const Cache& cache)
{
    const auto& c = cache_as<PoolCache>(cache);
    const Shape s = c.input_shape;
    Tensor gx(s);
    kernels::parallel::max_pool2_backward({s.n * s.c, s.h, s.w}, grad_out.values(), c.argmax, gx.values());
    return gx;
}

// --------------------------------------------------------------- Dropout

namespace {
struct MaskCache final : Cache {
    std::vector<double> scale;  // empty: identity
};
}  // namespace

Dropout::Dropout(double rate) : rate_(rate)
{
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ValidationError("dropout rate must be in [0, 1)");
    }
}

Tensor Dropout::forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const
{
    auto c = std::make_unique<MaskCache>();
    Tensor y = x;
    if (ctx.training && rate_ > 0.0) {
        if (ctx.rng == nullptr) {
            throw ValidationError("Dropout in training mode requires an RNG");
        }
        const double keep = 1.0 - rate_;
        std::bernoulli_distribution bern(keep);
        c->scale.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            c->scale[i] = bern(*ctx.rng) ? 1.0 / keep : 0.0;
            y[i] *= c->scale[i];
        }
    }
    if (cache != nullptr) {
        *cache = std::move(c);
    }
    return y;
}

Tensor Dropout::backward(const Tensor& grad_out, const Cache& cache)
{
    const auto& c = cache_as<MaskCache>(cache);
    Tensor gx = grad_out;
    for (std::size_t i = 0; i < c.scale.size(); ++i) {
        gx[i] *= c.scale[i];
    }
    return gx;
}

// --------------------------------------------------------------- Flatten

Shape Flatten::output_shape(const Shape& in) const
{
    return {in.n, static_cast<int>(in.per_item()), 1, 1};
}

Tensor Flatten::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    if (cache != nullptr) {
        auto c = std::make_unique<ShapeCache>();
        c->input_shape = x.shape();
        *cache = std::move(c);
    }
    return x.reshaped(output_shape(x.shape()));
}

Tensor Flatten::backward(const Tensor& grad_out, const Cache& cache)
{
    return grad_out.reshaped(cache_as<ShapeCache>(cache).input_shape);
}

// ----------------------------------------------------------------- Dense

Dense::Dense(int in_features, int out_features)
    : in_(in_features),
      out_(out_features),
      weight_(Shape{out_features, in_features, 1, 1}),
      bias_(Shape{out_features, 1, 1, 1})
{
    if (in_features <= 0 || out_features <= 0) {
        throw ValidationError("invalid Dense extents");
    }
}

Shape Dense::output_shape(const Shape& in) const
{
    if (static_cast<int>(in.per_item()) != in_) {
        throw ValidationError("Dense expects " + std::to_string(in_) + " features, got " + to_string(in));
    }
    return {in.n, out_, 1, 1};
}

Tensor Dense::forward(const Tensor& x, const ForwardContext&, CachePtr* cache) const
{
    Tensor y(output_shape(x.shape()));
    kernels::parallel::dense_forward({x.shape().n, in_, out_}, x.values(), weight_.value.values(),
                                     bias_.value.values(), y.values());
    store_input(cache, x);
    return y;
}

Tensor Dense::backward(const Tensor& grad_out, const Cache& cache)
{
    const Tensor& x = cache_as<InputCache>(cache).input;
    Tensor gx(x.shape());
    kernels::parallel::dense_backward({x.shape().n, in_, out_}, x.values(), weight_.value.values(),
                                      grad_out.values(), gx.values(), weight_.grad.values(), bias_.grad.values());
    return gx;
}

void Dense::collect(const std::string& prefix, std::vector<ParamRef>& out)
{
    out.push_back({prefix + "weight", &weight_});
    out.push_back({prefix + "bias", &bias_});
}

// ------------------------------------------------------------ Sequential

namespace {
struct SequenceCache final : Cache {
    std::vector<CachePtr> steps;
};
}  // namespace

Sequential::Sequential(const Sequential& other)
{
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) {
        layers_.push_back(l->clone());
    }
}

Sequential& Sequential::operator=(const Sequential& other)
{
    if (this != &other) {
        Sequential tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

Shape Sequential::output_shape(const Shape& in) const
{
    Shape s = in;
    for (const auto& l : layers_) {
        s = l->output_shape(s);
    }
    return s;
}

std::vector<Shape> Sequential::trace_shapes(const Shape& in) const
{
    std::vector<Shape> shapes;
    Shape s = in;
    for (const auto& l : layers_) {
        s = l->output_shape(s);
        shapes.push_back(s);
    }
    return shapes;
}

Tensor Sequential::forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const
{
    std::unique_ptr<SequenceCache> seq;
    if (cache != nullptr) {
        seq = std::make_unique<SequenceCache>();
        seq->steps.resize(layers_.size());
    }
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i]->forward(h, ctx, seq ? &seq->steps[i] : nullptr);
    }
    if (cache != nullptr) {
        *cache = std::move(seq);
    }
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out, const Cache& cache)
{
    const auto& seq = cache_as<SequenceCache>(cache);
    Tensor g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        g = layers_[i]->backward(g, *seq.steps[i]);
    }
    return g;
}

void Sequential::collect(const std::string& prefix, std::vector<ParamRef>& out)
{
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->collect(prefix + std::to_string(i) + ".", out);
    }
}

// -------------------------------------------------------------- Residual

Shape Residual::output_shape(const Shape& in) const
{
    const Shape out = body_.output_shape(in);
    if (out != in) {
        throw ValidationError("residual body changes shape " + to_string(in) + " -> " + to_string(out));
    }
    return out;
}

Tensor Residual::forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const
{
    Tensor y = body_.forward(x, ctx, cache);
    y += x;
    return y;
}

Tensor Residual::backward(const Tensor& grad_out, const Cache& cache)
{
    Tensor g = body_.backward(grad_out, cache);
    g += grad_out;
    return g;
}

void Residual::collect(const std::string& prefix, std::vector<ParamRef>& out)
{
    body_.collect(prefix + "body.", out);
}

}  // namespace uwgan::nn
