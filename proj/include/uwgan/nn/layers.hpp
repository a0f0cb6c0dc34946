#pragma once

#include <vector>

#include "uwgan/kernels/conv.hpp"
#include "uwgan/nn/layer.hpp"

namespace uwgan::nn {

class Conv2d final : public Layer {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int pad = 0, bool bias = true);

    std::string kind() const override { return "Conv2d"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
    LayerPtr clone() const override { return std::make_unique<Conv2d>(*this); }

    Parameter& weight() noexcept { return weight_; }
    Parameter& bias() noexcept { return bias_; }
    bool has_bias() const noexcept { return has_bias_; }
    int fan_in() const noexcept { return in_ * kernel_ * kernel_; }

private:
    kernels::ConvGeometry geometry(const Shape& in) const;

    int in_, out_, kernel_, stride_, pad_;
    bool has_bias_;
    Parameter weight_;
    Parameter bias_;
};

/// Fractionally strided convolution; the adjoint of a Conv2d with the same
/// (kernel, stride, pad). Output extent: (H-1)*stride - 2*pad + kernel + output_pad.
/// Weights are laid out [in][out][ky][kx].
class ConvTranspose2d final : public Layer {
public:
    ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad, int output_pad,
                    bool bias = true);

    std::string kind() const override { return "ConvTranspose2d"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
    LayerPtr clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

    Parameter& weight() noexcept { return weight_; }
    Parameter& bias() noexcept { return bias_; }

private:
    // Geometry of the forward convolution this layer is the adjoint of.
    kernels::ConvGeometry adjoint_geometry(const Shape& in) const;

    int in_, out_, kernel_, stride_, pad_, output_pad_;
    bool has_bias_;
    Parameter weight_;
    Parameter bias_;
};

class ReflectionPad2d final : public Layer {
public:
    explicit ReflectionPad2d(int pad) : pad_(pad) {}

    std::string kind() const override { return "ReflectionPad2d"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    LayerPtr clone() const override { return std::make_unique<ReflectionPad2d>(*this); }

private:
    int pad_;
};

/// Per-sample, per-channel normalization without affine parameters.
class InstanceNorm2d final : public Layer {
public:
    explicit InstanceNorm2d(double eps = 1e-5) : eps_(eps) {}

    std::string kind() const override { return "InstanceNorm2d"; }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    LayerPtr clone() const override { return std::make_unique<InstanceNorm2d>(*this); }

private:
    double eps_;
};

class ReLU final : public Layer {
public:
    std::string kind() const override { return "ReLU"; }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    LayerPtr clone() const override { return std::make_unique<ReLU>(*this); }
};

class LeakyReLU final : public Layer {
public:
    explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}

    std::string kind() const override { return "LeakyReLU"; }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    LayerPtr clone() const override { return std::make_unique<LeakyReLU>(*this); }

private:
    double slope_;
};

class Tanh final : public Layer {
public:
    std::string kind() const override { return "Tanh"; }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    LayerPtr clone() const override { return std::make_unique<Tanh>(*this); }
};

/// 2x2 window, stride 2, odd extents floored.
class MaxPool2d final : public Layer {
public:
    std::string kind() const override { return "MaxPool2d"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    LayerPtr clone() const override { return std::make_unique<MaxPool2d>(*this); }
};

/// Inverted dropout: active only when ctx.training is set.
class Dropout final : public Layer {
public:
    explicit Dropout(double rate);

    std::string kind() const override { return "Dropout"; }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    LayerPtr clone() const override { return std::make_unique<Dropout>(*this); }

    double rate() const noexcept { return rate_; }

private:
    double rate_;
};

/// (N, C, H, W) -> (N, C*H*W, 1, 1).
class Flatten final : public Layer {
public:
    std::string kind() const override { return "Flatten"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    LayerPtr clone() const override { return std::make_unique<Flatten>(*this); }
};

/// Fully connected layer on (N, F, 1, 1) inputs.
class Dense final : public Layer {
public:
    Dense(int in_features, int out_features);

    std::string kind() const override { return "Dense"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
    LayerPtr clone() const override { return std::make_unique<Dense>(*this); }

    Parameter& weight() noexcept { return weight_; }
    Parameter& bias() noexcept { return bias_; }
    int in_features() const noexcept { return in_; }

private:
    int in_, out_;
    Parameter weight_;
    Parameter bias_;
};

class Sequential final : public Layer {
public:
    Sequential() = default;
    explicit Sequential(std::vector<LayerPtr> layers) : layers_(std::move(layers)) {}
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    template <typename L, typename... Args>
    L& add(Args&&... args)
    {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }
    void push_back(LayerPtr layer) { layers_.push_back(std::move(layer)); }

    std::string kind() const override { return "Sequential"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
    LayerPtr clone() const override { return std::make_unique<Sequential>(*this); }

    std::size_t size() const noexcept { return layers_.size(); }
    Layer& operator[](std::size_t i) { return *layers_[i]; }
    const Layer& operator[](std::size_t i) const { return *layers_[i]; }

    /// Output shape after each layer, in order.
    std::vector<Shape> trace_shapes(const Shape& in) const;

private:
    std::vector<LayerPtr> layers_;
};

/// y = x + body(x); body must preserve shape.
class Residual final : public Layer {
public:
    explicit Residual(Sequential body) : body_(std::move(body)) {}

    std::string kind() const override { return "Residual"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const override;
    Tensor backward(const Tensor& grad_out, const Cache& cache) override;
    void collect(const std::string& prefix, std::vector<ParamRef>& out) override;
    LayerPtr clone() const override { return std::make_unique<Residual>(*this); }

private:
    Sequential body_;
};

}  // namespace uwgan::nn
