#pragma once

#include <string>
#include <vector>

#include "uwgan/nn/layers.hpp"

namespace uwgan::nn {

/// A named layer stack with parameter bookkeeping. Copies are deep.
class Network {
public:
    Network() = default;
    Network(std::string name, Sequential body) : name_(std::move(name)), body_(std::move(body)) {}

    const std::string& name() const noexcept { return name_; }
    Sequential& body() noexcept { return body_; }
    const Sequential& body() const noexcept { return body_; }

    Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const
    {
        return body_.forward(x, ctx, cache);
    }
    /// Inference-mode forward without a cache.
    Tensor infer(const Tensor& x) const { return body_.forward(x, {}, nullptr); }
    Tensor backward(const Tensor& grad_out, const Cache& cache) { return body_.backward(grad_out, cache); }

    Shape output_shape(const Shape& in) const { return body_.output_shape(in); }

    std::vector<ParamRef> parameters();
    std::size_t parameter_count() const;
    void zero_grad();

private:
    std::string name_;
    Sequential body_;
};

}  // namespace uwgan::nn
