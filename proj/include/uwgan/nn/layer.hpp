#pragma once

#include <memory>
#include <string>
#include <vector>

#include "uwgan/rng.hpp"
#include "uwgan/tensor.hpp"

namespace uwgan::nn {

/// A trainable tensor and its accumulated gradient.
struct Parameter {
    Tensor value;
    Tensor grad;

    explicit Parameter(Shape shape = {}) : value(shape), grad(shape) {}
};

struct ParamRef {
    std::string name;
    Parameter* param = nullptr;
};

/// Activations a layer needs to run its backward pass. Opaque to callers.
struct Cache {
    virtual ~Cache() = default;
};
using CachePtr = std::unique_ptr<Cache>;

struct ForwardContext {
    bool training = false;
    Rng* rng = nullptr;  // required by stochastic layers in training mode
};

/// Forward passes are const and keep their state in the returned cache, so
/// the same layer can appear several times in one graph (a generator used
/// for both translation and reconstruction) and a frozen layer can be
/// evaluated from several threads.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual Shape output_shape(const Shape& in) const = 0;

    /// When `cache` is non-null it receives what `backward` needs.
    virtual Tensor forward(const Tensor& x, const ForwardContext& ctx, CachePtr* cache) const = 0;

    /// Returns dL/dx and accumulates dL/dparams into the parameters' grads.
    virtual Tensor backward(const Tensor& grad_out, const Cache& cache) = 0;

    virtual void collect(const std::string& /*prefix*/, std::vector<ParamRef>& /*out*/) {}

    virtual std::unique_ptr<Layer> clone() const = 0;
};

using LayerPtr = std::unique_ptr<Layer>;

}  // namespace uwgan::nn
