#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "uwgan/nn/network.hpp"

namespace uwgan::nn {

class Checkpoint;

struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adaptive moment estimation with bias correction. One instance per
/// network; moment slots are keyed by parameter name.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const noexcept { return cfg_; }
    std::int64_t steps() const noexcept { return t_; }

    /// Applies one update from the accumulated grads. Grads are left as-is.
    void step(Network& net);

    void save(const std::string& prefix, Checkpoint& ckpt) const;
    void load(const std::string& prefix, const Checkpoint& ckpt);

private:
    struct Slot {
        Tensor m;
        Tensor v;
    };

    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::map<std::string, Slot> slots_;
};

}  // namespace uwgan::nn
