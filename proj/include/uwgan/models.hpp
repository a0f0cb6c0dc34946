#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwgan/nn/adam.hpp"
#include "uwgan/nn/checkpoint.hpp"
#include "uwgan/nn/network.hpp"

namespace uwgan {

/// Residual encoder-decoder generator.
struct GeneratorConfig {
    int input_size = 256;
    int base_channels = 64;
    int residual_blocks = 9;
    int downsample_steps = 2;

    void validate() const;
    int innermost_size() const { return input_size >> downsample_steps; }
};

/// Patch discriminator; `layers = 3` gives the 70x70 receptive field.
struct DiscriminatorConfig {
    int input_size = 256;
    int base_channels = 64;
    int layers = 3;

    void validate() const;
    /// Side of the square score map, by shape propagation.
    int output_size() const;
};

struct CycleGanConfig {
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;

    void validate() const;
};

nlohmann::json to_json(const CycleGanConfig& cfg);
CycleGanConfig cycle_gan_config_from_json(const nlohmann::json& j);

/// Architecture presets: 9 residual blocks at 256 px, 6 below.
CycleGanConfig default_cycle_gan_config(int image_size);

/// Conv weights ~ N(0, 0.02), biases zero.
void init_normal(nn::Network& net, double stddev, std::uint64_t seed);

nn::Network build_generator(const GeneratorConfig& cfg, std::uint64_t seed, std::string name = "generator");
nn::Network build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed,
                                std::string name = "discriminator");

/// Shape-checked forward passes for batches in [-1, 1].
Tensor generator_forward(const nn::Network& g, int input_size, const Tensor& x);
Tensor discriminator_forward(const nn::Network& d, int input_size, const Tensor& x);

/// The four networks plus optimizer state. Naming follows the loss terms:
/// g_lab maps uw images to the lab domain and is judged by d_lab; g_uw
/// maps lab images to the uw domain and is judged by d_uw.
struct CycleGanState {
    CycleGanConfig config;
    nn::Network g_uw;
    nn::Network g_lab;
    nn::Network d_uw;
    nn::Network d_lab;
    nn::Adam opt_g_uw;
    nn::Adam opt_g_lab;
    nn::Adam opt_d_uw;
    nn::Adam opt_d_lab;
    std::uint64_t step = 0;

    static CycleGanState create(const CycleGanConfig& cfg, std::uint64_t seed, const nn::AdamConfig& adam = {});

    int image_size() const noexcept { return config.generator.input_size; }
    std::uint64_t config_hash() const;

    nn::Checkpoint to_checkpoint() const;
    static CycleGanState from_checkpoint(const nn::Checkpoint& ckpt);
    void save(const std::filesystem::path& path) const;
    static CycleGanState load(const std::filesystem::path& path);

    /// Stable identifier recorded on generated images.
    std::string checkpoint_id() const;
};

inline constexpr int kClassifierInput = 150;

struct LayerShape {
    std::string layer;
    Shape shape;
};

/// The three-block convolutional classifier with optional dropout after
/// the last pooling stage.
struct ClassifierModel {
    nn::Network net;
    double dropout_rate = 0.0;

    /// Output shape after each layer for a single 150x150x3 input.
    std::vector<LayerShape> layer_table() const;

    nn::Checkpoint to_checkpoint() const;
    static ClassifierModel from_checkpoint(const nn::Checkpoint& ckpt);
};

ClassifierModel build_classifier(double dropout_rate, std::uint64_t seed = 0);

/// Raw scores, (N, 5, 1, 1).
Tensor classifier_logits(const ClassifierModel& m, const Tensor& x, const nn::ForwardContext& ctx = {},
                         nn::CachePtr* cache = nullptr);

/// Row-wise softmax of the logits.
Tensor softmax_rows(const Tensor& logits);

/// Probabilities, (N, 5, 1, 1). Input batch is (N, 3, 150, 150) in [0, 1].
Tensor classifier_forward(const ClassifierModel& m, const Tensor& x, const nn::ForwardContext& ctx = {});

}  // namespace uwgan
