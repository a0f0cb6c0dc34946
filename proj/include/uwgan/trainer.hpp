#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uwgan/augment.hpp"
#include "uwgan/dataset.hpp"
#include "uwgan/losses.hpp"
#include "uwgan/models.hpp"

namespace uwgan {

enum class ResizePolicy { short_side_crop, stretch };

std::string_view to_string(ResizePolicy p) noexcept;
ResizePolicy parse_resize_policy(std::string_view s);

/// Brings an image to a square model input.
ImageTensor fit_square(const ImageTensor& image, int size, ResizePolicy policy);

enum class PreprocessOp { blur, hflip, rotate };

std::string_view to_string(PreprocessOp op) noexcept;
PreprocessOp parse_preprocess_op(std::string_view s);

struct TrainConfig {
    int image_size = 256;
    int batch_size = 4;
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double lambda = 10.0;
    double d_loss_scale = 0.5;
    int epochs = 100;
    std::uint64_t seed = 0;
    std::int64_t max_steps = -1;  // global step cap, -1 = none

    std::vector<PreprocessOp> preprocess = {PreprocessOp::blur, PreprocessOp::hflip, PreprocessOp::rotate};
    double blur_sigma_max = 1.0;
    double rotate_degrees = 10.0;
    ResizePolicy resize = ResizePolicy::short_side_crop;

    // architecture; residual_blocks < 0 picks 9 at 256 px and 6 below
    int generator_channels = 64;
    int residual_blocks = -1;
    int discriminator_channels = 64;
    int discriminator_layers = 3;

    std::filesystem::path checkpoint_dir;  // empty: no periodic checkpoints
    std::int64_t checkpoint_every = 0;

    void validate() const;
    CycleGanConfig model_config() const;
    nn::AdamConfig adam() const;
};

/// "full_image" (256 px, batch 4) or "object_image" (128 px, batch 8).
TrainConfig train_preset(std::string_view name);

nlohmann::json to_json(const TrainConfig& cfg);
/// Overlays `j` on `base`. Unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct TrainReport {
    std::vector<LossRow> log;
    double wall_seconds = 0.0;
    long peak_memory_kb = 0;
    std::vector<std::filesystem::path> checkpoints;
};

/// Peak resident set of this process, 0 where unavailable.
long peak_memory_kb();

using StepObserver = std::function<void(const LossRow&)>;

std::int64_t steps_per_epoch(const TrainConfig& cfg, const DomainDataset& ds_uw, const DomainDataset& ds_lab);

/// Model-range batch for one domain at a given global step. Deterministic
/// in (cfg.seed, epoch, step, domain).
Tensor gan_batch(const TrainConfig& cfg, const DomainDataset& ds, Domain domain, std::int64_t epoch,
                 std::int64_t step_in_epoch, std::vector<std::size_t>* indices = nullptr);

/// Trains from scratch, or continues `resume` from its step counter.
std::pair<CycleGanState, TrainReport> train_cyclegan(const TrainConfig& cfg, const DomainDataset& ds_uw,
                                                     const DomainDataset& ds_lab,
                                                     std::optional<CycleGanState> resume = std::nullopt,
                                                     const StepObserver& observer = {});

/// G_uw applied to every lab image; items come back tagged fake with a
/// "fake:" id prefix.
DomainDataset translate_dataset(const CycleGanState& state, const DomainDataset& ds_lab, int batch_size = 4,
                                ResizePolicy resize = ResizePolicy::short_side_crop);

/// Round trip through both generators, starting from `source` domain.
DomainDataset rebuild_dataset(const CycleGanState& state, const DomainDataset& ds, Domain source,
                              int batch_size = 4, ResizePolicy resize = ResizePolicy::short_side_crop);

struct ClassifierTrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
    std::optional<bool> geometric_jitter;  // default: on when dropout > 0
    GeometricJitter jitter;
    double stop_at_accuracy = -1.0;  // early stop on train accuracy, off if < 0

    void validate() const;
};

nlohmann::json to_json(const ClassifierTrainConfig& cfg);
ClassifierTrainConfig classifier_config_from_json(const nlohmann::json& j, ClassifierTrainConfig base = {});

struct EpochMetrics {
    int epoch = 0;
    double loss = 0.0;
    double val_loss = 0.0;
    double accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct ClassifierReport {
    std::vector<EpochMetrics> history;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
    double wall_seconds = 0.0;
    long peak_memory_kb = 0;
};

using EpochObserver = std::function<void(const EpochMetrics&)>;

/// Softmax cross-entropy; optional gradient w.r.t. the logits.
double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad = nullptr,
                     int* correct = nullptr);

/// (N, 3, 150, 150) batch in [0, 1] plus class ids.
Tensor classifier_batch(const DomainDataset& ds, const std::vector<std::size_t>& indices, std::vector<int>& labels);

std::pair<ClassifierModel, ClassifierReport> train_classifier(const ClassifierTrainConfig& cfg,
                                                              const DomainDataset& object_ds, double dropout_rate,
                                                              const EpochObserver& observer = {});

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& history);

}  // namespace uwgan
