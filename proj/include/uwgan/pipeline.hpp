#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwgan/augment.hpp"
#include "uwgan/dataset.hpp"
#include "uwgan/trainer.hpp"

namespace uwgan {

struct PathsSection {
    std::filesystem::path uw;       // underwater photos
    std::filesystem::path lab;      // towing-tank photos
    std::filesystem::path images;   // labeled photos
    std::filesystem::path labels;   // label files; empty = sidecars next to images
    std::filesystem::path objects;  // crop tree; empty = the one `prepare` writes
};

struct AugmentSection {
    AugmentConfig config;
    std::size_t target_count = 0;  // 0: keep the source size
    std::string source = "images"; // images | objects | lab | uw
};

struct GenerateSection {
    std::filesystem::path checkpoint;  // empty = the one `train-gan` writes
    int batch_size = 4;
    bool rebuild = true;
};

struct ClassifierSection {
    ClassifierTrainConfig config;
    double dropout_rate = 0.0;
};

struct FidPairSpec {
    std::string name;
    std::string a;
    std::string b;
};

struct FidSection {
    std::string embedder = "random_conv64";
    std::filesystem::path features;
    std::uint64_t embedder_seed = 20240611;
    int batch_size = 16;
    std::vector<FidPairSpec> pairs;
};

struct ExportSection {
    double augmented_fraction = 1.0;
    double train_ratio = 0.8;
    int input_size = 416;
    int batch_size = 16;
    double learning_rate = 0.01;
    DetectionPreprocessConfig preprocess;
};

struct ReportSection {
    std::vector<std::filesystem::path> inputs;  // empty: whatever logs exist
    int width = 900;
    int height = 500;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output = "runs";
    std::vector<std::string> class_names = default_class_names();
    PathsSection paths;
    AugmentSection augment;
    TrainConfig train_gan;
    GenerateSection generate;
    ClassifierSection train_classifier;
    FidSection fid;
    ExportSection export_yolo;
    ReportSection report;

    nlohmann::json source;  // the merged document, for hashing
    std::uint64_t hash() const;
};

/// YAML or JSON by extension (.json is JSON, anything else YAML).
nlohmann::json load_config_document(const std::filesystem::path& path);
nlohmann::json parse_yaml_text(const std::string& text);

/// `a.b.c=value`; the value is read as a YAML scalar or flow collection.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Full schema check. Unknown keys anywhere are rejected.
PipelineConfig parse_pipeline_config(const nlohmann::json& doc);

/// Names every command accepts.
const std::vector<std::string>& command_names();

struct CommandResult {
    std::filesystem::path run_dir;
    nlohmann::json summary;
};

// Each command writes into <output>/<command>/ including run_metadata.json.
CommandResult cmd_prepare(const PipelineConfig& cfg, std::ostream& log);
CommandResult cmd_augment(const PipelineConfig& cfg, std::ostream& log);
CommandResult cmd_train_gan(const PipelineConfig& cfg, std::ostream& log,
                            const std::filesystem::path& resume = {});
CommandResult cmd_generate(const PipelineConfig& cfg, std::ostream& log);
CommandResult cmd_train_classifier(const PipelineConfig& cfg, std::ostream& log);
CommandResult cmd_fid(const PipelineConfig& cfg, std::ostream& log);
CommandResult cmd_export_yolo(const PipelineConfig& cfg, std::ostream& log);
CommandResult cmd_report(const PipelineConfig& cfg, std::ostream& log);

CommandResult run_command(const std::string& name, const PipelineConfig& cfg, std::ostream& log,
                          const std::filesystem::path& resume = {});

struct YoloExportStats {
    std::size_t originals = 0;
    std::size_t augmented = 0;
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t flipped = 0;
    std::size_t dataset_size() const noexcept { return originals + augmented; }
};

/// Darknet layout under `out`: images/, labels/, train.txt, val.txt,
/// obj.names and dataset.json. `labeled` items must carry a path; labels
/// are looked up with `label_for`.
YoloExportStats export_yolo(const DomainDataset& labeled, const std::filesystem::path& labels_dir,
                            const ExportSection& cfg, std::uint64_t seed, const std::filesystem::path& out);

/// Where an image's label file lives: `<labels_dir>/<source_id>.txt`, or a
/// sidecar next to the image when `labels_dir` is empty.
std::filesystem::path label_path_for(const DomainImage& item, const std::filesystem::path& labels_dir);

/// Horizontal mirror of a box set: cx -> 1 - cx.
std::vector<BoundingBoxLabel> mirror_labels(std::vector<BoundingBoxLabel> labels);

/// Source id flattened into a file name stem.
std::string flat_id(std::string_view source_id);

}  // namespace uwgan
