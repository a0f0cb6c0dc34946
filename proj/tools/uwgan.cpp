// uwgan: command-line driver for the augmentation pipeline.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uwgan/error.hpp"
#include "uwgan/pipeline.hpp"

namespace {

std::string json_string(const std::string& s)
{
    return nlohmann::json(s).dump();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"uwgan: synthetic underwater images from towing-tank photos"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> sets;
    std::string output;
    long long seed = -1;
    app.add_option("-c,--config", config_path, "YAML or JSON pipeline config");
    app.add_option("--set", sets, "override a config key, e.g. --set train_gan.epochs=5")->take_all();
    app.add_option("-o,--output", output, "output root (default: runs)");
    app.add_option("--seed", seed, "global seed");

    auto* prepare = app.add_subcommand("prepare", "scan datasets, crop labeled objects, write a manifest");
    auto* augment = app.add_subcommand("augment", "classic augmentation up to augment.target_count");
    std::size_t target = 0;
    augment->add_option("--target", target, "output size");

    auto* train_gan = app.add_subcommand("train-gan", "train the CycleGAN on paths.uw / paths.lab");
    std::string preset, resume;
    long long max_steps = -2, gan_epochs = -1;
    train_gan->add_option("--preset", preset, "full_image | object_image");
    train_gan->add_option("--resume", resume, "checkpoint to continue from");
    train_gan->add_option("--max-steps", max_steps, "stop after this many global steps");
    train_gan->add_option("--epochs", gan_epochs, "epochs");

    auto* generate = app.add_subcommand("generate", "translate lab images with a trained checkpoint");
    std::string checkpoint;
    generate->add_option("--checkpoint", checkpoint, "CycleGAN checkpoint (default: train-gan output)");

    auto* train_cls = app.add_subcommand("train-classifier", "train the five-class CNN on the object crops");
    double dropout = -1.0;
    long long cls_epochs = -1;
    train_cls->add_option("--dropout", dropout, "dropout rate (0 or 0.2)");
    train_cls->add_option("--epochs", cls_epochs, "epochs");

    auto* fid = app.add_subcommand("fid", "Frechet distance between image sets");
    std::vector<std::string> pairs;
    std::string embedder;
    fid->add_option("--pair", pairs, "A:B image-set pair, repeatable");
    fid->add_option("--embedder", embedder, "random_conv64 | inception_pool3 | precomputed");

    auto* export_yolo = app.add_subcommand("export-yolo", "write a darknet-layout detection dataset");
    double fraction = -1.0;
    export_yolo->add_option("--fraction", fraction, "share of extra preprocessed copies");

    auto* report = app.add_subcommand("report", "plot loss / accuracy curves from CSV logs");
    std::vector<std::string> inputs;
    report->add_option("--input", inputs, "CSV log, repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        nlohmann::json doc = config_path.empty() ? nlohmann::json::object() : uwgan::load_config_document(config_path);
        auto set = [&](const std::string& kv) { uwgan::apply_override(doc, kv); };
        for (const auto& kv : sets) {
            set(kv);
        }
        if (!output.empty()) {
            set("output=" + json_string(output));
        }
        if (seed >= 0) {
            set("seed=" + std::to_string(seed));
        }
        if (!preset.empty()) {
            set("train_gan.preset=" + json_string(preset));
        }
        if (max_steps != -2) {
            set("train_gan.max_steps=" + std::to_string(max_steps));
        }
        if (gan_epochs >= 0) {
            set("train_gan.epochs=" + std::to_string(gan_epochs));
        }
        if (!checkpoint.empty()) {
            set("generate.checkpoint=" + json_string(checkpoint));
        }
        if (dropout >= 0.0) {
            set("train_classifier.dropout_rate=" + std::to_string(dropout));
        }
        if (cls_epochs >= 0) {
            set("train_classifier.epochs=" + std::to_string(cls_epochs));
        }
        if (target > 0) {
            set("augment.target_count=" + std::to_string(target));
        }
        if (fraction >= 0.0) {
            set("export_yolo.augmented_fraction=" + std::to_string(fraction));
        }
        if (!embedder.empty()) {
            set("fid.embedder=" + json_string(embedder));
        }
        if (!pairs.empty()) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& p : pairs) {
                const auto colon = p.find(':');
                if (colon == std::string::npos) {
                    throw uwgan::ValidationError("--pair expects A:B, got '" + p + "'");
                }
                arr.push_back({{"a", p.substr(0, colon)}, {"b", p.substr(colon + 1)}});
            }
            doc["fid"]["pairs"] = arr;
        }
        if (!inputs.empty()) {
            doc["report"]["inputs"] = inputs;
        }

        // schema check happens here, before any work
        const uwgan::PipelineConfig cfg = uwgan::parse_pipeline_config(doc);

        std::string name;
        for (auto* sub : {prepare, augment, train_gan, generate, train_cls, fid, export_yolo, report}) {
            if (sub->parsed()) {
                name = sub->get_name();
            }
        }
        const auto result = uwgan::run_command(name, cfg, std::cout, resume);
        std::cout << "run metadata: " << (result.run_dir / "run_metadata.json").string() << '\n';
        return 0;
    } catch (const uwgan::ValidationError& e) {
        std::cerr << "uwgan: invalid input: " << e.what() << '\n';
        return 1;
    } catch (const uwgan::RuntimeFailure& e) {
        std::cerr << "uwgan: failed: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "uwgan: failed: " << e.what() << '\n';
        return 2;
    }
}
