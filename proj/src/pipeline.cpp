#include "uwgan/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "uwgan/error.hpp"
#include "uwgan/fid.hpp"
#include "uwgan/json_util.hpp"
#include "uwgan/nn/checkpoint.hpp"
#include "uwgan/plot.hpp"
#include "uwgan/rng.hpp"

#ifndef UWGAN_GIT_DESCRIBE
#define UWGAN_GIT_DESCRIBE "unknown"
#endif

namespace uwgan {

namespace fs = std::filesystem;
namespace ju = jsonutil;
using nlohmann::json;

// ---------------------------------------------------------------- config

std::uint64_t PipelineConfig::hash() const
{
    return nn::fnv1a64(source.dump());
}

namespace {

json yaml_to_json(const YAML::Node& node)
{
    switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
        return nullptr;
    case YAML::NodeType::Sequence: {
        json arr = json::array();
        for (const auto& child : node) {
            arr.push_back(yaml_to_json(child));
        }
        return arr;
    }
    case YAML::NodeType::Map: {
        json obj = json::object();
        for (const auto& kv : node) {
            obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
        }
        return obj;
    }
    case YAML::NodeType::Scalar:
        break;
    }
    const std::string s = node.Scalar();
    if (node.Tag() == "!") {  // quoted
        return s;
    }
    if (s == "~" || s == "null" || s.empty()) {
        return nullptr;
    }
    if (s == "true" || s == "True") {
        return true;
    }
    if (s == "false" || s == "False") {
        return false;
    }
    const char* b = s.data();
    const char* e = s.data() + s.size();
    std::int64_t i = 0;
    if (auto r = std::from_chars(b, e, i); r.ec == std::errc() && r.ptr == e) {
        return i;
    }
    double d = 0.0;
    if (auto r = std::from_chars(b, e, d); r.ec == std::errc() && r.ptr == e) {
        return d;
    }
    return s;
}

}  // namespace

json parse_yaml_text(const std::string& text)
{
    try {
        return yaml_to_json(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw ValidationError(std::string("YAML parse error: ") + e.what());
    }
}

json load_config_document(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw ValidationError("cannot read config file " + path.string());
    }
    std::stringstream ss;
    ss << is.rdbuf();
    json doc;
    if (path.extension() == ".json") {
        try {
            doc = json::parse(ss.str());
        } catch (const json::exception& e) {
            throw ValidationError("config " + path.string() + ": " + e.what());
        }
    } else {
        doc = parse_yaml_text(ss.str());
    }
    if (doc.is_null()) {
        doc = json::object();
    }
    if (!doc.is_object()) {
        throw ValidationError("config " + path.string() + " must be a mapping at the top level");
    }
    return doc;
}

void apply_override(json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("override '" + assignment + "' is not of the form key.path=value");
    }
    const std::string key = assignment.substr(0, eq);
    const json value = parse_yaml_text(assignment.substr(eq + 1));
    // edit a copy so a rejected override leaves `doc` untouched
    json edited = doc;
    json* cur = &edited;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw ValidationError("override '" + assignment + "' has an empty key segment");
        }
        if (!cur->is_object()) {
            if (!cur->is_null()) {
                throw ValidationError("override '" + assignment + "' descends into a non-mapping");
            }
            *cur = json::object();
        }
        if (dot == std::string::npos) {
            (*cur)[part] = value;
            doc = std::move(edited);
            return;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
}

namespace {

Range read_range(const json& j, const char* key, Range r, std::string_view sec)
{
    auto it = j.find(key);
    if (it == j.end()) {
        return r;
    }
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
        throw ValidationError("config key '" + std::string(sec) + "." + key + "' must be [lo, hi]");
    }
    return {(*it)[0].get<double>(), (*it)[1].get<double>()};
}

fs::path read_path(const json& j, const char* key, fs::path p, std::string_view sec)
{
    std::string s = p.string();
    ju::read(j, key, s, sec);
    return s;
}

const json& section(const json& doc, const char* name)
{
    static const json empty = json::object();
    auto it = doc.find(name);
    if (it == doc.end() || it->is_null()) {
        return empty;
    }
    ju::require_object(*it, name);
    return *it;
}

}  // namespace

PipelineConfig parse_pipeline_config(const json& doc)
{
    ju::reject_unknown(doc,
                       {"seed", "output", "class_names", "paths", "augment", "train_gan", "generate",
                        "train_classifier", "fid", "export_yolo", "report"},
                       "<root>");
    PipelineConfig c;
    c.source = doc;
    ju::read(doc, "seed", c.seed, "<root>");
    c.output = read_path(doc, "output", c.output, "<root>");
    ju::read(doc, "class_names", c.class_names, "<root>");
    if (c.class_names.size() != kClassCount) {
        throw ValidationError("class_names must list exactly " + std::to_string(kClassCount) + " names");
    }

    {
        const json& j = section(doc, "paths");
        ju::reject_unknown(j, {"uw", "lab", "images", "labels", "objects"}, "paths");
        c.paths.uw = read_path(j, "uw", {}, "paths");
        c.paths.lab = read_path(j, "lab", {}, "paths");
        c.paths.images = read_path(j, "images", {}, "paths");
        c.paths.labels = read_path(j, "labels", {}, "paths");
        c.paths.objects = read_path(j, "objects", {}, "paths");
    }
    {
        constexpr const char* sec = "augment";
        const json& j = section(doc, sec);
        ju::reject_unknown(j,
                           {"target_count", "source", "ops", "rotate_degrees", "saturation_factor",
                            "exposure_factor", "noise_stddev", "probability"},
                           sec);
        auto& a = c.augment;
        ju::read(j, "target_count", a.target_count, sec);
        ju::read(j, "source", a.source, sec);
        if (a.source != "images" && a.source != "objects" && a.source != "lab" && a.source != "uw") {
            throw ValidationError("augment.source must be one of images | objects | lab | uw");
        }
        if (j.contains("ops")) {
            std::vector<std::string> names;
            ju::read(j, "ops", names, sec);
            a.config.ops.clear();
            for (const auto& n : names) {
                a.config.ops.push_back(parse_augment_op(n));
            }
        }
        a.config.rotate_degrees = read_range(j, "rotate_degrees", a.config.rotate_degrees, sec);
        a.config.saturation_factor = read_range(j, "saturation_factor", a.config.saturation_factor, sec);
        a.config.exposure_factor = read_range(j, "exposure_factor", a.config.exposure_factor, sec);
        a.config.noise_stddev = read_range(j, "noise_stddev", a.config.noise_stddev, sec);
        ju::read(j, "probability", a.config.probability, sec);
        a.config.validate();
    }
    {
        json j = section(doc, "train_gan");
        if (!j.contains("seed")) {
            j["seed"] = c.seed;
        }
        c.train_gan = train_config_from_json(j);
    }
    {
        constexpr const char* sec = "generate";
        const json& j = section(doc, sec);
        ju::reject_unknown(j, {"checkpoint", "batch_size", "rebuild"}, sec);
        c.generate.checkpoint = read_path(j, "checkpoint", {}, sec);
        ju::read(j, "batch_size", c.generate.batch_size, sec);
        ju::read(j, "rebuild", c.generate.rebuild, sec);
        if (c.generate.batch_size < 1) {
            throw ValidationError("generate.batch_size must be >= 1");
        }
    }
    {
        json j = section(doc, "train_classifier");
        if (!j.contains("seed")) {
            j["seed"] = c.seed;
        }
        c.train_classifier.config = classifier_config_from_json(j);
        ju::read(j, "dropout_rate", c.train_classifier.dropout_rate, "train_classifier");
        if (c.train_classifier.dropout_rate < 0.0 || c.train_classifier.dropout_rate >= 1.0) {
            throw ValidationError("train_classifier.dropout_rate must lie in [0, 1)");
        }
    }
    {
        constexpr const char* sec = "fid";
        const json& j = section(doc, sec);
        ju::reject_unknown(j, {"embedder", "features", "embedder_seed", "batch_size", "pairs"}, sec);
        auto& f = c.fid;
        ju::read(j, "embedder", f.embedder, sec);
        f.features = read_path(j, "features", {}, sec);
        ju::read(j, "embedder_seed", f.embedder_seed, sec);
        ju::read(j, "batch_size", f.batch_size, sec);
        if (f.embedder != "random_conv64" && f.embedder != "inception_pool3" && f.embedder != "precomputed") {
            throw ValidationError("fid.embedder must be random_conv64 | inception_pool3 | precomputed");
        }
        if (f.embedder != "random_conv64" && f.features.empty()) {
            throw ValidationError("fid.features is required for embedder " + f.embedder);
        }
        if (f.batch_size < 1) {
            throw ValidationError("fid.batch_size must be >= 1");
        }
        if (auto it = j.find("pairs"); it != j.end()) {
            if (!it->is_array()) {
                throw ValidationError("fid.pairs must be a list");
            }
            for (const auto& p : *it) {
                ju::reject_unknown(p, {"name", "a", "b"}, "fid.pairs[]");
                FidPairSpec spec;
                ju::read(p, "a", spec.a, "fid.pairs[]");
                ju::read(p, "b", spec.b, "fid.pairs[]");
                if (spec.a.empty() || spec.b.empty()) {
                    throw ValidationError("each fid pair needs 'a' and 'b'");
                }
                spec.name = spec.a + "_vs_" + spec.b;
                ju::read(p, "name", spec.name, "fid.pairs[]");
                f.pairs.push_back(spec);
            }
        }
    }
    {
        constexpr const char* sec = "export_yolo";
        const json& j = section(doc, sec);
        ju::reject_unknown(j,
                           {"augmented_fraction", "train_ratio", "input_size", "batch_size", "learning_rate",
                            "hflip_prob", "blur_sigma", "salt_pepper_fraction"},
                           sec);
        auto& e = c.export_yolo;
        ju::read(j, "augmented_fraction", e.augmented_fraction, sec);
        ju::read(j, "train_ratio", e.train_ratio, sec);
        ju::read(j, "input_size", e.input_size, sec);
        ju::read(j, "batch_size", e.batch_size, sec);
        ju::read(j, "learning_rate", e.learning_rate, sec);
        ju::read(j, "hflip_prob", e.preprocess.hflip_prob, sec);
        e.preprocess.blur_sigma = read_range(j, "blur_sigma", e.preprocess.blur_sigma, sec);
        ju::read(j, "salt_pepper_fraction", e.preprocess.salt_pepper_fraction, sec);
        e.preprocess.validate();
        if (e.augmented_fraction < 0.0 || !(e.train_ratio > 0.0 && e.train_ratio < 1.0)) {
            throw ValidationError("export_yolo: augmented_fraction >= 0 and 0 < train_ratio < 1 required");
        }
    }
    {
        constexpr const char* sec = "report";
        const json& j = section(doc, sec);
        ju::reject_unknown(j, {"inputs", "width", "height"}, sec);
        std::vector<std::string> inputs;
        ju::read(j, "inputs", inputs, sec);
        for (auto& s : inputs) {
            c.report.inputs.emplace_back(s);
        }
        ju::read(j, "width", c.report.width, sec);
        ju::read(j, "height", c.report.height, sec);
        if (c.report.width < 200 || c.report.height < 150) {
            throw ValidationError("report plots must be at least 200 x 150");
        }
    }
    return c;
}

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names = {"prepare", "augment",          "train-gan", "generate",
                                                   "train-classifier", "fid", "export-yolo", "report"};
    return names;
}

// --------------------------------------------------------------- helpers

namespace {

using Clock = std::chrono::system_clock;

std::string iso_time(Clock::time_point t)
{
    const std::time_t tt = Clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

void write_json(const fs::path& path, const json& j)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw RuntimeFailure("cannot write " + path.string());
    }
    os << j.dump(2) << '\n';
}

class Run {
public:
    Run(const PipelineConfig& cfg, std::string command)
        : cfg_(cfg), command_(std::move(command)), dir_(cfg.output / command_), start_(Clock::now()),
          t0_(std::chrono::steady_clock::now())
    {
        fs::create_directories(dir_);
    }

    const fs::path& dir() const { return dir_; }

    CommandResult finish(json summary, json hyper = nullptr) const
    {
        json meta = {
            {"command", command_},
            {"config_hash", hex64(cfg_.hash())},
            {"seed", cfg_.seed},
            {"git_describe", UWGAN_GIT_DESCRIBE},
            {"started_at", iso_time(start_)},
            {"wall_clock_seconds",
             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count()},
            {"config", cfg_.source},
        };
        if (!hyper.is_null()) {
            meta["hyperparameters"] = hyper;
        }
        meta["summary"] = summary;
        write_json(dir_ / "run_metadata.json", meta);
        return {dir_, std::move(summary)};
    }

private:
    const PipelineConfig& cfg_;
    std::string command_;
    fs::path dir_;
    Clock::time_point start_;
    std::chrono::steady_clock::time_point t0_;
};

fs::path require_dir(const fs::path& p, const std::string& what)
{
    if (p.empty()) {
        throw ValidationError("config is missing paths." + what);
    }
    if (!fs::is_directory(p)) {
        throw ValidationError("paths." + what + " is not a directory: " + p.string());
    }
    return p;
}

fs::path upstream_dir(const fs::path& p, const char* producer)
{
    if (!fs::is_directory(p)) {
        throw RuntimeFailure("missing " + p.string() + "; run `uwgan " + std::string(producer) + "` first");
    }
    return p;
}

json item_sidecar(const DomainImage& item)
{
    json j = {
        {"source_id", item.source_id},
        {"domain", std::string(to_string(item.domain))},
        {"provenance", std::string(to_string(item.provenance))},
    };
    if (item.class_id >= 0) {
        j["class_id"] = item.class_id;
    }
    if (item.checkpoint_id) {
        j["checkpoint_id"] = *item.checkpoint_id;
    }
    if (item.augment) {
        j["augment"] = {{"parent_id", item.augment->parent_id}, {"ops", item.augment->ops}, {"seed", item.augment->seed}};
    }
    return j;
}

// Writes `<dir>/<source_id>.png` plus a JSON sidecar. Ids may contain '/'.
void write_dataset(const DomainDataset& ds, const fs::path& dir, std::string_view strip_prefix = {})
{
    for (const auto& item : ds) {
        std::string rel = item.source_id;
        if (!strip_prefix.empty() && rel.rfind(strip_prefix, 0) == 0) {
            rel = rel.substr(strip_prefix.size());
        }
        const fs::path png = dir / (rel + ".png");
        save_png(item.image(), png);
        write_json(dir / (rel + ".json"), item_sidecar(item));
    }
}

}  // namespace

std::string flat_id(std::string_view source_id)
{
    std::string s(source_id);
    std::replace(s.begin(), s.end(), '/', '_');
    return s;
}

fs::path label_path_for(const DomainImage& item, const fs::path& labels_dir)
{
    if (labels_dir.empty()) {
        fs::path p = item.path;
        return p.replace_extension(".txt");
    }
    return labels_dir / (item.source_id + ".txt");
}

std::vector<BoundingBoxLabel> mirror_labels(std::vector<BoundingBoxLabel> labels)
{
    for (auto& l : labels) {
        l.cx = 1.0 - l.cx;
    }
    return labels;
}

// --------------------------------------------------------------- prepare

CommandResult cmd_prepare(const PipelineConfig& cfg, std::ostream& log)
{
    Run run(cfg, "prepare");
    const fs::path images = require_dir(cfg.paths.images, "images");
    const DomainDataset labeled = scan_dataset(images, Domain::lab, cfg.class_names);
    const fs::path objects = run.dir() / "objects";
    fs::remove_all(objects);

    std::vector<std::string> warnings;
    std::vector<std::size_t> per_class(kClassCount, 0);
    std::vector<std::string> crops;
    std::size_t with_labels = 0;
    for (const auto& item : labeled) {
        const fs::path lp = label_path_for(item, cfg.paths.labels);
        if (!fs::exists(lp)) {
            warnings.push_back(item.source_id + ": no label file (" + lp.string() + ")");
            continue;
        }
        ++with_labels;
        const auto labels = parse_labels(lp);
        const CropResult res = crop_objects(item.image(), labels);
        for (const auto& w : res.warnings) {
            warnings.push_back(item.source_id + ": " + w);
        }
        for (const auto& c : res.crops) {
            const fs::path out = crop_path(objects, cfg.class_names, item.source_id, c);
            save_png(c.image, out);
            crops.push_back(fs::relative(out, objects).generic_string());
            ++per_class[static_cast<std::size_t>(c.class_id)];
        }
    }

    json manifest = {
        {"class_names", cfg.class_names},
        {"labeled_images", labeled.size()},
        {"images_with_labels", with_labels},
        {"objects", crops.size()},
        {"crops", crops},
    };
    json pc = json::object();
    for (std::size_t c = 0; c < kClassCount; ++c) {
        pc[cfg.class_names[c]] = per_class[c];
    }
    manifest["per_class"] = pc;
    if (!cfg.paths.uw.empty()) {
        manifest["uw_images"] = scan_dataset(require_dir(cfg.paths.uw, "uw"), Domain::uw).size();
    }
    if (!cfg.paths.lab.empty()) {
        manifest["lab_images"] = scan_dataset(require_dir(cfg.paths.lab, "lab"), Domain::lab).size();
    }
    const std::string hash = hex64(nn::fnv1a64(manifest.dump()));
    manifest["manifest_hash"] = hash;
    write_json(run.dir() / "manifest.json", manifest);
    {
        std::ofstream os(run.dir() / "warnings.txt", std::ios::trunc);
        for (const auto& w : warnings) {
            os << w << '\n';
        }
    }

    log << "dataset           images   objects\n";
    log << "labeled set       " << std::setw(6) << labeled.size() << "   " << std::setw(7) << crops.size() << '\n';
    for (std::size_t c = 0; c < kClassCount; ++c) {
        log << "  " << std::left << std::setw(16) << cfg.class_names[c] << std::right << "         "
            << std::setw(7) << per_class[c] << '\n';
    }
    if (manifest.contains("uw_images")) {
        log << "underwater        " << std::setw(6) << manifest["uw_images"].get<std::size_t>() << '\n';
    }
    if (manifest.contains("lab_images")) {
        log << "towing tank       " << std::setw(6) << manifest["lab_images"].get<std::size_t>() << '\n';
    }
    if (!warnings.empty()) {
        log << warnings.size() << " warning(s), see " << (run.dir() / "warnings.txt").string() << '\n';
    }
    json summary = {{"labeled_images", labeled.size()}, {"objects", crops.size()}, {"warnings", warnings.size()},
                    {"manifest_hash", hash}};
    return run.finish(summary);
}

// --------------------------------------------------------------- augment

namespace {

fs::path objects_dir(const PipelineConfig& cfg)
{
    if (!cfg.paths.objects.empty()) {
        return require_dir(cfg.paths.objects, "objects");
    }
    return upstream_dir(cfg.output / "prepare" / "objects", "prepare");
}

}  // namespace

CommandResult cmd_augment(const PipelineConfig& cfg, std::ostream& log)
{
    Run run(cfg, "augment");
    const auto& a = cfg.augment;
    DomainDataset src(cfg.class_names);
    if (a.source == "images") {
        src = scan_dataset(require_dir(cfg.paths.images, "images"), Domain::lab, cfg.class_names);
    } else if (a.source == "objects") {
        src = scan_object_tree(objects_dir(cfg), Domain::lab, cfg.class_names);
    } else if (a.source == "lab") {
        src = scan_dataset(require_dir(cfg.paths.lab, "lab"), Domain::lab, cfg.class_names);
    } else {
        src = scan_dataset(require_dir(cfg.paths.uw, "uw"), Domain::uw, cfg.class_names);
    }
    const std::size_t target = a.target_count == 0 ? src.size() : a.target_count;
    const DomainDataset out = expand_dataset(src, target, a.config, derive_seed(cfg.seed, {0xa06}));
    const fs::path dir = run.dir() / "images";
    fs::remove_all(dir);
    write_dataset(out, dir);
    log << "augmented " << src.size() << " -> " << out.size() << " images in " << dir.string() << '\n';
    return run.finish({{"source", a.source}, {"source_count", src.size()}, {"count", out.size()}});
}

// ------------------------------------------------------------- train-gan

CommandResult cmd_train_gan(const PipelineConfig& cfg, std::ostream& log, const fs::path& resume)
{
    Run run(cfg, "train-gan");
    const DomainDataset uw = scan_dataset(require_dir(cfg.paths.uw, "uw"), Domain::uw, cfg.class_names);
    const DomainDataset lab = scan_dataset(require_dir(cfg.paths.lab, "lab"), Domain::lab, cfg.class_names);
    TrainConfig tc = cfg.train_gan;
    if (tc.checkpoint_every > 0 && tc.checkpoint_dir.empty()) {
        tc.checkpoint_dir = run.dir() / "checkpoints";
    }
    std::optional<CycleGanState> start;
    if (!resume.empty()) {
        if (!fs::exists(resume)) {
            throw RuntimeFailure("resume checkpoint not found: " + resume.string());
        }
        start = CycleGanState::load(resume);
        log << "resuming from step " << start->step << '\n';
    }
    const std::int64_t spe = steps_per_epoch(tc, uw, lab);
    log << "train-gan: " << uw.size() << " uw / " << lab.size() << " lab images, " << spe << " steps/epoch, "
        << tc.epochs << " epochs\n";

    const fs::path csv = run.dir() / "losses.csv";
    std::ofstream os(csv, resume.empty() ? std::ios::trunc : std::ios::app);
    if (!os) {
        throw RuntimeFailure("cannot write " + csv.string());
    }
    if (resume.empty() || fs::file_size(csv) == 0) {
        write_loss_csv_header(os);
    }
    const std::int64_t every = std::max<std::int64_t>(1, spe);
    auto [state, report] = train_cyclegan(tc, uw, lab, std::move(start), [&](const LossRow& row) {
        write_loss_csv_row(os, row);
        if ((row.step + 1) % every == 0) {
            os.flush();
            log << "epoch " << row.epoch + 1 << " step " << row.step + 1 << "  total " << row.record.total
                << "  gan " << row.record.gan_total << "  cycle " << row.record.cycle_total << '\n';
        }
    });
    os.close();
    const fs::path ckpt = run.dir() / "checkpoint.ckpt";
    state.save(ckpt);

    json ckpts = json::array();
    for (const auto& p : report.checkpoints) {
        ckpts.push_back(p.string());
    }
    json summary = {{"steps", state.step},
                    {"logged_steps", report.log.size()},
                    {"checkpoint", ckpt.string()},
                    {"checkpoint_id", state.checkpoint_id()},
                    {"periodic_checkpoints", ckpts},
                    {"wall_seconds", report.wall_seconds},
                    {"peak_memory_kb", report.peak_memory_kb}};
    if (!report.log.empty()) {
        summary["final_total"] = report.log.back().record.total;
    }
    log << "saved " << ckpt.string() << '\n';
    return run.finish(summary, to_json(tc));
}

// -------------------------------------------------------------- generate

CommandResult cmd_generate(const PipelineConfig& cfg, std::ostream& log)
{
    Run run(cfg, "generate");
    const fs::path ckpt = cfg.generate.checkpoint.empty() ? cfg.output / "train-gan" / "checkpoint.ckpt"
                                                          : cfg.generate.checkpoint;
    if (!fs::exists(ckpt)) {
        throw RuntimeFailure("no GAN checkpoint at " + ckpt.string() + "; run `uwgan train-gan` first");
    }
    const CycleGanState state = CycleGanState::load(ckpt);
    const auto resize = cfg.train_gan.resize;
    const int bs = cfg.generate.batch_size;
    const DomainDataset lab = scan_dataset(require_dir(cfg.paths.lab, "lab"), Domain::lab, cfg.class_names);

    json summary = {{"checkpoint", ckpt.string()}, {"checkpoint_id", state.checkpoint_id()}};
    const DomainDataset fake = translate_dataset(state, lab, bs, resize);
    fs::remove_all(run.dir() / "lab_fake");
    write_dataset(fake, run.dir() / "lab_fake", "fake:");
    summary["lab_fake"] = fake.size();
    log << "lab_fake: " << fake.size() << " images\n";
    if (cfg.generate.rebuild) {
        const DomainDataset lab_rebuild = rebuild_dataset(state, lab, Domain::lab, bs, resize);
        fs::remove_all(run.dir() / "lab_rebuild");
        write_dataset(lab_rebuild, run.dir() / "lab_rebuild", "rebuild:");
        summary["lab_rebuild"] = lab_rebuild.size();
        log << "lab_rebuild: " << lab_rebuild.size() << " images\n";
        if (!cfg.paths.uw.empty()) {
            const DomainDataset uw = scan_dataset(require_dir(cfg.paths.uw, "uw"), Domain::uw, cfg.class_names);
            const DomainDataset uw_rebuild = rebuild_dataset(state, uw, Domain::uw, bs, resize);
            fs::remove_all(run.dir() / "uw_rebuild");
            write_dataset(uw_rebuild, run.dir() / "uw_rebuild", "rebuild:");
            summary["uw_rebuild"] = uw_rebuild.size();
            log << "uw_rebuild: " << uw_rebuild.size() << " images\n";
        }
    }
    return run.finish(summary);
}

// ------------------------------------------------------ train-classifier

CommandResult cmd_train_classifier(const PipelineConfig& cfg, std::ostream& log)
{
    Run run(cfg, "train-classifier");
    const DomainDataset objects = scan_object_tree(objects_dir(cfg), Domain::lab, cfg.class_names);
    const auto& sec = cfg.train_classifier;
    log << "train-classifier: " << objects.size() << " objects, dropout " << sec.dropout_rate << '\n';
    auto [model, report] = train_classifier(sec.config, objects, sec.dropout_rate, [&](const EpochMetrics& m) {
        log << "epoch " << m.epoch << "  loss " << m.loss << "  accuracy " << m.accuracy << "  val_loss "
            << m.val_loss << "  val_accuracy " << m.val_accuracy << '\n';
    });
    write_history_csv(run.dir() / "history.csv", report.history);
    model.to_checkpoint().save(run.dir() / "model.ckpt");
    json summary = {{"train_size", report.train_size},
                    {"val_size", report.val_size},
                    {"epochs_run", report.history.size()},
                    {"wall_seconds", report.wall_seconds},
                    {"peak_memory_kb", report.peak_memory_kb}};
    if (!report.history.empty()) {
        summary["final_accuracy"] = report.history.back().accuracy;
        summary["final_val_accuracy"] = report.history.back().val_accuracy;
    }
    json hyper = to_json(sec.config);
    hyper["dropout_rate"] = sec.dropout_rate;
    return run.finish(summary, hyper);
}

// ------------------------------------------------------------------- fid

namespace {

DomainDataset resolve_set(const PipelineConfig& cfg, const std::string& name)
{
    if (name == "uw_real") {
        return scan_dataset(require_dir(cfg.paths.uw, "uw"), Domain::uw, cfg.class_names);
    }
    if (name == "lab_real") {
        return scan_dataset(require_dir(cfg.paths.lab, "lab"), Domain::lab, cfg.class_names);
    }
    if (name == "lab_fake" || name == "lab_rebuild" || name == "uw_rebuild") {
        const Domain d = name == "uw_rebuild" ? Domain::uw : Domain::lab;
        return scan_dataset(upstream_dir(cfg.output / "generate" / name, "generate"), d, cfg.class_names);
    }
    if (name == "augmented") {
        return scan_dataset(upstream_dir(cfg.output / "augment" / "images", "augment"), Domain::lab,
                            cfg.class_names);
    }
    if (name == "objects") {
        return scan_dataset(objects_dir(cfg), Domain::lab, cfg.class_names);
    }
    if (fs::is_directory(name)) {
        return scan_dataset(name, Domain::lab, cfg.class_names);
    }
    throw ValidationError("unknown image set '" + name +
                          "' (uw_real, lab_real, lab_fake, lab_rebuild, uw_rebuild, augmented, objects, or a "
                          "directory)");
}

}  // namespace

CommandResult cmd_fid(const PipelineConfig& cfg, std::ostream& log)
{
    Run run(cfg, "fid");
    std::vector<FidPairSpec> specs = cfg.fid.pairs;
    if (specs.empty()) {
        specs.push_back({"lab_real_vs_lab_fake", "lab_real", "lab_fake"});
    }
    const auto embedder = make_embedder(cfg.fid.embedder, cfg.fid.features, cfg.fid.embedder_seed);
    std::map<std::string, DomainDataset> sets;
    for (const auto& s : specs) {
        for (const auto& n : {s.a, s.b}) {
            if (!sets.contains(n)) {
                sets.emplace(n, resolve_set(cfg, n));
            }
        }
    }
    std::vector<FidPair> pairs;
    for (const auto& s : specs) {
        pairs.push_back({s.name, &sets.at(s.a), &sets.at(s.b)});
    }
    const auto rows = fid_report(pairs, *embedder, cfg.fid.batch_size);
    write_fid_csv(run.dir() / "fid.csv", rows);
    write_json(run.dir() / "fid.json", to_json(rows));
    for (const auto& r : rows) {
        log << std::left << std::setw(32) << r.pair << std::right << "  fid " << r.fid << "  (" << r.n_a << " vs "
            << r.n_b << ", " << r.embedder << (r.epsilon_applied ? ", eps" : "") << ")\n";
    }
    return run.finish({{"rows", to_json(rows)}});
}

// ----------------------------------------------------------- export-yolo

YoloExportStats export_yolo(const DomainDataset& labeled, const fs::path& labels_dir, const ExportSection& cfg,
                            std::uint64_t seed, const fs::path& out)
{
    if (labeled.size() < 2) {
        throw ValidationError("export_yolo needs at least 2 labeled images");
    }
    cfg.preprocess.validate();
    fs::remove_all(out / "images");
    fs::remove_all(out / "labels");
    fs::create_directories(out / "images");
    fs::create_directories(out / "labels");

    const auto [train, val] = split_dataset(labeled, cfg.train_ratio, seed);
    std::set<std::string> train_ids;
    for (const auto& item : train) {
        train_ids.insert(item.source_id);
    }

    YoloExportStats st;
    std::vector<std::string> train_list, val_list, warnings;
    std::vector<std::vector<BoundingBoxLabel>> all_labels;
    all_labels.reserve(labeled.size());
    auto emit = [&](const std::string& parent, const std::string& name, const ImageTensor& img,
                    const std::vector<BoundingBoxLabel>& labels) {
        save_png(img, out / "images" / (name + ".png"));
        write_labels(labels, out / "labels" / (name + ".txt"));
        const std::string rel = "images/" + name + ".png";
        if (train_ids.contains(parent)) {
            train_list.push_back(rel);
        } else {
            val_list.push_back(rel);
        }
    };

    for (const auto& item : labeled) {
        const fs::path lp = label_path_for(item, labels_dir);
        std::vector<BoundingBoxLabel> labels;
        if (fs::exists(lp)) {
            labels = parse_labels(lp);
        } else {
            warnings.push_back(item.source_id + ": no label file, exported as a negative");
        }
        emit(item.source_id, flat_id(item.source_id), item.image(), labels);
        all_labels.push_back(std::move(labels));
        ++st.originals;
    }
    const auto n = static_cast<double>(labeled.size());
    const auto extra = static_cast<std::size_t>(std::floor(cfg.augmented_fraction * n + 0.5));
    for (std::size_t k = 0; k < extra; ++k) {
        const std::size_t p = k % labeled.size();
        const DomainImage& parent = labeled[p];
        const DetectionResult det = detection_preprocess(parent.image(), cfg.preprocess, derive_seed(seed, {0xde7, k}));
        const auto labels = det.flipped ? mirror_labels(all_labels[p]) : all_labels[p];
        st.flipped += det.flipped ? 1 : 0;
        emit(parent.source_id, flat_id(parent.source_id) + "~det" + std::to_string(k), det.image, labels);
        ++st.augmented;
    }
    st.train = train_list.size();
    st.val = val_list.size();

    auto write_list = [&](const fs::path& p, const std::vector<std::string>& lines) {
        std::ofstream os(p, std::ios::trunc);
        if (!os) {
            throw RuntimeFailure("cannot write " + p.string());
        }
        for (const auto& l : lines) {
            os << l << '\n';
        }
    };
    write_list(out / "train.txt", train_list);
    write_list(out / "val.txt", val_list);
    write_list(out / "obj.names", labeled.class_names());
    write_list(out / "warnings.txt", warnings);

    write_json(out / "dataset.json",
               {{"dataset_size", st.dataset_size()},
                {"original_images", st.originals},
                {"augmented_images", st.augmented},
                {"train_images", st.train},
                {"val_images", st.val},
                {"flipped_images", st.flipped},
                {"classes", labeled.class_names()},
                {"detector",
                 {{"input_size", {cfg.input_size, cfg.input_size}},
                  {"batch_size", cfg.batch_size},
                  {"learning_rate", cfg.learning_rate}}},
                {"preprocess",
                 {{"hflip_prob", cfg.preprocess.hflip_prob},
                  {"blur_sigma", {cfg.preprocess.blur_sigma.lo, cfg.preprocess.blur_sigma.hi}},
                  {"salt_pepper_fraction", cfg.preprocess.salt_pepper_fraction},
                  {"augmented_fraction", cfg.augmented_fraction}}}});
    return st;
}

CommandResult cmd_export_yolo(const PipelineConfig& cfg, std::ostream& log)
{
    Run run(cfg, "export-yolo");
    const DomainDataset labeled =
        scan_dataset(require_dir(cfg.paths.images, "images"), Domain::lab, cfg.class_names);
    const YoloExportStats st =
        export_yolo(labeled, cfg.paths.labels, cfg.export_yolo, derive_seed(cfg.seed, {0x701}), run.dir());
    log << "export-yolo: " << st.originals << " originals + " << st.augmented << " preprocessed = "
        << st.dataset_size() << " images (" << st.train << " train / " << st.val << " val)\n";
    const auto& e = cfg.export_yolo;
    return run.finish({{"dataset_size", st.dataset_size()},
                       {"original_images", st.originals},
                       {"augmented_images", st.augmented},
                       {"train_images", st.train},
                       {"val_images", st.val}},
                      {{"input_size", e.input_size}, {"batch_size", e.batch_size}, {"learning_rate", e.learning_rate}});
}

// ---------------------------------------------------------------- report

CommandResult cmd_report(const PipelineConfig& cfg, std::ostream& log)
{
    Run run(cfg, "report");
    std::vector<fs::path> inputs = cfg.report.inputs;
    if (inputs.empty()) {
        for (const auto& p : {cfg.output / "train-gan" / "losses.csv", cfg.output / "train-classifier" / "history.csv"}) {
            if (fs::exists(p)) {
                inputs.push_back(p);
            }
        }
        if (inputs.empty()) {
            throw RuntimeFailure("no logs to plot; run `uwgan train-gan` or `uwgan train-classifier` first");
        }
    }
    json written = json::array();
    for (const auto& in : inputs) {
        const CsvTable table = read_csv_table(in);
        for (const auto& out : plot_csv_curves(table, run.dir(), in.stem().string(), cfg.report.width,
                                               cfg.report.height)) {
            written.push_back(out.string());
            log << "wrote " << out.string() << '\n';
        }
    }
    return run.finish({{"plots", written}});
}

CommandResult run_command(const std::string& name, const PipelineConfig& cfg, std::ostream& log,
                          const fs::path& resume)
{
    if (name == "prepare") {
        return cmd_prepare(cfg, log);
    }
    if (name == "augment") {
        return cmd_augment(cfg, log);
    }
    if (name == "train-gan") {
        return cmd_train_gan(cfg, log, resume);
    }
    if (name == "generate") {
        return cmd_generate(cfg, log);
    }
    if (name == "train-classifier") {
        return cmd_train_classifier(cfg, log);
    }
    if (name == "fid") {
        return cmd_fid(cfg, log);
    }
    if (name == "export-yolo") {
        return cmd_export_yolo(cfg, log);
    }
    if (name == "report") {
        return cmd_report(cfg, log);
    }
    throw ValidationError("unknown command '" + name + "'");
}

}  // namespace uwgan
