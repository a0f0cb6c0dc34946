#include "uwgan/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uwgan/error.hpp"
#include "uwgan/json_util.hpp"
#include "uwgan/rng.hpp"

namespace uwgan {

namespace ju = jsonutil;

constexpr int kClasses = static_cast<int>(kClassCount);

std::string_view to_string(ResizePolicy p) noexcept
{
    return p == ResizePolicy::stretch ? "stretch" : "short_side_crop";
}

ResizePolicy parse_resize_policy(std::string_view s)
{
    if (s == "short_side_crop") {
        return ResizePolicy::short_side_crop;
    }
    if (s == "stretch") {
        return ResizePolicy::stretch;
    }
    throw ValidationError("unknown resize policy '" + std::string(s) + "' (short_side_crop | stretch)");
}

ImageTensor fit_square(const ImageTensor& image, int size, ResizePolicy policy)
{
    if (image.height() == size && image.width() == size) {
        return image;
    }
    if (policy == ResizePolicy::stretch) {
        return resize_bilinear(image, size, size);
    }
    return resize_short_side_center_crop(image, size);
}

std::string_view to_string(PreprocessOp op) noexcept
{
    switch (op) {
    case PreprocessOp::blur:
        return "blur";
    case PreprocessOp::hflip:
        return "hflip";
    case PreprocessOp::rotate:
        return "rotate";
    }
    return "?";
}

PreprocessOp parse_preprocess_op(std::string_view s)
{
    for (auto op : {PreprocessOp::blur, PreprocessOp::hflip, PreprocessOp::rotate}) {
        if (to_string(op) == s) {
            return op;
        }
    }
    throw ValidationError("unknown preprocess op '" + std::string(s) + "' (blur | hflip | rotate)");
}

// ------------------------------------------------------------ TrainConfig

void TrainConfig::validate() const
{
    if (image_size < 32) {
        throw ValidationError("image_size must be at least 32");
    }
    if (batch_size < 1) {
        throw ValidationError("batch_size must be >= 1");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("learning_rate must be > 0");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("Adam betas must lie in [0, 1)");
    }
    if (!(lambda >= 0.0) || !(d_loss_scale > 0.0)) {
        throw ValidationError("lambda must be >= 0 and d_loss_scale > 0");
    }
    if (epochs < 0) {
        throw ValidationError("epochs must be >= 0");
    }
    if (blur_sigma_max < 0.0 || rotate_degrees < 0.0) {
        throw ValidationError("preprocess ranges must be non-negative");
    }
    if (checkpoint_every < 0) {
        throw ValidationError("checkpoint_every must be >= 0");
    }
    model_config().validate();
}

CycleGanConfig TrainConfig::model_config() const
{
    CycleGanConfig c;
    c.generator.input_size = image_size;
    c.generator.base_channels = generator_channels;
    c.generator.residual_blocks = residual_blocks >= 0 ? residual_blocks : (image_size >= 256 ? 9 : 6);
    c.discriminator.input_size = image_size;
    c.discriminator.base_channels = discriminator_channels;
    c.discriminator.layers = discriminator_layers;
    return c;
}

nn::AdamConfig TrainConfig::adam() const
{
    nn::AdamConfig a;
    a.learning_rate = learning_rate;
    a.beta1 = beta1;
    a.beta2 = beta2;
    return a;
}

TrainConfig train_preset(std::string_view name)
{
    TrainConfig c;
    if (name == "full_image") {
        c.image_size = 256;
        c.batch_size = 4;
    } else if (name == "object_image") {
        c.image_size = 128;
        c.batch_size = 8;
    } else {
        throw ValidationError("unknown preset '" + std::string(name) + "' (full_image | object_image)");
    }
    c.learning_rate = 2e-4;
    return c;
}

nlohmann::json to_json(const TrainConfig& c)
{
    nlohmann::json pre = nlohmann::json::array();
    for (auto op : c.preprocess) {
        pre.push_back(std::string(to_string(op)));
    }
    return {
        {"image_size", c.image_size},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"lambda", c.lambda},
        {"d_loss_scale", c.d_loss_scale},
        {"epochs", c.epochs},
        {"seed", c.seed},
        {"max_steps", c.max_steps},
        {"preprocess", pre},
        {"blur_sigma_max", c.blur_sigma_max},
        {"rotate_degrees", c.rotate_degrees},
        {"resize", std::string(to_string(c.resize))},
        {"generator_channels", c.generator_channels},
        {"residual_blocks", c.residual_blocks},
        {"discriminator_channels", c.discriminator_channels},
        {"discriminator_layers", c.discriminator_layers},
        {"checkpoint_dir", c.checkpoint_dir.string()},
        {"checkpoint_every", c.checkpoint_every},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c)
{
    constexpr std::string_view sec = "train_gan";
    ju::reject_unknown(j,
                       {"preset", "image_size", "batch_size", "learning_rate", "beta1", "beta2", "lambda",
                        "d_loss_scale", "epochs", "seed", "max_steps", "preprocess", "blur_sigma_max",
                        "rotate_degrees", "resize", "generator_channels", "residual_blocks",
                        "discriminator_channels", "discriminator_layers", "checkpoint_dir", "checkpoint_every"},
                       sec);
    if (j.contains("preset")) {
        std::string name;
        ju::read(j, "preset", name, sec);
        const TrainConfig p = train_preset(name);
        c.image_size = p.image_size;
        c.batch_size = p.batch_size;
        c.learning_rate = p.learning_rate;
    }
    ju::read(j, "image_size", c.image_size, sec);
    ju::read(j, "batch_size", c.batch_size, sec);
    ju::read(j, "learning_rate", c.learning_rate, sec);
    ju::read(j, "beta1", c.beta1, sec);
    ju::read(j, "beta2", c.beta2, sec);
    ju::read(j, "lambda", c.lambda, sec);
    ju::read(j, "d_loss_scale", c.d_loss_scale, sec);
    ju::read(j, "epochs", c.epochs, sec);
    ju::read(j, "seed", c.seed, sec);
    ju::read(j, "max_steps", c.max_steps, sec);
    if (j.contains("preprocess")) {
        std::vector<std::string> names;
        ju::read(j, "preprocess", names, sec);
        c.preprocess.clear();
        for (const auto& n : names) {
            c.preprocess.push_back(parse_preprocess_op(n));
        }
    }
    ju::read(j, "blur_sigma_max", c.blur_sigma_max, sec);
    ju::read(j, "rotate_degrees", c.rotate_degrees, sec);
    if (j.contains("resize")) {
        std::string r;
        ju::read(j, "resize", r, sec);
        c.resize = parse_resize_policy(r);
    }
    ju::read(j, "generator_channels", c.generator_channels, sec);
    ju::read(j, "residual_blocks", c.residual_blocks, sec);
    ju::read(j, "discriminator_channels", c.discriminator_channels, sec);
    ju::read(j, "discriminator_layers", c.discriminator_layers, sec);
    if (j.contains("checkpoint_dir")) {
        std::string d;
        ju::read(j, "checkpoint_dir", d, sec);
        c.checkpoint_dir = d;
    }
    ju::read(j, "checkpoint_every", c.checkpoint_every, sec);
    c.validate();
    return c;
}

long peak_memory_kb()
{
    std::ifstream is("/proc/self/status");
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            return std::strtol(line.c_str() + 6, nullptr, 10);
        }
    }
    return 0;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t ceil_div(std::size_t a, std::size_t b)
{
    return (a + b - 1) / b;
}

ImageTensor preprocess_item(const TrainConfig& cfg, ImageTensor img, Rng& rng)
{
    auto enabled = [&](PreprocessOp op) {
        return std::find(cfg.preprocess.begin(), cfg.preprocess.end(), op) != cfg.preprocess.end();
    };
    // fixed order so a draw sequence never depends on the list order
    if (enabled(PreprocessOp::hflip) && uniform(rng, 0.0, 1.0) < 0.5) {
        img = hflip(img);
    }
    if (enabled(PreprocessOp::rotate) && cfg.rotate_degrees > 0.0) {
        img = rotate(img, uniform(rng, -cfg.rotate_degrees, cfg.rotate_degrees));
    }
    if (enabled(PreprocessOp::blur) && cfg.blur_sigma_max > 0.0) {
        img = gaussian_blur(img, uniform(rng, 0.0, cfg.blur_sigma_max));
    }
    return img;
}

std::string format_ids(const DomainDataset& ds, const std::vector<std::size_t>& idx)
{
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        s += (i ? "," : "") + ds[idx[i]].source_id;
    }
    return s;
}

}  // namespace

std::int64_t steps_per_epoch(const TrainConfig& cfg, const DomainDataset& ds_uw, const DomainDataset& ds_lab)
{
    const auto b = static_cast<std::size_t>(cfg.batch_size);
    return static_cast<std::int64_t>(std::max(ceil_div(ds_uw.size(), b), ceil_div(ds_lab.size(), b)));
}

Tensor gan_batch(const TrainConfig& cfg, const DomainDataset& ds, Domain domain, std::int64_t epoch,
                 std::int64_t step_in_epoch, std::vector<std::size_t>* indices)
{
    const auto dkey = static_cast<std::uint64_t>(domain);
    BatchIterator it(ds, cfg.batch_size, true, derive_seed(cfg.seed, {0xba7c, dkey}));
    const std::size_t nb = it.batches_per_epoch();
    const auto idx = it.batch_indices(static_cast<std::uint64_t>(epoch), static_cast<std::size_t>(step_in_epoch) % nb);
    std::vector<ImageTensor> images;
    images.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        Rng rng(derive_seed(cfg.seed, {0x9e9, dkey, static_cast<std::uint64_t>(epoch),
                                       static_cast<std::uint64_t>(step_in_epoch), k}));
        ImageTensor img = fit_square(ds[idx[k]].image(), cfg.image_size, cfg.resize);
        images.push_back(preprocess_item(cfg, std::move(img), rng));
    }
    if (indices) {
        *indices = idx;
    }
    return to_model_batch(images);
}

std::pair<CycleGanState, TrainReport> train_cyclegan(const TrainConfig& cfg, const DomainDataset& ds_uw,
                                                     const DomainDataset& ds_lab,
                                                     std::optional<CycleGanState> resume,
                                                     const StepObserver& observer)
{
    cfg.validate();
    if (ds_uw.empty() || ds_lab.empty()) {
        throw ValidationError("train_cyclegan needs non-empty uw and lab datasets");
    }
    const auto t0 = std::chrono::steady_clock::now();
    CycleGanState state;
    if (resume) {
        state = std::move(*resume);
        if (state.config_hash() != nn::fnv1a64(to_json(cfg.model_config()).dump())) {
            throw ValidationError("resume checkpoint architecture does not match the training config");
        }
    } else {
        state = CycleGanState::create(cfg.model_config(), cfg.seed, cfg.adam());
    }

    TrainReport report;
    const std::int64_t spe = steps_per_epoch(cfg, ds_uw, ds_lab);
    std::int64_t total = static_cast<std::int64_t>(cfg.epochs) * spe;
    if (cfg.max_steps >= 0) {
        total = std::min(total, cfg.max_steps);
    }

    while (static_cast<std::int64_t>(state.step) < total) {
        const auto gstep = static_cast<std::int64_t>(state.step);
        const std::int64_t epoch = gstep / spe;
        const std::int64_t sie = gstep % spe;
        std::vector<std::size_t> idx_uw, idx_lab;
        const Tensor x_uw = gan_batch(cfg, ds_uw, Domain::uw, epoch, sie, &idx_uw);
        const Tensor x_lab = gan_batch(cfg, ds_lab, Domain::lab, epoch, sie, &idx_lab);

        state.g_uw.zero_grad();
        state.g_lab.zero_grad();
        GeneratorPass gp = generator_objective(state, x_uw, x_lab, cfg.lambda, true);

        auto abort_if_bad = [&](bool ok, const char* what) {
            if (ok) {
                return;
            }
            std::ostringstream msg;
            const LossRecord& r = gp.record;
            msg << "non-finite " << what << " at step " << gstep << " (epoch " << epoch << ")"
                << "; uw batch [" << format_ids(ds_uw, idx_uw) << "]"
                << "; lab batch [" << format_ids(ds_lab, idx_lab) << "]"
                << "; gan_uw_to_lab=" << r.gan_uw_to_lab << " gan_lab_to_uw=" << r.gan_lab_to_uw
                << " cycle_uw=" << r.cycle_uw << " cycle_lab=" << r.cycle_lab << " total=" << r.total;
            throw NumericalError(msg.str());
        };
        abort_if_bad(gp.record.all_finite() && std::isfinite(gp.objective), "generator loss");

        state.opt_g_uw.step(state.g_uw);
        state.opt_g_lab.step(state.g_lab);

        // fakes from this step's forward pass, detached
        state.d_uw.zero_grad();
        state.d_lab.zero_grad();
        const double d_uw = discriminator_objective(state.d_uw, x_uw, gp.fake_uw, true, cfg.d_loss_scale);
        const double d_lab = discriminator_objective(state.d_lab, x_lab, gp.fake_lab, true, cfg.d_loss_scale);
        abort_if_bad(std::isfinite(d_uw) && std::isfinite(d_lab), "discriminator loss");
        state.opt_d_uw.step(state.d_uw);
        state.opt_d_lab.step(state.d_lab);
        state.d_uw.zero_grad();
        state.d_lab.zero_grad();

        LossRow row;
        row.epoch = epoch;
        row.step = gstep;
        row.record = gp.record;
        row.generator_objective = gp.objective;
        row.d_uw_objective = d_uw;
        row.d_lab_objective = d_lab;
        report.log.push_back(row);
        ++state.step;
        if (observer) {
            observer(row);
        }

        if (!cfg.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
            static_cast<std::int64_t>(state.step) % cfg.checkpoint_every == 0) {
            const auto path = cfg.checkpoint_dir / ("step_" + std::to_string(state.step) + ".ckpt");
            state.save(path);
            report.checkpoints.push_back(path);
        }
    }
    report.wall_seconds = seconds_since(t0);
    report.peak_memory_kb = peak_memory_kb();
    return {std::move(state), std::move(report)};
}

namespace {

template <typename Fn>
DomainDataset map_dataset(const CycleGanState& state, const DomainDataset& ds, int batch_size, ResizePolicy resize,
                          Domain out_domain, Provenance prov, const std::string& prefix, Fn&& fn)
{
    if (batch_size < 1) {
        throw ValidationError("batch_size must be >= 1");
    }
    state.config.validate();
    const int size = state.image_size();
    const std::string ckpt = state.checkpoint_id();
    DomainDataset out(ds.class_names());
    for (std::size_t begin = 0; begin < ds.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(ds.size(), begin + static_cast<std::size_t>(batch_size));
        std::vector<ImageTensor> images;
        for (std::size_t i = begin; i < end; ++i) {
            images.push_back(fit_square(ds[i].image(), size, resize));
        }
        const auto result = from_model_batch(fn(to_model_batch(images)));
        for (std::size_t i = begin; i < end; ++i) {
            DomainImage item;
            item.source_id = prefix + ds[i].source_id;
            item.domain = out_domain;
            item.provenance = prov;
            item.class_id = ds[i].class_id;
            item.checkpoint_id = ckpt;
            item.pixels = std::make_shared<const ImageTensor>(result[i - begin]);
            out.add(std::move(item));
        }
    }
    return out;
}

}  // namespace

DomainDataset translate_dataset(const CycleGanState& state, const DomainDataset& ds_lab, int batch_size,
                                ResizePolicy resize)
{
    const int size = state.image_size();
    return map_dataset(state, ds_lab, batch_size, resize, Domain::lab, Provenance::fake, "fake:",
                       [&](const Tensor& x) { return generator_forward(state.g_uw, size, x); });
}

DomainDataset rebuild_dataset(const CycleGanState& state, const DomainDataset& ds, Domain source, int batch_size,
                              ResizePolicy resize)
{
    const int size = state.image_size();
    // uw: G_uw(G_lab(x)), lab: G_lab(G_uw(x))
    const nn::Network& first = source == Domain::uw ? state.g_lab : state.g_uw;
    const nn::Network& second = source == Domain::uw ? state.g_uw : state.g_lab;
    return map_dataset(state, ds, batch_size, resize, source, Provenance::rebuild, "rebuild:", [&](const Tensor& x) {
        return generator_forward(second, size, generator_forward(first, size, x));
    });
}

// -------------------------------------------------------------- classifier

void ClassifierTrainConfig::validate() const
{
    if (epochs < 0 || batch_size < 1) {
        throw ValidationError("classifier epochs must be >= 0 and batch_size >= 1");
    }
    if (!(learning_rate > 0.0)) {
        throw ValidationError("classifier learning_rate must be > 0");
    }
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
        throw ValidationError("split_ratio must lie in (0, 1)");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("Adam betas must lie in [0, 1)");
    }
}

nlohmann::json to_json(const ClassifierTrainConfig& c)
{
    nlohmann::json j = {
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"split_ratio", c.split_ratio},
        {"seed", c.seed},
        {"rotation_degrees", c.jitter.max_rotation_degrees},
        {"zoom", c.jitter.max_zoom},
        {"stop_at_accuracy", c.stop_at_accuracy},
    };
    j["geometric_jitter"] = c.geometric_jitter ? nlohmann::json(*c.geometric_jitter) : nlohmann::json(nullptr);
    return j;
}

ClassifierTrainConfig classifier_config_from_json(const nlohmann::json& j, ClassifierTrainConfig c)
{
    constexpr std::string_view sec = "train_classifier";
    ju::reject_unknown(j,
                       {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "split_ratio", "seed",
                        "geometric_jitter", "rotation_degrees", "zoom", "stop_at_accuracy", "dropout_rate"},
                       sec);
    ju::read(j, "epochs", c.epochs, sec);
    ju::read(j, "batch_size", c.batch_size, sec);
    ju::read(j, "learning_rate", c.learning_rate, sec);
    ju::read(j, "beta1", c.beta1, sec);
    ju::read(j, "beta2", c.beta2, sec);
    ju::read(j, "split_ratio", c.split_ratio, sec);
    ju::read(j, "seed", c.seed, sec);
    if (j.contains("geometric_jitter") && !j["geometric_jitter"].is_null()) {
        bool on = false;
        ju::read(j, "geometric_jitter", on, sec);
        c.geometric_jitter = on;
    }
    ju::read(j, "rotation_degrees", c.jitter.max_rotation_degrees, sec);
    ju::read(j, "zoom", c.jitter.max_zoom, sec);
    ju::read(j, "stop_at_accuracy", c.stop_at_accuracy, sec);
    c.validate();
    return c;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad, int* correct)
{
    const Shape& s = logits.shape();
    if (s.n != static_cast<int>(labels.size())) {
        throw ValidationError("cross_entropy: batch and label counts differ");
    }
    const Tensor p = softmax_rows(logits);
    const int k = static_cast<int>(s.per_item());
    if (grad) {
        *grad = p;
    }
    double loss = 0.0;
    int hits = 0;
    for (int n = 0; n < s.n; ++n) {
        const int y = labels[n];
        if (y < 0 || y >= k) {
            throw ValidationError("cross_entropy: label out of range");
        }
        auto row = p.item(n);
        loss -= std::log(std::max(row[y], 1e-300));
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        hits += best == y ? 1 : 0;
        if (grad) {
            auto g = grad->item(n);
            g[y] -= 1.0;
            for (auto& v : g) {
                v /= s.n;
            }
        }
    }
    if (correct) {
        *correct = hits;
    }
    return loss / s.n;
}

namespace {

Tensor classifier_batch_impl(const DomainDataset& ds, const std::vector<std::size_t>& indices,
                             std::vector<int>& labels, const GeometricJitter* jitter, std::uint64_t seed)
{
    std::vector<ImageTensor> images;
    images.reserve(indices.size());
    labels.clear();
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const DomainImage& item = ds[indices[k]];
        if (item.class_id < 0 || item.class_id >= kClasses) {
            throw ValidationError("object item '" + item.source_id + "' has no class id");
        }
        ImageTensor img = fit_square(item.image(), kClassifierInput, ResizePolicy::stretch);
        if (jitter) {
            Rng rng(derive_seed(seed, {k}));
            img = random_geometric(img, *jitter, rng);
        }
        images.push_back(std::move(img));
        labels.push_back(item.class_id);
    }
    return to_unit_batch(images);
}

}  // namespace

Tensor classifier_batch(const DomainDataset& ds, const std::vector<std::size_t>& indices, std::vector<int>& labels)
{
    return classifier_batch_impl(ds, indices, labels, nullptr, 0);
}

std::pair<ClassifierModel, ClassifierReport> train_classifier(const ClassifierTrainConfig& cfg,
                                                              const DomainDataset& object_ds, double dropout_rate,
                                                              const EpochObserver& observer)
{
    cfg.validate();
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ValidationError("dropout_rate must lie in [0, 1)");
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto [train, val] = split_dataset(object_ds, cfg.split_ratio, cfg.seed);
    std::vector<int> counts(kClasses, 0);
    for (const auto& item : train) {
        if (item.class_id >= 0 && item.class_id < kClasses) {
            ++counts[item.class_id];
        }
    }
    for (int c = 0; c < kClasses; ++c) {
        if (counts[c] == 0) {
            throw ValidationError("stratification: class '" + object_ds.class_names()[c] +
                                  "' is absent from the train split");
        }
    }

    ClassifierModel model = build_classifier(dropout_rate, derive_seed(cfg.seed, {0xc1}));
    nn::AdamConfig acfg;
    acfg.learning_rate = cfg.learning_rate;
    acfg.beta1 = cfg.beta1;
    acfg.beta2 = cfg.beta2;
    nn::Adam opt(acfg);
    const bool jitter_on = cfg.geometric_jitter.value_or(dropout_rate > 0.0);

    ClassifierReport report;
    report.train_size = train.size();
    report.val_size = val.size();
    BatchIterator it(train, cfg.batch_size, true, derive_seed(cfg.seed, {0xc2}));
    BatchIterator vit(val, cfg.batch_size, false, 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        int hits = 0;
        const auto ep = static_cast<std::uint64_t>(epoch);
        for (std::size_t b = 0; b < it.batches_per_epoch(); ++b) {
            const auto idx = it.batch_indices(ep, b);
            std::vector<int> labels;
            const Tensor x = classifier_batch_impl(train, idx, labels, jitter_on ? &cfg.jitter : nullptr,
                                                   derive_seed(cfg.seed, {0xc3, ep, b}));
            Rng drop_rng(derive_seed(cfg.seed, {0xc4, ep, b}));
            nn::CachePtr cache;
            const Tensor logits = classifier_logits(model, x, {true, &drop_rng}, &cache);
            Tensor g;
            int batch_hits = 0;
            const double l = cross_entropy(logits, labels, &g, &batch_hits);
            if (!std::isfinite(l)) {
                throw NumericalError("non-finite classifier loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(b));
            }
            model.net.zero_grad();
            model.net.backward(g, *cache);
            opt.step(model.net);
            loss_sum += l * static_cast<double>(idx.size());
            hits += batch_hits;
        }
        EpochMetrics m;
        m.epoch = epoch + 1;
        m.loss = loss_sum / static_cast<double>(train.size());
        m.accuracy = static_cast<double>(hits) / static_cast<double>(train.size());

        double vloss = 0.0;
        int vhits = 0;
        for (std::size_t b = 0; b < vit.batches_per_epoch(); ++b) {
            const auto idx = vit.batch_indices(0, b);
            std::vector<int> labels;
            const Tensor x = classifier_batch(val, idx, labels);
            int bh = 0;
            vloss += cross_entropy(classifier_logits(model, x), labels, nullptr, &bh) * static_cast<double>(idx.size());
            vhits += bh;
        }
        m.val_loss = vloss / static_cast<double>(val.size());
        m.val_accuracy = static_cast<double>(vhits) / static_cast<double>(val.size());
        report.history.push_back(m);
        if (observer) {
            observer(m);
        }
        if (cfg.stop_at_accuracy >= 0.0 && m.accuracy >= cfg.stop_at_accuracy) {
            break;
        }
    }
    report.wall_seconds = seconds_since(t0);
    report.peak_memory_kb = peak_memory_kb();
    return {std::move(model), std::move(report)};
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& history)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw RuntimeFailure("cannot write " + path.string());
    }
    os << "epoch,loss,val_loss,accuracy,val_accuracy\n";
    for (const auto& m : history) {
        char buf[4][32];
        const double v[4] = {m.loss, m.val_loss, m.accuracy, m.val_accuracy};
        os << m.epoch;
        for (int i = 0; i < 4; ++i) {
            auto r = std::to_chars(buf[i], buf[i] + 32, v[i]);
            os << ',' << std::string_view(buf[i], r.ptr - buf[i]);
        }
        os << '\n';
    }
}

}  // namespace uwgan
