#include "uwgan/models.hpp"

#include <cmath>
#include <cstdio>

#include "uwgan/error.hpp"
#include "uwgan/rng.hpp"

namespace uwgan {

using nn::Network;
using nn::Sequential;

// ----------------------------------------------------------------- config

void GeneratorConfig::validate() const
{
    if (input_size <= 0 || base_channels <= 0 || residual_blocks < 0 || downsample_steps < 0) {
        throw ValidationError("generator config values must be positive");
    }
    if (input_size % (1 << downsample_steps) != 0) {
        throw ValidationError("generator input size " + std::to_string(input_size) + " is not divisible by 2^" +
                              std::to_string(downsample_steps));
    }
    if (innermost_size() < 2) {
        throw ValidationError("generator innermost size must be at least 2");
    }
}

void DiscriminatorConfig::validate() const
{
    if (input_size <= 0 || base_channels <= 0 || layers < 1) {
        throw ValidationError("discriminator config values must be positive");
    }
    if (output_size() < 1) {
        throw ValidationError("discriminator input " + std::to_string(input_size) + " is too small for " +
                              std::to_string(layers) + " layers");
    }
}

int DiscriminatorConfig::output_size() const
{
    // k4 p1: stride 2 halves (floor), stride 1 shrinks by one.
    int s = input_size;
    for (int i = 0; i < layers; ++i) {
        s = (s + 2 - 4) / 2 + 1;
    }
    s = s - 1;
    s = s - 1;
    return s;
}

void CycleGanConfig::validate() const
{
    generator.validate();
    discriminator.validate();
    if (generator.input_size != discriminator.input_size) {
        throw ValidationError("generator and discriminator input sizes differ");
    }
}

nlohmann::json to_json(const CycleGanConfig& cfg)
{
    return {
        {"generator",
         {{"input_size", cfg.generator.input_size},
          {"base_channels", cfg.generator.base_channels},
          {"residual_blocks", cfg.generator.residual_blocks},
          {"downsample_steps", cfg.generator.downsample_steps}}},
        {"discriminator",
         {{"input_size", cfg.discriminator.input_size},
          {"base_channels", cfg.discriminator.base_channels},
          {"layers", cfg.discriminator.layers}}},
    };
}

CycleGanConfig cycle_gan_config_from_json(const nlohmann::json& j)
{
    try {
        CycleGanConfig cfg;
        const auto& g = j.at("generator");
        cfg.generator.input_size = g.at("input_size").get<int>();
        cfg.generator.base_channels = g.at("base_channels").get<int>();
        cfg.generator.residual_blocks = g.at("residual_blocks").get<int>();
        cfg.generator.downsample_steps = g.at("downsample_steps").get<int>();
        const auto& d = j.at("discriminator");
        cfg.discriminator.input_size = d.at("input_size").get<int>();
        cfg.discriminator.base_channels = d.at("base_channels").get<int>();
        cfg.discriminator.layers = d.at("layers").get<int>();
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed CycleGAN config: ") + e.what());
    }
}

CycleGanConfig default_cycle_gan_config(int image_size)
{
    CycleGanConfig cfg;
    cfg.generator.input_size = image_size;
    cfg.generator.residual_blocks = image_size >= 256 ? 9 : 6;
    cfg.discriminator.input_size = image_size;
    cfg.validate();
    return cfg;
}

// -------------------------------------------------------------- builders

void init_normal(Network& net, double stddev, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, {0x1417u}));
    std::normal_distribution<double> normal(0.0, stddev);
    for (auto& ref : net.parameters()) {
        const bool is_bias = ref.name.ends_with("bias");
        for (auto& v : ref.param->value.values()) {
            v = is_bias ? 0.0 : normal(rng);
        }
    }
}

namespace {

void init_fan_in_uniform(Network& net, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, {0xfa41u}));
    for (auto& ref : net.parameters()) {
        if (ref.name.ends_with("bias")) {
            ref.param->value.fill(0.0);
            continue;
        }
        const double fan_in = static_cast<double>(ref.param->value.shape().per_item());
        const double limit = std::sqrt(6.0 / fan_in);
        for (auto& v : ref.param->value.values()) {
            v = uniform(rng, -limit, limit);
        }
    }
}

}  // namespace

Network build_generator(const GeneratorConfig& cfg, std::uint64_t seed, std::string name)
{
    cfg.validate();
    const int ngf = cfg.base_channels;
    Sequential s;
    s.add<nn::ReflectionPad2d>(3);
    s.add<nn::Conv2d>(3, ngf, 7, 1, 0, false);
    s.add<nn::InstanceNorm2d>();
    s.add<nn::ReLU>();
    int ch = ngf;
    for (int i = 0; i < cfg.downsample_steps; ++i) {
        s.add<nn::Conv2d>(ch, ch * 2, 3, 2, 1, false);
        s.add<nn::InstanceNorm2d>();
        s.add<nn::ReLU>();
        ch *= 2;
    }
    for (int i = 0; i < cfg.residual_blocks; ++i) {
        Sequential body;
        body.add<nn::ReflectionPad2d>(1);
        body.add<nn::Conv2d>(ch, ch, 3, 1, 0, false);
        body.add<nn::InstanceNorm2d>();
        body.add<nn::ReLU>();
        body.add<nn::ReflectionPad2d>(1);
        body.add<nn::Conv2d>(ch, ch, 3, 1, 0, false);
        body.add<nn::InstanceNorm2d>();
        s.add<nn::Residual>(std::move(body));
    }
    for (int i = 0; i < cfg.downsample_steps; ++i) {
        s.add<nn::ConvTranspose2d>(ch, ch / 2, 3, 2, 1, 1, false);
        s.add<nn::InstanceNorm2d>();
        s.add<nn::ReLU>();
        ch /= 2;
    }
    s.add<nn::ReflectionPad2d>(3);
    s.add<nn::Conv2d>(ch, 3, 7, 1, 0, true);
    s.add<nn::Tanh>();

    Network net(std::move(name), std::move(s));
    init_normal(net, 0.02, seed);
    return net;
}

Network build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed, std::string name)
{
    cfg.validate();
    const int ndf = cfg.base_channels;
    Sequential s;
    s.add<nn::Conv2d>(3, ndf, 4, 2, 1, true);
    s.add<nn::LeakyReLU>(0.2);
    int mult = 1;
    for (int n = 1; n < cfg.layers; ++n) {
        const int prev = mult;
        mult = std::min(1 << n, 8);
        s.add<nn::Conv2d>(ndf * prev, ndf * mult, 4, 2, 1, false);
        s.add<nn::InstanceNorm2d>();
        s.add<nn::LeakyReLU>(0.2);
    }
    const int prev = mult;
    mult = std::min(1 << cfg.layers, 8);
    s.add<nn::Conv2d>(ndf * prev, ndf * mult, 4, 1, 1, false);
    s.add<nn::InstanceNorm2d>();
    s.add<nn::LeakyReLU>(0.2);
    s.add<nn::Conv2d>(ndf * mult, 1, 4, 1, 1, true);

    Network net(std::move(name), std::move(s));
    init_normal(net, 0.02, seed);
    return net;
}

namespace {

void check_image_batch(const Tensor& x, int input_size, const char* who)
{
    const Shape& s = x.shape();
    if (s.n < 1 || s.c != 3 || s.h != input_size || s.w != input_size) {
        throw ValidationError(std::string(who) + " expects N x 3 x " + std::to_string(input_size) + " x " +
                              std::to_string(input_size) + ", got " + to_string(s));
    }
}

}  // namespace

Tensor generator_forward(const Network& g, int input_size, const Tensor& x)
{
    check_image_batch(x, input_size, "generator");
    return g.infer(x);
}

Tensor discriminator_forward(const Network& d, int input_size, const Tensor& x)
{
    check_image_batch(x, input_size, "discriminator");
    return d.infer(x);
}

// ---------------------------------------------------------- CycleGanState

CycleGanState CycleGanState::create(const CycleGanConfig& cfg, std::uint64_t seed, const nn::AdamConfig& adam)
{
    cfg.validate();
    CycleGanState s;
    s.config = cfg;
    s.g_uw = build_generator(cfg.generator, derive_seed(seed, {1}), "G_uw");
    s.g_lab = build_generator(cfg.generator, derive_seed(seed, {2}), "G_lab");
    s.d_uw = build_discriminator(cfg.discriminator, derive_seed(seed, {3}), "D_uw");
    s.d_lab = build_discriminator(cfg.discriminator, derive_seed(seed, {4}), "D_lab");
    s.opt_g_uw = nn::Adam(adam);
    s.opt_g_lab = nn::Adam(adam);
    s.opt_d_uw = nn::Adam(adam);
    s.opt_d_lab = nn::Adam(adam);
    return s;
}

std::uint64_t CycleGanState::config_hash() const
{
    return nn::fnv1a64(to_json(config).dump());
}

std::string CycleGanState::checkpoint_id() const
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%016llx@%llu", static_cast<unsigned long long>(config_hash()),
                  static_cast<unsigned long long>(step));
    return buf;
}

nn::Checkpoint CycleGanState::to_checkpoint() const
{
    nn::Checkpoint ckpt;
    nlohmann::json meta = to_json(config);
    meta["kind"] = "cyclegan";
    meta["adam"] = {{"learning_rate", opt_g_uw.config().learning_rate},
                    {"beta1", opt_g_uw.config().beta1},
                    {"beta2", opt_g_uw.config().beta2},
                    {"eps", opt_g_uw.config().eps}};
    ckpt.config_json = meta.dump();
    ckpt.config_hash = config_hash();
    ckpt.step = step;
    auto& self = const_cast<CycleGanState&>(*this);
    nn::store_parameters(self.g_uw, "G_uw/", ckpt);
    nn::store_parameters(self.g_lab, "G_lab/", ckpt);
    nn::store_parameters(self.d_uw, "D_uw/", ckpt);
    nn::store_parameters(self.d_lab, "D_lab/", ckpt);
    opt_g_uw.save("opt/G_uw/", ckpt);
    opt_g_lab.save("opt/G_lab/", ckpt);
    opt_d_uw.save("opt/D_uw/", ckpt);
    opt_d_lab.save("opt/D_lab/", ckpt);
    return ckpt;
}

CycleGanState CycleGanState::from_checkpoint(const nn::Checkpoint& ckpt)
{
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ckpt.config_json);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint config is not valid JSON: ") + e.what());
    }
    if (meta.value("kind", "") != "cyclegan") {
        throw ValidationError("checkpoint does not hold a CycleGAN state");
    }
    const CycleGanConfig cfg = cycle_gan_config_from_json(meta);
    nn::AdamConfig adam;
    if (meta.contains("adam")) {
        adam.learning_rate = meta["adam"].value("learning_rate", adam.learning_rate);
        adam.beta1 = meta["adam"].value("beta1", adam.beta1);
        adam.beta2 = meta["adam"].value("beta2", adam.beta2);
        adam.eps = meta["adam"].value("eps", adam.eps);
    }
    CycleGanState s = create(cfg, 0, adam);
    if (s.config_hash() != ckpt.config_hash) {
        throw ValidationError("checkpoint config hash does not match its embedded config");
    }
    nn::restore_parameters(s.g_uw, "G_uw/", ckpt);
    nn::restore_parameters(s.g_lab, "G_lab/", ckpt);
    nn::restore_parameters(s.d_uw, "D_uw/", ckpt);
    nn::restore_parameters(s.d_lab, "D_lab/", ckpt);
    s.opt_g_uw.load("opt/G_uw/", ckpt);
    s.opt_g_lab.load("opt/G_lab/", ckpt);
    s.opt_d_uw.load("opt/D_uw/", ckpt);
    s.opt_d_lab.load("opt/D_lab/", ckpt);
    s.step = ckpt.step;
    return s;
}

void CycleGanState::save(const std::filesystem::path& path) const
{
    to_checkpoint().save(path);
}

CycleGanState CycleGanState::load(const std::filesystem::path& path)
{
    return from_checkpoint(nn::Checkpoint::load(path));
}

// ------------------------------------------------------------- classifier

ClassifierModel build_classifier(double dropout_rate, std::uint64_t seed)
{
    Sequential s;
    s.add<nn::Conv2d>(3, 16, 3, 1, 1, true);
    s.add<nn::ReLU>();
    s.add<nn::MaxPool2d>();
    s.add<nn::Conv2d>(16, 32, 3, 1, 1, true);
    s.add<nn::ReLU>();
    s.add<nn::MaxPool2d>();
    s.add<nn::Conv2d>(32, 64, 3, 1, 1, true);
    s.add<nn::ReLU>();
    s.add<nn::MaxPool2d>();
    if (dropout_rate > 0.0) {
        s.add<nn::Dropout>(dropout_rate);
    }
    s.add<nn::Flatten>();
    s.add<nn::Dense>(64 * 18 * 18, 128);
    s.add<nn::ReLU>();
    s.add<nn::Dense>(128, 5);

    ClassifierModel m;
    m.dropout_rate = dropout_rate;
    m.net = Network("classifier", std::move(s));
    init_fan_in_uniform(m.net, seed);
    return m;
}

std::vector<LayerShape> ClassifierModel::layer_table() const
{
    std::vector<LayerShape> rows;
    Shape s{1, 3, kClassifierInput, kClassifierInput};
    rows.push_back({"Input", s});
    const auto& body = net.body();
    for (std::size_t i = 0; i < body.size(); ++i) {
        s = body[i].output_shape(s);
        rows.push_back({body[i].kind(), s});
    }
    return rows;
}

nn::Checkpoint ClassifierModel::to_checkpoint() const
{
    nn::Checkpoint ckpt;
    const nlohmann::json meta = {{"kind", "classifier"}, {"dropout_rate", dropout_rate}, {"input", kClassifierInput}};
    ckpt.config_json = meta.dump();
    ckpt.config_hash = nn::fnv1a64(ckpt.config_json);
    nn::store_parameters(const_cast<Network&>(net), "classifier/", ckpt);
    return ckpt;
}

ClassifierModel ClassifierModel::from_checkpoint(const nn::Checkpoint& ckpt)
{
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ckpt.config_json);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint config is not valid JSON: ") + e.what());
    }
    if (meta.value("kind", "") != "classifier") {
        throw ValidationError("checkpoint does not hold a classifier");
    }
    if (nn::fnv1a64(ckpt.config_json) != ckpt.config_hash) {
        throw ValidationError("classifier checkpoint config hash mismatch");
    }
    ClassifierModel m = build_classifier(meta.value("dropout_rate", 0.0));
    nn::restore_parameters(m.net, "classifier/", ckpt);
    return m;
}

Tensor classifier_logits(const ClassifierModel& m, const Tensor& x, const nn::ForwardContext& ctx,
                         nn::CachePtr* cache)
{
    const Shape& s = x.shape();
    if (s.n < 1 || s.c != 3 || s.h != kClassifierInput || s.w != kClassifierInput) {
        throw ValidationError("classifier expects N x 3 x 150 x 150, got " + to_string(s));
    }
    return m.net.forward(x, ctx, cache);
}

Tensor softmax_rows(const Tensor& logits)
{
    const Shape& s = logits.shape();
    const int k = static_cast<int>(s.per_item());
    Tensor p(s);
    for (int n = 0; n < s.n; ++n) {
        auto in = logits.item(n);
        auto out = p.item(n);
        const double mx = *std::max_element(in.begin(), in.end());
        double z = 0.0;
        for (int i = 0; i < k; ++i) {
            out[i] = std::exp(in[i] - mx);
            z += out[i];
        }
        for (int i = 0; i < k; ++i) {
            out[i] /= z;
        }
    }
    return p;
}

Tensor classifier_forward(const ClassifierModel& m, const Tensor& x, const nn::ForwardContext& ctx)
{
    return softmax_rows(classifier_logits(m, x, ctx, nullptr));
}

}  // namespace uwgan
