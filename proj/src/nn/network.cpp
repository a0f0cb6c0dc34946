#include "uwgan/nn/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "uwgan/error.hpp"
#include "uwgan/nn/adam.hpp"
#include "uwgan/nn/checkpoint.hpp"

namespace uwgan::nn {

// --------------------------------------------------------------- Network

std::vector<ParamRef> Network::parameters()
{
    std::vector<ParamRef> out;
    body_.collect("", out);
    return out;
}

std::size_t Network::parameter_count() const
{
    std::size_t total = 0;
    for (const auto& p : const_cast<Network*>(this)->parameters()) {
        total += p.param->value.size();
    }
    return total;
}

void Network::zero_grad()
{
    for (auto& p : parameters()) {
        p.param->grad.fill(0.0);
    }
}

// ------------------------------------------------------------------ Adam

void Adam::step(Network& net)
{
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& ref : net.parameters()) {
        auto& p = *ref.param;
        auto [it, inserted] = slots_.try_emplace(ref.name);
        Slot& s = it->second;
        if (inserted) {
            s.m = Tensor(p.value.shape());
            s.v = Tensor(p.value.shape());
        }
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = s.m[i] / bc1;
            const double v_hat = s.v[i] / bc2;
            p.value[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

void Adam::save(const std::string& prefix, Checkpoint& ckpt) const
{
    ckpt.tensors[prefix + "t"] = Tensor(Shape{1, 1, 1, 1}, {static_cast<double>(t_)});
    for (const auto& [name, slot] : slots_) {
        ckpt.tensors[prefix + "m/" + name] = slot.m;
        ckpt.tensors[prefix + "v/" + name] = slot.v;
    }
}

void Adam::load(const std::string& prefix, const Checkpoint& ckpt)
{
    t_ = static_cast<std::int64_t>(ckpt.get(prefix + "t")[0]);
    slots_.clear();
    const std::string m_prefix = prefix + "m/";
    for (auto it = ckpt.tensors.lower_bound(m_prefix); it != ckpt.tensors.end(); ++it) {
        if (it->first.compare(0, m_prefix.size(), m_prefix) != 0) {
            break;
        }
        const std::string name = it->first.substr(m_prefix.size());
        slots_[name] = Slot{it->second, ckpt.get(prefix + "v/" + name)};
    }
}

// ------------------------------------------------------------ Checkpoint

std::uint64_t fnv1a64(std::string_view bytes) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

constexpr char kMagic[8] = {'U', 'W', 'G', 'A', 'N', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& os, const T& v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_value(std::istream& is, const std::filesystem::path& path)
{
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw ValidationError("truncated checkpoint " + path.string());
    }
    return v;
}

std::string get_string(std::istream& is, const std::filesystem::path& path)
{
    const auto len = read_value<std::uint32_t>(is, path);
    std::string s(len, '\0');
    if (len > 0 && !is.read(s.data(), len)) {
        throw ValidationError("truncated checkpoint " + path.string());
    }
    return s;
}

void put_string(std::ostream& os, const std::string& s)
{
    put(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw RuntimeFailure("cannot write checkpoint " + path.string());
    }
    os.write(kMagic, sizeof(kMagic));
    put(os, kFormatVersion);
    put(os, config_hash);
    put(os, step);
    put_string(os, config_json);
    put(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_string(os, name);
        const Shape& s = t.shape();
        put(os, static_cast<std::int32_t>(s.n));
        put(os, static_cast<std::int32_t>(s.c));
        put(os, static_cast<std::int32_t>(s.h));
        put(os, static_cast<std::int32_t>(s.w));
        os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!os) {
        throw RuntimeFailure("failed writing checkpoint " + path.string());
    }
}

Checkpoint Checkpoint::load(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw RuntimeFailure("cannot open checkpoint " + path.string());
    }
    char magic[sizeof(kMagic)];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ValidationError("not a checkpoint file: " + path.string());
    }
    const auto version = read_value<std::uint32_t>(is, path);
    if (version != kFormatVersion) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
    }
    Checkpoint ckpt;
    ckpt.config_hash = read_value<std::uint64_t>(is, path);
    ckpt.step = read_value<std::uint64_t>(is, path);
    ckpt.config_json = get_string(is, path);
    const auto count = read_value<std::uint32_t>(is, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(is, path);
        Shape s;
        s.n = read_value<std::int32_t>(is, path);
        s.c = read_value<std::int32_t>(is, path);
        s.h = read_value<std::int32_t>(is, path);
        s.w = read_value<std::int32_t>(is, path);
        Tensor t(s);
        if (!is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
            throw ValidationError("truncated tensor '" + name + "' in " + path.string());
        }
        ckpt.tensors.emplace(std::move(name), std::move(t));
    }
    return ckpt;
}

const Tensor& Checkpoint::get(const std::string& name) const
{
    auto it = tensors.find(name);
    if (it == tensors.end()) {
        throw ValidationError("checkpoint has no tensor '" + name + "'");
    }
    return it->second;
}

void store_parameters(Network& net, const std::string& prefix, Checkpoint& ckpt)
{
    for (const auto& ref : net.parameters()) {
        ckpt.tensors[prefix + ref.name] = ref.param->value;
    }
}

void restore_parameters(Network& net, const std::string& prefix, const Checkpoint& ckpt)
{
    for (const auto& ref : net.parameters()) {
        const Tensor& t = ckpt.get(prefix + ref.name);
        if (t.shape() != ref.param->value.shape()) {
            throw ValidationError("checkpoint tensor '" + prefix + ref.name + "' has shape " + to_string(t.shape()) +
                                  ", network expects " + to_string(ref.param->value.shape()));
        }
        ref.param->value = t;
        ref.param->grad = Tensor(t.shape());
    }
}

}  // namespace uwgan::nn
