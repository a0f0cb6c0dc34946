#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "uwgan/nn/network.hpp"

namespace uwgan::nn {

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Versioned container of named tensors.
///
/// Layout (little-endian, host doubles):
///   "UWGANCKP" | u32 version | u64 config_hash | u64 step |
///   u32 len, config JSON bytes | u32 count |
///   count x (u32 len, name bytes, 4 x i32 NCHW, numel x f64)
class Checkpoint {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    std::uint64_t config_hash = 0;
    std::uint64_t step = 0;
    std::string config_json;
    std::map<std::string, Tensor> tensors;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return tensors.contains(name); }
};

void store_parameters(Network& net, const std::string& prefix, Checkpoint& ckpt);
/// Every parameter of `net` must be present with a matching shape.
void restore_parameters(Network& net, const std::string& prefix, const Checkpoint& ckpt);

}  // namespace uwgan::nn
