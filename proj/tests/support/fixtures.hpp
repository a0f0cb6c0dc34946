#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "uwgan/dataset.hpp"
#include "uwgan/image.hpp"
#include "uwgan/nn/network.hpp"
#include "uwgan/tensor.hpp"

namespace uwgan::testing {

/// mkdtemp under $TMPDIR, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);
ImageTensor random_image(int h, int w, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f);

/// Blob on a graded backdrop; the uw variant gets a blue-green cast and haze.
ImageTensor synthetic_scene(int size, Domain domain, std::uint64_t seed);
DomainDataset synthetic_domain(Domain domain, int count, int size, std::uint64_t seed);

/// A shape per class (disc, square, horizontal bar, vertical bar, ring) with
/// jittered position, size and colour.
ImageTensor synthetic_object(int class_id, int size, std::uint64_t seed);
DomainDataset synthetic_objects(int per_class, int size, std::uint64_t seed);

/// Tiny stand-ins for gradient checks: a 1x1 conv + tanh generator (12
/// params) and a 3x3 stride-2 conv scorer (28 params).
nn::Network toy_generator(std::uint64_t seed);
nn::Network toy_discriminator(std::uint64_t seed);

struct LabeledFixture {
    std::filesystem::path images;
    std::filesystem::path labels;
    std::size_t image_count = 0;
    std::size_t object_count = 0;
};

/// Writes `count` PNG scenes with darknet label files in a separate tree.
LabeledFixture write_labeled_fixture(const std::filesystem::path& root, int count, std::uint64_t seed);

}  // namespace uwgan::testing
