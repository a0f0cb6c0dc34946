#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "uwgan/image.hpp"

namespace uwgan {

enum class Domain { uw, lab };
enum class Provenance { real, fake, rebuild };

std::string_view to_string(Domain d) noexcept;
std::string_view to_string(Provenance p) noexcept;
Domain parse_domain(std::string_view s);

inline constexpr std::size_t kClassCount = 5;

/// Fixed alphabetical class order shared by crops, the classifier and
/// detection export.
std::vector<std::string> default_class_names();

/// How a classically augmented item was derived.
struct AugmentRecord {
    std::string parent_id;
    std::vector<std::string> ops;
    std::uint64_t seed = 0;
};

struct DomainImage {
    std::string source_id;
    Domain domain = Domain::lab;
    Provenance provenance = Provenance::real;
    int class_id = -1;                        // object crops only
    std::optional<std::string> checkpoint_id;  // set for fake / rebuild
    std::optional<AugmentRecord> augment;

    // Pixel source: in-memory pixels take precedence over `path`.
    std::filesystem::path path;
    std::shared_ptr<const ImageTensor> pixels;

    /// RGB pixels in [0, 1], decoded from `path` if not held in memory.
    ImageTensor image() const;
};

class DomainDataset {
public:
    explicit DomainDataset(std::vector<std::string> class_names = default_class_names());

    /// Rejects duplicate source ids and fake/rebuild items without a checkpoint id.
    void add(DomainImage item);

    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    const DomainImage& operator[](std::size_t i) const { return items_[i]; }
    const std::vector<DomainImage>& items() const noexcept { return items_; }
    auto begin() const noexcept { return items_.begin(); }
    auto end() const noexcept { return items_.end(); }

    const std::vector<std::string>& class_names() const noexcept { return class_names_; }
    int class_index(std::string_view name) const;

private:
    std::vector<std::string> class_names_;
    std::vector<DomainImage> items_;
    std::unordered_set<std::string> ids_;
};

bool is_raster_file(const std::filesystem::path& p);

/// Recursively lists PNG/JPEG files in lexicographic order of relative path.
/// source_id is the relative path without extension.
DomainDataset scan_dataset(const std::filesystem::path& dir, Domain domain,
                           std::vector<std::string> class_names = default_class_names());

/// Scans a `class_name/...` crop tree, tagging class ids from the first
/// path component.
DomainDataset scan_object_tree(const std::filesystem::path& dir, Domain domain,
                               std::vector<std::string> class_names = default_class_names());

/// Normalized darknet box: class id and center/size as image fractions.
struct BoundingBoxLabel {
    int class_id = 0;
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    friend bool operator==(const BoundingBoxLabel&, const BoundingBoxLabel&) = default;
};

/// Parses `class cx cy w h` lines. Blank lines are ignored.
std::vector<BoundingBoxLabel> parse_labels(const std::filesystem::path& path);
std::vector<BoundingBoxLabel> parse_labels_text(std::string_view text, std::string_view origin = "<text>");

/// Shortest round-trip decimal form, one box per line.
std::string format_labels(const std::vector<BoundingBoxLabel>& labels);
void write_labels(const std::vector<BoundingBoxLabel>& labels, const std::filesystem::path& path);

struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Half-up rounding of the box edges, clamped to the image.
PixelRect label_rect(const BoundingBoxLabel& label, int width, int height);

struct ObjectCrop {
    int class_id = 0;
    std::size_t label_index = 0;
    ImageTensor image;
};

struct CropResult {
    std::vector<ObjectCrop> crops;
    std::vector<std::string> warnings;  // degenerate rects skipped
};

CropResult crop_objects(const ImageTensor& image, const std::vector<BoundingBoxLabel>& labels);

/// `class_name/<source_id with '/' as '_'>_<k>.png`
std::filesystem::path crop_path(const std::filesystem::path& root, const std::vector<std::string>& class_names,
                                std::string_view source_id, const ObjectCrop& crop);

/// Seeded partition: train gets round(ratio * N) items (at least one on
/// each side), both keep dataset order.
std::pair<DomainDataset, DomainDataset> split_dataset(const DomainDataset& ds, double ratio, std::uint64_t seed);

/// Epoch-wise batching. The permutation for an epoch depends only on
/// (seed, epoch), and the final short batch is kept.
class BatchIterator {
public:
    BatchIterator(const DomainDataset& ds, int batch_size, bool shuffle, std::uint64_t seed);

    std::size_t batches_per_epoch() const noexcept;
    std::vector<std::size_t> order(std::uint64_t epoch) const;
    std::vector<std::size_t> batch_indices(std::uint64_t epoch, std::size_t batch) const;

    /// Single-consumer stream over one epoch.
    void reset(std::uint64_t epoch);
    std::optional<std::vector<std::size_t>> next();
    std::optional<std::vector<ImageTensor>> next_images();

private:
    const DomainDataset* ds_;
    std::size_t batch_size_;
    bool shuffle_;
    std::uint64_t seed_;
    std::vector<std::size_t> current_;
    std::size_t cursor_ = 0;
};

}  // namespace uwgan
