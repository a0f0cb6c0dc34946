#include "uwgan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "uwgan/error.hpp"
#include "uwgan/rng.hpp"

namespace fs = std::filesystem;

namespace uwgan {

std::string_view to_string(Domain d) noexcept
{
    return d == Domain::uw ? "uw" : "lab";
}

std::string_view to_string(Provenance p) noexcept
{
    switch (p) {
    case Provenance::real:
        return "real";
    case Provenance::fake:
        return "fake";
    case Provenance::rebuild:
        return "rebuild";
    }
    return "real";
}

Domain parse_domain(std::string_view s)
{
    if (s == "uw") {
        return Domain::uw;
    }
    if (s == "lab") {
        return Domain::lab;
    }
    throw ValidationError("unknown domain '" + std::string(s) + "' (expected uw or lab)");
}

std::vector<std::string> default_class_names()
{
    return {"bolt", "flange", "hex nut", "lead block", "pipe"};
}

ImageTensor DomainImage::image() const
{
    if (pixels) {
        return replicate_to_rgb(*pixels);
    }
    if (path.empty()) {
        throw ValidationError("dataset item '" + source_id + "' has neither pixels nor a path");
    }
    return load_image(path, true);
}

// ---------------------------------------------------------- DomainDataset

DomainDataset::DomainDataset(std::vector<std::string> class_names) : class_names_(std::move(class_names))
{
    if (class_names_.size() != kClassCount) {
        throw ValidationError("expected " + std::to_string(kClassCount) + " class names, got " +
                              std::to_string(class_names_.size()));
    }
}

void DomainDataset::add(DomainImage item)
{
    if (item.source_id.empty()) {
        throw ValidationError("dataset item without source_id");
    }
    if (item.provenance != Provenance::real && !item.checkpoint_id) {
        throw ValidationError("item '" + item.source_id + "' is " + std::string(to_string(item.provenance)) +
                              " but records no generator checkpoint");
    }
    if (!ids_.insert(item.source_id).second) {
        throw ValidationError("duplicate source_id '" + item.source_id + "'");
    }
    items_.push_back(std::move(item));
}

int DomainDataset::class_index(std::string_view name) const
{
    auto it = std::find(class_names_.begin(), class_names_.end(), name);
    return it == class_names_.end() ? -1 : static_cast<int>(it - class_names_.begin());
}

// ------------------------------------------------------------------ scan

bool is_raster_file(const fs::path& p)
{
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

namespace {

std::vector<fs::path> list_rasters(const fs::path& dir)
{
    if (!fs::is_directory(dir)) {
        throw ValidationError("not a directory: " + dir.string());
    }
    std::vector<fs::path> rel;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && is_raster_file(entry.path())) {
            rel.push_back(fs::relative(entry.path(), dir));
        }
    }
    std::sort(rel.begin(), rel.end(), [](const fs::path& a, const fs::path& b) {
        return a.generic_string() < b.generic_string();
    });
    return rel;
}

std::string strip_extension(const fs::path& rel)
{
    fs::path p = rel;
    p.replace_extension();
    return p.generic_string();
}

}  // namespace

DomainDataset scan_dataset(const fs::path& dir, Domain domain, std::vector<std::string> class_names)
{
    DomainDataset ds(std::move(class_names));
    for (const auto& rel : list_rasters(dir)) {
        DomainImage item;
        item.source_id = strip_extension(rel);
        item.domain = domain;
        item.path = dir / rel;
        ds.add(std::move(item));
    }
    if (ds.empty()) {
        throw ValidationError("empty dataset: no PNG/JPEG files under " + dir.string());
    }
    return ds;
}

DomainDataset scan_object_tree(const fs::path& dir, Domain domain, std::vector<std::string> class_names)
{
    DomainDataset ds(std::move(class_names));
    for (const auto& rel : list_rasters(dir)) {
        const std::string top = rel.begin()->string();
        const int cls = ds.class_index(top);
        if (cls < 0 || rel.begin() == std::prev(rel.end())) {
            throw ValidationError("object file " + rel.generic_string() + " is not under a known class directory");
        }
        DomainImage item;
        item.source_id = strip_extension(rel);
        item.domain = domain;
        item.class_id = cls;
        item.path = dir / rel;
        ds.add(std::move(item));
    }
    if (ds.empty()) {
        throw ValidationError("empty dataset: no object crops under " + dir.string());
    }
    return ds;
}

// ---------------------------------------------------------------- labels

namespace {

bool parse_double(std::string_view tok, double& out)
{
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string where(std::string_view origin, std::size_t line)
{
    return std::string(origin) + ":" + std::to_string(line) + ": ";
}

}  // namespace

std::vector<BoundingBoxLabel> parse_labels_text(std::string_view text, std::string_view origin)
{
    std::vector<BoundingBoxLabel> labels;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        std::vector<std::string_view> tokens;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
                ++i;
            }
            const std::size_t start = i;
            while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
                ++i;
            }
            if (i > start) {
                tokens.push_back(line.substr(start, i - start));
            }
        }
        if (tokens.empty()) {
            if (eol == text.size()) {
                break;
            }
            continue;
        }
        if (tokens.size() != 5) {
            throw ValidationError(where(origin, line_no) + "expected 5 fields 'class cx cy w h', got " +
                                  std::to_string(tokens.size()));
        }
        BoundingBoxLabel box;
        {
            const auto* end = tokens[0].data() + tokens[0].size();
            auto [ptr, ec] = std::from_chars(tokens[0].data(), end, box.class_id);
            if (ec != std::errc() || ptr != end) {
                throw ValidationError(where(origin, line_no) + "class id '" + std::string(tokens[0]) +
                                      "' is not an integer");
            }
        }
        double* fields[4] = {&box.cx, &box.cy, &box.w, &box.h};
        for (int f = 0; f < 4; ++f) {
            if (!parse_double(tokens[f + 1], *fields[f])) {
                throw ValidationError(where(origin, line_no) + "malformed number '" + std::string(tokens[f + 1]) + "'");
            }
        }
        if (box.class_id < 0 || box.class_id >= static_cast<int>(kClassCount)) {
            throw ValidationError(where(origin, line_no) + "class id " + std::to_string(box.class_id) +
                                  " outside [0, 4]");
        }
        if (!(box.w > 0.0 && box.w <= 1.0 && box.h > 0.0 && box.h <= 1.0)) {
            throw ValidationError(where(origin, line_no) + "box size must lie in (0, 1]");
        }
        if (!(box.cx >= 0.0 && box.cx <= 1.0 && box.cy >= 0.0 && box.cy <= 1.0)) {
            throw ValidationError(where(origin, line_no) + "box center must lie in [0, 1]");
        }
        labels.push_back(box);
        if (eol == text.size()) {
            break;
        }
    }
    return labels;
}

std::vector<BoundingBoxLabel> parse_labels(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ValidationError("cannot read label file " + path.string());
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_labels_text(ss.str(), path.string());
}

namespace {
void append_number(std::string& out, double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}
}  // namespace

std::string format_labels(const std::vector<BoundingBoxLabel>& labels)
{
    std::string out;
    for (const auto& b : labels) {
        out += std::to_string(b.class_id);
        for (double v : {b.cx, b.cy, b.w, b.h}) {
            out += ' ';
            append_number(out, v);
        }
        out += '\n';
    }
    return out;
}

void write_labels(const std::vector<BoundingBoxLabel>& labels, const fs::path& path)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw RuntimeFailure("cannot write label file " + path.string());
    }
    os << format_labels(labels);
}

// ------------------------------------------------------------------ crop

PixelRect label_rect(const BoundingBoxLabel& l, int width, int height)
{
    auto half_up = [](double v) { return static_cast<int>(std::floor(v + 0.5)); };
    PixelRect r;
    r.x0 = std::clamp(half_up((l.cx - l.w / 2.0) * width), 0, width);
    r.y0 = std::clamp(half_up((l.cy - l.h / 2.0) * height), 0, height);
    r.x1 = std::clamp(half_up((l.cx + l.w / 2.0) * width), 0, width);
    r.y1 = std::clamp(half_up((l.cy + l.h / 2.0) * height), 0, height);
    return r;
}

CropResult crop_objects(const ImageTensor& image, const std::vector<BoundingBoxLabel>& labels)
{
    CropResult result;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const PixelRect r = label_rect(labels[i], image.width(), image.height());
        if (r.empty()) {
            result.warnings.push_back("label " + std::to_string(i) + " (class " + std::to_string(labels[i].class_id) +
                                      ") rounds to an empty rectangle; skipped");
            continue;
        }
        result.crops.push_back({labels[i].class_id, i, crop(image, r.x0, r.y0, r.x1, r.y1)});
    }
    return result;
}

fs::path crop_path(const fs::path& root, const std::vector<std::string>& class_names, std::string_view source_id,
                   const ObjectCrop& c)
{
    std::string flat(source_id);
    std::replace(flat.begin(), flat.end(), '/', '_');
    return root / class_names.at(static_cast<std::size_t>(c.class_id)) /
           (flat + "_" + std::to_string(c.label_index) + ".png");
}

// ----------------------------------------------------------------- split

std::pair<DomainDataset, DomainDataset> split_dataset(const DomainDataset& ds, double ratio, std::uint64_t seed)
{
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ValidationError("split ratio must lie in (0, 1)");
    }
    const std::size_t n = ds.size();
    if (n < 2) {
        throw ValidationError("cannot split a dataset of " + std::to_string(n) + " item(s)");
    }
    auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, {0x5711u}));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<bool> in_train(n, false);
    for (std::size_t i = 0; i < n_train; ++i) {
        in_train[perm[i]] = true;
    }
    DomainDataset train(ds.class_names()), val(ds.class_names());
    for (std::size_t i = 0; i < n; ++i) {
        (in_train[i] ? train : val).add(ds[i]);
    }
    return {std::move(train), std::move(val)};
}

// ----------------------------------------------------------------- batch

BatchIterator::BatchIterator(const DomainDataset& ds, int batch_size, bool shuffle, std::uint64_t seed)
    : ds_(&ds), batch_size_(static_cast<std::size_t>(batch_size)), shuffle_(shuffle), seed_(seed)
{
    if (batch_size < 1) {
        throw ValidationError("batch size must be >= 1");
    }
    reset(0);
}

std::size_t BatchIterator::batches_per_epoch() const noexcept
{
    return (ds_->size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> BatchIterator::order(std::uint64_t epoch) const
{
    std::vector<std::size_t> idx(ds_->size());
    std::iota(idx.begin(), idx.end(), 0);
    if (shuffle_) {
        Rng rng(derive_seed(seed_, {0xba7c4u, epoch}));
        std::shuffle(idx.begin(), idx.end(), rng);
    }
    return idx;
}

std::vector<std::size_t> BatchIterator::batch_indices(std::uint64_t epoch, std::size_t batch) const
{
    const auto idx = order(epoch);
    const std::size_t begin = batch * batch_size_;
    if (begin >= idx.size()) {
        throw ValidationError("batch index out of range");
    }
    const std::size_t end = std::min(begin + batch_size_, idx.size());
    return {idx.begin() + static_cast<std::ptrdiff_t>(begin), idx.begin() + static_cast<std::ptrdiff_t>(end)};
}

void BatchIterator::reset(std::uint64_t epoch)
{
    current_ = order(epoch);
    cursor_ = 0;
}

std::optional<std::vector<std::size_t>> BatchIterator::next()
{
    if (cursor_ >= current_.size()) {
        return std::nullopt;
    }
    const std::size_t end = std::min(cursor_ + batch_size_, current_.size());
    std::vector<std::size_t> batch(current_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                   current_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return batch;
}

std::optional<std::vector<ImageTensor>> BatchIterator::next_images()
{
    auto idx = next();
    if (!idx) {
        return std::nullopt;
    }
    std::vector<ImageTensor> images;
    images.reserve(idx->size());
    for (auto i : *idx) {
        images.push_back((*ds_)[i].image());
    }
    return images;
}

}  // namespace uwgan
