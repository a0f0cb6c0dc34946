#include "fixtures.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "uwgan/rng.hpp"

namespace uwgan::testing {

namespace fs = std::filesystem;

TempDir::TempDir()
{
    const char* base = std::getenv("TMPDIR");
    std::string tmpl = std::string(base && *base ? base : "/tmp") + "/uwgan_test_XXXXXX";
    if (!mkdtemp(tmpl.data())) {
        throw std::runtime_error("mkdtemp failed");
    }
    path_ = tmpl;
}

TempDir::~TempDir()
{
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo, double hi)
{
    Tensor t(shape);
    Rng rng(seed);
    for (auto& v : t.values()) {
        v = uniform(rng, lo, hi);
    }
    return t;
}

ImageTensor random_image(int h, int w, std::uint64_t seed, float lo, float hi)
{
    ImageTensor img(h, w, 3);
    Rng rng(seed);
    for (auto& v : img.values()) {
        v = static_cast<float>(uniform(rng, lo, hi));
    }
    return img;
}

ImageTensor synthetic_scene(int size, Domain domain, std::uint64_t seed)
{
    Rng rng(seed);
    const double cx = uniform(rng, 0.3, 0.7) * size;
    const double cy = uniform(rng, 0.3, 0.7) * size;
    const double r = uniform(rng, 0.15, 0.3) * size;
    const double base[3] = {0.6, 0.6, 0.55};
    const double obj[3] = {uniform(rng, 0.7, 0.9), uniform(rng, 0.3, 0.5), 0.2};
    const double tint[3] = {0.35, 0.75, 0.8};
    ImageTensor img(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const bool inside = (x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r;
            for (int c = 0; c < 3; ++c) {
                double v = inside ? obj[c] : base[c] * (0.8 + 0.2 * y / size);
                if (domain == Domain::uw) {
                    v = 0.65 * v * tint[c] + 0.35 * 0.6 * tint[c];
                }
                img.at(y, x, c) = static_cast<float>(v);
            }
        }
    }
    return img;
}

DomainDataset synthetic_domain(Domain domain, int count, int size, std::uint64_t seed)
{
    DomainDataset ds;
    for (int i = 0; i < count; ++i) {
        DomainImage item;
        item.source_id = std::string(to_string(domain)) + "_" + std::to_string(i);
        item.domain = domain;
        item.pixels = std::make_shared<const ImageTensor>(
            synthetic_scene(size, domain, derive_seed(seed, {static_cast<std::uint64_t>(i)})));
        ds.add(std::move(item));
    }
    return ds;
}

ImageTensor synthetic_object(int class_id, int size, std::uint64_t seed)
{
    Rng rng(seed);
    const double cx = uniform(rng, 0.4, 0.6) * size;
    const double cy = uniform(rng, 0.4, 0.6) * size;
    const double s = uniform(rng, 0.22, 0.32) * size;
    const float bg = static_cast<float>(uniform(rng, 0.15, 0.35));
    const float fg[3] = {static_cast<float>(uniform(rng, 0.6, 0.95)), static_cast<float>(uniform(rng, 0.6, 0.95)),
                         static_cast<float>(uniform(rng, 0.6, 0.95))};
    ImageTensor img(size, size, 3, bg);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double d = std::sqrt(dx * dx + dy * dy);
            bool on = false;
            switch (class_id) {
            case 0:
                on = d < s;
                break;
            case 1:
                on = std::abs(dx) < s * 0.9 && std::abs(dy) < s * 0.9;
                break;
            case 2:
                on = std::abs(dx) < s * 1.4 && std::abs(dy) < s * 0.35;
                break;
            case 3:
                on = std::abs(dx) < s * 0.35 && std::abs(dy) < s * 1.4;
                break;
            default:
                on = d < s && d > s * 0.55;
                break;
            }
            if (on) {
                for (int c = 0; c < 3; ++c) {
                    img.at(y, x, c) = fg[c];
                }
            }
        }
    }
    return img;
}

DomainDataset synthetic_objects(int per_class, int size, std::uint64_t seed)
{
    DomainDataset ds;
    for (int i = 0; i < per_class; ++i) {
        for (int c = 0; c < static_cast<int>(kClassCount); ++c) {
            DomainImage item;
            item.source_id = ds.class_names()[static_cast<std::size_t>(c)] + "/obj_" + std::to_string(i);
            item.class_id = c;
            item.pixels = std::make_shared<const ImageTensor>(synthetic_object(
                c, size, derive_seed(seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)})));
            ds.add(std::move(item));
        }
    }
    return ds;
}

namespace {

void fill_uniform(nn::Network& net, std::uint64_t seed, double lo, double hi)
{
    for (auto& p : net.parameters()) {
        p.param->value = random_tensor(p.param->value.shape(), seed++, lo, hi);
    }
}

}  // namespace

nn::Network toy_generator(std::uint64_t seed)
{
    nn::Sequential s;
    s.add<nn::Conv2d>(3, 3, 1, 1, 0, true);
    s.add<nn::Tanh>();
    nn::Network net("toy_g", std::move(s));
    fill_uniform(net, seed, -0.8, 0.8);
    return net;
}

nn::Network toy_discriminator(std::uint64_t seed)
{
    nn::Sequential s;
    s.add<nn::Conv2d>(3, 1, 3, 2, 1, true);
    nn::Network net("toy_d", std::move(s));
    fill_uniform(net, seed, -0.5, 0.5);
    return net;
}

LabeledFixture write_labeled_fixture(const fs::path& root, int count, std::uint64_t seed)
{
    LabeledFixture fx;
    fx.images = root / "images";
    fx.labels = root / "labels";
    constexpr int kW = 160;
    constexpr int kH = 120;
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
        const std::string rel = (i % 3 == 2 ? "set_b/" : "set_a/") + std::string("scene_") + std::to_string(i);
        ImageTensor img = random_image(kH, kW, derive_seed(seed, {99, static_cast<std::uint64_t>(i)}), 0.2f, 0.4f);
        std::vector<BoundingBoxLabel> labels;
        const int objects = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < objects; ++k) {
            BoundingBoxLabel l;
            l.class_id = static_cast<int>(rng() % kClassCount);
            // pixel-aligned boxes, written as n/W fractions
            const int bw = 20 + static_cast<int>(rng() % 30);
            const int bh = 16 + static_cast<int>(rng() % 30);
            const int x0 = static_cast<int>(rng() % (kW - bw));
            const int y0 = static_cast<int>(rng() % (kH - bh));
            l.w = static_cast<double>(bw) / kW;
            l.h = static_cast<double>(bh) / kH;
            l.cx = (x0 + bw / 2.0) / kW;
            l.cy = (y0 + bh / 2.0) / kH;
            labels.push_back(l);
            for (int y = y0; y < y0 + bh; ++y) {
                for (int x = x0; x < x0 + bw; ++x) {
                    img.at(y, x, l.class_id % 3) = 0.9f;
                }
            }
        }
        save_png(img, fx.images / (rel + ".png"));
        write_labels(labels, fx.labels / (rel + ".txt"));
        ++fx.image_count;
        fx.object_count += labels.size();
    }
    return fx;
}

}  // namespace uwgan::testing
