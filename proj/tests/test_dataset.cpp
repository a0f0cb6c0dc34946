#include <algorithm>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "uwgan/dataset.hpp"
#include "uwgan/error.hpp"
#include "uwgan/image.hpp"

using namespace uwgan;
using uwgan::testing::random_image;
using uwgan::testing::TempDir;

namespace fs = std::filesystem;

TEST(Labels, ParsesDarknetLines)
{
    const auto labels = parse_labels_text("0 0.5 0.5 0.25 0.125\n\n  3\t0.1 0.2 0.3 0.4 \r\n");
    ASSERT_EQ(labels.size(), 2u);
    EXPECT_EQ(labels[0], (BoundingBoxLabel{0, 0.5, 0.5, 0.25, 0.125}));
    EXPECT_EQ(labels[1], (BoundingBoxLabel{3, 0.1, 0.2, 0.3, 0.4}));
}

TEST(Labels, MalformedLinesRejectedWithLocation)
{
    for (const char* bad : {"0 0.5 0.5 0.2", "7 0.5 0.5 0.2 0.2", "-1 0.5 0.5 0.2 0.2", "0 1.5 0.5 0.2 0.2",
                            "0 0.5 0.5 abc 0.2", "0.5 0.5 0.5 0.2 0.2", "0 0.5 0.5 0.2 0.2 9"}) {
        try {
            parse_labels_text(std::string("0 0.1 0.1 0.1 0.1\n") + bad, "file.txt");
            ADD_FAILURE() << "accepted: " << bad;
        } catch (const ValidationError& e) {
            EXPECT_NE(std::string(e.what()).find("file.txt:2"), std::string::npos) << e.what();
        }
    }
}

TEST(Labels, FormatRoundTripsBitExactly)
{
    std::vector<BoundingBoxLabel> labels = {{0, 0.1, 0.2, 0.3, 0.4},
                                            {4, 1.0 / 3.0, 2.0 / 7.0, 0.123456789012345678, 1e-7},
                                            {2, 0.5, 0.5, 1.0, 1.0}};
    const auto back = parse_labels_text(format_labels(labels));
    EXPECT_EQ(back, labels);

    TempDir tmp;
    write_labels(labels, tmp / "sub/l.txt");
    EXPECT_EQ(parse_labels(tmp / "sub/l.txt"), labels);
    EXPECT_THROW(parse_labels(tmp / "none.txt"), std::runtime_error);
}

TEST(Labels, RectRoundsHalfUpAndClamps)
{
    // 100x50: cx .5 w .25 -> x in [37.5, 62.5) -> [38, 63)
    const auto r = label_rect({0, 0.5, 0.5, 0.25, 0.5}, 100, 50);
    EXPECT_EQ(r, (PixelRect{38, 13, 63, 38}));
    const auto edge = label_rect({0, 0.02, 0.98, 0.2, 0.2}, 100, 50);
    EXPECT_EQ(edge.x0, 0);
    EXPECT_EQ(edge.y1, 50);
}

TEST(Crops, WorkedExamples)
{
    const ImageTensor img = random_image(300, 400, 8);
    const auto r = label_rect({2, 0.5, 0.5, 0.25, 0.5}, 400, 300);
    EXPECT_EQ(r, (PixelRect{150, 75, 250, 225}));
    const auto res = crop_objects(img, {{2, 0.5, 0.5, 0.25, 0.5}, {4, 0.5, 0.5, 1.0, 1.0}});
    ASSERT_EQ(res.crops.size(), 2u);
    EXPECT_EQ(res.crops[0].image.width(), 100);
    EXPECT_EQ(res.crops[0].image.height(), 150);
    EXPECT_EQ(res.crops[0].image.at(0, 0, 2), img.at(75, 150, 2));
    EXPECT_TRUE(res.crops[1].image == img);
}

TEST(Crops, CountsAndPixelsMatchTheRect)
{
    ImageTensor img = random_image(40, 60, 5);
    std::vector<BoundingBoxLabel> labels = {{1, 0.5, 0.5, 0.5, 0.5}, {2, 0.1, 0.1, 0.0001, 0.0001}, {3, 0.25, 0.75, 0.1, 0.2}};
    const auto res = crop_objects(img, labels);
    ASSERT_EQ(res.crops.size(), 2u);
    EXPECT_EQ(res.warnings.size(), 1u);
    EXPECT_EQ(res.crops[0].class_id, 1);
    EXPECT_EQ(res.crops[1].label_index, 2u);
    const auto r = label_rect(labels[0], 60, 40);
    EXPECT_EQ(res.crops[0].image.width(), r.width());
    EXPECT_EQ(res.crops[0].image.height(), r.height());
    EXPECT_EQ(res.crops[0].image.at(0, 0, 1), img.at(r.y0, r.x0, 1));
    EXPECT_EQ(crop_path("/o", default_class_names(), "a/b", res.crops[1]), fs::path("/o/lead block/a_b_2.png"));
}

TEST(Dataset, ScanIsRecursiveAndSorted)
{
    TempDir tmp;
    save_png(random_image(4, 4, 1), tmp / "b/z.png");
    save_png(random_image(4, 4, 2), tmp / "a.png");
    save_png(random_image(4, 4, 3), tmp / "b/c.jpg.png");
    {
        std::ofstream(tmp / "notes.txt") << "skip";
    }
    const auto ds = scan_dataset(tmp.path(), Domain::uw);
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds[0].source_id, "a");
    EXPECT_EQ(ds[1].source_id, "b/c.jpg");
    EXPECT_EQ(ds[2].source_id, "b/z");
    EXPECT_EQ(ds[0].domain, Domain::uw);
    EXPECT_EQ(ds[2].image().width(), 4);
    EXPECT_THROW(scan_dataset(tmp / "missing", Domain::uw), std::runtime_error);
}

TEST(Dataset, ObjectTreeTagsClasses)
{
    TempDir tmp;
    save_png(random_image(4, 4, 1), tmp / "pipe/x_0.png");
    save_png(random_image(4, 4, 2), tmp / "bolt/y_1.png");
    const auto ds = scan_object_tree(tmp.path(), Domain::lab);
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds[0].class_id, 0);
    EXPECT_EQ(ds[1].class_id, 4);
    save_png(random_image(4, 4, 3), tmp / "anchor/q.png");
    EXPECT_THROW(scan_object_tree(tmp.path(), Domain::lab), ValidationError);
}

TEST(Dataset, AddValidatesItems)
{
    DomainDataset ds;
    DomainImage a;
    a.source_id = "a";
    a.pixels = std::make_shared<const ImageTensor>(random_image(2, 2, 1));
    ds.add(a);
    EXPECT_THROW(ds.add(a), ValidationError);
    DomainImage f = a;
    f.source_id = "f";
    f.provenance = Provenance::fake;
    EXPECT_THROW(ds.add(f), ValidationError);
    f.checkpoint_id = "abc@1";
    ds.add(f);
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.class_index("pipe"), 4);
    EXPECT_EQ(ds.class_index("anchor"), -1);
    EXPECT_THROW(DomainDataset({"a", "b"}), ValidationError);
}

TEST(Images, GrayscaleIsReplicated)
{
    TempDir tmp;
    ImageTensor g(3, 5, 1, 0.5f);
    save_png(g, tmp / "g.png");
    const auto img = load_image(tmp / "g.png");
    EXPECT_EQ(img.channels(), 3);
    EXPECT_EQ(img.width(), 5);
    EXPECT_NEAR(img.at(1, 1, 2), 128.0f / 255.0f, 1e-6);
    const auto raw = load_image(tmp / "g.png", false);
    EXPECT_EQ(raw.channels(), 1);
}

TEST(Images, PngRoundTripIs8BitExact)
{
    TempDir tmp;
    ImageTensor img(6, 7, 3);
    int k = 0;
    for (auto& v : img.values()) {
        v = static_cast<float>(k++ % 256) / 255.0f;
    }
    save_png(img, tmp / "x.png");
    const auto back = load_image(tmp / "x.png");
    for (std::size_t i = 0; i < img.size(); ++i) {
        EXPECT_EQ(back.values()[i], img.values()[i]);
    }
    EXPECT_THROW(load_image(tmp / "nope.png"), std::runtime_error);
}

TEST(Images, ShortSideCropKeepsAspect)
{
    ImageTensor img(20, 40, 3, 0.0f);
    for (int y = 0; y < 20; ++y) {
        for (int x = 10; x < 30; ++x) {
            img.at(y, x, 0) = 1.0f;
        }
    }
    const auto sq = resize_short_side_center_crop(img, 10);
    EXPECT_EQ(sq.height(), 10);
    EXPECT_EQ(sq.width(), 10);
    // the center 20 columns map onto the whole crop
    EXPECT_NEAR(sq.at(5, 1, 0), 1.0f, 1e-5);
    EXPECT_NEAR(sq.at(5, 8, 0), 1.0f, 1e-5);
}

TEST(Images, ModelBatchRangeRoundTrip)
{
    std::vector<ImageTensor> imgs = {random_image(4, 4, 1), random_image(4, 4, 2)};
    const Tensor b = to_model_batch(imgs);
    EXPECT_EQ(b.shape(), (Shape{2, 3, 4, 4}));
    EXPECT_GE(b.min(), -1.0);
    EXPECT_LE(b.max(), 1.0);
    EXPECT_NEAR(b.at(1, 2, 3, 1), 2.0 * imgs[1].at(3, 1, 2) - 1.0, 1e-6);
    const auto back = from_model_batch(b);
    for (std::size_t i = 0; i < imgs[0].size(); ++i) {
        EXPECT_NEAR(back[0].values()[i], imgs[0].values()[i], 1e-6);
    }
}

TEST(Split, DeterministicDisjointAndSized)
{
    const auto ds = uwgan::testing::synthetic_domain(Domain::lab, 11, 4, 3);
    const auto [a, b] = split_dataset(ds, 0.8, 9);
    EXPECT_EQ(a.size(), 9u);  // round(8.8)
    EXPECT_EQ(b.size(), 2u);
    std::set<std::string> ids;
    for (const auto& i : a) {
        ids.insert(i.source_id);
    }
    for (const auto& i : b) {
        EXPECT_FALSE(ids.contains(i.source_id));
    }
    const auto [a2, b2] = split_dataset(ds, 0.8, 9);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].source_id, a2[i].source_id);
    }
    EXPECT_THROW(split_dataset(ds, 1.0, 0), ValidationError);

    const auto big = uwgan::testing::synthetic_domain(Domain::lab, 4700, 1, 1);
    const auto [tr, va] = split_dataset(big, 0.8, 2);
    EXPECT_EQ(tr.size(), 3760u);
    EXPECT_EQ(va.size(), 940u);
    const auto [one, other] = split_dataset(uwgan::testing::synthetic_domain(Domain::lab, 2, 1, 1), 0.5, 2);
    EXPECT_EQ(one.size(), 1u);
    EXPECT_EQ(other.size(), 1u);
    EXPECT_THROW(split_dataset(uwgan::testing::synthetic_domain(Domain::lab, 1, 1, 1), 0.5, 2), ValidationError);
}

TEST(Batches, EpochPermutationsAndShortTail)
{
    const auto ds = uwgan::testing::synthetic_domain(Domain::lab, 10, 4, 3);
    BatchIterator it(ds, 4, true, 5);
    EXPECT_EQ(it.batches_per_epoch(), 3u);
    const auto o0 = it.order(0);
    const auto o1 = it.order(1);
    EXPECT_NE(o0, o1);
    EXPECT_EQ(o0, BatchIterator(ds, 4, true, 5).order(0));
    auto sorted = o0;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        EXPECT_EQ(sorted[i], i);
    }
    EXPECT_EQ(it.batch_indices(0, 2).size(), 2u);

    it.reset(1);
    std::size_t seen = 0, batches = 0;
    while (auto b = it.next()) {
        seen += b->size();
        ++batches;
    }
    EXPECT_EQ(seen, 10u);
    EXPECT_EQ(batches, 3u);

    BatchIterator plain(ds, 4, false, 5);
    EXPECT_EQ(plain.order(3)[0], 0u);
}
