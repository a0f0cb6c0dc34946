#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "uwgan/error.hpp"
#include "uwgan/models.hpp"

using namespace uwgan;
using uwgan::testing::random_tensor;
using uwgan::testing::TempDir;

TEST(Generator, ShapesAndParameterCount)
{
    const auto cfg = default_cycle_gan_config(256);
    EXPECT_EQ(cfg.generator.residual_blocks, 9);
    EXPECT_EQ(default_cycle_gan_config(128).generator.residual_blocks, 6);
    const auto g = build_generator(cfg.generator, 1);
    EXPECT_EQ(g.output_shape({2, 3, 256, 256}), (Shape{2, 3, 256, 256}));
    EXPECT_EQ(cfg.generator.innermost_size(), 64);

    // hand count: convs followed by a norm carry no bias
    const std::size_t k = 64;
    const std::size_t want = 3 * k * 49 + k * 2 * k * 9 + 2 * k * 4 * k * 9 + 9 * 2 * (4 * k * 4 * k * 9) +
                             4 * k * 2 * k * 9 + 2 * k * k * 9 + k * 3 * 49 + 3;
    EXPECT_EQ(g.parameter_count(), want);
}

TEST(Generator, ForwardStaysInTanhRange)
{
    GeneratorConfig gc{32, 4, 1, 2};
    const auto g = build_generator(gc, 3);
    const Tensor y = generator_forward(g, 32, random_tensor({2, 3, 32, 32}, 4));
    EXPECT_EQ(y.shape(), (Shape{2, 3, 32, 32}));
    EXPECT_GT(y.min(), -1.0);
    EXPECT_LT(y.max(), 1.0);
    EXPECT_THROW(generator_forward(g, 32, Tensor({1, 3, 16, 16})), ValidationError);
    EXPECT_THROW(generator_forward(g, 32, Tensor({1, 1, 32, 32})), ValidationError);
}

TEST(Discriminator, PatchMapSizes)
{
    for (auto [size, want] : {std::pair{256, 30}, std::pair{128, 14}, std::pair{64, 6}}) {
        DiscriminatorConfig dc{size, 8, 3};
        EXPECT_EQ(dc.output_size(), want);
        const auto d = build_discriminator(dc, 1);
        EXPECT_EQ(d.output_shape({1, 3, size, size}), (Shape{1, 1, want, want}));
    }
    // full-width parameter count by hand
    const auto d = build_discriminator(DiscriminatorConfig{}, 1);
    const std::size_t want = (3 * 64 * 16 + 64) + 64 * 128 * 16 + 128 * 256 * 16 + 256 * 512 * 16 + (512 * 16 + 1);
    EXPECT_EQ(d.parameter_count(), want);
    DiscriminatorConfig tiny{32, 8, 4};
    EXPECT_THROW(tiny.validate(), ValidationError);
}

TEST(Init, NormalWeightsZeroBias)
{
    const auto g = build_generator(GeneratorConfig{64, 16, 2, 2}, 7);
    auto copy = g;
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (auto& p : copy.parameters()) {
        if (p.name.ends_with("bias")) {
            EXPECT_EQ(p.param->value.min(), 0.0);
            EXPECT_EQ(p.param->value.max(), 0.0);
            continue;
        }
        for (double v : p.param->value.values()) {
            sum += v;
            sq += v * v;
            ++n;
        }
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(mean, 0.0, 1e-3);
    EXPECT_NEAR(sd, 0.02, 1e-3);
}

TEST(CycleGan, SeedsDetermineWeights)
{
    const auto cfg = CycleGanConfig{{32, 4, 1, 2}, {32, 4, 2}};
    auto a = CycleGanState::create(cfg, 5);
    auto b = CycleGanState::create(cfg, 5);
    auto c = CycleGanState::create(cfg, 6);
    auto pa = a.g_uw.parameters();
    auto pb = b.g_uw.parameters();
    auto pc = c.g_uw.parameters();
    EXPECT_EQ(pa[0].param->value[3], pb[0].param->value[3]);
    EXPECT_NE(pa[0].param->value[3], pc[0].param->value[3]);
    // the two generators differ
    EXPECT_NE(a.g_uw.parameters()[0].param->value[0], a.g_lab.parameters()[0].param->value[0]);
}

TEST(CycleGan, CheckpointRoundTripAndHashGuard)
{
    TempDir tmp;
    const auto cfg = CycleGanConfig{{32, 4, 1, 2}, {32, 4, 2}};
    auto s = CycleGanState::create(cfg, 5, {1e-3, 0.5, 0.999, 1e-8});
    s.step = 17;
    s.save(tmp / "s.ckpt");
    auto back = CycleGanState::load(tmp / "s.ckpt");
    EXPECT_EQ(back.step, 17u);
    EXPECT_EQ(back.config_hash(), s.config_hash());
    EXPECT_EQ(back.checkpoint_id(), s.checkpoint_id());
    EXPECT_EQ(back.opt_g_uw.config().learning_rate, 1e-3);
    const Tensor x = random_tensor({1, 3, 32, 32}, 9);
    const Tensor y1 = s.g_lab.infer(x);
    const Tensor y2 = back.g_lab.infer(x);
    for (std::size_t i = 0; i < y1.size(); ++i) {
        ASSERT_EQ(y1[i], y2[i]);
    }

    auto ck = s.to_checkpoint();
    ck.config_hash ^= 1;
    EXPECT_THROW(CycleGanState::from_checkpoint(ck), ValidationError);

    const auto cls = build_classifier(0.0, 1);
    EXPECT_THROW(CycleGanState::from_checkpoint(cls.to_checkpoint()), ValidationError);
}

TEST(CycleGan, ConfigJsonRoundTrip)
{
    const auto cfg = CycleGanConfig{{64, 8, 2, 2}, {64, 8, 3}};
    const auto back = cycle_gan_config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
}

TEST(Classifier, LayerTable)
{
    const auto m = build_classifier(0.2, 1);
    const auto t = m.layer_table();
    ASSERT_FALSE(t.empty());
    EXPECT_EQ(t.front().shape, (Shape{1, 3, 150, 150}));
    EXPECT_EQ(t.back().shape, (Shape{1, 5, 1, 1}));
    bool dropout = false;
    for (const auto& row : t) {
        dropout |= row.layer == "Dropout";
    }
    EXPECT_TRUE(dropout);
    bool no_dropout = true;
    for (const auto& row : build_classifier(0.0, 1).layer_table()) {
        no_dropout &= row.layer != "Dropout";
    }
    EXPECT_TRUE(no_dropout);
}

TEST(Classifier, SoftmaxRowsAndCheckpoint)
{
    TempDir tmp;
    const auto m = build_classifier(0.0, 3);
    const Tensor x = random_tensor({2, 3, 150, 150}, 4, 0.0, 1.0);
    const Tensor p = classifier_forward(m, x);
    ASSERT_EQ(p.shape(), (Shape{2, 5, 1, 1}));
    for (int n = 0; n < 2; ++n) {
        double s = 0.0;
        for (int c = 0; c < 5; ++c) {
            EXPECT_GT(p.at(n, c, 0, 0), 0.0);
            s += p.at(n, c, 0, 0);
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    const auto back = ClassifierModel::from_checkpoint(m.to_checkpoint());
    const Tensor p2 = classifier_forward(back, x);
    for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_EQ(p[i], p2[i]);
    }
    EXPECT_THROW(classifier_forward(m, Tensor({1, 3, 64, 64})), ValidationError);
}

TEST(Classifier, SoftmaxIsStableForLargeLogits)
{
    Tensor l({1, 5, 1, 1}, std::vector<double>{1000.0, 999.0, -1000.0, 0.0, 1000.0});
    const Tensor p = softmax_rows(l);
    EXPECT_TRUE(p.all_finite());
    EXPECT_NEAR(p[0], p[4], 1e-15);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}
