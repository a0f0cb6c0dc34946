#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "uwgan/error.hpp"
#include "uwgan/losses.hpp"

using namespace uwgan;
using uwgan::testing::random_tensor;

TEST(LossTerms, LeastSquaresClosedForms)
{
    const Tensor s({1, 1, 2, 2}, std::vector<double>{1.0, 0.0, 2.0, 1.0});
    EXPECT_DOUBLE_EQ(mean_squared_to(s, 1.0), (0 + 1 + 1 + 0) / 4.0);
    EXPECT_DOUBLE_EQ(mean_squared_to(s, 0.0), (1 + 0 + 4 + 1) / 4.0);
    // perfect scores on both sides
    const Tensor ones({1, 1, 2, 2}, 1.0), zeros({1, 1, 2, 2}, 0.0);
    EXPECT_DOUBLE_EQ(adversarial_loss(ones, zeros), 0.0);
    EXPECT_DOUBLE_EQ(adversarial_loss(zeros, ones), 2.0);
    EXPECT_DOUBLE_EQ(total_adversarial(0.25, 0.5), 0.75);
}

TEST(LossTerms, CycleIsL1Mean)
{
    const Tensor a({1, 1, 1, 4}, std::vector<double>{0.0, 1.0, -1.0, 0.5});
    const Tensor b({1, 1, 1, 4}, std::vector<double>{0.5, 1.0, 1.0, 0.0});
    EXPECT_DOUBLE_EQ(cycle_loss(a, b), (0.5 + 0 + 2 + 0.5) / 4.0);
    EXPECT_DOUBLE_EQ(cycle_loss(a, a), 0.0);
    Tensor g;
    cycle_loss(a, b, &g);
    EXPECT_DOUBLE_EQ(g[0], 0.25);
    EXPECT_DOUBLE_EQ(g[1], 0.0);
    EXPECT_DOUBLE_EQ(g[2], 0.25);
    EXPECT_DOUBLE_EQ(g[3], -0.25);
    EXPECT_THROW(cycle_loss(a, Tensor({1, 1, 1, 3})), ValidationError);
    EXPECT_THROW(cycle_loss(Tensor(), Tensor()), ValidationError);
}

TEST(LossTerms, TotalAndRecordIdentities)
{
    EXPECT_DOUBLE_EQ(total_loss(1.5, 0.2, 10.0), 3.5);
    EXPECT_DOUBLE_EQ(total_loss(1.5, 0.2, 0.0), 1.5);
    EXPECT_THROW(total_loss(1.0, 1.0, -1.0), ValidationError);
    const auto r = LossRecord::from_terms(0.3, 0.4, 0.05, 0.07, 10.0);
    EXPECT_DOUBLE_EQ(r.gan_total, 0.7);
    EXPECT_DOUBLE_EQ(r.cycle_total, 0.12);
    EXPECT_NEAR(r.total, 0.7 + 1.2, 1e-15);
    EXPECT_LT(r.identity_error(), 1e-15);
    EXPECT_TRUE(r.all_finite());
    auto bad = r;
    bad.cycle_uw = std::nan("");
    EXPECT_FALSE(bad.all_finite());
}

TEST(LossGradients, ScoreTensorGradients)
{
    Tensor t = random_tensor({2, 1, 3, 3}, 1);
    Tensor r = random_tensor({2, 1, 3, 3}, 2);
    Tensor gt, gr;
    adversarial_loss(t, r, &gt, &gr);
    const Tensor nt = uwgan::testing::numeric_gradient([&] { return adversarial_loss(t, r); }, t);
    const Tensor nr = uwgan::testing::numeric_gradient([&] { return adversarial_loss(t, r); }, r);
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_LT(uwgan::testing::rel_error(gt[i], nt[i]), 1e-6);
        EXPECT_LT(uwgan::testing::rel_error(gr[i], nr[i]), 1e-6);
    }
    Tensor x = random_tensor({1, 3, 2, 2}, 3);
    Tensor y = random_tensor({1, 3, 2, 2}, 4);
    Tensor gy;
    cycle_loss(x, y, &gy);
    const Tensor ny = uwgan::testing::numeric_gradient([&] { return cycle_loss(x, y); }, y);
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_LT(uwgan::testing::rel_error(gy[i], ny[i]), 1e-6);
    }
}

namespace {

struct ToyGan {
    nn::Network g_uw = uwgan::testing::toy_generator(11);
    nn::Network g_lab = uwgan::testing::toy_generator(12);
    nn::Network d_uw = uwgan::testing::toy_discriminator(13);
    nn::Network d_lab = uwgan::testing::toy_discriminator(14);
    Tensor x_uw = random_tensor({2, 3, 4, 4}, 15);
    Tensor x_lab = random_tensor({2, 3, 4, 4}, 16);

    std::size_t params()
    {
        return g_uw.parameter_count() + g_lab.parameter_count() + d_uw.parameter_count() + d_lab.parameter_count();
    }
    void zero()
    {
        for (auto* n : {&g_uw, &g_lab, &d_uw, &d_lab}) {
            n->zero_grad();
        }
    }
    GeneratorPass pass(bool backprop)
    {
        return generator_objective(g_uw, g_lab, d_uw, d_lab, x_uw, x_lab, 10.0, backprop);
    }
};

}  // namespace

TEST(LossGradients, GeneratorObjectiveMatchesFiniteDifferences)
{
    ToyGan t;
    EXPECT_LE(t.params(), 100u);
    t.zero();
    const auto p = t.pass(true);
    EXPECT_NEAR(p.objective, p.record.total - mean_squared_to(t.d_lab.infer(t.x_lab), 0.0) -
                                 mean_squared_to(t.d_uw.infer(t.x_uw), 0.0),
                1e-12);
    const auto res = uwgan::testing::check_param_grads([&] { return t.pass(false).objective; }, {&t.g_uw, &t.g_lab});
    EXPECT_EQ(res.checked, 24u);
    EXPECT_LT(res.max_rel, 1e-4);
}

TEST(LossGradients, LoggedTotalHasTheSameGeneratorGradient)
{
    // the real-score halves of the logged terms don't depend on the generators
    ToyGan t;
    t.zero();
    t.pass(true);
    const auto res = uwgan::testing::check_param_grads([&] { return t.pass(false).record.total; }, {&t.g_uw, &t.g_lab});
    EXPECT_LT(res.max_rel, 1e-4);
}

TEST(LossGradients, DiscriminatorObjective)
{
    ToyGan t;
    const Tensor fake = t.g_uw.infer(t.x_lab);
    t.d_uw.zero_grad();
    const double v = discriminator_objective(t.d_uw, t.x_uw, fake, true);
    EXPECT_NEAR(v, 0.5 * (mean_squared_to(t.d_uw.infer(t.x_uw), 1.0) + mean_squared_to(t.d_uw.infer(fake), 0.0)),
                1e-14);
    const auto res = uwgan::testing::check_param_grads(
        [&] { return discriminator_objective(t.d_uw, t.x_uw, fake, false); }, {&t.d_uw});
    EXPECT_LT(res.max_rel, 1e-4);
}

TEST(LossGradients, NoGradientWithoutBackprop)
{
    ToyGan t;
    t.zero();
    t.pass(false);
    for (auto& p : t.g_uw.parameters()) {
        EXPECT_EQ(p.param->grad.max(), 0.0);
        EXPECT_EQ(p.param->grad.min(), 0.0);
    }
}

TEST(LossCsv, HeaderAndShortestRoundTrip)
{
    std::ostringstream os;
    write_loss_csv_header(os);
    LossRow row;
    row.epoch = 1;
    row.step = 7;
    row.record = LossRecord::from_terms(0.1, 1.0 / 3.0, 0.2, 0.3, 10.0);
    row.generator_objective = 2.5;
    write_loss_csv_row(os, row);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')),
              "epoch,step,gan_uw_to_lab,gan_lab_to_uw,gan_total,cycle_uw,cycle_lab,cycle_total,total,lambda,"
              "generator_objective,d_uw_objective,d_lab_objective");
    EXPECT_NE(s.find("1,7,0.1,0.3333333333333333,"), std::string::npos) << s;
}
