#include "uwgan/losses.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "uwgan/error.hpp"

namespace uwgan {

LossRecord LossRecord::from_terms(double gan_uw_to_lab, double gan_lab_to_uw, double cycle_uw, double cycle_lab,
                                  double lambda)
{
    LossRecord r;
    r.gan_uw_to_lab = gan_uw_to_lab;
    r.gan_lab_to_uw = gan_lab_to_uw;
    r.gan_total = total_adversarial(gan_uw_to_lab, gan_lab_to_uw);
    r.cycle_uw = cycle_uw;
    r.cycle_lab = cycle_lab;
    r.cycle_total = cycle_uw + cycle_lab;
    r.lambda = lambda;
    r.total = total_loss(r.gan_total, r.cycle_total, lambda);
    return r;
}

bool LossRecord::all_finite() const
{
    for (double v : {gan_uw_to_lab, gan_lab_to_uw, gan_total, cycle_uw, cycle_lab, cycle_total, total}) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

double LossRecord::identity_error() const
{
    const double a = std::abs(gan_total - (gan_uw_to_lab + gan_lab_to_uw));
    const double b = std::abs(cycle_total - (cycle_uw + cycle_lab));
    const double c = std::abs(total - (gan_total + lambda * cycle_total));
    return std::max({a, b, c});
}

double mean_squared_to(const Tensor& s, double target, Tensor* grad)
{
    if (s.empty()) {
        throw ValidationError("loss on an empty score batch");
    }
    const double n = static_cast<double>(s.size());
    double acc = 0.0;
    if (grad) {
        *grad = Tensor(s.shape());
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = s[i] - target;
        acc += d * d;
        if (grad) {
            (*grad)[i] = 2.0 * d / n;
        }
    }
    return acc / n;
}

double adversarial_loss(const Tensor& d_on_translated, const Tensor& d_on_real, Tensor* grad_translated,
                        Tensor* grad_real)
{
    return mean_squared_to(d_on_translated, 1.0, grad_translated) + mean_squared_to(d_on_real, 0.0, grad_real);
}

double total_adversarial(double l_uw_to_lab, double l_lab_to_uw)
{
    return l_uw_to_lab + l_lab_to_uw;
}

double cycle_loss(const Tensor& x_real, const Tensor& x_rebuild, Tensor* grad_rebuild)
{
    if (x_real.shape() != x_rebuild.shape()) {
        throw ValidationError("cycle loss shape mismatch: " + to_string(x_real.shape()) + " vs " +
                              to_string(x_rebuild.shape()));
    }
    if (x_real.empty()) {
        throw ValidationError("cycle loss on an empty batch");
    }
    const double n = static_cast<double>(x_real.size());
    if (grad_rebuild) {
        *grad_rebuild = Tensor(x_real.shape());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < x_real.size(); ++i) {
        const double d = x_rebuild[i] - x_real[i];
        acc += std::abs(d);
        if (grad_rebuild) {
            (*grad_rebuild)[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
        }
    }
    return acc / n;
}

double total_loss(double gan_total, double cycle_total, double lambda)
{
    if (lambda < 0.0) {
        throw ValidationError("lambda must be non-negative");
    }
    return gan_total + lambda * cycle_total;
}

namespace {

void scale(Tensor& t, double k)
{
    for (auto& v : t.values()) {
        v *= k;
    }
}

}  // namespace

GeneratorPass generator_objective(nn::Network& g_uw, nn::Network& g_lab, nn::Network& d_uw, nn::Network& d_lab,
                                  const Tensor& x_uw, const Tensor& x_lab, double lambda, bool backprop)
{
    const nn::ForwardContext ctx{true, nullptr};
    nn::CachePtr c_fake_lab, c_rebuild_uw, c_fake_uw, c_rebuild_lab, c_d_lab, c_d_uw;
    auto want = [&](nn::CachePtr& c) { return backprop ? &c : nullptr; };

    GeneratorPass p;
    p.fake_lab = g_lab.forward(x_uw, ctx, want(c_fake_lab));
    p.rebuild_uw = g_uw.forward(p.fake_lab, ctx, want(c_rebuild_uw));
    p.fake_uw = g_uw.forward(x_lab, ctx, want(c_fake_uw));
    p.rebuild_lab = g_lab.forward(p.fake_uw, ctx, want(c_rebuild_lab));

    const Tensor s_fake_lab = d_lab.forward(p.fake_lab, ctx, want(c_d_lab));
    const Tensor s_fake_uw = d_uw.forward(p.fake_uw, ctx, want(c_d_uw));
    // real-score halves of the logged loss; constants for the generators
    const Tensor s_real_lab = d_lab.infer(x_lab);
    const Tensor s_real_uw = d_uw.infer(x_uw);

    Tensor g_s_fake_lab, g_s_fake_uw, g_rebuild_uw, g_rebuild_lab;
    const double adv_lab = mean_squared_to(s_fake_lab, 1.0, backprop ? &g_s_fake_lab : nullptr);
    const double adv_uw = mean_squared_to(s_fake_uw, 1.0, backprop ? &g_s_fake_uw : nullptr);
    const double cyc_uw = cycle_loss(x_uw, p.rebuild_uw, backprop ? &g_rebuild_uw : nullptr);
    const double cyc_lab = cycle_loss(x_lab, p.rebuild_lab, backprop ? &g_rebuild_lab : nullptr);

    p.record = LossRecord::from_terms(adv_lab + mean_squared_to(s_real_lab, 0.0),
                                      adv_uw + mean_squared_to(s_real_uw, 0.0), cyc_uw, cyc_lab, lambda);
    p.objective = adv_lab + adv_uw + lambda * p.record.cycle_total;

    if (backprop) {
        scale(g_rebuild_uw, lambda);
        scale(g_rebuild_lab, lambda);
        Tensor g_fake_lab = d_lab.backward(g_s_fake_lab, *c_d_lab);
        g_fake_lab += g_uw.backward(g_rebuild_uw, *c_rebuild_uw);
        Tensor g_fake_uw = d_uw.backward(g_s_fake_uw, *c_d_uw);
        g_fake_uw += g_lab.backward(g_rebuild_lab, *c_rebuild_lab);
        g_lab.backward(g_fake_lab, *c_fake_lab);
        g_uw.backward(g_fake_uw, *c_fake_uw);
    }
    return p;
}

GeneratorPass generator_objective(CycleGanState& state, const Tensor& x_uw, const Tensor& x_lab, double lambda,
                                  bool backprop)
{
    const int size = state.image_size();
    for (const Tensor* x : {&x_uw, &x_lab}) {
        const Shape& s = x->shape();
        if (s.c != 3 || s.h != size || s.w != size) {
            throw ValidationError("generator objective expects 3 x " + std::to_string(size) + " x " +
                                  std::to_string(size) + " batches, got " + to_string(s));
        }
    }
    return generator_objective(state.g_uw, state.g_lab, state.d_uw, state.d_lab, x_uw, x_lab, lambda, backprop);
}

double discriminator_objective(nn::Network& d, const Tensor& real, const Tensor& fake, bool backprop, double k)
{
    const nn::ForwardContext ctx{true, nullptr};
    nn::CachePtr c_real, c_fake;
    const Tensor s_real = d.forward(real, ctx, backprop ? &c_real : nullptr);
    const Tensor s_fake = d.forward(fake, ctx, backprop ? &c_fake : nullptr);
    Tensor g_real, g_fake;
    const double l_real = mean_squared_to(s_real, 1.0, backprop ? &g_real : nullptr);
    const double l_fake = mean_squared_to(s_fake, 0.0, backprop ? &g_fake : nullptr);
    if (backprop) {
        scale(g_real, k);
        scale(g_fake, k);
        d.backward(g_real, *c_real);
        d.backward(g_fake, *c_fake);
    }
    return k * (l_real + l_fake);
}

// ------------------------------------------------------------------- CSV

namespace {

void put_number(std::ostream& os, double v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    os.write(buf, res.ptr - buf);
}

}  // namespace

void write_loss_csv_header(std::ostream& os)
{
    os << "epoch,step,gan_uw_to_lab,gan_lab_to_uw,gan_total,cycle_uw,cycle_lab,cycle_total,total,lambda,"
          "generator_objective,d_uw_objective,d_lab_objective\n";
}

void write_loss_csv_row(std::ostream& os, const LossRow& row)
{
    const LossRecord& r = row.record;
    os << row.epoch << ',' << row.step;
    for (double v : {r.gan_uw_to_lab, r.gan_lab_to_uw, r.gan_total, r.cycle_uw, r.cycle_lab, r.cycle_total, r.total,
                     r.lambda, row.generator_objective, row.d_uw_objective, row.d_lab_objective}) {
        os << ',';
        put_number(os, v);
    }
    os << '\n';
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw RuntimeFailure("cannot write " + path.string());
    }
    write_loss_csv_header(os);
    for (const auto& row : rows) {
        write_loss_csv_row(os, row);
    }
}

}  // namespace uwgan
