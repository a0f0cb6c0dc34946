#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

#include "uwgan/models.hpp"
#include "uwgan/tensor.hpp"

namespace uwgan {

struct LossRecord {
    double gan_uw_to_lab = 0.0;
    double gan_lab_to_uw = 0.0;
    double gan_total = 0.0;
    double cycle_uw = 0.0;
    double cycle_lab = 0.0;
    double cycle_total = 0.0;
    double total = 0.0;
    double lambda = 10.0;

    /// Fills the three derived fields from the four directional terms.
    static LossRecord from_terms(double gan_uw_to_lab, double gan_lab_to_uw, double cycle_uw, double cycle_lab,
                                 double lambda);

    bool all_finite() const;
    /// Largest violation of the sum identities.
    double identity_error() const;
};

/// mean((s - target)^2); optional gradient w.r.t. s.
double mean_squared_to(const Tensor& s, double target, Tensor* grad = nullptr);

/// Per-direction loss as logged: mean((d_on_translated - 1)^2) + mean(d_on_real^2).
double adversarial_loss(const Tensor& d_on_translated, const Tensor& d_on_real, Tensor* grad_translated = nullptr,
                        Tensor* grad_real = nullptr);

double total_adversarial(double l_uw_to_lab, double l_lab_to_uw);

/// Mean absolute difference. Gradient is w.r.t. x_rebuild (sign, zero at ties).
double cycle_loss(const Tensor& x_real, const Tensor& x_rebuild, Tensor* grad_rebuild = nullptr);

double total_loss(double gan_total, double cycle_total, double lambda);

/// Everything produced by one generator-side evaluation.
struct GeneratorPass {
    Tensor fake_lab;    // G_lab(x_uw)
    Tensor fake_uw;     // G_uw(x_lab)
    Tensor rebuild_uw;  // G_uw(G_lab(x_uw))
    Tensor rebuild_lab; // G_lab(G_uw(x_lab))
    double objective = 0.0;
    LossRecord record;
};

/// Generator objective: sum over both directions of mean((D(G(x)) - 1)^2)
/// plus lambda * cycle_total. With `backprop`, grads are accumulated into
/// both generators. The discriminators' grads get touched along the way and
/// must be zeroed before they are updated.
GeneratorPass generator_objective(nn::Network& g_uw, nn::Network& g_lab, nn::Network& d_uw, nn::Network& d_lab,
                                  const Tensor& x_uw, const Tensor& x_lab, double lambda, bool backprop);

GeneratorPass generator_objective(CycleGanState& state, const Tensor& x_uw, const Tensor& x_lab, double lambda,
                                  bool backprop);

/// scale * (mean((D(real) - 1)^2) + mean(D(fake)^2)). `fake` is treated as a
/// constant. With `backprop`, grads are accumulated into `d`.
double discriminator_objective(nn::Network& d, const Tensor& real, const Tensor& fake, bool backprop,
                               double scale = 0.5);

struct LossRow {
    std::int64_t epoch = 0;
    std::int64_t step = 0;
    LossRecord record;
    double generator_objective = 0.0;
    double d_uw_objective = 0.0;
    double d_lab_objective = 0.0;
};

void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, const LossRow& row);
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows);

}  // namespace uwgan
