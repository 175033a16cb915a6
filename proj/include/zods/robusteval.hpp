#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zods/dataset.hpp"
#include "zods/rng.hpp"
#include "zods/tensor.hpp"

namespace zods {

enum class MeasurementKind { Identity, GaussianRows };

/// Linear observation y = A x with the reconstructor fed A^T y. Gaussian
/// rows are drawn once per experiment seed, entries N(0, 1/m).
struct MeasurementModel {
    MeasurementKind kind = MeasurementKind::Identity;
    Tensor a; // (m, d); empty for identity
    int m = 0;
    int d = 0;

    static MeasurementModel identity(int d);
    static MeasurementModel gaussian_rows(int m, int d, std::uint64_t seed);

    Tensor apply_ata(const Tensor& flat) const; // A^T A v in R^d
};

/// A^T A x, returned in the input's image shape.
Tensor measure(const MeasurementModel& mm, const Tensor& x);

struct AttackConfig {
    double epsilon = 1.0;
    int steps = 40;
    double step_size = 0.0; // 0 selects epsilon / 10
    std::uint64_t seed = 0; // reserved for randomized starts; delta starts at 0

    void validate() const;
};

/// loss and d(loss)/d(input) of the attacked pipeline at a perturbed input.
using LossGradFn = std::function<std::pair<double, Tensor>(const Tensor& x_perturbed)>;

/// l2 projected gradient ascent: delta <- Proj_{||.||2 <= eps}(delta +
/// step * g/||g||). Zero gradients skip the step. Returns the final delta.
Tensor pgd_l2(const LossGradFn& loss_grad, const Tensor& x, const AttackConfig& cfg);

double rmse(const Tensor& x_true, const Tensor& x_est);

/// Single-scale SSIM with a Gaussian window (8x8 at desk scale, sigma 1.5),
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2, L = 1, averaged over channels and all
/// valid window positions.
double ssim(const Tensor& x_true, const Tensor& x_est);

struct AttackRow {
    std::string method;
    double epsilon = 0.0;
    double rmse = 0.0;
    double ssim = 0.0;
};

/// One trained reconstruction pipeline under attack: white-box loss gradient
/// for the attacker plus the plain reconstruction map for metrics.
struct ReconstructionPipeline {
    std::string name;
    std::function<Tensor(const Tensor& x_img)> reconstruct;
    std::function<std::pair<double, Tensor>(const Tensor& x_img, const Tensor& truth)> loss_grad;
};

/// RMSE/SSIM per (method, epsilon), epsilon = 0 rows being the clean
/// evaluation. Metrics are averaged over the dataset; adversarial inputs are
/// clamped to [0,1] before reconstruction.
std::vector<AttackRow> attack_table(std::vector<ReconstructionPipeline>& methods, const Dataset& data,
                                    const std::vector<double>& epsilons, const AttackConfig& base_cfg);

} // namespace zods
