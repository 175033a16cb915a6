#pragma once

#include <memory>
#include <optional>

#include "zods/graph.hpp"
#include "zods/oracle.hpp"
#include "zods/rng.hpp"

namespace zods {

enum class EstimatorKind { Rge, Cge };

struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::Rge;
    int q = 1;         // probe count for RGE; CGE always probes every coordinate
    double mu = 0.005; // finite-difference step
    RngStream rng{0};
    /// Test hook: when set, probe directions are taken from here in order
    /// instead of being sampled.
    std::shared_ptr<const std::vector<Tensor>> forced_directions;

    void validate() const;
};

/// Randomized gradient estimate over q uniform unit-sphere directions:
/// (1/q) * sum_i (d/mu) (l(w + mu u_i) - l(w)) u_i. Costs q+1 oracle rows;
/// the base value l(w) is evaluated once, shared across probes, and written
/// to *base_out when requested.
Tensor rge(ScalarLossOracle& loss, const Tensor& w, EstimatorConfig& cfg, double* base_out = nullptr);

/// Coordinatewise gradient estimate along every basis direction:
/// sum_i ((l(w + mu e_i) - l(w)) / mu) e_i. Costs d+1 oracle rows.
Tensor cge(ScalarLossOracle& loss, const Tensor& w, const EstimatorConfig& cfg, double* base_out = nullptr);

Tensor zo_gradient(ScalarLossOracle& loss, const Tensor& w, EstimatorConfig& cfg, double* base_out = nullptr);

/// Expected oracle rows for one estimate in dimension d.
std::uint64_t estimate_query_cost(const EstimatorConfig& cfg, int d);

/// The fixed scalar target a stability estimate is measured against,
/// cached once per training example from the clean prediction f(x).
struct StabilityTarget {
    OutputKind kind = OutputKind::Logits;
    int label = -1;     // argmax f(x), hard-label mode
    Tensor reference;   // soft logits target or clean output image
    bool soft = false;  // use softmax(f(x)) instead of the hard label

    ScalarLossOracle::LossMap loss_map() const;
};

StabilityTarget make_stability_target(const Tensor& clean_prediction, OutputKind kind, bool soft);

struct StabilityGrad {
    GradMap grads;    // keys prefixed "denoiser/" and, on the AE path, "encoder/"
    double loss;      // base value l(z) shared by the probes
    Tensor zo_grad;   // the estimate a at z
};

/// ZO-AE-DS stability gradient: z = Enc(D(x+delta)), a = ZO estimate of
/// grad_z of the stability loss through the composed oracle f' = f(Dec(.)),
/// then one backward pass of a^T z through encoder and denoiser.
StabilityGrad stability_grad_zo_ae(Graph& denoiser, Graph& encoder, ScalarLossOracle& composed_loss,
                                   const Tensor& x, const Tensor& delta, EstimatorConfig& cfg);

/// ZO-DS stability gradient: the estimate lives in the full input dimension,
/// z = D(x+delta), then backward of a^T z through the denoiser alone.
StabilityGrad stability_grad_zo_ds(Graph& denoiser, ScalarLossOracle& base_loss, const Tensor& x,
                                   const Tensor& delta, EstimatorConfig& cfg);

} // namespace zods
