#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zods/dataset.hpp"
#include "zods/models.hpp"
#include "zods/optim.hpp"
#include "zods/zo_grad.hpp"

namespace zods {

enum class Method { FoDs, ZoDs, FoAeDs, ZoAeDs };

enum class Scheme { Scratch, PretrainFinetune };

bool method_is_zo(Method m);
bool method_uses_ae(Method m);
std::string method_name(Method m);

struct TrainConfig {
    Method method = Method::ZoAeDs;
    double gamma = 1.0; // stability weight
    double sigma = 0.25;
    EstimatorConfig estimator;
    Scheme scheme = Scheme::Scratch;
    OptimizerKind optimizer = OptimizerKind::Adam;
    LrSchedule lr{1e-3, 1.0, 0};
    double finetune_lr = 1e-4; // second phase of pretrain+finetune
    int epochs = 30;
    int pretrain_epochs = 10; // denoise-only phase of pretrain+finetune
    int batch_size = 32;
    std::uint64_t seed = 1;
    bool soft_stability_target = false;

    void validate() const;
};

struct EpochStats {
    double denoise_loss = 0.0;
    double stab_loss = 0.0;
    double total_loss = 0.0;
    std::uint64_t queries_used = 0; // cumulative oracle rows since train() began
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::uint64_t total_queries = 0;
    std::string final_checkpoint_id;
};

struct DsLossParts {
    double total = 0.0;
    double denoise = 0.0;
    double stab = 0.0;
};

/// Training objective parts at one example: denoise = ||D(x+delta) - x||^2,
/// stab = stability loss of the defended prediction on the denoised path
/// against the cached clean-prediction target, total = denoise + gamma*stab.
/// Routes the prediction through the oracle (one row).
DsLossParts ds_loss(DefenseStack& stack, const Tensor& x, const Tensor& delta, const StabilityTarget& target,
                    double gamma);

/// Closed-form oracle-row budget for one full pass of `train` (all epochs of
/// the stability phase plus one target query per example on first use).
std::uint64_t expected_training_queries(const TrainConfig& cfg, int n_examples, int d, int d_z);

TrainReport train(const TrainConfig& cfg, DefenseStack& stack, const Dataset& data);

/// Same trainer over raw input tensors; reconstruction defenses pass the
/// measured inputs A^T A x here (they are not [0,1] images).
TrainReport train(const TrainConfig& cfg, DefenseStack& stack, const std::vector<Tensor>& inputs);

} // namespace zods
