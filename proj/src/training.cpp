#include "zods/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "zods/errors.hpp"

namespace zods {

bool method_is_zo(Method m) { return m == Method::ZoDs || m == Method::ZoAeDs; }
bool method_uses_ae(Method m) { return m == Method::FoAeDs || m == Method::ZoAeDs; }

std::string method_name(Method m) {
    switch (m) {
    case Method::FoDs: return "fo-ds";
    case Method::ZoDs: return "zo-ds";
    case Method::FoAeDs: return "fo-ae-ds";
    case Method::ZoAeDs: return "zo-ae-ds";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (gamma < 0.0) throw std::invalid_argument("train: gamma must be >= 0");
    if (sigma <= 0.0) throw std::invalid_argument("train: sigma must be > 0");
    if (epochs < 0 || pretrain_epochs < 0) throw std::invalid_argument("train: epoch counts must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (method_is_zo(method)) estimator.validate();
}

namespace {

double stab_loss_and_grad(const Tensor& model_out, const StabilityTarget& target, Tensor* dout) {
    if (target.kind == OutputKind::Logits) {
        if (target.soft) return cross_entropy_loss(model_out, target.reference, dout);
        return cross_entropy_vs_label(model_out, target.label, dout);
    }
    return squared_error(model_out, target.reference, false, dout);
}

GradMap prefixed(const GradMap& grads, const std::string& prefix) {
    GradMap out;
    for (const auto& [name, g] : grads) out[prefix + name] = g;
    return out;
}

void accumulate(GradMap& into, const GradMap& grads, double weight) {
    for (const auto& [name, g] : grads) {
        auto it = into.find(name);
        if (it == into.end())
            into[name] = scale(g, weight);
        else
            axpy(weight, g, it->second);
    }
}

// First-order stability gradient through the white-box chain
// denoiser -> [encoder -> decoder] -> base -> loss.
double fo_stability_grads(DefenseStack& stack, const Tensor& noisy, const StabilityTarget& target,
                          GradMap& into, double weight) {
    Graph& base = *stack.base_white_box;
    const Tensor denoised = stack.denoiser.forward1(noisy);
    Tensor model_out;
    if (stack.has_ae()) {
        const Tensor z = stack.encoder->forward1(denoised);
        const Tensor img = stack.decoder->forward1(z);
        model_out = base.forward1(img);
    } else {
        model_out = base.forward1(denoised);
    }
    Tensor dout;
    const double loss = stab_loss_and_grad(model_out, target, &dout);
    base.backward(dout);
    Tensor g = base.input_gradient("x");
    if (stack.has_ae()) {
        stack.decoder->backward(g); // parameters frozen; only the input gradient is used
        accumulate(into, prefixed(stack.encoder->backward(stack.decoder->input_gradient("z")), "encoder/"), weight);
        g = stack.encoder->input_gradient("x");
    }
    accumulate(into, prefixed(stack.denoiser.backward(g), "denoiser/"), weight);
    return loss;
}

struct TargetCache {
    std::vector<bool> ready;
    std::vector<StabilityTarget> targets;

    const StabilityTarget& get(DefenseStack& stack, const std::vector<Tensor>& inputs, int idx, bool zo,
                               bool soft) {
        if (!ready[static_cast<std::size_t>(idx)]) {
            const Tensor& x = inputs[static_cast<std::size_t>(idx)];
            // ZO methods fetch the clean prediction through the oracle (one
            // row, cached for all epochs); FO methods read the white box.
            const Tensor clean = zo ? stack.base->query(x) : stack.base_white_box->forward1(x);
            targets[static_cast<std::size_t>(idx)] =
                make_stability_target(clean, stack.base->output_kind(), soft);
            ready[static_cast<std::size_t>(idx)] = true;
        }
        return targets[static_cast<std::size_t>(idx)];
    }
};

std::string checkpoint_id(const DefenseStack& stack) {
    std::uint64_t h = param_checksum(stack.denoiser);
    if (stack.has_ae()) h ^= 0x9E3779B97F4A7C15ULL * param_checksum(*stack.encoder);
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

} // namespace

DsLossParts ds_loss(DefenseStack& stack, const Tensor& x, const Tensor& delta, const StabilityTarget& target,
                    double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("ds_loss: gamma must be >= 0");
    require_same_shape(x, delta, "ds_loss");
    const Tensor noisy = add(x, delta);
    const Tensor denoised = stack.denoiser.forward1(noisy);
    DsLossParts parts;
    parts.denoise = squared_error(denoised, x, false);
    Tensor pred;
    if (stack.has_ae())
        pred = stack.composed->query(stack.encoder->forward1(denoised));
    else
        pred = stack.base->query(denoised);
    parts.stab = stab_loss_and_grad(pred, target, nullptr);
    parts.total = parts.denoise + gamma * parts.stab;
    return parts;
}

std::uint64_t expected_training_queries(const TrainConfig& cfg, int n_examples, int d, int d_z) {
    if (!method_is_zo(cfg.method)) return 0;
    const int dim = method_uses_ae(cfg.method) ? d_z : d;
    const std::uint64_t per_estimate =
        cfg.estimator.kind == EstimatorKind::Cge ? static_cast<std::uint64_t>(dim) + 1
                                                 : static_cast<std::uint64_t>(cfg.estimator.q) + 1;
    const std::uint64_t n = static_cast<std::uint64_t>(n_examples);
    std::uint64_t stab_epochs = static_cast<std::uint64_t>(cfg.epochs);
    if (cfg.gamma == 0.0 || stab_epochs == 0) return 0;
    return n /* cached targets */ + n * per_estimate * stab_epochs;
}

TrainReport train(const TrainConfig& cfg, DefenseStack& stack, const Dataset& data) {
    std::vector<Tensor> inputs;
    inputs.reserve(static_cast<std::size_t>(data.size()));
    for (int i = 0; i < data.size(); ++i) inputs.push_back(data.example(i));
    return train(cfg, stack, inputs);
}

TrainReport train(const TrainConfig& cfg, DefenseStack& stack, const std::vector<Tensor>& inputs) {
    cfg.validate();
    const int n = static_cast<int>(inputs.size());
    if (n == 0) throw std::invalid_argument("train: empty dataset");
    const bool use_ae = method_uses_ae(cfg.method);
    const bool zo = method_is_zo(cfg.method);
    if (use_ae && !stack.has_ae())
        throw std::invalid_argument("train: method " + method_name(cfg.method) + " requires an AE stack");
    if (!use_ae && stack.has_ae())
        throw std::invalid_argument("train: method " + method_name(cfg.method) + " does not use an AE stack");
    if (zo && stack.base_white_box)
        throw contract_violation("zeroth-order training must not hold white-box access to the base model");
    if (!zo && !stack.base_white_box)
        throw std::invalid_argument("first-order training requires the white-box base graph");

    const std::uint64_t dec_hash_before = stack.has_ae() ? param_checksum(*stack.decoder) : 0;
    const std::uint64_t queries_at_start = stack.base->queries_used();
    RngStream root(cfg.seed, 0x7312u);

    TargetCache cache;
    cache.ready.assign(static_cast<std::size_t>(n), false);
    cache.targets.resize(static_cast<std::size_t>(n));

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    TrainReport report;
    Tensor best_den = stack.denoiser.flat_params();
    Tensor best_enc = stack.has_ae() ? stack.encoder->flat_params() : Tensor();
    double best_loss = std::numeric_limits<double>::infinity();
    double initial_loss = -1.0;
    int divergent_epochs = 0;

    // phase 0: denoise-only pre-training (pretrain+finetune scheme)
    // phase 1: full objective (scratch) or stability fine-tune
    struct Phase {
        int epochs;
        bool use_denoise_grad;
        bool use_stab_grad;
        LrSchedule schedule;
    };
    std::vector<Phase> phases;
    if (cfg.scheme == Scheme::Scratch) {
        phases.push_back({cfg.epochs, true, cfg.gamma > 0.0, cfg.lr});
    } else {
        phases.push_back({cfg.pretrain_epochs, true, false, cfg.lr});
        LrSchedule fine = cfg.lr;
        fine.initial = cfg.finetune_lr;
        phases.push_back({cfg.epochs, false, cfg.gamma > 0.0, fine});
    }

    int global_epoch = 0;
    for (std::size_t phase_idx = 0; phase_idx < phases.size(); ++phase_idx) {
        const Phase& phase = phases[phase_idx];
        // fresh optimizer state and divergence reference per phase (the loss
        // scale changes when the stability term enters)
        Optimizer opt(cfg.optimizer);
        initial_loss = -1.0;
        divergent_epochs = 0;
        for (int epoch = 0; epoch < phase.epochs; ++epoch, ++global_epoch) {
            RngStream shuffle_rng = root.split(0x50u).split(static_cast<std::uint64_t>(global_epoch));
            shuffle_indices(shuffle_rng, order);
            const double lr = phase.schedule.at(epoch);

            EpochStats stats;
            for (int start = 0; start < n; start += cfg.batch_size) {
                const int end = std::min(start + cfg.batch_size, n);
                GradMap batch;
                for (int bi = start; bi < end; ++bi) {
                    const int idx = order[static_cast<std::size_t>(bi)];
                    const Tensor& x = inputs[static_cast<std::size_t>(idx)];
                    RngStream delta_rng =
                        root.split(0xDE17Au).split(static_cast<std::uint64_t>(global_epoch)).split(static_cast<std::uint64_t>(idx));
                    const Tensor delta = sample_gaussian(delta_rng, x.shape(), cfg.sigma);
                    const Tensor noisy = add(x, delta);

                    // denoising term (white-box, always reported)
                    const Tensor denoised = stack.denoiser.forward1(noisy);
                    Tensor ddenoised;
                    const double denoise_loss = squared_error(denoised, x, false, &ddenoised);
                    stats.denoise_loss += denoise_loss;
                    if (phase.use_denoise_grad)
                        accumulate(batch, prefixed(stack.denoiser.backward(ddenoised), "denoiser/"), 1.0);

                    if (phase.use_stab_grad) {
                        const StabilityTarget& target =
                            cache.get(stack, inputs, idx, zo, cfg.soft_stability_target);
                        double stab_loss = 0.0;
                        if (zo) {
                            EstimatorConfig est = cfg.estimator;
                            est.rng = root.split(0xE57u)
                                          .split(static_cast<std::uint64_t>(global_epoch))
                                          .split(static_cast<std::uint64_t>(idx));
                            StabilityGrad sg;
                            if (use_ae) {
                                ScalarLossOracle composed_loss(stack.composed, target.loss_map());
                                sg = stability_grad_zo_ae(stack.denoiser, *stack.encoder, composed_loss, x, delta,
                                                          est);
                            } else {
                                ScalarLossOracle base_loss(stack.base, target.loss_map());
                                sg = stability_grad_zo_ds(stack.denoiser, base_loss, x, delta, est);
                            }
                            accumulate(batch, sg.grads, cfg.gamma);
                            stab_loss = sg.loss;
                        } else {
                            stab_loss = fo_stability_grads(stack, noisy, target, batch, cfg.gamma);
                        }
                        stats.stab_loss += stab_loss;
                    }
                }
                const double inv = 1.0 / (end - start);
                for (auto& [name, grad] : batch) {
                    Tensor g = scale(grad, inv);
                    if (name.rfind("denoiser/", 0) == 0)
                        opt.step(name, stack.denoiser.mutable_param(name.substr(9)), g, lr);
                    else if (name.rfind("encoder/", 0) == 0)
                        opt.step(name, stack.encoder->mutable_param(name.substr(8)), g, lr);
                }
            }

            stats.denoise_loss /= n;
            stats.stab_loss /= n;
            stats.total_loss = stats.denoise_loss + cfg.gamma * stats.stab_loss;
            stats.queries_used = stack.base->queries_used() - queries_at_start;
            report.epochs.push_back(stats);

            if (initial_loss < 0.0) initial_loss = stats.total_loss;
            if (stats.total_loss <= best_loss) {
                best_loss = stats.total_loss;
                best_den = stack.denoiser.flat_params();
                if (stack.has_ae()) best_enc = stack.encoder->flat_params();
            }
            if (initial_loss > 0.0 && stats.total_loss > 10.0 * initial_loss) {
                if (++divergent_epochs >= 3) {
                    stack.denoiser.set_flat_params(best_den);
                    if (stack.has_ae()) stack.encoder->set_flat_params(best_enc);
                    throw training_error("training diverged (loss > 10x initial for 3 epochs); "
                                         "last good checkpoint restored");
                }
            } else {
                divergent_epochs = 0;
            }
        }
    }

    if (stack.has_ae() && param_checksum(*stack.decoder) != dec_hash_before)
        throw training_error("frozen decoder parameters changed during training");

    report.total_queries = stack.base->queries_used() - queries_at_start;
    report.final_checkpoint_id = checkpoint_id(stack);
    return report;
}

} // namespace zods
