#include "zods/zo_grad.hpp"

#include <cmath>

#include "zods/errors.hpp"

namespace zods {

void EstimatorConfig::validate() const {
    if (mu <= 0.0) throw std::invalid_argument("estimator: mu must be > 0");
    if (kind == EstimatorKind::Rge && q < 1) throw std::invalid_argument("estimator: RGE requires q >= 1");
}

namespace {

void check_probe_value(double v, int probe_index) {
    if (!std::isfinite(v))
        throw numerical_error("nonfinite loss value at probe " + std::to_string(probe_index));
}

Tensor probe_direction(EstimatorConfig& cfg, int i, int d) {
    if (cfg.forced_directions) {
        const auto& dirs = *cfg.forced_directions;
        const Tensor& u = dirs[static_cast<std::size_t>(i) % dirs.size()];
        if (u.size() != d) throw std::invalid_argument("forced direction dimension mismatch");
        return u;
    }
    return sample_unit_sphere(cfg.rng, d);
}

} // namespace

Tensor rge(ScalarLossOracle& loss, const Tensor& w, EstimatorConfig& cfg, double* base_out) {
    cfg.validate();
    if (cfg.kind != EstimatorKind::Rge) throw std::invalid_argument("rge called with non-RGE config");
    const int d = w.size();
    const double base = loss.value(w);
    check_probe_value(base, -1);
    if (base_out) *base_out = base;

    std::vector<Tensor> dirs;
    dirs.reserve(static_cast<std::size_t>(cfg.q));
    std::vector<Tensor> probes;
    probes.reserve(static_cast<std::size_t>(cfg.q));
    for (int i = 0; i < cfg.q; ++i) {
        dirs.push_back(probe_direction(cfg, i, d));
        Tensor p = w.flattened();
        axpy(cfg.mu, dirs.back(), p);
        probes.push_back(std::move(p));
    }
    const std::vector<double> values = loss.value_batch(probes);

    Tensor est({d});
    for (int i = 0; i < cfg.q; ++i) {
        check_probe_value(values[static_cast<std::size_t>(i)], i);
        const double coeff = (static_cast<double>(d) / cfg.mu) * (values[static_cast<std::size_t>(i)] - base) / cfg.q;
        axpy(coeff, dirs[static_cast<std::size_t>(i)], est);
    }
    est.require_finite("rge estimate");
    return est;
}

Tensor cge(ScalarLossOracle& loss, const Tensor& w, const EstimatorConfig& cfg, double* base_out) {
    cfg.validate();
    if (cfg.kind != EstimatorKind::Cge) throw std::invalid_argument("cge called with non-CGE config");
    const int d = w.size();
    const double base = loss.value(w);
    check_probe_value(base, -1);
    if (base_out) *base_out = base;

    std::vector<Tensor> probes;
    probes.reserve(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        Tensor p = w.flattened();
        p[i] += cfg.mu;
        probes.push_back(std::move(p));
    }
    const std::vector<double> values = loss.value_batch(probes);

    Tensor est({d});
    for (int i = 0; i < d; ++i) {
        check_probe_value(values[static_cast<std::size_t>(i)], i);
        est[i] = (values[static_cast<std::size_t>(i)] - base) / cfg.mu;
    }
    est.require_finite("cge estimate");
    return est;
}

Tensor zo_gradient(ScalarLossOracle& loss, const Tensor& w, EstimatorConfig& cfg, double* base_out) {
    return cfg.kind == EstimatorKind::Rge ? rge(loss, w, cfg, base_out) : cge(loss, w, cfg, base_out);
}

std::uint64_t estimate_query_cost(const EstimatorConfig& cfg, int d) {
    return cfg.kind == EstimatorKind::Rge ? static_cast<std::uint64_t>(cfg.q) + 1
                                          : static_cast<std::uint64_t>(d) + 1;
}

ScalarLossOracle::LossMap StabilityTarget::loss_map() const {
    if (kind == OutputKind::Logits) {
        if (soft) return ce_loss_vs_soft(reference);
        return ce_loss_vs_label(label);
    }
    return squared_error_vs(reference);
}

StabilityTarget make_stability_target(const Tensor& clean_prediction, OutputKind kind, bool soft) {
    StabilityTarget t;
    t.kind = kind;
    t.soft = soft;
    if (kind == OutputKind::Logits) {
        t.label = argmax(clean_prediction);
        if (soft) t.reference = softmax(clean_prediction);
    } else {
        t.reference = clean_prediction;
    }
    return t;
}

namespace {

GradMap prefixed(const GradMap& grads, const std::string& prefix) {
    GradMap out;
    for (const auto& [name, g] : grads) out[prefix + name] = g;
    return out;
}

} // namespace

StabilityGrad stability_grad_zo_ae(Graph& denoiser, Graph& encoder, ScalarLossOracle& composed_loss,
                                   const Tensor& x, const Tensor& delta, EstimatorConfig& cfg) {
    require_same_shape(x, delta, "stability_grad_zo_ae");
    const Tensor denoised = denoiser.forward1(add(x, delta));
    const Tensor z = encoder.forward1(denoised);
    if (z.size() != composed_loss.dim())
        throw std::logic_error("embedding dimension " + std::to_string(z.size()) +
                               " does not match composed oracle dimension " + std::to_string(composed_loss.dim()));

    StabilityGrad result;
    result.zo_grad = zo_gradient(composed_loss, z, cfg, &result.loss);

    // grad of a^T z w.r.t. denoiser and encoder parameters via one backward
    const GradMap enc_grads = encoder.backward(result.zo_grad);
    const Tensor dz_dden = encoder.input_gradient("x");
    const GradMap den_grads = denoiser.backward(dz_dden);
    result.grads = prefixed(den_grads, "denoiser/");
    for (auto& [k, v] : prefixed(enc_grads, "encoder/")) result.grads[k] = v;
    return result;
}

StabilityGrad stability_grad_zo_ds(Graph& denoiser, ScalarLossOracle& base_loss, const Tensor& x,
                                   const Tensor& delta, EstimatorConfig& cfg) {
    require_same_shape(x, delta, "stability_grad_zo_ds");
    const Tensor z = denoiser.forward1(add(x, delta));
    if (z.size() != base_loss.dim())
        throw std::logic_error("denoised dimension does not match oracle dimension");

    StabilityGrad result;
    result.zo_grad = zo_gradient(base_loss, z.flattened(), cfg, &result.loss);
    const GradMap den_grads = denoiser.backward(result.zo_grad.reshaped(z.shape()));
    result.grads = prefixed(den_grads, "denoiser/");
    return result;
}

} // namespace zods
