#include "zods/optim.hpp"

#include <cmath>

#include "zods/errors.hpp"

namespace zods {

double LrSchedule::at(int epoch) const {
    if (drop_every <= 0 || drop_factor == 1.0) return initial;
    const int drops = epoch / drop_every;
    double lr = initial;
    for (int i = 0; i < drops; ++i) lr /= drop_factor;
    return lr;
}

Optimizer::Optimizer(OptimizerKind kind, double beta1, double beta2, double eps)
    : kind_(kind), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Optimizer::step(const std::string& name, Tensor& param, const Tensor& grad, double lr) {
    require_same_shape(param, grad, "optimizer_step(" + name + ")");
    grad.require_finite("optimizer_step gradient for " + name);
    if (kind_ == OptimizerKind::Sgd) {
        axpy(-lr, grad, param);
        return;
    }
    Moments& s = state_[name];
    if (s.m.empty()) {
        s.m = Tensor(param.shape());
        s.v = Tensor(param.shape());
    }
    s.t += 1;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
    for (int i = 0; i < param.size(); ++i) {
        s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * grad[i];
        s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
}

} // namespace zods
