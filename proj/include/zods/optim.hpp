#pragma once

#include <map>
#include <string>

#include "zods/tensor.hpp"

namespace zods {

enum class OptimizerKind { Sgd, Adam };

struct LrSchedule {
    double initial = 1e-3;
    double drop_factor = 1.0; // divide lr by this every drop_every epochs
    int drop_every = 0;       // 0 disables drops

    double at(int epoch) const;
};

/// SGD or Adam over named parameter tensors. Adam keeps per-name moment
/// state with standard bias correction (beta1=0.9, beta2=0.999, eps=1e-8).
class Optimizer {
public:
    explicit Optimizer(OptimizerKind kind, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(const std::string& name, Tensor& param, const Tensor& grad, double lr);

    OptimizerKind kind() const { return kind_; }

private:
    struct Moments {
        Tensor m, v;
        long t = 0;
    };
    OptimizerKind kind_;
    double beta1_, beta2_, eps_;
    std::map<std::string, Moments> state_;
};

} // namespace zods
