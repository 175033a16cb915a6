#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "zods/errors.hpp"

namespace zods {

using Shape = std::vector<int>;

int numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense n-dimensional array of 64-bit floats, row-major.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);
    Tensor(Shape shape, double fill);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const Shape& shape() const { return shape_; }
    int size() const { return static_cast<int>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

    // (c, h, w) indexing for rank-3 tensors
    double& at3(int c, int h, int w);
    double at3(int c, int h, int w) const;

    Tensor reshaped(Shape new_shape) const;
    Tensor flattened() const { return reshaped({size()}); }

    bool all_finite() const;
    void require_finite(const std::string& context) const;

    double item() const; // rank-agnostic single-element read

private:
    Shape shape_;
    std::vector<double> data_;
};

bool same_shape(const Tensor& a, const Tensor& b);
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& op);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
void axpy(double alpha, const Tensor& x, Tensor& y); // y += alpha * x

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double sum(const Tensor& a);
int argmax(const Tensor& a);
Tensor clamp01(const Tensor& a);

Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

/// -sum_i target_i * log_softmax(logits)_i. Optionally writes d(loss)/d(logits).
double cross_entropy_loss(const Tensor& logits, const Tensor& target_probs,
                          Tensor* grad_logits = nullptr);
double cross_entropy_vs_label(const Tensor& logits, int label, Tensor* grad_logits = nullptr);
Tensor one_hot(int label, int num_classes);

/// sum (mean_reduce=false) or mean of squared differences. Optionally writes d/d(pred).
double squared_error(const Tensor& pred, const Tensor& target, bool mean_reduce,
                     Tensor* grad_pred = nullptr);

double cosine_similarity(const Tensor& a, const Tensor& b);

} // namespace zods
