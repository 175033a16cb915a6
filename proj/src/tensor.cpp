#include "zods/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace zods {

int numel(const Shape& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor shape dims must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (numel(shape_) != static_cast<int>(data_.size()))
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), fill) {}

double& Tensor::at3(int c, int h, int w) {
    const int H = shape_[1], W = shape_[2];
    return data_[static_cast<std::size_t>((c * H + h) * W + w)];
}

double Tensor::at3(int c, int h, int w) const {
    const int H = shape_[1], W = shape_[2];
    return data_[static_cast<std::size_t>((c * H + h) * W + w)];
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (numel(new_shape) != size())
        throw std::invalid_argument("reshape from " + shape_str(shape_) + " to " + shape_str(new_shape) +
                                    " changes element count");
    return Tensor(std::move(new_shape), data_);
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::require_finite(const std::string& context) const {
    if (!all_finite()) throw numerical_error("nonfinite value in " + context);
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& op) {
    if (!same_shape(a, b))
        throw std::invalid_argument(op + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out[i] = a[i] * c;
    return out;
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
    require_same_shape(x, y, "axpy");
    for (int i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double sum(const Tensor& a) { return std::accumulate(a.vec().begin(), a.vec().end(), 0.0); }

int argmax(const Tensor& a) {
    if (a.empty()) throw std::invalid_argument("argmax of empty tensor");
    return static_cast<int>(std::max_element(a.vec().begin(), a.vec().end()) - a.vec().begin());
}

Tensor clamp01(const Tensor& a) {
    Tensor out(a.shape());
    for (int i = 0; i < a.size(); ++i) out[i] = std::min(1.0, std::max(0.0, a[i]));
    return out;
}

Tensor softmax(const Tensor& logits) {
    Tensor out(logits.shape());
    const double m = *std::max_element(logits.vec().begin(), logits.vec().end());
    double z = 0.0;
    for (int i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (int i = 0; i < out.size(); ++i) out[i] /= z;
    return out;
}

Tensor log_softmax(const Tensor& logits) {
    Tensor out(logits.shape());
    const double m = *std::max_element(logits.vec().begin(), logits.vec().end());
    double z = 0.0;
    for (int i = 0; i < logits.size(); ++i) z += std::exp(logits[i] - m);
    const double lz = std::log(z) + m;
    for (int i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
    return out;
}

double cross_entropy_loss(const Tensor& logits, const Tensor& target_probs, Tensor* grad_logits) {
    require_same_shape(logits, target_probs, "cross_entropy");
    const Tensor lsm = log_softmax(logits);
    double loss = 0.0;
    double tsum = 0.0;
    for (int i = 0; i < logits.size(); ++i) {
        loss -= target_probs[i] * lsm[i];
        tsum += target_probs[i];
    }
    if (grad_logits) {
        const Tensor p = softmax(logits);
        *grad_logits = Tensor(logits.shape());
        for (int i = 0; i < logits.size(); ++i) (*grad_logits)[i] = p[i] * tsum - target_probs[i];
    }
    return loss;
}

double cross_entropy_vs_label(const Tensor& logits, int label, Tensor* grad_logits) {
    if (label < 0 || label >= logits.size())
        throw std::invalid_argument("cross_entropy label " + std::to_string(label) + " out of range for " +
                                    std::to_string(logits.size()) + " classes");
    return cross_entropy_loss(logits, one_hot(label, logits.size()), grad_logits);
}

Tensor one_hot(int label, int num_classes) {
    if (label < 0 || label >= num_classes) throw std::invalid_argument("one_hot label out of range");
    Tensor t({num_classes});
    t[label] = 1.0;
    return t;
}

double squared_error(const Tensor& pred, const Tensor& target, bool mean_reduce, Tensor* grad_pred) {
    require_same_shape(pred, target, "squared_error");
    const double inv = mean_reduce ? 1.0 / pred.size() : 1.0;
    double loss = 0.0;
    if (grad_pred) *grad_pred = Tensor(pred.shape());
    for (int i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        loss += d * d * inv;
        if (grad_pred) (*grad_pred)[i] = 2.0 * d * inv;
    }
    return loss;
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

} // namespace zods
