#include "zods/oracle.hpp"

#include "zods/errors.hpp"

namespace zods {

Tensor Oracle::query(const Tensor& x) {
    if (x.shape() != input_shape())
        throw std::invalid_argument("oracle query: input shape " + shape_str(x.shape()) + ", expected " +
                                    shape_str(input_shape()));
    return do_query(x);
}

std::vector<Tensor> Oracle::query_batch(const std::vector<Tensor>& xs) {
    std::vector<Tensor> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(query(x));
    return out;
}

BlackBoxOracle::BlackBoxOracle(EvalFn eval, Shape input_shape, Shape output_shape, OutputKind kind)
    : eval_(std::move(eval)), input_shape_(std::move(input_shape)), output_shape_(std::move(output_shape)),
      kind_(kind) {
    if (!eval_) throw std::invalid_argument("BlackBoxOracle: empty eval function");
}

Tensor BlackBoxOracle::do_query(const Tensor& x) {
    queries_.fetch_add(1, std::memory_order_relaxed);
    Tensor out = eval_(x);
    if (out.shape() != output_shape_)
        throw std::invalid_argument("oracle produced shape " + shape_str(out.shape()) + ", declared " +
                                    shape_str(output_shape_));
    return out;
}

const Tensor& BlackBoxOracle::parameters() const {
    throw contract_violation("black-box oracle exposes queries only; parameter access is not permitted");
}

ComposedOracle::ComposedOracle(std::shared_ptr<Oracle> inner, Graph decoder)
    : inner_(std::move(inner)), decoder_(std::move(decoder)) {
    if (!inner_) throw std::invalid_argument("ComposedOracle: null inner oracle");
    if (decoder_.output_shape() != inner_->input_shape())
        throw std::invalid_argument("compose_with_decoder: decoder output " + shape_str(decoder_.output_shape()) +
                                    " does not match oracle input " + shape_str(inner_->input_shape()));
    input_shape_ = decoder_.input_shape("z");
}

Tensor ComposedOracle::do_query(const Tensor& z) {
    Tensor decoded;
    {
        std::lock_guard<std::mutex> lock(mu_);
        decoded = decoder_.forward1(z);
    }
    return inner_->query(decoded);
}

std::shared_ptr<BlackBoxOracle> make_graph_oracle(const Graph& frozen, OutputKind kind) {
    auto g = std::make_shared<Graph>(frozen);
    auto mu = std::make_shared<std::mutex>();
    Shape in = frozen.input_shape("x");
    Shape out = frozen.output_shape();
    auto fn = [g, mu](const Tensor& x) {
        std::lock_guard<std::mutex> lock(*mu);
        return g->forward1(x);
    };
    return std::make_shared<BlackBoxOracle>(std::move(fn), std::move(in), std::move(out), kind);
}

std::shared_ptr<ComposedOracle> compose_with_decoder(std::shared_ptr<Oracle> inner, const Graph& decoder) {
    return std::make_shared<ComposedOracle>(std::move(inner), decoder);
}

ScalarLossOracle::ScalarLossOracle(std::shared_ptr<Oracle> base, LossMap loss_map)
    : base_(std::move(base)), loss_map_(std::move(loss_map)) {
    if (!base_) throw std::invalid_argument("ScalarLossOracle: null oracle");
    if (!loss_map_) throw std::invalid_argument("ScalarLossOracle: empty loss map");
}

double ScalarLossOracle::value(const Tensor& w) {
    return loss_map_(base_->query(w.reshaped(base_->input_shape())));
}

std::vector<double> ScalarLossOracle::value_batch(const std::vector<Tensor>& ws) {
    std::vector<double> out;
    out.reserve(ws.size());
    for (const auto& w : ws) out.push_back(value(w));
    return out;
}

ScalarLossOracle::LossMap ce_loss_vs_label(int label) {
    return [label](const Tensor& logits) { return cross_entropy_vs_label(logits, label); };
}

ScalarLossOracle::LossMap squared_error_vs(Tensor target) {
    return [target = std::move(target)](const Tensor& out) { return squared_error(out, target, false); };
}

ScalarLossOracle::LossMap ce_loss_vs_soft(Tensor target_probs) {
    return [t = std::move(target_probs)](const Tensor& logits) { return cross_entropy_loss(logits, t); };
}

} // namespace zods
