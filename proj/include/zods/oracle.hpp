#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>

#include "zods/graph.hpp"
#include "zods/tensor.hpp"

namespace zods {

enum class OutputKind { Logits, Image };

/// Query-only access to a predictive model. Every evaluated row increments
/// the query counter; batches count rows, not calls.
class Oracle {
public:
    virtual ~Oracle() = default;

    Tensor query(const Tensor& x);
    std::vector<Tensor> query_batch(const std::vector<Tensor>& xs);

    virtual std::uint64_t queries_used() const = 0;
    virtual const Shape& input_shape() const = 0;
    virtual const Shape& output_shape() const = 0;
    virtual OutputKind output_kind() const = 0;

protected:
    virtual Tensor do_query(const Tensor& x) = 0;
};

/// Opaque predictor handle. Only the eval closure is reachable; there is no
/// parameter surface on this type.
class BlackBoxOracle : public Oracle {
public:
    using EvalFn = std::function<Tensor(const Tensor&)>;

    BlackBoxOracle(EvalFn eval, Shape input_shape, Shape output_shape, OutputKind kind);

    std::uint64_t queries_used() const override { return queries_.load(); }
    const Shape& input_shape() const override { return input_shape_; }
    const Shape& output_shape() const override { return output_shape_; }
    OutputKind output_kind() const override { return kind_; }

    /// Black-box contract: always throws.
    const Tensor& parameters() const;

protected:
    Tensor do_query(const Tensor& x) override;

private:
    EvalFn eval_;
    Shape input_shape_;
    Shape output_shape_;
    OutputKind kind_;
    std::atomic<std::uint64_t> queries_{0};
};

/// f'(z) = f(Dec(z)): the decoder is folded into the black box so queries
/// arrive in the d_z-dimensional embedding. Counting delegates to the inner
/// oracle, one row per decoded query.
class ComposedOracle : public Oracle {
public:
    ComposedOracle(std::shared_ptr<Oracle> inner, Graph decoder);

    std::uint64_t queries_used() const override { return inner_->queries_used(); }
    const Shape& input_shape() const override { return input_shape_; }
    const Shape& output_shape() const override { return inner_->output_shape(); }
    OutputKind output_kind() const override { return inner_->output_kind(); }

protected:
    Tensor do_query(const Tensor& z) override;

private:
    std::shared_ptr<Oracle> inner_;
    Graph decoder_;
    Shape input_shape_;
    std::mutex mu_; // decoder forward caches activations
};

/// Wrap a frozen white-box graph as a query-only oracle. The oracle owns a
/// private copy of the graph; nothing but eval is reachable through it.
std::shared_ptr<BlackBoxOracle> make_graph_oracle(const Graph& frozen, OutputKind kind);

std::shared_ptr<ComposedOracle> compose_with_decoder(std::shared_ptr<Oracle> inner, const Graph& decoder);

/// Deterministic scalar reduction of an oracle's output, g(w) in the
/// estimator formulas. Each evaluation costs one oracle row.
class ScalarLossOracle {
public:
    using LossMap = std::function<double(const Tensor&)>;

    ScalarLossOracle(std::shared_ptr<Oracle> base, LossMap loss_map);

    double value(const Tensor& w);
    std::vector<double> value_batch(const std::vector<Tensor>& ws);
    std::uint64_t queries_used() const { return base_->queries_used(); }
    int dim() const { return numel(base_->input_shape()); }
    const Shape& input_shape() const { return base_->input_shape(); }

private:
    std::shared_ptr<Oracle> base_;
    LossMap loss_map_;
};

ScalarLossOracle::LossMap ce_loss_vs_label(int label);
ScalarLossOracle::LossMap squared_error_vs(Tensor target);
ScalarLossOracle::LossMap ce_loss_vs_soft(Tensor target_probs);

} // namespace zods
