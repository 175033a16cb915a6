#pragma once

#include <map>
#include <string>
#include <vector>

#include "zods/rng.hpp"
#include "zods/tensor.hpp"

namespace zods {

using GradMap = std::map<std::string, Tensor>;

enum class Op {
    Input,
    Param,
    Dense,        // (x, W, b) -> W x + b
    Conv2d,       // (x, K, b) -> stride-1 zero-padded 2-D convolution
    Relu,
    Sigmoid,
    Softmax,
    Add,          // elementwise
    Mul,          // elementwise
    Scale,        // x * constant
    Reshape,
    Flatten,
    SquaredError, // (pred, target) -> scalar, sum or mean reduction
    CrossEntropy, // (logits, target_probs) -> scalar, fused log-softmax
};

/// Computation graph with cached activations and reverse-mode backward.
/// Built once, then forward/backward any number of times. Parameters are
/// named tensors owned by the graph; backward also produces gradients with
/// respect to the graph inputs so graphs can be chained.
class Graph {
public:
    int input(const std::string& name, Shape shape);
    int param(const std::string& name, Tensor init);

    int dense(int x, const std::string& prefix, int out_dim, RngStream& rng);
    int dense(int x, int w, int b);
    int conv2d(int x, const std::string& prefix, int out_channels, int ksize, int pad, RngStream& rng);
    int conv2d(int x, int k, int b, int pad);
    int relu(int x);
    int sigmoid(int x);
    int softmax(int x);
    int add(int a, int b);
    int mul(int a, int b);
    int scale(int x, double c);
    int reshape(int x, Shape shape);
    int flatten(int x);
    int squared_error(int pred, int target, bool mean_reduce);
    int cross_entropy(int logits, int target_probs);

    void set_output(int node);
    int output() const { return output_; }
    const Shape& node_shape(int node) const;
    const Shape& output_shape() const { return node_shape(output_); }
    const Shape& input_shape(const std::string& name) const;

    Tensor forward(const std::map<std::string, Tensor>& inputs);
    Tensor forward1(const Tensor& x); // single-input convenience

    /// d(output . output_grad)/d(param) for every parameter; input gradients
    /// are cached and readable via input_gradient(). Requires a prior forward.
    GradMap backward(const Tensor& output_grad);
    const Tensor& input_gradient(const std::string& name) const;

    std::vector<std::string> param_names() const;
    const Tensor& param(const std::string& name) const;
    Tensor& mutable_param(const std::string& name);
    std::size_t param_count() const { return params_.size(); }

    /// Concatenate all parameters (name order) into one flat vector; used by
    /// tests and whole-model comparisons.
    Tensor flat_params() const;
    void set_flat_params(const Tensor& flat);

private:
    struct Node {
        Op op;
        int a = -1, b = -1, c = -1; // operand node ids
        int param_index = -1;       // Op::Param
        int input_slot = -1;        // Op::Input
        Shape shape;
        double factor = 1.0; // Op::Scale
        int pad = 0;         // Op::Conv2d
        bool mean_reduce = false;
        Tensor value;
        Tensor grad;
    };

    int add_node(Node n);
    void check_operand(int id, const char* op) const;
    void eval_node(int id);
    void backprop_node(int id);

    std::vector<Node> nodes_;
    std::vector<Tensor> params_;
    std::vector<std::string> param_names_;
    std::map<std::string, int> param_lookup_;     // name -> param index
    std::map<std::string, int> input_lookup_;     // name -> node id
    std::vector<int> input_nodes_;
    int output_ = -1;
    bool has_forward_ = false;
};

/// Central finite differences of a scalar functional with respect to every
/// parameter of `g`; independent reference for backward-pass checks.
GradMap finite_difference_grads(Graph& g, const std::map<std::string, Tensor>& inputs,
                                const Tensor& output_weights, double h = 1e-5);

} // namespace zods
