#include "zods/graph.hpp"

#include <algorithm>
#include <cmath>

namespace zods {

namespace {

Shape conv_output_shape(const Shape& in, int out_channels, int ksize, int pad) {
    if (in.size() != 3) throw std::invalid_argument("conv2d expects (c,h,w) input, got " + shape_str(in));
    const int oh = in[1] + 2 * pad - ksize + 1;
    const int ow = in[2] + 2 * pad - ksize + 1;
    if (oh <= 0 || ow <= 0)
        throw std::invalid_argument("conv2d kernel " + std::to_string(ksize) + " too large for input " + shape_str(in));
    return {out_channels, oh, ow};
}

} // namespace

int Graph::add_node(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_operand(int id, const char* op) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument(std::string(op) + ": operand node id " + std::to_string(id) + " out of range");
}

int Graph::input(const std::string& name, Shape shape) {
    if (input_lookup_.count(name)) throw std::invalid_argument("duplicate input name: " + name);
    Node n;
    n.op = Op::Input;
    n.input_slot = static_cast<int>(input_nodes_.size());
    n.shape = std::move(shape);
    const int id = add_node(std::move(n));
    input_lookup_[name] = id;
    input_nodes_.push_back(id);
    return id;
}

int Graph::param(const std::string& name, Tensor init) {
    if (param_lookup_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Node n;
    n.op = Op::Param;
    n.param_index = static_cast<int>(params_.size());
    n.shape = init.shape();
    param_lookup_[name] = n.param_index;
    param_names_.push_back(name);
    params_.push_back(std::move(init));
    return add_node(std::move(n));
}

int Graph::dense(int x, const std::string& prefix, int out_dim, RngStream& rng) {
    check_operand(x, "dense");
    const Shape& xs = nodes_[x].shape;
    if (xs.size() != 1) throw std::invalid_argument("dense expects rank-1 input, got " + shape_str(xs));
    const int in_dim = xs[0];
    // Glorot-uniform weights, zero bias
    const double bound = std::sqrt(6.0 / (in_dim + out_dim));
    Tensor w({out_dim, in_dim});
    for (int i = 0; i < w.size(); ++i) w[i] = (2.0 * rng.next_uniform() - 1.0) * bound;
    const int wid = param(prefix + ".w", std::move(w));
    const int bid = param(prefix + ".b", Tensor({out_dim}));
    return dense(x, wid, bid);
}

int Graph::dense(int x, int w, int b) {
    check_operand(x, "dense");
    check_operand(w, "dense");
    check_operand(b, "dense");
    const Shape& xs = nodes_[x].shape;
    const Shape& ws = nodes_[w].shape;
    const Shape& bs = nodes_[b].shape;
    if (xs.size() != 1 || ws.size() != 2 || bs.size() != 1 || ws[1] != xs[0] || ws[0] != bs[0])
        throw std::invalid_argument("dense: incompatible shapes x" + shape_str(xs) + " W" + shape_str(ws) + " b" +
                                    shape_str(bs));
    Node n;
    n.op = Op::Dense;
    n.a = x;
    n.b = w;
    n.c = b;
    n.shape = {ws[0]};
    return add_node(std::move(n));
}

int Graph::conv2d(int x, const std::string& prefix, int out_channels, int ksize, int pad, RngStream& rng) {
    check_operand(x, "conv2d");
    const Shape& xs = nodes_[x].shape;
    const Shape out = conv_output_shape(xs, out_channels, ksize, pad);
    const int fan_in = xs[0] * ksize * ksize;
    const int fan_out = out_channels * ksize * ksize;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor k({out_channels, xs[0], ksize, ksize});
    for (int i = 0; i < k.size(); ++i) k[i] = (2.0 * rng.next_uniform() - 1.0) * bound;
    const int kid = param(prefix + ".k", std::move(k));
    const int bid = param(prefix + ".b", Tensor({out_channels}));
    return conv2d(x, kid, bid, pad);
}

int Graph::conv2d(int x, int k, int b, int pad) {
    check_operand(x, "conv2d");
    check_operand(k, "conv2d");
    check_operand(b, "conv2d");
    const Shape& xs = nodes_[x].shape;
    const Shape& ks = nodes_[k].shape;
    const Shape& bs = nodes_[b].shape;
    if (xs.size() != 3 || ks.size() != 4 || bs.size() != 1 || ks[1] != xs[0] || ks[0] != bs[0] || ks[2] != ks[3])
        throw std::invalid_argument("conv2d: incompatible shapes x" + shape_str(xs) + " K" + shape_str(ks) + " b" +
                                    shape_str(bs));
    Node n;
    n.op = Op::Conv2d;
    n.a = x;
    n.b = k;
    n.c = b;
    n.pad = pad;
    n.shape = conv_output_shape(xs, ks[0], ks[2], pad);
    return add_node(std::move(n));
}

int Graph::relu(int x) {
    check_operand(x, "relu");
    Node n;
    n.op = Op::Relu;
    n.a = x;
    n.shape = nodes_[x].shape;
    return add_node(std::move(n));
}

int Graph::sigmoid(int x) {
    check_operand(x, "sigmoid");
    Node n;
    n.op = Op::Sigmoid;
    n.a = x;
    n.shape = nodes_[x].shape;
    return add_node(std::move(n));
}

int Graph::softmax(int x) {
    check_operand(x, "softmax");
    Node n;
    n.op = Op::Softmax;
    n.a = x;
    n.shape = nodes_[x].shape;
    return add_node(std::move(n));
}

int Graph::add(int a, int b) {
    check_operand(a, "add");
    check_operand(b, "add");
    if (nodes_[a].shape != nodes_[b].shape)
        throw std::invalid_argument("add: shape mismatch " + shape_str(nodes_[a].shape) + " vs " +
                                    shape_str(nodes_[b].shape));
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.shape = nodes_[a].shape;
    return add_node(std::move(n));
}

int Graph::mul(int a, int b) {
    check_operand(a, "mul");
    check_operand(b, "mul");
    if (nodes_[a].shape != nodes_[b].shape)
        throw std::invalid_argument("mul: shape mismatch " + shape_str(nodes_[a].shape) + " vs " +
                                    shape_str(nodes_[b].shape));
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.shape = nodes_[a].shape;
    return add_node(std::move(n));
}

int Graph::scale(int x, double c) {
    check_operand(x, "scale");
    Node n;
    n.op = Op::Scale;
    n.a = x;
    n.factor = c;
    n.shape = nodes_[x].shape;
    return add_node(std::move(n));
}

int Graph::reshape(int x, Shape shape) {
    check_operand(x, "reshape");
    if (numel(shape) != numel(nodes_[x].shape))
        throw std::invalid_argument("reshape: element count mismatch " + shape_str(nodes_[x].shape) + " -> " +
                                    shape_str(shape));
    Node n;
    n.op = Op::Reshape;
    n.a = x;
    n.shape = std::move(shape);
    return add_node(std::move(n));
}

int Graph::flatten(int x) {
    check_operand(x, "flatten");
    Node n;
    n.op = Op::Flatten;
    n.a = x;
    n.shape = {numel(nodes_[x].shape)};
    return add_node(std::move(n));
}

int Graph::squared_error(int pred, int target, bool mean_reduce) {
    check_operand(pred, "squared_error");
    check_operand(target, "squared_error");
    if (nodes_[pred].shape != nodes_[target].shape)
        throw std::invalid_argument("squared_error: shape mismatch " + shape_str(nodes_[pred].shape) + " vs " +
                                    shape_str(nodes_[target].shape));
    Node n;
    n.op = Op::SquaredError;
    n.a = pred;
    n.b = target;
    n.mean_reduce = mean_reduce;
    n.shape = {1};
    return add_node(std::move(n));
}

int Graph::cross_entropy(int logits, int target_probs) {
    check_operand(logits, "cross_entropy");
    check_operand(target_probs, "cross_entropy");
    if (nodes_[logits].shape != nodes_[target_probs].shape)
        throw std::invalid_argument("cross_entropy: shape mismatch " + shape_str(nodes_[logits].shape) + " vs " +
                                    shape_str(nodes_[target_probs].shape));
    Node n;
    n.op = Op::CrossEntropy;
    n.a = logits;
    n.b = target_probs;
    n.shape = {1};
    return add_node(std::move(n));
}

void Graph::set_output(int node) {
    check_operand(node, "set_output");
    output_ = node;
}

const Shape& Graph::node_shape(int node) const {
    check_operand(node, "node_shape");
    return nodes_[static_cast<std::size_t>(node)].shape;
}

const Shape& Graph::input_shape(const std::string& name) const {
    auto it = input_lookup_.find(name);
    if (it == input_lookup_.end()) throw std::invalid_argument("unknown input: " + name);
    return nodes_[static_cast<std::size_t>(it->second)].shape;
}

void Graph::eval_node(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.op) {
    case Op::Input:
    case Op::Param:
        break; // value already placed
    case Op::Dense: {
        const Tensor& x = nodes_[n.a].value;
        const Tensor& w = nodes_[n.b].value;
        const Tensor& b = nodes_[n.c].value;
        const int out = n.shape[0], in = x.size();
        n.value = Tensor(n.shape);
        for (int i = 0; i < out; ++i) {
            double s = b[i];
            const double* wrow = w.data() + static_cast<std::ptrdiff_t>(i) * in;
            for (int j = 0; j < in; ++j) s += wrow[j] * x[j];
            n.value[i] = s;
        }
        break;
    }
    case Op::Conv2d: {
        const Tensor& x = nodes_[n.a].value;
        const Tensor& k = nodes_[n.b].value;
        const Tensor& b = nodes_[n.c].value;
        const int ic = x.shape()[0], ih = x.shape()[1], iw = x.shape()[2];
        const int oc = n.shape[0], oh = n.shape[1], ow = n.shape[2];
        const int ks = k.shape()[2], pad = n.pad;
        n.value = Tensor(n.shape);
        for (int o = 0; o < oc; ++o)
            for (int y = 0; y < oh; ++y)
                for (int xw = 0; xw < ow; ++xw) {
                    double s = b[o];
                    for (int c = 0; c < ic; ++c)
                        for (int u = 0; u < ks; ++u) {
                            const int yy = y + u - pad;
                            if (yy < 0 || yy >= ih) continue;
                            for (int v = 0; v < ks; ++v) {
                                const int xx = xw + v - pad;
                                if (xx < 0 || xx >= iw) continue;
                                s += k[((o * ic + c) * ks + u) * ks + v] * x.at3(c, yy, xx);
                            }
                        }
                    n.value.at3(o, y, xw) = s;
                }
        break;
    }
    case Op::Relu: {
        const Tensor& x = nodes_[n.a].value;
        n.value = Tensor(n.shape);
        for (int i = 0; i < x.size(); ++i) n.value[i] = x[i] > 0.0 ? x[i] : 0.0;
        break;
    }
    case Op::Sigmoid: {
        const Tensor& x = nodes_[n.a].value;
        n.value = Tensor(n.shape);
        for (int i = 0; i < x.size(); ++i) n.value[i] = 1.0 / (1.0 + std::exp(-x[i]));
        break;
    }
    case Op::Softmax:
        n.value = zods::softmax(nodes_[n.a].value);
        break;
    case Op::Add:
        n.value = zods::add(nodes_[n.a].value, nodes_[n.b].value);
        break;
    case Op::Mul:
        n.value = zods::mul(nodes_[n.a].value, nodes_[n.b].value);
        break;
    case Op::Scale:
        n.value = zods::scale(nodes_[n.a].value, n.factor);
        break;
    case Op::Reshape:
    case Op::Flatten:
        n.value = nodes_[n.a].value.reshaped(n.shape);
        break;
    case Op::SquaredError:
        n.value = Tensor::scalar(zods::squared_error(nodes_[n.a].value, nodes_[n.b].value, n.mean_reduce));
        break;
    case Op::CrossEntropy:
        n.value = Tensor::scalar(zods::cross_entropy_loss(nodes_[n.a].value, nodes_[n.b].value));
        break;
    }
}

Tensor Graph::forward(const std::map<std::string, Tensor>& inputs) {
    if (output_ < 0) throw std::logic_error("forward: graph has no output node");
    for (const auto& [name, _] : inputs)
        if (!input_lookup_.count(name)) throw std::invalid_argument("forward: unknown input name: " + name);
    for (const auto& [name, id] : input_lookup_) {
        auto it = inputs.find(name);
        if (it == inputs.end()) throw std::invalid_argument("forward: missing input: " + name);
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (it->second.shape() != n.shape)
            throw std::invalid_argument("forward: input '" + name + "' has shape " + shape_str(it->second.shape()) +
                                        ", expected " + shape_str(n.shape));
        n.value = it->second;
    }
    for (auto& n : nodes_)
        if (n.op == Op::Param) n.value = params_[static_cast<std::size_t>(n.param_index)];
    for (int id = 0; id <= output_; ++id) eval_node(id);
    has_forward_ = true;
    const Tensor& out = nodes_[static_cast<std::size_t>(output_)].value;
    out.require_finite("graph forward output");
    return out;
}

Tensor Graph::forward1(const Tensor& x) {
    if (input_lookup_.size() != 1) throw std::logic_error("forward1 requires exactly one declared input");
    return forward({{input_lookup_.begin()->first, x}});
}

void Graph::backprop_node(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) return; // no downstream contribution
    const Tensor& g = n.grad;
    auto accum = [this](int target, const Tensor& contribution) {
        Node& t = nodes_[static_cast<std::size_t>(target)];
        if (t.grad.empty()) t.grad = Tensor(t.shape);
        // reshape-compatible accumulate (Flatten/Reshape pass through flat data)
        for (int i = 0; i < contribution.size(); ++i) t.grad[i] += contribution[i];
    };
    switch (n.op) {
    case Op::Input:
    case Op::Param:
        break;
    case Op::Dense: {
        const Tensor& x = nodes_[n.a].value;
        const Tensor& w = nodes_[n.b].value;
        const int out = n.shape[0], in = x.size();
        Tensor dx({in});
        Tensor dw(w.shape());
        Tensor db({out});
        for (int i = 0; i < out; ++i) {
            const double gi = g[i];
            const double* wrow = w.data() + static_cast<std::ptrdiff_t>(i) * in;
            double* dwrow = dw.data() + static_cast<std::ptrdiff_t>(i) * in;
            for (int j = 0; j < in; ++j) {
                dx[j] += gi * wrow[j];
                dwrow[j] += gi * x[j];
            }
            db[i] += gi;
        }
        accum(n.a, dx);
        accum(n.b, dw);
        accum(n.c, db);
        break;
    }
    case Op::Conv2d: {
        const Tensor& x = nodes_[n.a].value;
        const Tensor& k = nodes_[n.b].value;
        const int ic = x.shape()[0], ih = x.shape()[1], iw = x.shape()[2];
        const int oc = n.shape[0], oh = n.shape[1], ow = n.shape[2];
        const int ks = k.shape()[2], pad = n.pad;
        Tensor dx(x.shape());
        Tensor dk(k.shape());
        Tensor db({oc});
        for (int o = 0; o < oc; ++o)
            for (int y = 0; y < oh; ++y)
                for (int xw = 0; xw < ow; ++xw) {
                    const double gi = g.at3(o, y, xw);
                    db[o] += gi;
                    for (int c = 0; c < ic; ++c)
                        for (int u = 0; u < ks; ++u) {
                            const int yy = y + u - pad;
                            if (yy < 0 || yy >= ih) continue;
                            for (int v = 0; v < ks; ++v) {
                                const int xx = xw + v - pad;
                                if (xx < 0 || xx >= iw) continue;
                                dx.at3(c, yy, xx) += gi * k[((o * ic + c) * ks + u) * ks + v];
                                dk[((o * ic + c) * ks + u) * ks + v] += gi * x.at3(c, yy, xx);
                            }
                        }
                }
        accum(n.a, dx);
        accum(n.b, dk);
        accum(n.c, db);
        break;
    }
    case Op::Relu: {
        const Tensor& x = nodes_[n.a].value;
        Tensor dx(x.shape());
        for (int i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? g[i] : 0.0;
        accum(n.a, dx);
        break;
    }
    case Op::Sigmoid: {
        const Tensor& s = n.value;
        Tensor dx(s.shape());
        for (int i = 0; i < s.size(); ++i) dx[i] = g[i] * s[i] * (1.0 - s[i]);
        accum(n.a, dx);
        break;
    }
    case Op::Softmax: {
        const Tensor& p = n.value;
        const double gp = dot(g, p);
        Tensor dx(p.shape());
        for (int i = 0; i < p.size(); ++i) dx[i] = p[i] * (g[i] - gp);
        accum(n.a, dx);
        break;
    }
    case Op::Add:
        accum(n.a, g);
        accum(n.b, g);
        break;
    case Op::Mul:
        accum(n.a, zods::mul(g, nodes_[n.b].value));
        accum(n.b, zods::mul(g, nodes_[n.a].value));
        break;
    case Op::Scale:
        accum(n.a, zods::scale(g, n.factor));
        break;
    case Op::Reshape:
    case Op::Flatten:
        accum(n.a, g);
        break;
    case Op::SquaredError: {
        Tensor dpred;
        zods::squared_error(nodes_[n.a].value, nodes_[n.b].value, n.mean_reduce, &dpred);
        const double g0 = g[0];
        accum(n.a, zods::scale(dpred, g0));
        accum(n.b, zods::scale(dpred, -g0));
        break;
    }
    case Op::CrossEntropy: {
        Tensor dlogits;
        zods::cross_entropy_loss(nodes_[n.a].value, nodes_[n.b].value, &dlogits);
        accum(n.a, zods::scale(dlogits, g[0]));
        const Tensor lsm = log_softmax(nodes_[n.a].value);
        accum(n.b, zods::scale(lsm, -g[0]));
        break;
    }
    }
}

GradMap Graph::backward(const Tensor& output_grad) {
    if (!has_forward_) throw std::logic_error("backward called before forward");
    Node& out = nodes_[static_cast<std::size_t>(output_)];
    if (output_grad.shape() != out.shape)
        throw std::invalid_argument("backward: output_grad shape " + shape_str(output_grad.shape()) +
                                    " does not match output shape " + shape_str(out.shape));
    for (auto& n : nodes_) n.grad = Tensor();
    out.grad = output_grad;
    for (int id = output_; id >= 0; --id) backprop_node(id);
    GradMap grads;
    for (const auto& [name, idx] : param_lookup_) {
        for (const auto& n : nodes_)
            if (n.op == Op::Param && n.param_index == idx) {
                grads[name] = n.grad.empty() ? Tensor(n.shape) : n.grad;
                break;
            }
    }
    for (auto& [name, g] : grads) g.require_finite("gradient of " + name);
    return grads;
}

const Tensor& Graph::input_gradient(const std::string& name) const {
    auto it = input_lookup_.find(name);
    if (it == input_lookup_.end()) throw std::invalid_argument("unknown input: " + name);
    const Node& n = nodes_[static_cast<std::size_t>(it->second)];
    if (n.grad.empty()) throw std::logic_error("input_gradient before backward (or input unreachable)");
    return n.grad;
}

std::vector<std::string> Graph::param_names() const { return param_names_; }

const Tensor& Graph::param(const std::string& name) const {
    auto it = param_lookup_.find(name);
    if (it == param_lookup_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return params_[static_cast<std::size_t>(it->second)];
}

Tensor& Graph::mutable_param(const std::string& name) {
    auto it = param_lookup_.find(name);
    if (it == param_lookup_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return params_[static_cast<std::size_t>(it->second)];
}

Tensor Graph::flat_params() const {
    int total = 0;
    for (const auto& p : params_) total += p.size();
    Tensor flat({std::max(total, 1)});
    int k = 0;
    for (const auto& name : param_names_) {
        const Tensor& p = param(name);
        for (int i = 0; i < p.size(); ++i) flat[k++] = p[i];
    }
    return flat;
}

void Graph::set_flat_params(const Tensor& flat) {
    int k = 0;
    for (const auto& name : param_names_) {
        Tensor& p = mutable_param(name);
        for (int i = 0; i < p.size(); ++i) p[i] = flat[k++];
    }
    if (k != flat.size()) throw std::invalid_argument("set_flat_params: length mismatch");
}

GradMap finite_difference_grads(Graph& g, const std::map<std::string, Tensor>& inputs,
                                const Tensor& output_weights, double h) {
    GradMap out;
    for (const auto& name : g.param_names()) {
        Tensor& p = g.mutable_param(name);
        Tensor grad(p.shape());
        for (int i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + h;
            const double up = dot(g.forward(inputs), output_weights);
            p[i] = saved - h;
            const double dn = dot(g.forward(inputs), output_weights);
            p[i] = saved;
            grad[i] = (up - dn) / (2.0 * h);
        }
        out[name] = std::move(grad);
    }
    g.forward(inputs); // restore cached activations at the unperturbed point
    return out;
}

} // namespace zods
