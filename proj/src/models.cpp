#include "zods/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "zods/errors.hpp"

namespace zods {

Graph build_graph(const ArchSpec& arch, RngStream& rng, const std::string& input_name) {
    Graph g;
    const int in_node = g.input(input_name, arch.input_shape);
    int cur = in_node;
    int layer_index = 0;
    for (const LayerSpec& l : arch.layers) {
        const std::string prefix = "layer" + std::to_string(layer_index);
        switch (l.kind) {
        case LayerKind::Conv:
            cur = g.conv2d(cur, prefix, l.p0, l.p1, l.p2, rng);
            break;
        case LayerKind::Relu:
            cur = g.relu(cur);
            break;
        case LayerKind::Sigmoid:
            cur = g.sigmoid(cur);
            break;
        case LayerKind::Dense:
            cur = g.dense(cur, prefix, l.p0, rng);
            break;
        case LayerKind::Flatten:
            cur = g.flatten(cur);
            break;
        case LayerKind::Reshape:
            cur = g.reshape(cur, {l.p0, l.p1, l.p2});
            break;
        case LayerKind::ResidualSubtract:
            cur = g.add(in_node, g.scale(cur, -1.0));
            break;
        }
        ++layer_index;
    }
    g.set_output(cur);
    return g;
}

ArchSpec denoiser_arch(const Shape& image_shape) {
    ArchSpec a;
    a.input_shape = image_shape;
    a.layers = {
        {LayerKind::Conv, 8, 3, 1},
        {LayerKind::Relu},
        {LayerKind::Conv, 8, 3, 1},
        {LayerKind::Relu},
        {LayerKind::Conv, image_shape[0], 3, 1},
        {LayerKind::ResidualSubtract},
    };
    return a;
}

ArchSpec encoder_arch(const Shape& image_shape, int d_z) {
    ArchSpec a;
    a.input_shape = image_shape;
    a.layers = {
        {LayerKind::Conv, 8, 3, 1},
        {LayerKind::Relu},
        {LayerKind::Flatten},
        {LayerKind::Dense, d_z},
    };
    return a;
}

ArchSpec decoder_arch(int d_z, const Shape& image_shape) {
    ArchSpec a;
    a.input_shape = {d_z};
    const int c = image_shape[0], h = image_shape[1], w = image_shape[2];
    a.layers = {
        {LayerKind::Dense, 8 * h * w},
        {LayerKind::Relu},
        {LayerKind::Reshape, 8, h, w},
        {LayerKind::Conv, c, 3, 1},
    };
    return a;
}

ArchSpec classifier_arch(const Shape& image_shape, int num_classes) {
    ArchSpec a;
    a.input_shape = image_shape;
    a.layers = {
        {LayerKind::Conv, 6, 3, 1},
        {LayerKind::Relu},
        {LayerKind::Flatten},
        {LayerKind::Dense, num_classes},
    };
    return a;
}

ArchSpec reconstructor_arch(const Shape& image_shape) {
    ArchSpec a;
    a.input_shape = image_shape;
    a.layers = {
        {LayerKind::Conv, 8, 3, 1},
        {LayerKind::Relu},
        {LayerKind::Conv, 8, 3, 1},
        {LayerKind::Relu},
        {LayerKind::Conv, image_shape[0], 3, 1},
    };
    return a;
}

Graph make_denoiser(const Shape& image_shape, RngStream& rng) {
    Graph g = build_graph(denoiser_arch(image_shape), rng);
    // zero the residual head: initial denoiser is the identity
    const std::string head = "layer4";
    Tensor& k = g.mutable_param(head + ".k");
    for (int i = 0; i < k.size(); ++i) k[i] = 0.0;
    return g;
}

Graph make_encoder(const Shape& image_shape, int d_z, RngStream& rng) {
    return build_graph(encoder_arch(image_shape, d_z), rng);
}

Graph make_decoder(int d_z, const Shape& image_shape, RngStream& rng) {
    return build_graph(decoder_arch(d_z, image_shape), rng, "z");
}

void DefenseStack::finalize() {
    if (!base) throw std::invalid_argument("DefenseStack: missing base oracle");
    input_shape = base->input_shape();
    d = numel(input_shape);
    if (has_ae()) {
        if (!decoder) throw std::invalid_argument("DefenseStack: encoder present without decoder");
        d_z = numel(encoder->output_shape());
        if (d_z != numel(decoder->input_shape("z")))
            throw std::invalid_argument("DefenseStack: encoder/decoder embedding dimensions differ");
        if (d_z >= d)
            throw std::invalid_argument("DefenseStack: embedding dimension d_z=" + std::to_string(d_z) +
                                        " must be smaller than input dimension d=" + std::to_string(d));
        composed = compose_with_decoder(base, *decoder);
    }
}

Tensor DefenseStack::predict(const Tensor& x) {
    const Tensor denoised = denoiser.forward1(x);
    if (has_ae()) {
        const Tensor z = encoder->forward1(denoised);
        return composed->query(z);
    }
    return base->query(denoised);
}

namespace {

struct BatchGrads {
    GradMap sums;
    void accumulate(const GradMap& g) {
        for (const auto& [name, grad] : g) {
            auto it = sums.find(name);
            if (it == sums.end())
                sums[name] = grad;
            else
                axpy(1.0, grad, it->second);
        }
    }
    void apply(Optimizer& opt, Graph& g, double lr, double inv_count, const std::string& prefix = "") {
        for (auto& [name, grad] : sums) {
            Tensor scaled = scale(grad, inv_count);
            opt.step(prefix + name, g.mutable_param(name), scaled, lr);
        }
    }
};

} // namespace

PretrainReport pretrain_autoencoder(Graph& encoder, Graph& decoder, const Dataset& data, int epochs,
                                    OptimizerKind opt_kind, double lr, int batch_size, RngStream rng) {
    if (data.size() == 0) throw std::invalid_argument("pretrain_autoencoder: empty dataset");
    if (encoder.output_shape() != decoder.input_shape("z"))
        throw std::invalid_argument("pretrain_autoencoder: encoder output does not match decoder input");
    if (batch_size < 1) throw std::invalid_argument("pretrain_autoencoder: batch size must be >= 1");

    Optimizer opt_enc(opt_kind), opt_dec(opt_kind);
    PretrainReport report;

    auto dataset_loss = [&]() {
        double total = 0.0;
        for (int i = 0; i < data.size(); ++i) {
            const Tensor x = data.example(i);
            const Tensor rec = decoder.forward1(encoder.forward1(x));
            total += squared_error(rec, x, false);
        }
        return total / data.size();
    };
    report.initial_loss = dataset_loss();

    Tensor best_enc = encoder.flat_params();
    Tensor best_dec = decoder.flat_params();
    double best_loss = report.initial_loss;
    int divergent_epochs = 0;

    std::vector<int> order(static_cast<std::size_t>(data.size()));
    for (int i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        RngStream shuffle_rng = rng.split(0x5u).split(static_cast<std::uint64_t>(epoch));
        shuffle_indices(shuffle_rng, order);
        double epoch_total = 0.0;
        for (int start = 0; start < data.size(); start += batch_size) {
            const int end = std::min(start + batch_size, data.size());
            BatchGrads enc_grads, dec_grads;
            for (int bi = start; bi < end; ++bi) {
                const Tensor x = data.example(order[static_cast<std::size_t>(bi)]);
                const Tensor z = encoder.forward1(x);
                const Tensor rec = decoder.forward1(z);
                Tensor drec;
                epoch_total += squared_error(rec, x, false, &drec);
                dec_grads.accumulate(decoder.backward(drec));
                enc_grads.accumulate(encoder.backward(decoder.input_gradient("z")));
            }
            const double inv = 1.0 / (end - start);
            enc_grads.apply(opt_enc, encoder, lr, inv);
            dec_grads.apply(opt_dec, decoder, lr, inv);
        }
        const double mean_loss = epoch_total / data.size();
        report.epoch_loss.push_back(mean_loss);
        if (mean_loss <= best_loss) {
            best_loss = mean_loss;
            best_enc = encoder.flat_params();
            best_dec = decoder.flat_params();
        }
        if (report.initial_loss > 0.0 && mean_loss > 10.0 * report.initial_loss) {
            if (++divergent_epochs >= 3) {
                encoder.set_flat_params(best_enc);
                decoder.set_flat_params(best_dec);
                throw training_error("autoencoder pre-training diverged (loss > 10x initial for 3 epochs)");
            }
        } else {
            divergent_epochs = 0;
        }
    }
    encoder.set_flat_params(best_enc);
    decoder.set_flat_params(best_dec);
    report.final_loss = epochs > 0 ? best_loss : report.initial_loss;
    return report;
}

namespace {

double classifier_accuracy(Graph& g, const Dataset& ds) {
    if (ds.size() == 0) return 0.0;
    int correct = 0;
    for (int i = 0; i < ds.size(); ++i)
        if (argmax(g.forward1(ds.example(i))) == ds.label(i)) ++correct;
    return static_cast<double>(correct) / ds.size();
}

} // namespace

BaseModel build_base_classifier(const ArchSpec& arch, const Dataset& train, const Dataset& test, int epochs,
                                double lr, int batch_size, RngStream rng) {
    if (train.size() == 0) throw std::invalid_argument("build_base_classifier: empty dataset");
    if (!train.has_labels()) throw std::invalid_argument("build_base_classifier: dataset has no labels");

    RngStream init_rng = rng.split(0x11u);
    Graph g = build_graph(arch, init_rng);
    const int num_classes = g.output_shape()[0];
    Optimizer opt(OptimizerKind::Adam);

    std::vector<int> order(static_cast<std::size_t>(train.size()));
    for (int i = 0; i < train.size(); ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        RngStream shuffle_rng = rng.split(0x12u).split(static_cast<std::uint64_t>(epoch));
        shuffle_indices(shuffle_rng, order);
        for (int start = 0; start < train.size(); start += batch_size) {
            const int end = std::min(start + batch_size, train.size());
            BatchGrads grads;
            for (int bi = start; bi < end; ++bi) {
                const int idx = order[static_cast<std::size_t>(bi)];
                const Tensor logits = g.forward1(train.example(idx));
                Tensor dlogits;
                cross_entropy_loss(logits, one_hot(train.label(idx), num_classes), &dlogits);
                grads.accumulate(g.backward(dlogits));
            }
            grads.apply(opt, g, lr, 1.0 / (end - start));
        }
    }

    BaseModel model;
    model.arch = arch;
    model.white_box = std::make_shared<Graph>(g);
    model.oracle = make_graph_oracle(g, OutputKind::Logits);
    model.clean_metric = classifier_accuracy(g, test.size() > 0 ? test : train);
    return model;
}

BaseModel build_base_reconstructor(const ArchSpec& arch, const Dataset& train,
                                   const std::vector<Tensor>& measured_inputs, int epochs, double lr,
                                   int batch_size, RngStream rng) {
    if (train.size() == 0) throw std::invalid_argument("build_base_reconstructor: empty dataset");
    if (static_cast<int>(measured_inputs.size()) != train.size())
        throw std::invalid_argument("build_base_reconstructor: measured input count mismatch");

    RngStream init_rng = rng.split(0x21u);
    Graph g = build_graph(arch, init_rng);
    Optimizer opt(OptimizerKind::Adam);

    std::vector<int> order(static_cast<std::size_t>(train.size()));
    for (int i = 0; i < train.size(); ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        RngStream shuffle_rng = rng.split(0x22u).split(static_cast<std::uint64_t>(epoch));
        shuffle_indices(shuffle_rng, order);
        for (int start = 0; start < train.size(); start += batch_size) {
            const int end = std::min(start + batch_size, train.size());
            BatchGrads grads;
            for (int bi = start; bi < end; ++bi) {
                const int idx = order[static_cast<std::size_t>(bi)];
                const Tensor out = g.forward1(measured_inputs[static_cast<std::size_t>(idx)]);
                Tensor dout;
                squared_error(out, train.example(idx), false, &dout);
                grads.accumulate(g.backward(dout));
            }
            grads.apply(opt, g, lr, 1.0 / (end - start));
        }
    }

    double mse = 0.0;
    for (int i = 0; i < train.size(); ++i) {
        const Tensor out = g.forward1(measured_inputs[static_cast<std::size_t>(i)]);
        mse += squared_error(out, train.example(i), true);
    }
    BaseModel model;
    model.arch = arch;
    model.white_box = std::make_shared<Graph>(g);
    model.oracle = make_graph_oracle(g, OutputKind::Image);
    model.clean_metric = std::sqrt(mse / train.size());
    return model;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kModelMagic[8] = {'Z', 'O', 'D', 'S', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is, std::size_t& offset, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw format_error(std::string("truncated reading ") + what, offset);
    offset += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is, std::size_t& offset, const char* what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw format_error(std::string("truncated reading ") + what, offset);
    offset += 8;
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

void save_model(const std::string& path, const ArchSpec& arch, const Graph& graph) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write(kModelMagic, 8);
    put_u32(os, kModelVersion);
    put_u32(os, static_cast<std::uint32_t>(arch.input_shape.size()));
    for (int d : arch.input_shape) put_u32(os, static_cast<std::uint32_t>(d));
    put_u32(os, static_cast<std::uint32_t>(arch.layers.size()));
    for (const LayerSpec& l : arch.layers) {
        put_u32(os, static_cast<std::uint32_t>(l.kind));
        put_u32(os, static_cast<std::uint32_t>(l.p0));
        put_u32(os, static_cast<std::uint32_t>(l.p1));
        put_u32(os, static_cast<std::uint32_t>(l.p2));
    }
    const auto names = graph.param_names();
    put_u32(os, static_cast<std::uint32_t>(names.size()));
    for (const auto& name : names) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Tensor& p = graph.param(name);
        put_u32(os, static_cast<std::uint32_t>(p.shape().size()));
        for (int d : p.shape()) put_u32(os, static_cast<std::uint32_t>(d));
        for (int i = 0; i < p.size(); ++i) put_f64(os, p[i]);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

LoadedModel load_model(const std::string& path, const std::string& input_name) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::size_t offset = 0;
    char magic[8];
    if (!is.read(magic, 8)) throw format_error("truncated magic", 0);
    offset += 8;
    if (std::memcmp(magic, kModelMagic, 8) != 0) throw format_error("bad magic, not a model checkpoint", 0);
    const std::uint32_t version = get_u32(is, offset, "version");
    if (version != kModelVersion) throw format_error("unsupported model version " + std::to_string(version), 8);

    ArchSpec arch;
    const std::uint32_t rank = get_u32(is, offset, "input rank");
    for (std::uint32_t i = 0; i < rank; ++i)
        arch.input_shape.push_back(static_cast<int>(get_u32(is, offset, "input dim")));
    const std::uint32_t n_layers = get_u32(is, offset, "layer count");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec l;
        l.kind = static_cast<LayerKind>(get_u32(is, offset, "layer kind"));
        l.p0 = static_cast<int>(get_u32(is, offset, "layer p0"));
        l.p1 = static_cast<int>(get_u32(is, offset, "layer p1"));
        l.p2 = static_cast<int>(get_u32(is, offset, "layer p2"));
        arch.layers.push_back(l);
    }

    RngStream dummy_rng(0);
    LoadedModel out{arch, build_graph(arch, dummy_rng, input_name)};

    const std::uint32_t n_params = get_u32(is, offset, "param count");
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::uint32_t name_len = get_u32(is, offset, "param name length");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw format_error("truncated param name", offset);
        offset += name_len;
        const std::uint32_t prank = get_u32(is, offset, "param rank");
        Shape shape;
        for (std::uint32_t k = 0; k < prank; ++k)
            shape.push_back(static_cast<int>(get_u32(is, offset, "param dim")));
        Tensor& p = out.graph.mutable_param(name);
        if (p.shape() != shape)
            throw format_error("parameter '" + name + "' shape mismatch against architecture", offset);
        for (int k = 0; k < p.size(); ++k) p[k] = get_f64(is, offset, "param data");
    }
    return out;
}

std::uint64_t param_checksum(const Graph& g) {
    const Tensor flat = g.flat_params();
    return fnv1a_bytes(reinterpret_cast<const unsigned char*>(flat.data()),
                       static_cast<std::size_t>(flat.size()) * 8);
}

} // namespace zods
