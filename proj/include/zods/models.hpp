#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "zods/dataset.hpp"
#include "zods/graph.hpp"
#include "zods/optim.hpp"
#include "zods/oracle.hpp"

namespace zods {

enum class LayerKind : std::uint32_t {
    Conv = 1,      // p0 = out channels, p1 = kernel size, p2 = pad
    Relu = 2,
    Sigmoid = 3,
    Dense = 4,     // p0 = out dim
    Flatten = 5,
    Reshape = 6,   // p0, p1, p2 = c, h, w
    ResidualSubtract = 7, // output = graph input - current (same shape)
};

struct LayerSpec {
    LayerKind kind;
    int p0 = 0, p1 = 0, p2 = 0;
};

/// Serializable network description; build_graph turns it into a CompGraph
/// with freshly initialized parameters.
struct ArchSpec {
    Shape input_shape; // (c, h, w) or generic
    std::vector<LayerSpec> layers;
};

Graph build_graph(const ArchSpec& arch, RngStream& rng, const std::string& input_name = "x");

// Desk-scale component architectures
ArchSpec denoiser_arch(const Shape& image_shape);
ArchSpec encoder_arch(const Shape& image_shape, int d_z);
ArchSpec decoder_arch(int d_z, const Shape& image_shape);
ArchSpec classifier_arch(const Shape& image_shape, int num_classes);
ArchSpec reconstructor_arch(const Shape& image_shape);

/// Residual denoiser with a zero-initialized head: the freshly built network
/// is the identity map, so early ZO training starts from pass-through.
Graph make_denoiser(const Shape& image_shape, RngStream& rng);
Graph make_encoder(const Shape& image_shape, int d_z, RngStream& rng);
/// Decoder input is named "z"; compose_with_decoder relies on that.
Graph make_decoder(int d_z, const Shape& image_shape, RngStream& rng);

/// Composed defense system. Non-AE methods leave encoder/decoder empty.
/// The white-box base graph is attached only for first-order training and
/// attack evaluation; zeroth-order trainers must see a null pointer there.
struct DefenseStack {
    Graph denoiser;
    std::optional<Graph> encoder;
    std::optional<Graph> decoder; // frozen after AE pre-training
    std::shared_ptr<Oracle> base;
    std::shared_ptr<Oracle> composed; // f' = f(Dec(.)), set when AE present
    std::shared_ptr<Graph> base_white_box;
    Shape input_shape;
    int d = 0;
    int d_z = 0;

    bool has_ae() const { return encoder.has_value(); }
    void finalize(); // checks d_z < d, builds the composed oracle
    /// Deterministic end-to-end prediction: denoiser -> (encoder -> composed
    /// oracle | base oracle). Each call costs one base-oracle row.
    Tensor predict(const Tensor& x);
};

struct PretrainReport {
    std::vector<double> epoch_loss;
    double final_loss = 0.0;
    double initial_loss = 0.0;
};

/// Stage-1 white-box AE pre-training: minimizes mean over the dataset of
/// ||Dec(Enc(x)) - x||^2 with the given optimizer; keeps the best-so-far
/// parameters. Throws training_error on sustained divergence.
PretrainReport pretrain_autoencoder(Graph& encoder, Graph& decoder, const Dataset& data, int epochs,
                                    OptimizerKind opt_kind, double lr, int batch_size, RngStream rng);

struct BaseModel {
    std::shared_ptr<BlackBoxOracle> oracle;
    std::shared_ptr<Graph> white_box; // for FO baselines and attack evaluation
    double clean_metric = 0.0;        // test accuracy (classifier) or train RMSE (reconstructor)
    ArchSpec arch;
};

BaseModel build_base_classifier(const ArchSpec& arch, const Dataset& train, const Dataset& test, int epochs,
                                double lr, int batch_size, RngStream rng);

/// Trains x_hat = f(A^T A x) on the measured dataset; the measurement input
/// is produced by the caller (robusteval::measure) per example.
BaseModel build_base_reconstructor(const ArchSpec& arch, const Dataset& train,
                                   const std::vector<Tensor>& measured_inputs, int epochs, double lr,
                                   int batch_size, RngStream rng);

/// Checkpoint format: magic "ZODSMODL", version u32, arch spec, then named
/// parameter tensors (name length u32, name bytes, rank u32, dims u32s,
/// float64 data), little-endian.
void save_model(const std::string& path, const ArchSpec& arch, const Graph& graph);
struct LoadedModel {
    ArchSpec arch;
    Graph graph;
};
LoadedModel load_model(const std::string& path, const std::string& input_name = "x");

std::uint64_t param_checksum(const Graph& g);

} // namespace zods
