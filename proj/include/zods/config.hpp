#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zods/certify.hpp"
#include "zods/robusteval.hpp"
#include "zods/training.hpp"

namespace zods {

/// Flat key=value text, one pair per line, '#' starts a comment. Unknown
/// keys are config errors naming the key and line number.
struct KeyValueFile {
    std::map<std::string, std::string> values;
    std::map<std::string, int> lines;

    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text);
};

/// Fully typed experiment configuration shared by every CLI subcommand.
struct ExperimentConfig {
    // task + data
    std::string task = "classification"; // or "reconstruction"
    std::string dataset = "toy";         // "toy" | "file"
    std::string dataset_path;
    std::string dataset_path_test; // empty: evaluate on the training file
    int train_n = 200;
    int test_n = 50;
    int num_classes = 10;
    std::uint64_t data_seed = 7;

    std::uint64_t seed = 1;
    int d_z = 16;

    // base-model training
    int base_epochs = 40;
    double base_lr = 1e-2;
    int base_batch = 32;

    // autoencoder pre-training
    int ae_epochs = 80;
    double ae_lr = 1e-2;
    int ae_batch = 32;

    // defense training
    TrainConfig train;

    // certification
    CertifyConfig certify;
    int certify_max_examples = 0; // 0 = all
    std::vector<double> radii = {0.0, 0.0625, 0.125, 0.25};

    // reconstruction attack evaluation
    std::string measurement = "gaussian_rows"; // or "identity"
    int measurement_m = 32;
    std::vector<double> attack_epsilons = {0.0, 0.5, 1.0, 2.0};
    int attack_steps = 40;
    double attack_step_size = 0.0;
    int attack_max_examples = 0;
    std::vector<std::pair<std::string, std::string>> attack_stacks; // (method name, checkpoint dir)

    // artifact paths consumed by later stages
    std::string base_ckpt;
    std::string encoder_ckpt;
    std::string decoder_ckpt;
    std::string denoiser_ckpt;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_kv(const KeyValueFile& kv);
};

Method parse_method(const std::string& s);
EstimatorKind parse_estimator(const std::string& s);
Scheme parse_scheme(const std::string& s);

} // namespace zods
