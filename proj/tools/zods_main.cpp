// Experiment runner: pretrain-ae, train-base, train-defense, certify,
// attack-eval. Configuration comes from a key=value file; a few flags
// override it. Exit codes: 0 success, 2 configuration error, 3 runtime or
// numerical error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "zods/config.hpp"
#include "zods/errors.hpp"
#include "zods/models.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zods;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method, estimator, scheme;
    std::optional<int> q;
    std::optional<double> mu, sigma, gamma;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov) {
    if (ov.seed) {
        cfg.seed = *ov.seed;
        cfg.train.seed = *ov.seed;
        cfg.certify.seed = *ov.seed;
    }
    if (ov.method) cfg.train.method = parse_method(*ov.method);
    if (ov.estimator) cfg.train.estimator.kind = parse_estimator(*ov.estimator);
    if (ov.scheme) cfg.train.scheme = parse_scheme(*ov.scheme);
    if (ov.q) cfg.train.estimator.q = *ov.q;
    if (ov.mu) cfg.train.estimator.mu = *ov.mu;
    if (ov.sigma) {
        cfg.train.sigma = *ov.sigma;
        cfg.certify.sigma = *ov.sigma;
    }
    if (ov.gamma) cfg.train.gamma = *ov.gamma;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

Dataset load_split(const ExperimentConfig& cfg, bool train_split) {
    if (cfg.dataset == "toy") {
        if (cfg.task == "classification")
            return make_toy_digits(train_split ? cfg.train_n : cfg.test_n,
                                   train_split ? cfg.data_seed : cfg.data_seed + 1, cfg.num_classes,
                                   train_split ? "train" : "test");
        Dataset ds = make_toy_digits(train_split ? cfg.train_n : cfg.test_n,
                                     train_split ? cfg.data_seed : cfg.data_seed + 1, cfg.num_classes,
                                     train_split ? "train" : "test");
        ds.labels.clear(); // reconstruction task is unlabeled
        return ds;
    }
    if (cfg.dataset == "file") {
        const std::string& path =
            train_split ? cfg.dataset_path : (cfg.dataset_path_test.empty() ? cfg.dataset_path : cfg.dataset_path_test);
        if (path.empty()) throw config_error("dataset=file requires dataset_path");
        return load_dataset(path);
    }
    throw config_error("unknown dataset kind '" + cfg.dataset + "' (expected toy|file)");
}

MeasurementModel make_measurement(const ExperimentConfig& cfg, int d) {
    if (cfg.measurement == "identity") return MeasurementModel::identity(d);
    if (cfg.measurement == "gaussian_rows")
        return MeasurementModel::gaussian_rows(cfg.measurement_m, d, cfg.data_seed);
    throw config_error("unknown measurement '" + cfg.measurement + "' (expected identity|gaussian_rows)");
}

std::vector<Tensor> measured_inputs(const MeasurementModel& mm, const Dataset& ds) {
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) out.push_back(measure(mm, ds.example(i)));
    return out;
}

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return 0;
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return fnv1a_bytes(bytes.data(), bytes.size());
}

void require_artifact(const std::string& path, const std::string& what) {
    if (path.empty() || !fs::exists(path))
        throw std::runtime_error("missing artifact: " + what + " checkpoint not found at '" + path + "'");
}

struct RunContext {
    ExperimentConfig cfg;
    std::string out_dir;
    std::string config_path;
    json manifest;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    std::string path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }

    void finish(std::uint64_t total_queries) {
        manifest["seed"] = cfg.seed;
        manifest["total_oracle_queries"] = total_queries;
        manifest["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ofstream os(path("manifest.json"));
        os << manifest.dump(2) << "\n";
    }
};

RunContext make_context(const std::string& subcommand, const std::string& config_path, const std::string& out_dir,
                        const Overrides& ov) {
    RunContext ctx;
    ctx.cfg = ExperimentConfig::from_file(config_path);
    apply_overrides(ctx.cfg, ov);
    ctx.out_dir = out_dir;
    ctx.config_path = config_path;
    fs::create_directories(out_dir);
    ctx.manifest["subcommand"] = subcommand;
    {
        std::ifstream is(config_path);
        std::ostringstream buf;
        buf << is.rdbuf();
        ctx.manifest["config_file"] = buf.str();
    }
    return ctx;
}

// Resolves the checkpoint path: explicit config key first, then a default
// name inside the given directory.
std::string resolve_ckpt(const std::string& explicit_path, const std::string& dir, const std::string& name) {
    if (!explicit_path.empty()) return explicit_path;
    return (fs::path(dir) / name).string();
}

struct LoadedStack {
    DefenseStack stack;
    ArchSpec denoiser_arch_spec;
    ArchSpec encoder_arch_spec;
};

std::shared_ptr<Graph> load_base_graph(const ExperimentConfig& cfg, const std::string& dir) {
    const std::string base_path = resolve_ckpt(cfg.base_ckpt, dir, "base.zodsmodl");
    require_artifact(base_path, "base model");
    return std::make_shared<Graph>(load_model(base_path).graph);
}

int run_train_base(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const Dataset train_ds = load_split(cfg, true);
    const Dataset test_ds = load_split(cfg, false);
    if (train_ds.size() == 0) throw std::runtime_error("train-base: empty training dataset");
    const Shape img_shape = train_ds.example_shape();

    BaseModel model;
    if (cfg.task == "classification") {
        model = build_base_classifier(classifier_arch(img_shape, std::max(train_ds.num_classes(), cfg.num_classes)),
                                      train_ds, test_ds, cfg.base_epochs, cfg.base_lr, cfg.base_batch,
                                      RngStream(cfg.seed, 0xBA5Eu));
        ctx.manifest["clean_test_accuracy"] = model.clean_metric;
        std::cout << "base classifier clean test accuracy: " << model.clean_metric << "\n";
    } else if (cfg.task == "reconstruction") {
        const MeasurementModel mm = make_measurement(cfg, numel(img_shape));
        model = build_base_reconstructor(reconstructor_arch(img_shape), train_ds, measured_inputs(mm, train_ds),
                                         cfg.base_epochs, cfg.base_lr, cfg.base_batch, RngStream(cfg.seed, 0xBA5Eu));
        ctx.manifest["clean_train_rmse"] = model.clean_metric;
        std::cout << "base reconstructor clean train RMSE: " << model.clean_metric << "\n";
    } else {
        throw config_error("unknown task '" + cfg.task + "' (expected classification|reconstruction)");
    }

    const std::string out = ctx.path("base.zodsmodl");
    save_model(out, model.arch, *model.white_box);
    ctx.manifest["artifacts"]["base.zodsmodl"] = std::to_string(file_checksum(out));
    ctx.manifest["dataset_checksum"] = std::to_string(dataset_checksum(train_ds));
    ctx.finish(model.oracle->queries_used());
    return 0;
}

int run_pretrain_ae(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const Dataset train_ds = load_split(cfg, true);
    if (train_ds.size() == 0) throw std::runtime_error("pretrain-ae: empty training dataset");
    const Shape img_shape = train_ds.example_shape();
    const int d = numel(img_shape);
    if (cfg.d_z >= d)
        throw config_error("d_z=" + std::to_string(cfg.d_z) + " must be smaller than input dimension d=" +
                           std::to_string(d));

    RngStream rng(cfg.seed, 0xAEu);
    Graph encoder = make_encoder(img_shape, cfg.d_z, rng);
    Graph decoder = make_decoder(cfg.d_z, img_shape, rng);

    // For reconstruction the defense operates on measured inputs, so the AE
    // is pre-trained on that distribution.
    PretrainReport rep;
    if (cfg.task == "reconstruction") {
        const MeasurementModel mm = make_measurement(cfg, d);
        Dataset measured = train_ds;
        std::vector<Tensor> inputs = measured_inputs(mm, train_ds);
        // AE pre-training consumes raw tensors through a shim dataset; the
        // measured values are not [0,1] pixels, so train on them directly.
        Tensor all({train_ds.size(), img_shape[0], img_shape[1], img_shape[2]});
        for (int i = 0; i < train_ds.size(); ++i)
            std::copy_n(inputs[static_cast<std::size_t>(i)].data(), d, all.data() + static_cast<std::ptrdiff_t>(i) * d);
        Dataset shim;
        shim.images = std::move(all);
        rep = pretrain_autoencoder(encoder, decoder, shim, cfg.ae_epochs, OptimizerKind::Adam, cfg.ae_lr,
                                   cfg.ae_batch, RngStream(cfg.seed, 0xAE2u));
    } else {
        rep = pretrain_autoencoder(encoder, decoder, train_ds, cfg.ae_epochs, OptimizerKind::Adam, cfg.ae_lr,
                                   cfg.ae_batch, RngStream(cfg.seed, 0xAE2u));
    }

    save_model(ctx.path("encoder.zodsmodl"), encoder_arch(img_shape, cfg.d_z), encoder);
    save_model(ctx.path("decoder.zodsmodl"), decoder_arch(cfg.d_z, img_shape), decoder);
    ctx.manifest["ae_initial_loss"] = rep.initial_loss;
    ctx.manifest["ae_final_loss"] = rep.final_loss;
    ctx.manifest["artifacts"]["encoder.zodsmodl"] = std::to_string(file_checksum(ctx.path("encoder.zodsmodl")));
    ctx.manifest["artifacts"]["decoder.zodsmodl"] = std::to_string(file_checksum(ctx.path("decoder.zodsmodl")));
    std::cout << "AE pre-training loss: " << rep.initial_loss << " -> " << rep.final_loss << "\n";
    ctx.finish(0);
    return 0;
}

int run_train_defense(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const Dataset train_ds = load_split(cfg, true);
    if (train_ds.size() == 0) throw std::runtime_error("train-defense: empty training dataset");
    const Shape img_shape = train_ds.example_shape();
    const bool use_ae = method_uses_ae(cfg.train.method);
    const bool zo = method_is_zo(cfg.train.method);

    auto base_graph = load_base_graph(cfg, ctx.out_dir);
    const OutputKind kind = cfg.task == "classification" ? OutputKind::Logits : OutputKind::Image;

    DefenseStack stack;
    RngStream rng(cfg.seed, 0xDEFu);
    stack.denoiser = make_denoiser(img_shape, rng);
    std::uint64_t decoder_file_hash = 0;
    if (use_ae) {
        const std::string enc_path = resolve_ckpt(cfg.encoder_ckpt, ctx.out_dir, "encoder.zodsmodl");
        const std::string dec_path = resolve_ckpt(cfg.decoder_ckpt, ctx.out_dir, "decoder.zodsmodl");
        require_artifact(enc_path, "encoder");
        require_artifact(dec_path, "decoder");
        stack.encoder = load_model(enc_path).graph;
        stack.decoder = load_model(dec_path, "z").graph;
        decoder_file_hash = param_checksum(*stack.decoder);
    }
    stack.base = make_graph_oracle(*base_graph, kind);
    if (!zo) stack.base_white_box = base_graph; // white-box methods differentiate through f
    stack.finalize();

    TrainReport report;
    if (cfg.task == "reconstruction") {
        const MeasurementModel mm = make_measurement(cfg, numel(img_shape));
        report = train(cfg.train, stack, measured_inputs(mm, train_ds));
    } else {
        report = train(cfg.train, stack, train_ds);
    }

    // train report CSV
    {
        std::ofstream os(ctx.path("train_report.csv"));
        os << "epoch,denoise_loss,stab_loss,total_loss,queries\n";
        for (std::size_t e = 0; e < report.epochs.size(); ++e) {
            const EpochStats& s = report.epochs[e];
            os << e << "," << fmt_double(s.denoise_loss) << "," << fmt_double(s.stab_loss) << ","
               << fmt_double(s.total_loss) << "," << s.queries_used << "\n";
        }
    }

    save_model(ctx.path("denoiser.zodsmodl"), denoiser_arch(img_shape), stack.denoiser);
    if (use_ae) {
        // the tuned encoder gets its own file so the stage-1 input is never
        // overwritten and reruns stay reproducible
        save_model(ctx.path("encoder_trained.zodsmodl"), encoder_arch(img_shape, stack.d_z), *stack.encoder);
        if (param_checksum(*stack.decoder) != decoder_file_hash)
            throw training_error("frozen decoder changed during defense training");
    }
    ctx.manifest["method"] = method_name(cfg.train.method);
    ctx.manifest["final_checkpoint_id"] = report.final_checkpoint_id;
    ctx.manifest["epochs_run"] = report.epochs.size();
    if (!report.epochs.empty()) ctx.manifest["final_total_loss"] = report.epochs.back().total_loss;
    ctx.manifest["artifacts"]["denoiser.zodsmodl"] = std::to_string(file_checksum(ctx.path("denoiser.zodsmodl")));
    std::cout << "defense trained (" << method_name(cfg.train.method) << "), oracle queries: " << report.total_queries
              << "\n";
    ctx.finish(report.total_queries);
    return 0;
}

LoadedStack load_defense_stack(const ExperimentConfig& cfg, const std::string& dir, bool use_ae, bool white_box,
                               OutputKind kind) {
    LoadedStack out;
    const std::string den_path = resolve_ckpt(cfg.denoiser_ckpt, dir, "denoiser.zodsmodl");
    require_artifact(den_path, "denoiser");
    auto den = load_model(den_path);
    out.stack.denoiser = std::move(den.graph);
    out.denoiser_arch_spec = den.arch;
    if (use_ae) {
        const std::string enc_path = (fs::path(dir) / "encoder_trained.zodsmodl").string();
        const std::string dec_path = resolve_ckpt(cfg.decoder_ckpt, dir, "decoder.zodsmodl");
        require_artifact(enc_path, "trained encoder");
        require_artifact(dec_path, "decoder");
        auto enc = load_model(enc_path);
        out.stack.encoder = std::move(enc.graph);
        out.encoder_arch_spec = enc.arch;
        out.stack.decoder = load_model(dec_path, "z").graph;
    }
    auto base_graph = load_base_graph(cfg, dir);
    out.stack.base = make_graph_oracle(*base_graph, kind);
    if (white_box) out.stack.base_white_box = base_graph;
    out.stack.finalize();
    return out;
}

int run_certify(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    if (cfg.task != "classification") throw config_error("certify requires task=classification");
    const Dataset test_ds = load_split(cfg, false);
    if (test_ds.size() == 0) throw std::runtime_error("certify: empty test dataset");
    const bool use_ae = method_uses_ae(cfg.train.method);

    LoadedStack loaded = load_defense_stack(cfg, ctx.out_dir, use_ae, false, OutputKind::Logits);
    DefenseStack& stack = loaded.stack;

    const int limit = cfg.certify_max_examples > 0 ? std::min(cfg.certify_max_examples, test_ds.size())
                                                   : test_ds.size();
    PredictFn predict = [&stack](const Tensor& noisy) { return stack.predict(noisy); };
    auto counter = [&stack]() { return stack.base->queries_used(); };

    std::vector<CertificationRecord> records;
    std::vector<int> labels;
    for (int i = 0; i < limit; ++i) {
        records.push_back(certify(predict, test_ds.example(i), cfg.certify, i, counter));
        labels.push_back(test_ds.label(i));
    }

    {
        std::ofstream os(ctx.path("records.jsonl"));
        for (std::size_t i = 0; i < records.size(); ++i) {
            const CertificationRecord& r = records[i];
            json j{{"id", r.example_id},   {"class", r.predicted},      {"label", labels[i]},
                   {"pa_lower", r.pa_lower}, {"radius", r.radius},      {"queries", r.queries},
                   {"abstain", r.predicted == kAbstain}};
            os << j.dump() << "\n";
        }
    }

    const auto curve = certified_accuracy_curve(records, labels, cfg.radii);
    {
        std::ofstream os(ctx.path("ca_curve.csv"));
        os << "radius,certified_accuracy\n";
        for (const auto& [r, ca] : curve) os << fmt_double(r) << "," << fmt_double(ca) << "\n";
    }

    const double sa = smooth_accuracy(records, labels);
    ctx.manifest["standard_accuracy"] = sa;
    ctx.manifest["examples_certified"] = limit;
    json curve_json = json::array();
    for (const auto& [r, ca] : curve) curve_json.push_back({{"radius", r}, {"ca", ca}});
    ctx.manifest["ca_curve"] = curve_json;
    std::cout << "certified " << limit << " examples; SA=" << sa << "\n";
    for (const auto& [r, ca] : curve) std::cout << "  CA(r=" << r << ") = " << ca << "\n";
    ctx.finish(stack.base->queries_used());
    return 0;
}

int run_attack_eval(RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    if (cfg.task != "reconstruction") throw config_error("attack-eval requires task=reconstruction");
    Dataset test_ds = load_split(cfg, false);
    if (test_ds.size() == 0) throw std::runtime_error("attack-eval: empty test dataset");
    if (cfg.attack_max_examples > 0 && cfg.attack_max_examples < test_ds.size()) {
        const Shape es = test_ds.example_shape();
        Tensor trimmed({cfg.attack_max_examples, es[0], es[1], es[2]});
        std::copy_n(test_ds.images.data(), trimmed.size(), trimmed.data());
        test_ds.images = std::move(trimmed);
        test_ds.labels.clear();
    }
    const Shape img_shape = test_ds.example_shape();
    const int d = numel(img_shape);
    const MeasurementModel mm = make_measurement(cfg, d);

    if (cfg.attack_stacks.empty()) throw config_error("attack-eval requires attack_stacks (name:dir,...)");

    // Keep loaded stacks alive for the closures.
    std::vector<std::shared_ptr<LoadedStack>> stacks;
    std::vector<std::shared_ptr<Graph>> bases;
    std::vector<ReconstructionPipeline> pipelines;

    for (const auto& [name, dir] : cfg.attack_stacks) {
        if (name == "standard") {
            auto base = load_base_graph(cfg, dir == "-" ? ctx.out_dir : dir);
            bases.push_back(base);
            ReconstructionPipeline p;
            p.name = name;
            p.reconstruct = [base, mm](const Tensor& x_img) { return base->forward1(measure(mm, x_img)); };
            p.loss_grad = [base, mm](const Tensor& x_img, const Tensor& truth) {
                const Tensor rec = base->forward1(measure(mm, x_img));
                Tensor drec;
                const double loss = squared_error(rec, truth, false, &drec);
                base->backward(drec);
                return std::make_pair(loss, measure(mm, base->input_gradient("x"))); // A^T A is symmetric
            };
            pipelines.push_back(std::move(p));
            continue;
        }
        const Method method = parse_method(name);
        auto loaded = std::make_shared<LoadedStack>(
            load_defense_stack(cfg, dir, method_uses_ae(method), true, OutputKind::Image));
        stacks.push_back(loaded);
        DefenseStack* s = &loaded->stack;
        ReconstructionPipeline p;
        p.name = name;
        p.reconstruct = [s, mm](const Tensor& x_img) {
            const Tensor input = measure(mm, x_img);
            const Tensor denoised = s->denoiser.forward1(input);
            if (s->has_ae()) return s->base_white_box->forward1(s->decoder->forward1(s->encoder->forward1(denoised)));
            return s->base_white_box->forward1(denoised);
        };
        p.loss_grad = [s, mm](const Tensor& x_img, const Tensor& truth) {
            const Tensor input = measure(mm, x_img);
            const Tensor denoised = s->denoiser.forward1(input);
            Tensor rec;
            if (s->has_ae())
                rec = s->base_white_box->forward1(s->decoder->forward1(s->encoder->forward1(denoised)));
            else
                rec = s->base_white_box->forward1(denoised);
            Tensor drec;
            const double loss = squared_error(rec, truth, false, &drec);
            s->base_white_box->backward(drec);
            Tensor g = s->base_white_box->input_gradient("x");
            if (s->has_ae()) {
                s->decoder->backward(g);
                s->encoder->backward(s->decoder->input_gradient("z"));
                g = s->encoder->input_gradient("x");
            }
            s->denoiser.backward(g);
            return std::make_pair(loss, measure(mm, s->denoiser.input_gradient("x")));
        };
        pipelines.push_back(std::move(p));
    }

    AttackConfig atk;
    atk.steps = cfg.attack_steps;
    atk.step_size = cfg.attack_step_size;
    atk.seed = cfg.seed;

    const auto rows = attack_table(pipelines, test_ds, cfg.attack_epsilons, atk);
    {
        std::ofstream os(ctx.path("attack_table.csv"));
        os << "method,epsilon,rmse,ssim\n";
        for (const AttackRow& r : rows)
            os << r.method << "," << fmt_double(r.epsilon) << "," << fmt_double(r.rmse) << "," << fmt_double(r.ssim)
               << "\n";
    }
    for (const AttackRow& r : rows)
        std::cout << r.method << " eps=" << r.epsilon << " RMSE=" << r.rmse << " SSIM=" << r.ssim << "\n";
    ctx.manifest["rows"] = rows.size();
    ctx.finish(0);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"zeroth-order denoised-smoothing defense toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    Overrides ov;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value configuration file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", ov.seed, "override RNG seed");
        sub->add_option("--method", ov.method, "override defense method");
        sub->add_option("--estimator", ov.estimator, "override estimator kind");
        sub->add_option("--q", ov.q, "override RGE query budget");
        sub->add_option("--mu", ov.mu, "override smoothing step");
        sub->add_option("--sigma", ov.sigma, "override noise stddev");
        sub->add_option("--gamma", ov.gamma, "override stability weight");
        sub->add_option("--scheme", ov.scheme, "override training scheme");
    };

    CLI::App* c_pretrain = app.add_subcommand("pretrain-ae", "stage-1 autoencoder pre-training");
    CLI::App* c_base = app.add_subcommand("train-base", "train and freeze the base model");
    CLI::App* c_defense = app.add_subcommand("train-defense", "train the denoiser (and encoder) defense");
    CLI::App* c_certify = app.add_subcommand("certify", "randomized-smoothing certification");
    CLI::App* c_attack = app.add_subcommand("attack-eval", "PGD attack evaluation for reconstruction");
    for (CLI::App* sub : {c_pretrain, c_base, c_defense, c_certify, c_attack}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(c_base)) {
            RunContext ctx = make_context("train-base", config_path, out_dir, ov);
            return run_train_base(ctx);
        }
        if (app.got_subcommand(c_pretrain)) {
            RunContext ctx = make_context("pretrain-ae", config_path, out_dir, ov);
            return run_pretrain_ae(ctx);
        }
        if (app.got_subcommand(c_defense)) {
            RunContext ctx = make_context("train-defense", config_path, out_dir, ov);
            return run_train_defense(ctx);
        }
        if (app.got_subcommand(c_certify)) {
            RunContext ctx = make_context("certify", config_path, out_dir, ov);
            return run_certify(ctx);
        }
        if (app.got_subcommand(c_attack)) {
            RunContext ctx = make_context("attack-eval", config_path, out_dir, ov);
            return run_attack_eval(ctx);
        }
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
