#include "zods/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "zods/errors.hpp"

namespace zods {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

KeyValueFile KeyValueFile::parse_text(const std::string& text) {
    KeyValueFile kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("expected key=value, got '" + line + "'", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw config_error("empty key", lineno);
        if (kv.values.count(key)) throw config_error("duplicate key '" + key + "'", lineno);
        kv.values[key] = value;
        kv.lines[key] = lineno;
    }
    return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_text(buf.str());
}

Method parse_method(const std::string& s) {
    if (s == "fo-ds") return Method::FoDs;
    if (s == "zo-ds") return Method::ZoDs;
    if (s == "fo-ae-ds") return Method::FoAeDs;
    if (s == "zo-ae-ds") return Method::ZoAeDs;
    throw config_error("unknown method '" + s + "' (expected fo-ds|zo-ds|fo-ae-ds|zo-ae-ds)");
}

EstimatorKind parse_estimator(const std::string& s) {
    if (s == "rge") return EstimatorKind::Rge;
    if (s == "cge") return EstimatorKind::Cge;
    throw config_error("unknown estimator '" + s + "' (expected rge|cge)");
}

Scheme parse_scheme(const std::string& s) {
    if (s == "scratch") return Scheme::Scratch;
    if (s == "pretrain-finetune") return Scheme::PretrainFinetune;
    throw config_error("unknown scheme '" + s + "' (expected scratch|pretrain-finetune)");
}

namespace {

// Binds every recognized key to a parser; anything else is a config error.
struct Binder {
    const KeyValueFile& kv;
    std::map<std::string, std::function<void(const std::string&)>> setters;

    void bind_str(const std::string& key, std::string* out) {
        setters[key] = [out](const std::string& v) { *out = v; };
    }
    void bind_int(const std::string& key, int* out) {
        setters[key] = [key, out](const std::string& v) {
            std::size_t pos = 0;
            *out = std::stoi(v, &pos);
            if (pos != v.size()) throw config_error("bad integer for " + key + ": '" + v + "'");
        };
    }
    void bind_u64(const std::string& key, std::uint64_t* out) {
        setters[key] = [key, out](const std::string& v) {
            std::size_t pos = 0;
            *out = std::stoull(v, &pos);
            if (pos != v.size()) throw config_error("bad integer for " + key + ": '" + v + "'");
        };
    }
    void bind_double(const std::string& key, double* out) {
        setters[key] = [key, out](const std::string& v) {
            std::size_t pos = 0;
            *out = std::stod(v, &pos);
            if (pos != v.size()) throw config_error("bad number for " + key + ": '" + v + "'");
        };
    }
    void bind_bool(const std::string& key, bool* out) {
        setters[key] = [key, out](const std::string& v) {
            if (v == "true" || v == "1")
                *out = true;
            else if (v == "false" || v == "0")
                *out = false;
            else
                throw config_error("bad boolean for " + key + ": '" + v + "'");
        };
    }
    void bind_double_list(const std::string& key, std::vector<double>* out) {
        setters[key] = [key, out](const std::string& v) {
            out->clear();
            std::istringstream is(v);
            std::string item;
            while (std::getline(is, item, ',')) {
                std::size_t pos = 0;
                out->push_back(std::stod(item, &pos));
                if (pos != item.size()) throw config_error("bad number list for " + key + ": '" + v + "'");
            }
        };
    }
    void bind_fn(const std::string& key, std::function<void(const std::string&)> fn) { setters[key] = std::move(fn); }

    void apply() {
        for (const auto& [key, value] : kv.values) {
            auto it = setters.find(key);
            if (it == setters.end()) throw config_error("unknown key '" + key + "'", kv.lines.at(key));
            try {
                it->second(value);
            } catch (const config_error& e) {
                if (e.line >= 0) throw;
                throw config_error(e.what(), kv.lines.at(key));
            } catch (const std::exception& e) {
                throw config_error("bad value for '" + key + "': " + e.what(), kv.lines.at(key));
            }
        }
    }
};

} // namespace

ExperimentConfig ExperimentConfig::from_kv(const KeyValueFile& kv) {
    ExperimentConfig c;
    Binder b{kv, {}};

    b.bind_str("task", &c.task);
    b.bind_str("dataset", &c.dataset);
    b.bind_str("dataset_path", &c.dataset_path);
    b.bind_str("dataset_path_test", &c.dataset_path_test);
    b.bind_int("train_n", &c.train_n);
    b.bind_int("test_n", &c.test_n);
    b.bind_int("num_classes", &c.num_classes);
    b.bind_u64("data_seed", &c.data_seed);
    b.bind_u64("seed", &c.seed);
    b.bind_int("d_z", &c.d_z);

    b.bind_int("base_epochs", &c.base_epochs);
    b.bind_double("base_lr", &c.base_lr);
    b.bind_int("base_batch", &c.base_batch);

    b.bind_int("ae_epochs", &c.ae_epochs);
    b.bind_double("ae_lr", &c.ae_lr);
    b.bind_int("ae_batch", &c.ae_batch);

    b.bind_fn("method", [&c](const std::string& v) { c.train.method = parse_method(v); });
    b.bind_fn("estimator", [&c](const std::string& v) { c.train.estimator.kind = parse_estimator(v); });
    b.bind_fn("scheme", [&c](const std::string& v) { c.train.scheme = parse_scheme(v); });
    b.bind_fn("optimizer", [&c](const std::string& v) {
        if (v == "sgd")
            c.train.optimizer = OptimizerKind::Sgd;
        else if (v == "adam")
            c.train.optimizer = OptimizerKind::Adam;
        else
            throw config_error("unknown optimizer '" + v + "' (expected sgd|adam)");
    });
    b.bind_int("q", &c.train.estimator.q);
    b.bind_double("mu", &c.train.estimator.mu);
    b.bind_double("sigma", &c.train.sigma);
    b.bind_double("gamma", &c.train.gamma);
    b.bind_double("lr", &c.train.lr.initial);
    b.bind_double("lr_drop_factor", &c.train.lr.drop_factor);
    b.bind_int("lr_drop_every", &c.train.lr.drop_every);
    b.bind_double("finetune_lr", &c.train.finetune_lr);
    b.bind_int("epochs", &c.train.epochs);
    b.bind_int("pretrain_epochs", &c.train.pretrain_epochs);
    b.bind_int("batch_size", &c.train.batch_size);
    b.bind_bool("soft_stability_target", &c.train.soft_stability_target);

    b.bind_double("certify_sigma", &c.certify.sigma);
    b.bind_int("certify_n0", &c.certify.n0);
    b.bind_int("certify_n", &c.certify.n);
    b.bind_double("certify_alpha", &c.certify.alpha);
    b.bind_int("certify_max_examples", &c.certify_max_examples);
    b.bind_double_list("radii", &c.radii);

    b.bind_str("measurement", &c.measurement);
    b.bind_int("measurement_m", &c.measurement_m);
    b.bind_double_list("attack_epsilons", &c.attack_epsilons);
    b.bind_int("attack_steps", &c.attack_steps);
    b.bind_double("attack_step_size", &c.attack_step_size);
    b.bind_int("attack_max_examples", &c.attack_max_examples);
    b.bind_fn("attack_stacks", [&c](const std::string& v) {
        c.attack_stacks.clear();
        std::istringstream is(v);
        std::string item;
        while (std::getline(is, item, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
                throw config_error("attack_stacks entries must be name:dir, got '" + item + "'");
            c.attack_stacks.emplace_back(item.substr(0, colon), item.substr(colon + 1));
        }
    });

    b.bind_str("base_ckpt", &c.base_ckpt);
    b.bind_str("encoder_ckpt", &c.encoder_ckpt);
    b.bind_str("decoder_ckpt", &c.decoder_ckpt);
    b.bind_str("denoiser_ckpt", &c.denoiser_ckpt);

    b.apply();

    // keep the certification noise level in lockstep with training unless
    // certify_sigma was given explicitly
    if (!kv.values.count("certify_sigma")) c.certify.sigma = c.train.sigma;
    c.train.seed = c.seed;
    c.certify.seed = c.seed;
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_kv(KeyValueFile::parse_file(path));
}

} // namespace zods
