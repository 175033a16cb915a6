#include <cstdlib>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

std::string cli() { return ZODS_CLI_PATH; }

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_config(const fs::path& p, const std::string& extra = "") {
    std::ofstream os(p);
    os << "task = classification\n"
          "dataset = toy\n"
          "train_n = 24\n"
          "test_n = 8\n"
          "num_classes = 4\n"
          "seed = 5\n"
          "d_z = 8\n"
          "base_epochs = 12\n"
          "base_lr = 0.01\n"
          "ae_epochs = 10\n"
          "ae_lr = 0.01\n"
          "method = zo-ae-ds\n"
          "estimator = cge\n"
          "sigma = 0.25\n"
          "epochs = 2\n"
          "batch_size = 8\n"
          "certify_n0 = 10\n"
          "certify_n = 200\n"
          "certify_alpha = 0.001\n"
          "certify_max_examples = 4\n"
          "radii = 0,0.0625,0.125\n"
       << extra;
}

} // namespace

TEST_CASE("cli end-to-end pipeline on the bundled toy set") {
    const fs::path dir = fs::temp_directory_path() / "zods_cli_e2e";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "run.cfg";
    write_config(cfg);
    const std::string out = (dir / "out").string();

    REQUIRE(run("train-base --config " + cfg.string() + " --out " + out) == 0);
    REQUIRE(fs::exists(out + "/base.zodsmodl"));
    REQUIRE(run("pretrain-ae --config " + cfg.string() + " --out " + out) == 0);
    REQUIRE(fs::exists(out + "/encoder.zodsmodl"));
    REQUIRE(fs::exists(out + "/decoder.zodsmodl"));
    REQUIRE(run("train-defense --config " + cfg.string() + " --out " + out) == 0);
    REQUIRE(fs::exists(out + "/denoiser.zodsmodl"));
    REQUIRE(run("certify --config " + cfg.string() + " --out " + out) == 0);
    REQUIRE(fs::exists(out + "/ca_curve.csv"));
    REQUIRE(fs::exists(out + "/records.jsonl"));
    REQUIRE(fs::exists(out + "/manifest.json"));

    // the CA curve is non-increasing
    std::ifstream is(out + "/ca_curve.csv");
    std::string line;
    std::getline(is, line); // header
    double prev = 1e9;
    int rows = 0;
    while (std::getline(is, line)) {
        const auto comma = line.find(',');
        const double ca = std::stod(line.substr(comma + 1));
        CHECK(ca <= prev);
        prev = ca;
        ++rows;
    }
    CHECK(rows == 3);

    SUBCASE("identical config and seed reproduce byte-identical outputs") {
        const std::string out2 = (dir / "out2").string();
        fs::create_directories(out2);
        fs::copy(out + "/base.zodsmodl", out2 + "/base.zodsmodl");
        fs::copy(out + "/encoder.zodsmodl", out2 + "/encoder.zodsmodl");
        fs::copy(out + "/decoder.zodsmodl", out2 + "/decoder.zodsmodl");
        REQUIRE(run("train-defense --config " + cfg.string() + " --out " + out2) == 0);
        CHECK(slurp(out + "/denoiser.zodsmodl") == slurp(out2 + "/denoiser.zodsmodl"));
        CHECK(slurp(out + "/encoder_trained.zodsmodl") == slurp(out2 + "/encoder_trained.zodsmodl"));
        CHECK(slurp(out + "/train_report.csv") == slurp(out2 + "/train_report.csv"));
        REQUIRE(run("certify --config " + cfg.string() + " --out " + out2) == 0);
        CHECK(slurp(out + "/ca_curve.csv") == slurp(out2 + "/ca_curve.csv"));
        CHECK(slurp(out + "/records.jsonl") == slurp(out2 + "/records.jsonl"));
    }
}

TEST_CASE("certify without a trained checkpoint is a missing-artifact error") {
    const fs::path dir = fs::temp_directory_path() / "zods_cli_missing";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "run.cfg";
    write_config(cfg);
    CHECK(run("certify --config " + cfg.string() + " --out " + (dir / "none").string()) == 3);
}

TEST_CASE("unknown config keys exit with the config error code") {
    const fs::path dir = fs::temp_directory_path() / "zods_cli_badcfg";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "bad.cfg";
    write_config(cfg, "look_at_me = 1\n");
    CHECK(run("train-base --config " + cfg.string() + " --out " + (dir / "out").string()) == 2);
}

TEST_CASE("cli flag overrides win over the config file") {
    const fs::path dir = fs::temp_directory_path() / "zods_cli_override";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "run.cfg";
    write_config(cfg);
    const std::string out = (dir / "out").string();
    REQUIRE(run("train-base --config " + cfg.string() + " --out " + out) == 0);
    REQUIRE(run("pretrain-ae --config " + cfg.string() + " --out " + out) == 0);
    // fo-ae-ds ignores the estimator; the run must succeed and record the method
    REQUIRE(run("train-defense --config " + cfg.string() + " --out " + out + " --method fo-ae-ds --gamma 0.5") == 0);
    const std::string manifest = slurp(out + "/manifest.json");
    CHECK(manifest.find("fo-ae-ds") != std::string::npos);
}
