#include <cstdio>
#include <doctest.h>
#include <fstream>

#include "zods/config.hpp"
#include "zods/dataset.hpp"

using namespace zods;

TEST_CASE("dataset write/read round trip is bit-identical") {
    const Dataset ds = make_toy_digits(7, 99, 10);
    const std::string path = "/tmp/zods_ds_roundtrip.zodsdata";
    save_dataset(path, ds);
    const Dataset back = load_dataset(path);
    REQUIRE(back.size() == 7);
    REQUIRE(back.images.size() == ds.images.size());
    for (int i = 0; i < ds.images.size(); ++i) CHECK(back.images[i] == ds.images[i]);
    CHECK(back.labels == ds.labels);
    CHECK(dataset_checksum(back) == dataset_checksum(ds));
    std::remove(path.c_str());
}

TEST_CASE("empty dataset file with a valid header loads as empty") {
    Dataset empty;
    const std::string path = "/tmp/zods_ds_empty.zodsdata";
    save_dataset(path, empty);
    const Dataset back = load_dataset(path);
    CHECK(back.size() == 0);
    CHECK_FALSE(back.has_labels());
    std::remove(path.c_str());
}

TEST_CASE("truncation is reported at the computed byte offset") {
    const Dataset ds = make_toy_digits(10, 5, 10);
    const std::string path = "/tmp/zods_ds_trunc.zodsdata";
    save_dataset(path, ds);
    // header: magic(8) + version(4) + n,c,h,w (16) + has_labels(1) = 29 bytes;
    // keep nine images: 29 + 9*64*8
    const std::size_t keep = 29 + 9 * 64 * 8;
    {
        std::ifstream is(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        bytes.resize(keep);
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    try {
        load_dataset(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.offset == keep);
    }
    std::remove(path.c_str());
}

TEST_CASE("bad magic is a format error at offset zero") {
    const std::string path = "/tmp/zods_ds_badmagic.zodsdata";
    {
        std::ofstream os(path, std::ios::binary);
        os << "WRONGMAGICxxxxxxxxxxxxxxxxxxx";
    }
    try {
        load_dataset(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.offset == 0);
    }
    std::remove(path.c_str());
}

TEST_CASE("toy digits are deterministic, in range, and balanced") {
    const Dataset a = make_toy_digits(40, 123);
    const Dataset b = make_toy_digits(40, 123);
    CHECK(dataset_checksum(a) == dataset_checksum(b));
    CHECK(dataset_checksum(a) != dataset_checksum(make_toy_digits(40, 124)));
    for (int i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i] >= 0.0);
        CHECK(a.images[i] <= 1.0);
    }
    int counts[10] = {};
    for (int l : a.labels) counts[l]++;
    for (int c = 0; c < 10; ++c) CHECK(counts[c] == 4);
}

TEST_CASE("key=value parsing") {
    const KeyValueFile kv = KeyValueFile::parse_text("a = 1\n# comment\n b=2 # trailing\n\nc = hello world\n");
    CHECK(kv.values.at("a") == "1");
    CHECK(kv.values.at("b") == "2");
    CHECK(kv.values.at("c") == "hello world");
    CHECK(kv.lines.at("b") == 3);
    CHECK_THROWS_AS(KeyValueFile::parse_text("novalue\n"), config_error);
    CHECK_THROWS_AS(KeyValueFile::parse_text("a=1\na=2\n"), config_error);
}

TEST_CASE("unknown config keys report the key and line number") {
    try {
        ExperimentConfig::from_kv(KeyValueFile::parse_text("sigma = 0.5\nnot_a_key = 3\n"));
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("not_a_key") != std::string::npos);
        CHECK(e.line == 2);
    }
}

TEST_CASE("typed config values parse and validate") {
    const ExperimentConfig cfg = ExperimentConfig::from_kv(KeyValueFile::parse_text(
        "method = zo-ae-ds\nestimator = cge\nsigma = 0.5\ngamma = 2.0\nq = 24\nmu = 0.01\n"
        "scheme = pretrain-finetune\nepochs = 9\nradii = 0,0.25,0.5\nseed = 31\n"));
    CHECK(cfg.train.method == Method::ZoAeDs);
    CHECK(cfg.train.estimator.kind == EstimatorKind::Cge);
    CHECK(cfg.train.sigma == 0.5);
    CHECK(cfg.certify.sigma == 0.5); // follows training sigma unless overridden
    CHECK(cfg.train.gamma == 2.0);
    CHECK(cfg.train.estimator.q == 24);
    CHECK(cfg.train.scheme == Scheme::PretrainFinetune);
    CHECK(cfg.train.epochs == 9);
    CHECK(cfg.radii == std::vector<double>{0.0, 0.25, 0.5});
    CHECK(cfg.seed == 31);
    CHECK(cfg.train.seed == 31);

    CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValueFile::parse_text("epochs = ten\n")), config_error);
    CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValueFile::parse_text("method = nope\n")), config_error);
}

TEST_CASE("blobs dataset is linearly separable by construction") {
    const Dataset ds = make_blobs(30, 5);
    for (int i = 0; i < ds.size(); ++i) {
        const Tensor x = ds.example(i);
        const double mean = (x[0] + x[1]) / 2.0;
        CHECK((ds.label(i) == 0 ? mean < 0.5 : mean > 0.5));
    }
}
