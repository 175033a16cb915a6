#include <doctest.h>

#include "zods/training.hpp"

using namespace zods;

namespace {

// small classification stack on (1,4,4) images, d_z = 4
struct TestRig {
    DefenseStack stack;
    std::shared_ptr<Graph> base_graph;
    Dataset data;

    explicit TestRig(bool with_ae, bool white_box, std::uint64_t seed = 7) {
        const Shape img{1, 4, 4};
        RngStream rng(seed);
        Graph base;
        {
            const int x = base.input("x", img);
            int h = base.conv2d(x, "c", 3, 3, 1, rng);
            h = base.relu(h);
            h = base.flatten(h);
            base.set_output(base.dense(h, "d", 3, rng));
        }
        base_graph = std::make_shared<Graph>(base);
        stack.denoiser = make_denoiser(img, rng);
        if (with_ae) {
            stack.encoder = make_encoder(img, 4, rng);
            stack.decoder = make_decoder(4, img, rng);
        }
        stack.base = make_graph_oracle(base, OutputKind::Logits);
        if (white_box) stack.base_white_box = base_graph;
        stack.finalize();

        data.images = Tensor({6, 1, 4, 4});
        RngStream xr(seed + 1);
        for (int i = 0; i < data.images.size(); ++i) data.images[i] = xr.next_uniform();
        data.labels = {0, 1, 2, 0, 1, 2};
    }
};

} // namespace

TEST_CASE("ds_loss splits into its parts") {
    TestRig rig(true, false);
    const Tensor x = rig.data.example(0);

    SUBCASE("identity denoiser puts the noise norm in the denoise part") {
        Tensor delta(x.shape());
        delta[0] = 0.5;
        delta[5] = 0.2;
        delta[9] = -0.28;
        const double want = dot(delta, delta);
        const StabilityTarget target = make_stability_target(rig.stack.base->query(x), OutputKind::Logits, false);
        const DsLossParts parts = ds_loss(rig.stack, x, delta, target, 1.0);
        CHECK(parts.denoise == doctest::Approx(want).epsilon(1e-12));
        CHECK(parts.total == doctest::Approx(parts.denoise + parts.stab).epsilon(1e-12));
    }

    SUBCASE("gamma zero makes the total the denoise part exactly") {
        Tensor delta(x.shape());
        delta[3] = 0.1;
        const StabilityTarget target = make_stability_target(rig.stack.base->query(x), OutputKind::Logits, false);
        const DsLossParts parts = ds_loss(rig.stack, x, delta, target, 0.0);
        CHECK(parts.total == parts.denoise);
    }

    SUBCASE("negative gamma is an argument error") {
        const StabilityTarget target = make_stability_target(rig.stack.base->query(x), OutputKind::Logits, false);
        CHECK_THROWS_AS(ds_loss(rig.stack, x, Tensor(x.shape()), target, -0.1), std::invalid_argument);
    }
}

TEST_CASE("perfect denoiser and a confident predictor zero both loss parts") {
    // zero noise with the identity-initialized denoiser gives D(x+0) = x;
    // a constant one-hot-confident oracle gives vanishing cross-entropy
    const Shape img{1, 4, 4};
    RngStream rng(3);
    DefenseStack stack;
    stack.denoiser = make_denoiser(img, rng);
    const Tensor confident({3}, {1000.0, 0.0, 0.0});
    stack.base = std::make_shared<BlackBoxOracle>([confident](const Tensor&) { return confident; }, img, Shape{3},
                                                  OutputKind::Logits);
    stack.finalize();

    Tensor x(img);
    x[2] = 0.7;
    const StabilityTarget target = make_stability_target(confident, OutputKind::Logits, false);
    const DsLossParts parts = ds_loss(stack, x, Tensor(img), target, 1.0);
    CHECK(parts.denoise == doctest::Approx(0.0));
    CHECK(parts.stab == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("optimizer steps match the hand recurrences") {
    SUBCASE("sgd") {
        Optimizer opt(OptimizerKind::Sgd);
        Tensor p({1}, {1.0});
        opt.step("p", p, Tensor({1}, {2.0}), 0.1);
        CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-15));
    }
    SUBCASE("adam first step moves by about lr") {
        Optimizer opt(OptimizerKind::Adam);
        Tensor p({1}, {1.0});
        opt.step("p", p, Tensor({1}, {1.0}), 1e-3);
        // mhat/sqrt(vhat) = 1 at t=1 up to epsilon
        CHECK(p[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    }
    SUBCASE("zero gradients leave parameters unchanged") {
        Optimizer sgd(OptimizerKind::Sgd), adam(OptimizerKind::Adam);
        Tensor p({2}, {0.4, -0.2});
        const Tensor zero({2});
        sgd.step("p", p, zero, 0.5);
        CHECK(p[0] == 0.4);
        adam.step("q", p, zero, 0.5);
        CHECK(p[0] == 0.4);
        CHECK(p[1] == -0.2);
    }
    SUBCASE("nonfinite gradients are numerical errors") {
        Optimizer opt(OptimizerKind::Sgd);
        Tensor p({1}, {1.0});
        Tensor g({1}, {std::numeric_limits<double>::quiet_NaN()});
        CHECK_THROWS_AS(opt.step("p", p, g, 0.1), numerical_error);
    }
}

TEST_CASE("learning-rate schedule drops by the factor at the interval") {
    LrSchedule s{1e-2, 10.0, 4};
    CHECK(s.at(0) == doctest::Approx(1e-2));
    CHECK(s.at(3) == doctest::Approx(1e-2));
    CHECK(s.at(4) == doctest::Approx(1e-3));
    CHECK(s.at(8) == doctest::Approx(1e-4));
    LrSchedule flat{5e-3, 1.0, 0};
    CHECK(flat.at(100) == doctest::Approx(5e-3));
}

TEST_CASE("zero epochs leave every parameter unchanged") {
    TestRig rig(true, false);
    const Tensor den_before = rig.stack.denoiser.flat_params();
    const Tensor enc_before = rig.stack.encoder->flat_params();
    TrainConfig cfg;
    cfg.method = Method::ZoAeDs;
    cfg.estimator.kind = EstimatorKind::Cge;
    cfg.epochs = 0;
    const TrainReport rep = train(cfg, rig.stack, rig.data);
    CHECK(rep.epochs.empty());
    CHECK(norm2(sub(rig.stack.denoiser.flat_params(), den_before)) == 0.0);
    CHECK(norm2(sub(rig.stack.encoder->flat_params(), enc_before)) == 0.0);
}

TEST_CASE("query accounting matches the closed-form budget") {
    SUBCASE("zo-ae-ds with cge: n(d_z+1) per epoch plus n cached targets") {
        TestRig rig(true, false);
        TrainConfig cfg;
        cfg.method = Method::ZoAeDs;
        cfg.estimator.kind = EstimatorKind::Cge;
        cfg.epochs = 2;
        cfg.batch_size = 4;
        const int n = rig.data.size(), dz = rig.stack.d_z;
        const TrainReport rep = train(cfg, rig.stack, rig.data);
        const std::uint64_t want = static_cast<std::uint64_t>(n) * (dz + 1) * 2 + n;
        CHECK(rep.total_queries == want);
        CHECK(rep.total_queries == expected_training_queries(cfg, n, rig.stack.d, dz));
        // first epoch carries the target queries, later epochs do not
        CHECK(rep.epochs[0].queries_used == static_cast<std::uint64_t>(n) * (dz + 1) + n);
        CHECK(rep.epochs[1].queries_used - rep.epochs[0].queries_used == static_cast<std::uint64_t>(n) * (dz + 1));
    }
    SUBCASE("zo-ds with rge: n(q+1) per epoch plus n cached targets") {
        TestRig rig(false, false);
        TrainConfig cfg;
        cfg.method = Method::ZoDs;
        cfg.estimator.kind = EstimatorKind::Rge;
        cfg.estimator.q = 5;
        cfg.epochs = 3;
        const int n = rig.data.size();
        const TrainReport rep = train(cfg, rig.stack, rig.data);
        const std::uint64_t want = static_cast<std::uint64_t>(n) * 6 * 3 + n;
        CHECK(rep.total_queries == want);
        CHECK(rep.total_queries == expected_training_queries(cfg, n, rig.stack.d, 0));
    }
    SUBCASE("queries are non-decreasing across epochs") {
        TestRig rig(true, false);
        TrainConfig cfg;
        cfg.method = Method::ZoAeDs;
        cfg.estimator.kind = EstimatorKind::Cge;
        cfg.epochs = 3;
        const TrainReport rep = train(cfg, rig.stack, rig.data);
        for (std::size_t e = 1; e < rep.epochs.size(); ++e)
            CHECK(rep.epochs[e].queries_used >= rep.epochs[e - 1].queries_used);
    }
    SUBCASE("first-order methods use no oracle rows") {
        TestRig rig(true, true);
        TrainConfig cfg;
        cfg.method = Method::FoAeDs;
        cfg.epochs = 2;
        const TrainReport rep = train(cfg, rig.stack, rig.data);
        CHECK(rep.total_queries == 0);
    }
}

TEST_CASE("zo training refuses white-box access to the base model") {
    TestRig rig(true, true); // white box attached
    TrainConfig cfg;
    cfg.method = Method::ZoAeDs;
    cfg.estimator.kind = EstimatorKind::Cge;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(cfg, rig.stack, rig.data), contract_violation);
}

TEST_CASE("method and stack shape must agree") {
    TestRig no_ae(false, false);
    TrainConfig cfg;
    cfg.method = Method::ZoAeDs;
    cfg.estimator.kind = EstimatorKind::Cge;
    CHECK_THROWS_AS(train(cfg, no_ae.stack, no_ae.data), std::invalid_argument);
    TestRig with_ae(true, false);
    cfg.method = Method::ZoDs;
    CHECK_THROWS_AS(train(cfg, with_ae.stack, with_ae.data), std::invalid_argument);
}

TEST_CASE("frozen decoder is byte-identical across defense training") {
    TestRig rig(true, false);
    const std::uint64_t before = param_checksum(*rig.stack.decoder);
    TrainConfig cfg;
    cfg.method = Method::ZoAeDs;
    cfg.estimator.kind = EstimatorKind::Cge;
    cfg.epochs = 2;
    train(cfg, rig.stack, rig.data);
    CHECK(param_checksum(*rig.stack.decoder) == before);
}

TEST_CASE("zo-ae-ds gradients converge to the first-order gradients") {
    // shadow first-order route on identical copies; cge at mu = 1e-4
    TestRig rig(true, false, 99);
    const Tensor x = rig.data.example(0);
    RngStream noise(5);
    const Tensor delta = sample_gaussian(noise, x.shape(), 0.25);
    const StabilityTarget target = make_stability_target(rig.stack.base->query(x), OutputKind::Logits, false);

    EstimatorConfig est;
    est.kind = EstimatorKind::Cge;
    est.mu = 1e-4;
    ScalarLossOracle composed_loss(rig.stack.composed, target.loss_map());
    const StabilityGrad zo =
        stability_grad_zo_ae(rig.stack.denoiser, *rig.stack.encoder, composed_loss, x, delta, est);

    // independent first-order reference through unfrozen copies
    Graph den = rig.stack.denoiser;
    Graph enc = *rig.stack.encoder;
    Graph dec = *rig.stack.decoder;
    Graph base = *rig.base_graph;
    const Tensor denoised = den.forward1(add(x, delta));
    const Tensor z = enc.forward1(denoised);
    const Tensor img = dec.forward1(z);
    const Tensor logits = base.forward1(img);
    Tensor dlogits;
    cross_entropy_vs_label(logits, target.label, &dlogits);
    base.backward(dlogits);
    dec.backward(base.input_gradient("x"));
    const GradMap enc_grads = enc.backward(dec.input_gradient("z"));
    const GradMap den_grads = den.backward(enc.input_gradient("x"));

    std::vector<double> zo_flat, fo_flat;
    for (const auto& [name, g] : zo.grads)
        for (int i = 0; i < g.size(); ++i) zo_flat.push_back(g[i]);
    for (const auto& [name, g] : den_grads)
        for (int i = 0; i < g.size(); ++i) fo_flat.push_back(g[i]);
    for (const auto& [name, g] : enc_grads)
        for (int i = 0; i < g.size(); ++i) fo_flat.push_back(g[i]);
    REQUIRE(zo_flat.size() == fo_flat.size());
    const Tensor a({static_cast<int>(zo_flat.size())}, zo_flat);
    const Tensor b({static_cast<int>(fo_flat.size())}, fo_flat);
    CHECK(cosine_similarity(a, b) >= 0.99);
}

TEST_CASE("training a zo-ae-ds stack reduces the objective on a toy problem") {
    TestRig rig(true, false, 13);
    TrainConfig cfg;
    cfg.method = Method::ZoAeDs;
    cfg.estimator.kind = EstimatorKind::Cge;
    cfg.epochs = 8;
    cfg.batch_size = 6;
    cfg.lr.initial = 5e-3;
    cfg.sigma = 0.1;
    const TrainReport rep = train(cfg, rig.stack, rig.data);
    REQUIRE(rep.epochs.size() == 8);
    CHECK(rep.epochs.back().total_loss < rep.epochs.front().total_loss);
    CHECK_FALSE(rep.final_checkpoint_id.empty());
}

TEST_CASE("divergent training throws after restoring the best checkpoint") {
    TestRig rig(false, false, 21);
    TrainConfig cfg;
    cfg.method = Method::ZoDs;
    cfg.estimator.kind = EstimatorKind::Rge;
    cfg.estimator.q = 2;
    cfg.epochs = 30;
    cfg.optimizer = OptimizerKind::Sgd;
    cfg.lr.initial = 1e6; // guaranteed blow-up
    CHECK_THROWS_AS(train(cfg, rig.stack, rig.data), training_error);
}

TEST_CASE("pretrain-finetune runs its two phases") {
    TestRig rig(true, false, 31);
    TrainConfig cfg;
    cfg.method = Method::ZoAeDs;
    cfg.estimator.kind = EstimatorKind::Cge;
    cfg.scheme = Scheme::PretrainFinetune;
    cfg.pretrain_epochs = 2;
    cfg.epochs = 3;
    const TrainReport rep = train(cfg, rig.stack, rig.data);
    REQUIRE(rep.epochs.size() == 5);
    // the denoise-only phase performs no oracle queries
    CHECK(rep.epochs[1].queries_used == 0);
    CHECK(rep.epochs[2].queries_used > 0);
    CHECK(rep.total_queries == expected_training_queries(cfg, rig.data.size(), rig.stack.d, rig.stack.d_z));
}
