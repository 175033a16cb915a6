#include <doctest.h>

#include "zods/graph.hpp"

using namespace zods;

namespace {

// relative error against the finite-difference reference, coordinatewise
// with an absolute floor for near-zero entries
void check_grads_match(const GradMap& got, const GradMap& want, double rtol) {
    REQUIRE(got.size() == want.size());
    for (const auto& [name, g] : got) {
        const Tensor& w = want.at(name);
        REQUIRE(g.size() == w.size());
        for (int i = 0; i < g.size(); ++i) {
            const double denom = std::max(1.0, std::abs(w[i]));
            CHECK(std::abs(g[i] - w[i]) / denom < rtol);
        }
    }
}

} // namespace

TEST_CASE("identity graph returns its input") {
    Graph g;
    const int x = g.input("x", {3});
    g.set_output(x);
    const Tensor out = g.forward({{"x", Tensor({3}, {1.0, 2.0, 3.0})}});
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 2.0);
    CHECK(out[2] == 3.0);
}

TEST_CASE("dense layer with identity weights") {
    Graph g;
    const int x = g.input("x", {2});
    const int w = g.param("w", Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    const int b = g.param("b", Tensor({2}));
    g.set_output(g.dense(x, w, b));
    const Tensor out = g.forward({{"x", Tensor({2}, {3.0, 4.0})}});
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 4.0);
}

TEST_CASE("dense layer hand-computed matrix multiply") {
    Graph g;
    const int x = g.input("x", {2});
    const int w = g.param("w", Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
    const int b = g.param("b", Tensor({2}, {1.0, 1.0}));
    g.set_output(g.dense(x, w, b));
    const Tensor out = g.forward({{"x", Tensor({2}, {1.0, 1.0})}});
    CHECK(out[0] == doctest::Approx(4.0));
    CHECK(out[1] == doctest::Approx(8.0));
}

TEST_CASE("forward errors name the operation and shapes") {
    Graph g;
    const int x = g.input("x", {2});
    g.set_output(g.relu(x));
    CHECK_THROWS_WITH_AS(g.forward({{"x", Tensor({3})}}), doctest::Contains("(3)"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(g.forward({{"y", Tensor({2})}}), doctest::Contains("unknown input"), std::invalid_argument);
    Graph g2;
    const int a = g2.input("a", {2});
    CHECK_THROWS_WITH_AS(g2.dense(a, g2.param("w", Tensor({3, 3})), g2.param("b", Tensor({3}))),
                         doctest::Contains("dense"), std::invalid_argument);
}

TEST_CASE("backward of the identity is the output gradient") {
    Graph g;
    const int w = g.param("w", Tensor({1}, {2.5}));
    g.set_output(w);
    g.forward({});
    const GradMap grads = g.backward(Tensor({1}, {1.0}));
    CHECK(grads.at("w")[0] == 1.0);
}

TEST_CASE("backward of w^2 via elementwise mul (power rule)") {
    Graph g;
    const int w = g.param("w", Tensor({1}, {3.0}));
    g.set_output(g.mul(w, w));
    g.forward({});
    const GradMap grads = g.backward(Tensor({1}, {1.0}));
    CHECK(grads.at("w")[0] == doctest::Approx(6.0));
}

TEST_CASE("backward before forward is a state error") {
    Graph g;
    const int w = g.param("w", Tensor({1}, {3.0}));
    g.set_output(w);
    CHECK_THROWS_AS(g.backward(Tensor({1}, {1.0})), std::logic_error);
}

TEST_CASE("two-layer dense net matches central finite differences") {
    RngStream rng(11);
    Graph g;
    const int x = g.input("x", {4});
    int h = g.dense(x, "l0", 5, rng);
    h = g.relu(h);
    h = g.dense(h, "l1", 3, rng);
    g.set_output(g.softmax(h));

    std::map<std::string, Tensor> inputs{{"x", Tensor({4}, {0.3, -0.2, 0.8, 0.1})}};
    Tensor weights({3}, {0.2, -1.0, 0.5});
    g.forward(inputs);
    const GradMap analytic = g.backward(weights);
    const GradMap reference = finite_difference_grads(g, inputs, weights, 1e-5);
    check_grads_match(analytic, reference, 1e-5);
}

TEST_CASE("gradient check across the full operation set") {
    RngStream rng(23);
    // conv -> relu -> conv -> flatten -> dense -> sigmoid, plus add/mul/scale
    Graph g;
    const int x = g.input("x", {2, 4, 4});
    int h = g.conv2d(x, "c0", 3, 3, 1, rng);
    h = g.relu(h);
    h = g.conv2d(h, "c1", 2, 3, 1, rng);
    const int skip = g.scale(x, 0.5);
    h = g.add(h, skip);
    h = g.mul(h, h);
    h = g.flatten(h);
    h = g.dense(h, "d0", 6, rng);
    h = g.sigmoid(h);
    g.set_output(h);

    Tensor xin({2, 4, 4});
    RngStream xr(5);
    for (int i = 0; i < xin.size(); ++i) xin[i] = xr.next_gaussian() * 0.5;
    std::map<std::string, Tensor> inputs{{"x", xin}};
    Tensor weights({6});
    for (int i = 0; i < 6; ++i) weights[i] = xr.next_gaussian();

    g.forward(inputs);
    const GradMap analytic = g.backward(weights);
    const GradMap reference = finite_difference_grads(g, inputs, weights, 1e-5);
    check_grads_match(analytic, reference, 1e-4);
}

TEST_CASE("gradient check for loss heads") {
    RngStream rng(31);
    SUBCASE("cross entropy on logits") {
        Graph g;
        const int x = g.input("x", {3});
        const int t = g.input("t", {4});
        int h = g.dense(x, "d", 4, rng);
        g.set_output(g.cross_entropy(h, t));
        std::map<std::string, Tensor> inputs{{"x", Tensor({3}, {0.1, -0.4, 0.9})},
                                             {"t", Tensor({4}, {0.0, 1.0, 0.0, 0.0})}};
        g.forward(inputs);
        const GradMap analytic = g.backward(Tensor({1}, {1.0}));
        check_grads_match(analytic, finite_difference_grads(g, inputs, Tensor({1}, {1.0}), 1e-5), 1e-4);
    }
    SUBCASE("squared error, both reductions") {
        for (const bool mean_reduce : {false, true}) {
            Graph g;
            const int x = g.input("x", {3});
            const int t = g.input("t", {2});
            int h = g.dense(x, "d", 2, rng);
            g.set_output(g.squared_error(h, t, mean_reduce));
            std::map<std::string, Tensor> inputs{{"x", Tensor({3}, {0.5, 0.2, -0.3})},
                                                 {"t", Tensor({2}, {0.4, -0.6})}};
            g.forward(inputs);
            const GradMap analytic = g.backward(Tensor({1}, {1.0}));
            check_grads_match(analytic, finite_difference_grads(g, inputs, Tensor({1}, {1.0}), 1e-5), 1e-4);
        }
    }
}

TEST_CASE("input gradients chain across graphs") {
    RngStream rng(3);
    Graph first;
    {
        const int x = first.input("x", {3});
        first.set_output(first.dense(x, "w", 3, rng));
    }
    Graph second;
    {
        const int x = second.input("x", {3});
        second.set_output(second.dense(x, "v", 2, rng));
    }
    const Tensor xin({3}, {0.2, -0.1, 0.7});
    const Tensor mid = first.forward({{"x", xin}});
    second.forward({{"x", mid}});
    const Tensor head({2}, {1.0, -2.0});
    second.backward(head);
    first.backward(second.input_gradient("x"));
    const Tensor chained = first.input_gradient("x");

    // reference: single fused graph
    RngStream rng2(3);
    Graph fused;
    const int x = fused.input("x", {3});
    int h = fused.dense(x, "w", 3, rng2);
    h = fused.dense(h, "v", 2, rng2);
    fused.set_output(h);
    fused.forward({{"x", xin}});
    fused.backward(head);
    const Tensor want = fused.input_gradient("x");
    for (int i = 0; i < 3; ++i) CHECK(chained[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("flat parameter round trip") {
    RngStream rng(9);
    Graph g;
    const int x = g.input("x", {3});
    g.set_output(g.dense(x, "d", 2, rng));
    const Tensor flat = g.flat_params();
    Graph copy = g;
    Tensor perturbed = flat;
    perturbed[0] += 1.0;
    copy.set_flat_params(perturbed);
    CHECK(copy.flat_params()[0] == doctest::Approx(flat[0] + 1.0));
    CHECK(g.flat_params()[0] == doctest::Approx(flat[0]));
}
