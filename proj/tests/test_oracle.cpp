#include <doctest.h>

#include "zods/oracle.hpp"

using namespace zods;

namespace {

std::shared_ptr<BlackBoxOracle> constant_oracle(const Tensor& c, Shape in_shape) {
    return std::make_shared<BlackBoxOracle>([c](const Tensor&) { return c; }, std::move(in_shape), c.shape(),
                                            OutputKind::Logits);
}

} // namespace

TEST_CASE("constant oracle returns its constant and counts one row per query") {
    const Tensor c({2}, {3.0, -1.0});
    auto oracle = constant_oracle(c, {4});
    const Tensor out = oracle->query(Tensor({4}));
    CHECK(out[0] == 3.0);
    CHECK(out[1] == -1.0);
    CHECK(oracle->queries_used() == 1);
}

TEST_CASE("three sequential queries count three") {
    auto oracle = constant_oracle(Tensor({1}, {0.0}), {2});
    for (int i = 0; i < 3; ++i) oracle->query(Tensor({2}));
    CHECK(oracle->queries_used() == 3);
}

TEST_CASE("batch queries count rows, not calls") {
    auto oracle = constant_oracle(Tensor({1}, {0.0}), {2});
    oracle->query_batch({Tensor({2}), Tensor({2}), Tensor({2}), Tensor({2})});
    CHECK(oracle->queries_used() == 4);
}

TEST_CASE("query shape mismatch is an argument error") {
    auto oracle = constant_oracle(Tensor({1}, {0.0}), {2});
    CHECK_THROWS_WITH_AS(oracle->query(Tensor({3})), doctest::Contains("shape"), std::invalid_argument);
}

TEST_CASE("parameter access on a black box raises") {
    auto oracle = constant_oracle(Tensor({1}, {0.0}), {2});
    CHECK_THROWS_AS(oracle->parameters(), contract_violation);
}

TEST_CASE("composing with an identity decoder preserves behavior") {
    RngStream rng(4);
    Graph base_graph;
    {
        const int x = base_graph.input("x", {3});
        base_graph.set_output(base_graph.dense(x, "w", 2, rng));
    }
    auto inner = make_graph_oracle(base_graph, OutputKind::Logits);

    Graph identity_decoder;
    {
        const int z = identity_decoder.input("z", {3});
        identity_decoder.set_output(z);
    }
    auto composed = compose_with_decoder(inner, identity_decoder);

    const Tensor z({3}, {0.5, -0.2, 0.9});
    const Tensor direct = inner->query(z);
    const Tensor via = composed->query(z);
    CHECK(via[0] == doctest::Approx(direct[0]));
    CHECK(via[1] == doctest::Approx(direct[1]));
}

TEST_CASE("linear decoder into linear black box is the matrix product") {
    // decoder z -> G z (3x2), black box v -> A v (2x3 applied to R^3)
    const Tensor g_mat({3, 2}, {1.0, 2.0, 0.0, -1.0, 3.0, 1.0});
    const Tensor a_mat({2, 3}, {1.0, 0.0, 2.0, -1.0, 1.0, 0.5});

    Graph decoder;
    {
        const int z = decoder.input("z", {2});
        const int w = decoder.param("g", g_mat);
        const int b = decoder.param("b", Tensor({3}));
        decoder.set_output(decoder.dense(z, w, b));
    }
    Graph base_graph;
    {
        const int x = base_graph.input("x", {3});
        const int w = base_graph.param("a", a_mat);
        const int b = base_graph.param("b", Tensor({2}));
        base_graph.set_output(base_graph.dense(x, w, b));
    }
    auto inner = make_graph_oracle(base_graph, OutputKind::Logits);
    auto composed = compose_with_decoder(inner, decoder);

    RngStream rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor z({2}, {rng.next_gaussian(), rng.next_gaussian()});
        const Tensor got = composed->query(z);
        // hand product A (G z)
        double gz[3];
        for (int i = 0; i < 3; ++i) gz[i] = g_mat[i * 2] * z[0] + g_mat[i * 2 + 1] * z[1];
        for (int i = 0; i < 2; ++i) {
            const double want = a_mat[i * 3] * gz[0] + a_mat[i * 3 + 1] * gz[1] + a_mat[i * 3 + 2] * gz[2];
            CHECK(got[i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("composed oracle delegates its counter to the inner oracle") {
    RngStream rng(4);
    Graph base_graph;
    {
        const int x = base_graph.input("x", {2});
        base_graph.set_output(base_graph.dense(x, "w", 1, rng));
    }
    auto inner = make_graph_oracle(base_graph, OutputKind::Logits);
    Graph decoder;
    {
        const int z = decoder.input("z", {2});
        decoder.set_output(z);
    }
    auto composed = compose_with_decoder(inner, decoder);
    composed->query(Tensor({2}));
    composed->query(Tensor({2}));
    CHECK(inner->queries_used() == 2);
    CHECK(composed->queries_used() == 2);
}

TEST_CASE("incompatible decoder/oracle shapes are rejected") {
    RngStream rng(4);
    Graph base_graph;
    {
        const int x = base_graph.input("x", {3});
        base_graph.set_output(base_graph.dense(x, "w", 1, rng));
    }
    auto inner = make_graph_oracle(base_graph, OutputKind::Logits);
    Graph decoder;
    {
        const int z = decoder.input("z", {2});
        decoder.set_output(z); // outputs R^2, oracle wants R^3
    }
    CHECK_THROWS_AS(compose_with_decoder(inner, decoder), std::invalid_argument);
}

TEST_CASE("scalar loss oracle is deterministic and counts rows") {
    auto oracle = constant_oracle(Tensor({3}, {1.0, 2.0, 0.5}), {2});
    ScalarLossOracle loss(oracle, ce_loss_vs_label(1));
    const Tensor w({2}, {0.3, 0.4});
    const double v1 = loss.value(w);
    const double v2 = loss.value(w);
    CHECK(v1 == v2);
    CHECK(loss.queries_used() == 2);
}
