#include <doctest.h>

#include "forma/ops.hpp"
#include "forma/tensor.hpp"

using namespace forma;

TEST_CASE("tensor basics: shape, fill, shared storage, clone") {
    Tensor a({2, 3}, 1.5);
    CHECK(a.size() == 6);
    CHECK(a.dim(0) == 2);
    CHECK(a.at(1, 2) == 1.5);

    Tensor alias = a;  // shares storage
    alias.at(0, 0) = 9.0;
    CHECK(a.at(0, 0) == 9.0);
    CHECK(a.storage_id() == alias.storage_id());

    Tensor deep = a.clone();
    deep.at(0, 0) = -1.0;
    CHECK(a.at(0, 0) == 9.0);
    CHECK(deep.storage_id() != a.storage_id());
}

TEST_CASE("tensor from_data validates element count") {
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
    Tensor t = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    CHECK(t.at(1, 1) == 4.0);
}

TEST_CASE("requires_grad allocates and zeroes the gradient buffer") {
    Tensor t({3});
    CHECK(t.grad() == nullptr);
    t.set_requires_grad(true);
    REQUIRE(t.grad() != nullptr);
    t.grad()[0] = 5.0;
    t.zero_grad();
    CHECK(t.grad()[0] == 0.0);
}

TEST_CASE("graph backward: chain of ops, gradient accumulation on leaves") {
    Graph g;
    Tensor x = Tensor::from_data({2}, {2.0, -3.0}, true);
    Tensor y = ops::mul(g, x, x);        // x^2
    Tensor s = ops::sum_all(g, y);       // sum x^2
    g.backward(s);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    CHECK(x.grad()[1] == doctest::Approx(-6.0));

    // Leaf grads accumulate across a second backward pass.
    Graph g2;
    Tensor s2 = ops::sum_all(g2, ops::mul(g2, x, x));
    g2.backward(s2);
    CHECK(x.grad()[0] == doctest::Approx(8.0));
}

TEST_CASE("graph backward rejects non-scalar and foreign tensors") {
    Graph g;
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tensor y = ops::mul(g, x, x);
    CHECK_THROWS_AS(g.backward(y), DimensionError);  // not scalar

    Tensor stray = Tensor::scalar(1.0);
    CHECK_THROWS_AS(g.backward(stray), DomainError);  // not produced by g
}

TEST_CASE("backward propagates a numeric error for non-finite loss") {
    Graph g;
    Tensor x = Tensor::from_data({1}, {1e308}, true);
    Tensor y = ops::mul(g, x, x);  // overflows to inf
    CHECK_THROWS_AS(g.backward(y), NumericError);
}

TEST_CASE("recording can be disabled for inference") {
    Graph g;
    g.set_recording(false);
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tensor y = ops::mul(g, x, x);
    CHECK(g.node_count() == 0);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("trunc_normal stays within two standard deviations") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        const double v = trunc_normal(rng, 0.5);
        CHECK(std::fabs(v) <= 1.0 + 1e-12);
    }
}
