#include <doctest.h>

#include <cmath>

#include "forma/optim.hpp"

using namespace forma;

TEST_CASE("adamw first step moves by about lr against the gradient sign") {
    // With m_hat = g and v_hat = g^2 after bias correction, the first
    // update is lr * g / (|g| + eps), i.e. almost exactly lr * sign(g).
    Tensor w = Tensor::from_data({2}, {1.0, -2.0}, true);
    w.grad()[0] = 0.3;
    w.grad()[1] = -0.7;
    std::vector<NamedParam> params{{"w", w}};
    AdamW opt(params, 0.0);
    opt.step(params, 0.01);
    CHECK(w.at(0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(w.at(1) == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(opt.step_count() == 1);
    // Gradients are consumed by the step.
    CHECK(w.grad()[0] == 0.0);
}

TEST_CASE("adamw second step oracle with constant gradient") {
    // Constant gradient g: hat m = g and hat v = g^2 at every step, so each
    // update is lr * g / (|g| + eps) regardless of step index.
    Tensor w = Tensor::from_data({1}, {0.0}, true);
    std::vector<NamedParam> params{{"w", w}};
    AdamW opt(params, 0.0);
    for (int i = 0; i < 3; ++i) {
        w.grad()[0] = 2.0;
        opt.step(params, 0.1);
    }
    CHECK(w.at(0) == doctest::Approx(-0.3).epsilon(1e-6));
}

TEST_CASE("decoupled weight decay shrinks weights independently of gradients") {
    Tensor w = Tensor::from_data({1}, {10.0}, true);
    w.grad()[0] = 0.0;
    std::vector<NamedParam> params{{"w", w}};
    AdamW opt(params, 0.1);
    opt.step(params, 0.01);
    // Zero gradient: only the decay term lr * wd * w applies.
    CHECK(w.at(0) == doctest::Approx(10.0 - 0.01 * 0.1 * 10.0));
}

TEST_CASE("adamw rejects non-finite gradients") {
    Tensor w = Tensor::from_data({1}, {0.0}, true);
    w.grad()[0] = std::nan("");
    std::vector<NamedParam> params{{"w", w}};
    AdamW opt(params, 0.0);
    CHECK_THROWS_AS(opt.step(params, 0.01), NumericError);
}

TEST_CASE("plateau schedule: frozen trace with patience 2") {
    PlateauSchedule sched;
    sched.lr = 1e-4;
    sched.factor = 0.1;
    sched.patience = 2;

    sched.step(0.50);  // first observation becomes best
    CHECK(sched.lr == doctest::Approx(1e-4));
    sched.step(0.60);  // improves
    CHECK(sched.lr == doctest::Approx(1e-4));
    sched.step(0.60);  // stagnant (ties do not count as improvement)
    CHECK(sched.lr == doctest::Approx(1e-4));
    sched.step(0.55);  // second stagnant call in a row -> drop
    CHECK(sched.lr == doctest::Approx(1e-5));
    sched.step(0.55);
    sched.step(0.55);  // another two stagnant calls -> drop again
    CHECK(sched.lr == doctest::Approx(1e-6));
    sched.step(0.70);  // recovery resets the counter
    sched.step(0.65);
    CHECK(sched.lr == doctest::Approx(1e-6));
}

TEST_CASE("plateau schedule never drops below the floor") {
    PlateauSchedule sched;
    sched.lr = 1e-7;
    sched.patience = 1;
    sched.step(1.0);
    for (int i = 0; i < 5; ++i) sched.step(0.0);
    CHECK(sched.lr == doctest::Approx(1e-8));
}
