#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "wtopo/adamw.hpp"

using namespace wtopo;

TEST_CASE("zero gradient leaves parameters untouched when decay is off") {
    AdamWParams hp;
    hp.learning_rate = 0.01;
    hp.weight_decay = 0.0;
    AdamWState state(4, 4);
    ScalarField param(4, 4, 0.37);
    const ScalarField grad(4, 4, 0.0);
    const ScalarField next = adamw_step(state, param, grad, hp);
    REQUIRE(next.values == param.values);
    for (double v : state.m.values) REQUIRE(v == 0.0);
    for (double v : state.s.values) REQUIRE(v == 0.0);
}

TEST_CASE("first step is a signed move of magnitude about tau") {
    AdamWParams hp;
    hp.learning_rate = 0.05;
    hp.weight_decay = 0.0;
    AdamWState state(3, 2);
    ScalarField param(3, 2, 0.0);
    ScalarField grad(3, 2);
    for (int i = 0; i < grad.size(); ++i) grad[i] = (i % 2 ? -1.0 : 1.0) * (0.5 + i);
    const ScalarField next = adamw_step(state, param, grad, hp);
    for (int i = 0; i < param.size(); ++i) {
        const double expected = -hp.learning_rate * grad[i] / (std::abs(grad[i]) + hp.eps_stab);
        REQUIRE(next[i] == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("quadratic objective converges to its minimum") {
    AdamWParams hp;
    hp.learning_rate = 0.05;
    hp.weight_decay = 0.0;
    std::mt19937 rng(55);
    ScalarField target = fixtures::random_uniform_field(rng, 5, 5, -1.0, 1.0);
    ScalarField x(5, 5, 0.0);
    AdamWState state(5, 5);
    for (int step = 0; step < 2000; ++step) {
        ScalarField grad(5, 5);
        for (int i = 0; i < x.size(); ++i) grad[i] = x[i] - target[i];
        x = adamw_step(state, x, grad, hp);
    }
    double err = 0.0;
    for (int i = 0; i < x.size(); ++i) err = std::max(err, std::abs(x[i] - target[i]));
    REQUIRE(err < 1e-3);
}

TEST_CASE("per-step displacement approaches tau under a constant gradient") {
    AdamWParams hp;
    hp.learning_rate = 0.01;
    hp.weight_decay = 0.0;
    AdamWState state(2, 2);
    ScalarField x(2, 2, 0.0);
    const ScalarField grad(2, 2, 3.7);
    ScalarField prev = x;
    double displacement = 0.0;
    for (int step = 0; step < 200; ++step) {
        prev = x;
        x = adamw_step(state, x, grad, hp);
        displacement = std::abs(x[0] - prev[0]);
    }
    REQUIRE(displacement == Catch::Approx(hp.learning_rate).epsilon(1e-6));
}

TEST_CASE("steps are deterministic") {
    auto run = [] {
        AdamWParams hp;
        AdamWState state(4, 3);
        ScalarField x(4, 3, 0.25);
        std::mt19937 rng(99);
        for (int step = 0; step < 50; ++step) {
            const ScalarField grad = fixtures::random_uniform_field(rng, 4, 3, -1.0, 1.0);
            x = adamw_step(state, x, grad, hp);
        }
        return x;
    };
    const ScalarField a = run();
    const ScalarField b = run();
    REQUIRE(a.values == b.values);
}

TEST_CASE("adamw rejects bad inputs") {
    AdamWParams hp;
    AdamWState state(2, 2);
    const ScalarField param(2, 2, 0.0);
    REQUIRE_THROWS_AS(adamw_step(state, param, ScalarField(3, 2, 0.0), hp), invariant_error);
    ScalarField bad(2, 2, 0.0);
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(adamw_step(state, param, bad, hp), invariant_error);
}

TEST_CASE("second moment stays nonnegative and step counts up by one") {
    AdamWParams hp;
    AdamWState state(3, 3);
    ScalarField x(3, 3, 0.1);
    std::mt19937 rng(7);
    for (int step = 1; step <= 20; ++step) {
        const ScalarField grad = fixtures::random_uniform_field(rng, 3, 3, -2.0, 2.0);
        x = adamw_step(state, x, grad, hp);
        REQUIRE(state.step == step);
        for (double v : state.s.values) REQUIRE(v >= 0.0);
    }
}
