#include <cmath>
#include <vector>

#include "doctest.h"
#include "stam/adam.hpp"
#include "stam/errors.hpp"
#include "stam/grad_check.hpp"
#include "stam/param_store.hpp"
#include "stam/rng.hpp"
#include "stam/tensor.hpp"

using namespace stam;

TEST_CASE("backward of a sum is all ones") {
    Tensor w = Tensor::from_values({3}, {2, -1, 4}, true);
    backward(sum(w));
    CHECK(w.grad() == std::vector<double>{1, 1, 1});
}

TEST_CASE("backward of half the squared norm is the vector itself") {
    Tensor w = Tensor::from_values({3}, {2, -1, 4}, true);
    backward(scale(dot(w, w), 0.5));
    CHECK(w.grad() == std::vector<double>{2, -1, 4});
}

TEST_CASE("backward requires a scalar loss") {
    Tensor w = Tensor::from_values({2}, {1, 2}, true);
    CHECK_THROWS_AS(backward(add(w, w)), DomainError);
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
    Tensor w = Tensor::from_values({2}, {1, 2}, true);
    backward(sum(w));
    backward(sum(w));
    CHECK(w.grad() == std::vector<double>{2, 2});
    w.zero_grad();
    backward(sum(w));
    CHECK(w.grad() == std::vector<double>{1, 1});
}

TEST_CASE("a tensor used twice in one graph receives both contributions") {
    Tensor w = Tensor::from_values({2}, {3, 5}, true);
    // loss = sum(w * w) -> gradient 2w through two paths into mul.
    backward(sum(mul(w, w)));
    CHECK(w.grad() == std::vector<double>{6, 10});
}

TEST_CASE("constants terminate the graph without gradients") {
    Tensor w = Tensor::from_values({2}, {1, 2}, true);
    Tensor c = Tensor::from_values({2}, {10, 20});
    backward(sum(mul(w, c)));
    CHECK(w.grad() == std::vector<double>{10, 20});
    CHECK_FALSE(c.has_grad());
}

TEST_CASE("quadratic loss passes the finite-difference check near exactly") {
    ParamStore store;
    SplitRng rng(7);
    Tensor w = store.add_uniform("w", {4}, rng, 4);
    auto build = [&]() { return scale(dot(w, w), 0.5); };
    GradCheckReport report = check_gradients(store, build);
    CHECK(report.passed);
    CHECK(report.max_rel_error <= 1e-9);
    CHECK(report.entries_checked == 4);
}

TEST_CASE("non-deterministic loss builders are rejected") {
    ParamStore store;
    SplitRng rng(8);
    Tensor w = store.add_uniform("w", {2}, rng, 2);
    int calls = 0;
    auto build = [&]() {
        ++calls;
        return scale(dot(w, w), 1.0 + 0.001 * calls);
    };
    CHECK_THROWS_AS(check_gradients(store, build), NumericalError);
}

TEST_CASE("gradients below the finite-difference noise floor do not trip the check") {
    ParamStore store;
    SplitRng rng(12);
    Tensor w = store.add_uniform("w", {3}, rng, 3);
    Tensor gate = store.add_uniform("gate", {2}, rng, 2);
    Tensor shift = Tensor::from_values({2}, {25.0, 25.0});
    // sigmoid'(~25) ~ 1e-11 while the loss stays O(1): the true difference
    // across +-step is under one ulp of the loss, so the central difference
    // on the gate entries is pure cancellation noise.
    auto build = [&]() { return add(dot(w, w), sum(sigmoid(add(gate, shift)))); };
    GradCheckReport report = check_gradients(store, build);
    CHECK(report.passed);
    CHECK(report.entries_checked == 5);
}

TEST_CASE("negative scale floors are rejected") {
    ParamStore store;
    SplitRng rng(13);
    Tensor w = store.add_uniform("w", {2}, rng, 2);
    auto build = [&]() { return dot(w, w); };
    GradCheckOptions options;
    options.scale_floor = -1.0;
    CHECK_THROWS_AS(check_gradients(store, build, options), DomainError);
}

TEST_CASE("every exposed op family passes the finite-difference check") {
    ParamStore store;
    SplitRng rng(9);
    Tensor a = store.add_uniform("a", {3, 4}, rng, 4);
    Tensor b = store.add_uniform("b", {4, 2}, rng, 4);
    Tensor x = store.add_uniform("x", {4}, rng, 4);
    Tensor gain = store.add_constant("gain", {3}, 1.1);
    Tensor bias = store.add_constant("bias", {3}, -0.2);
    Tensor kernel = store.add_uniform("kernel", {2, 3, 3}, rng, 6);
    Tensor clips = store.add_uniform("clips", {2, 3}, rng, 3);

    auto build = [&]() {
        Tensor m = matmul(a, b);                       // [3 x 2]
        Tensor t = transpose(m);                       // [2 x 3]
        Tensor mv = matvec(a, x);                      // [3]
        Tensor vm = vecmat(mv, a);                     // [4]
        Tensor sm = softmax(mv);                       // [3]
        Tensor rs = row_softmax(t);                    // [2 x 3]
        Tensor ln = layer_norm(mv, gain, bias);        // [3]
        Tensor conv = temporal_conv_full(kernel, clips, bias);
        Tensor parts = concat(slice(vm, 0, 2), row(rs, 1));
        Tensor act = add(sigmoid(slice(parts, 0, 2)), stam::tanh(slice(parts, 2, 2)));
        Tensor pieces = add(
            add(sum(mul(sm, ln)), logsumexp(conv)),
            add(dot(mean_rows(m), mean_rows(m)), add(sum(act), pick(vm, 1))));
        return pieces;
    };
    GradCheckReport report = check_gradients(store, build);
    INFO("worst parameter ", report.worst_parameter, "[", report.worst_index, "] rel ",
         report.max_rel_error);
    CHECK(report.passed);
}

TEST_CASE("max_rows finite-difference check away from ties") {
    ParamStore store;
    SplitRng rng(10);
    // Uniform draws make exact ties measure-zero; the subgradient then equals
    // the derivative in a neighborhood.
    Tensor a = store.add_uniform("a", {4, 3}, rng, 3);
    auto build = [&]() { return dot(max_rows(a), max_rows(a)); };
    GradCheckReport report = check_gradients(store, build);
    CHECK(report.passed);
}

TEST_CASE("adam leaves parameters alone at zero gradient") {
    ParamStore store;
    SplitRng rng(11);
    Tensor w = store.add_uniform("w", {3}, rng, 3);
    std::vector<double> before = w.values();
    Adam adam(store, {});
    store.zero_grads();
    adam.step();
    CHECK(w.values() == before);
}

TEST_CASE("first adam step moves by roughly the learning rate against unit gradient") {
    ParamStore store;
    Tensor w = store.add("w", Tensor::from_values({1}, {1.0}, true));
    AdamConfig config;
    config.learning_rate = 0.1;
    Adam adam(store, config);
    store.zero_grads();
    backward(sum(w));  // gradient exactly 1
    adam.step();
    // Bias-corrected first step is lr * g / (sqrt(g^2) + eps) ~ lr.
    CHECK(w.values()[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam refuses to step a parameter that never saw backward") {
    ParamStore store;
    store.add("w", Tensor::from_values({1}, {1.0}, true));
    Adam adam(store, {});
    try {
        adam.step();
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("'w'") != std::string::npos);
    }
}

TEST_CASE("identical seeds give bit-identical adam trajectories") {
    auto run = [](uint64_t seed) {
        ParamStore store;
        SplitRng rng(seed);
        Tensor w = store.add_uniform("w", {8}, rng, 8);
        Tensor target = Tensor::constant({8}, 0.5);
        Adam adam(store, {});
        for (int step = 0; step < 25; ++step) {
            store.zero_grads();
            Tensor diff = sub(w, target);
            backward(dot(diff, diff));
            adam.step();
        }
        return w.values();
    };
    CHECK(run(5) == run(5));
    CHECK(run(5) != run(6));
}

TEST_CASE("param store rejects duplicates and missing names, keeps order") {
    ParamStore store;
    SplitRng rng(12);
    store.add_uniform("first", {2}, rng, 2);
    store.add_uniform("second", {3}, rng, 3);
    CHECK_THROWS_AS(store.add_uniform("first", {2}, rng, 2), ConfigError);
    CHECK_THROWS_AS(store.get("third"), ConfigError);
    CHECK(store.tensor_count() == 2);
    CHECK(store.value_count() == 5);
    CHECK(store.entries()[0].first == "first");
    CHECK(store.entries()[1].first == "second");
}

TEST_CASE("parameter values are keyed by name, not registration order") {
    SplitRng rng(13);
    ParamStore forward_order;
    forward_order.add_uniform("alpha", {4}, rng, 4);
    forward_order.add_uniform("beta", {4}, rng, 4);
    ParamStore reverse_order;
    reverse_order.add_uniform("beta", {4}, rng, 4);
    reverse_order.add_uniform("alpha", {4}, rng, 4);
    CHECK(forward_order.get("alpha").values() == reverse_order.get("alpha").values());
    CHECK(forward_order.get("beta").values() == reverse_order.get("beta").values());
}

TEST_CASE("uniform init respects the fan-in bound") {
    ParamStore store;
    SplitRng rng(14);
    Tensor w = store.add_uniform("w", {64, 16}, rng, 16);
    double bound = 1.0 / std::sqrt(16.0);
    for (double v : w.values()) {
        CHECK(v >= -bound);
        CHECK(v <= bound);
    }
}
