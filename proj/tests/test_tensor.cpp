#include <cmath>
#include <vector>

#include "doctest.h"
#include "stam/errors.hpp"
#include "stam/rng.hpp"
#include "stam/tensor.hpp"

using namespace stam;

namespace {

Tensor random_tensor(std::vector<int> shape, SplitRng& rng, double lo = -10.0, double hi = 10.0,
                     bool requires_grad = false) {
    Tensor t = Tensor::zeros(shape, requires_grad);
    for (double& v : t.values()) {
        v = rng.next_uniform(lo, hi);
    }
    return t;
}

// Independent triple-loop product used as the matmul oracle.
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 int m, int k, int n) {
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
                acc += a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("tensor factories validate shapes") {
    CHECK_THROWS_AS(Tensor::zeros({}), DimensionError);
    CHECK_THROWS_AS(Tensor::zeros({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor::zeros({-1}), DimensionError);
    CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
    Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rank() == 2);
    CHECK(t.dim(0) == 2);
    CHECK(t.dim(1) == 3);
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(t.dim(2), DimensionError);
}

TEST_CASE("matmul identity and hand examples") {
    Tensor identity = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    Tensor column = Tensor::from_values({2, 1}, {5, 7});
    Tensor product = matmul(identity, column);
    CHECK(product.values() == std::vector<double>{5, 7});

    Tensor row_vec = Tensor::from_values({1, 2}, {1, 2});
    Tensor col_vec = Tensor::from_values({2, 1}, {3, 4});
    CHECK(matmul(row_vec, col_vec).values() == std::vector<double>{11});
}

TEST_CASE("matmul matches the triple-loop oracle on random inputs") {
    SplitRng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        int m = 1 + static_cast<int>(rng.next_below(32));
        int k = 1 + static_cast<int>(rng.next_below(32));
        int n = 1 + static_cast<int>(rng.next_below(32));
        Tensor a = random_tensor({m, k}, rng);
        Tensor b = random_tensor({k, n}, rng);
        std::vector<double> expected = naive_matmul(a.values(), b.values(), m, k, n);
        Tensor got = matmul(a, b);
        for (int i = 0; i < got.size(); ++i) {
            CHECK(std::abs(got.values()[i] - expected[i]) <= 1e-12);
        }
    }
}

TEST_CASE("matmul rejects mismatched inner dimensions, naming both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 2});
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        std::string message = e.what();
        CHECK(message.find("[2 x 3]") != std::string::npos);
        CHECK(message.find("[2 x 2]") != std::string::npos);
    }
}

TEST_CASE("softmax hand examples") {
    Tensor uniform = softmax(Tensor::from_values({3}, {0, 0, 0}));
    for (double v : uniform.values()) {
        CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    Tensor pair = softmax(Tensor::from_values({2}, {1, 3}));
    double e2 = std::exp(2.0);
    CHECK(pair.values()[0] == doctest::Approx(1.0 / (1.0 + e2)).epsilon(1e-12));
    CHECK(pair.values()[1] == doctest::Approx(e2 / (1.0 + e2)).epsilon(1e-12));

    Tensor large = softmax(Tensor::from_values({2}, {1000, 1000}));
    CHECK(large.values()[0] == 0.5);
    CHECK(large.values()[1] == 0.5);
}

TEST_CASE("softmax output is a probability vector for lengths 1..1024") {
    SplitRng rng(103);
    for (int n : {1, 2, 3, 7, 64, 257, 1024}) {
        Tensor x = random_tensor({n}, rng, -50.0, 50.0);
        Tensor y = softmax(x);
        double total = 0.0;
        for (double v : y.values()) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("row_softmax normalizes every row") {
    SplitRng rng(104);
    Tensor x = random_tensor({5, 9}, rng);
    Tensor y = row_softmax(x);
    for (int i = 0; i < 5; ++i) {
        double total = 0.0;
        for (int j = 0; j < 9; ++j) {
            double v = y.values()[i * 9 + j];
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("transpose, row, slice, concat move values where expected") {
    Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(transpose(a).values() == std::vector<double>{1, 4, 2, 5, 3, 6});
    CHECK(row(a, 1).values() == std::vector<double>{4, 5, 6});
    CHECK_THROWS_AS(row(a, 2), DimensionError);

    Tensor v = Tensor::from_values({4}, {1, 2, 3, 4});
    CHECK(slice(v, 1, 2).values() == std::vector<double>{2, 3});
    CHECK_THROWS_AS(slice(v, 3, 2), DimensionError);
    CHECK(concat(slice(v, 0, 2), slice(v, 2, 2)).values() == v.values());
}

TEST_CASE("matvec, vecmat and dot agree with direct evaluation") {
    Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor x = Tensor::from_values({3}, {1, 0, -1});
    CHECK(matvec(a, x).values() == std::vector<double>{-2, -2});
    Tensor y = Tensor::from_values({2}, {1, -1});
    CHECK(vecmat(y, a).values() == std::vector<double>{-3, -3, -3});
    CHECK(dot(x, x).values() == std::vector<double>{2});
    CHECK_THROWS_AS(matvec(a, y), DimensionError);
    CHECK_THROWS_AS(vecmat(x, a), DimensionError);
}

TEST_CASE("reductions: sum, mean_rows, max_rows with first-index ties") {
    Tensor a = Tensor::from_values({2, 2}, {1, 5, 3, 2});
    CHECK(sum(a).scalar_value() == 11.0);
    CHECK(mean_rows(a).values() == std::vector<double>{2, 3.5});
    CHECK(max_rows(a).values() == std::vector<double>{3, 5});

    // Tie: the subgradient must land on the first row attaining the max.
    Tensor tie = Tensor::from_values({2, 1}, {4, 4}, true);
    Tensor loss = sum(max_rows(tie));
    backward(loss);
    CHECK(tie.grad() == std::vector<double>{1, 0});
}

TEST_CASE("logsumexp and pick evaluate stably") {
    Tensor x = Tensor::from_values({3}, {1, 2, 3});
    double expected = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
    CHECK(logsumexp(x).scalar_value() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(pick(x, 2).scalar_value() == 3.0);
    CHECK_THROWS_AS(pick(x, 3), DimensionError);

    Tensor huge = Tensor::from_values({2}, {1000, 1000});
    CHECK(logsumexp(huge).scalar_value() == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("elementwise ops and their shapes") {
    Tensor a = Tensor::from_values({2}, {1, 2});
    Tensor b = Tensor::from_values({2}, {3, 5});
    CHECK(add(a, b).values() == std::vector<double>{4, 7});
    CHECK(sub(b, a).values() == std::vector<double>{2, 3});
    CHECK(mul(a, b).values() == std::vector<double>{3, 10});
    CHECK(scale(a, -2.0).values() == std::vector<double>{-2, -4});
    CHECK_THROWS_AS(add(a, Tensor::zeros({3})), DimensionError);

    Tensor s = sigmoid(Tensor::from_values({3}, {0, 100, -100}));
    CHECK(s.values()[0] == 0.5);
    CHECK(s.values()[1] == doctest::Approx(1.0));
    CHECK(s.values()[2] == doctest::Approx(0.0));
    CHECK(stam::tanh(Tensor::scalar(0.0)).scalar_value() == 0.0);
}

TEST_CASE("layer_norm standardizes then applies the affine map") {
    Tensor x = Tensor::from_values({4}, {1, 2, 3, 4});
    Tensor gain = Tensor::constant({4}, 2.0);
    Tensor bias = Tensor::constant({4}, 1.0);
    Tensor y = layer_norm(x, gain, bias, 0.0);
    // mean 2.5, variance 1.25
    double inv = 1.0 / std::sqrt(1.25);
    for (int i = 0; i < 4; ++i) {
        double expected = 2.0 * (x.values()[i] - 2.5) * inv + 1.0;
        CHECK(y.values()[i] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("temporal_conv_full matches the explicit sum oracle") {
    SplitRng rng(105);
    int n = 3;
    int d = 2;
    Tensor kernel = random_tensor({n, d, d}, rng, -2.0, 2.0);
    Tensor clips = random_tensor({n, d}, rng, -2.0, 2.0);
    Tensor bias = random_tensor({d}, rng, -2.0, 2.0);
    Tensor out = temporal_conv_full(kernel, clips, bias);
    for (int c = 0; c < d; ++c) {
        double expected = bias.values()[c];
        for (int t = 0; t < n; ++t) {
            for (int j = 0; j < d; ++j) {
                expected += kernel.values()[(t * d + c) * d + j] * clips.values()[t * d + j];
            }
        }
        CHECK(std::abs(out.values()[c] - expected) <= 1e-12);
    }
    CHECK_THROWS_AS(temporal_conv_full(kernel, random_tensor({n, 3}, rng), bias), DimensionError);
}
