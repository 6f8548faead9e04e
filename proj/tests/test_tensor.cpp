#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vjscc/gradcheck.hpp"
#include "vjscc/rng.hpp"
#include "vjscc/tensor.hpp"

using namespace vjscc;

namespace {

Tensor leaf(std::vector<size_t> shape, std::vector<double> data) {
    Tensor t = Tensor::from_data(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    return t;
}

Tensor random_leaf(std::vector<size_t> shape, Rng& rng) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (auto& v : data) v = rng.normal();
    return leaf(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("matmul identity and hand cases") {
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor b = Tensor::from_data({2, 2}, {3, 4, 5, 6});
    Tensor c = matmul(eye, b);
    CHECK(c.values() == std::vector<double>{3, 4, 5, 6});

    Tensor row = Tensor::from_data({1, 2}, {1, 2});
    Tensor col = Tensor::from_data({2, 1}, {3, 4});
    CHECK(matmul(row, col).item() == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("matmul gradient matches central finite differences") {
    Rng rng(7);
    const double err = max_rel_err_for(
        [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
        {random_leaf({4, 5}, rng), random_leaf({5, 3}, rng)}, 11);
    CHECK(err < 1e-6);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& err) {
        const std::string msg = err.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("softmax symmetry, stability, normalization") {
    Tensor t = softmax(Tensor::from_data({3}, {0, 0, 0}), 0);
    for (double v : t.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

    Tensor s = softmax(Tensor::from_data({2}, {1000, 0}), 0);
    CHECK(s.values()[0] == doctest::Approx(1.0));
    CHECK(s.values()[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(s.values()[0]));

    Rng rng(3);
    Tensor x = random_leaf({3, 4}, rng);
    Tensor y = softmax(x, 1);
    for (size_t r = 0; r < 3; ++r) {
        double sum = 0.0;
        for (size_t c = 0; c < 4; ++c) {
            const double v = y.values()[r * 4 + c];
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("layer_norm trivial cases") {
    Tensor gain = Tensor::full({4}, 1.0);
    Tensor bias = Tensor::zeros({4});
    Tensor y = layer_norm(Tensor::full({4}, 5.0), gain, bias, 1e-5);
    for (double v : y.values()) CHECK(v == doctest::Approx(0.0));

    Tensor g2 = Tensor::full({2}, 1.0);
    Tensor b2 = Tensor::zeros({2});
    Tensor z = layer_norm(Tensor::from_data({2}, {1, 3}), g2, b2, 1e-5);
    CHECK(z.values()[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(z.values()[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm gradient vs finite differences") {
    Rng rng(17);
    const double err = max_rel_err_for(
        [](const std::vector<Tensor>& in) { return layer_norm(in[0], in[1], in[2], 1e-5); },
        {random_leaf({3, 6}, rng), random_leaf({6}, rng), random_leaf({6}, rng)}, 23);
    CHECK(err < 1e-5);
}

TEST_CASE("gather and scatter_zeros follow index semantics") {
    Tensor x = Tensor::from_data({3}, {10, 20, 30});
    CHECK(gather(x, {2, 0}).values() == std::vector<double>{30, 10});

    Tensor src = Tensor::from_data({2}, {7, 8});
    CHECK(scatter_zeros(src, {1, 3}, 4).values() == std::vector<double>{0, 7, 0, 8});

    CHECK_THROWS_AS(gather(x, {5}), DimensionError);
    CHECK_THROWS_AS(scatter_zeros(src, {1, 1}, 4), DimensionError);
}

TEST_CASE("reshape round trip is the identity") {
    Rng rng(5);
    Tensor x = random_leaf({3, 4}, rng);
    Tensor y = reshape(reshape(x, {2, 6}), {3, 4});
    CHECK(y.values() == x.values());
    CHECK(y.shape() == x.shape());
}

TEST_CASE("backward on sums and squares") {
    Tensor x = leaf({2, 3}, {1, 2, 3, 4, 5, 6});
    backward(sum_all(x));
    CHECK(x.grad() == std::vector<double>(6, 1.0));

    Tensor z = leaf({2}, {1, 2});
    backward(sum_all(mul(z, z)));
    CHECK(z.grad() == std::vector<double>{2, 4});
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = leaf({2}, {1, 2});
    CHECK_THROWS_AS(backward(add(x, x)), DimensionError);
}

TEST_CASE("backward twice on the same graph is bit-identical") {
    Rng rng(29);
    Tensor x = random_leaf({4, 4}, rng);
    Tensor w = random_leaf({4, 4}, rng);
    Tensor loss = mean_all(gelu(matmul(x, w)));
    backward(loss);
    const auto gx = x.grad();
    const auto gw = w.grad();
    backward(loss);
    CHECK(x.grad() == gx);
    CHECK(w.grad() == gw);
}

TEST_CASE("gradients of unused tensors stay zero") {
    Tensor x = leaf({2}, {1, 2});
    Tensor unused = leaf({2}, {3, 4});
    backward(sum_all(x));
    CHECK(unused.grad() == std::vector<double>{0, 0});
}

TEST_CASE("detach blocks gradient flow") {
    Tensor x = leaf({2}, {1, 2});
    Tensor y = mul(detach(x), x);  // d/dx should be detach(x) only
    backward(sum_all(y));
    CHECK(x.grad() == std::vector<double>{1, 2});
}

TEST_CASE("broadcast add matches explicit expansion") {
    Tensor a = Tensor::from_data({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor b = Tensor::from_data({2, 2}, {10, 20, 30, 40});
    Tensor c = add(a, b);
    CHECK(c.values() == std::vector<double>{11, 22, 33, 44, 15, 26, 37, 48});

    Tensor row = Tensor::from_data({2, 1}, {100, 200});
    Tensor d = mul(Tensor::from_data({2, 3}, {1, 1, 1, 1, 1, 1}), row);
    CHECK(d.values() == std::vector<double>{100, 100, 100, 200, 200, 200});
}

TEST_CASE("slice and concat are inverse along an axis") {
    Rng rng(31);
    Tensor x = random_leaf({2, 5, 3}, rng);
    Tensor left = slice(x, 1, 0, 2);
    Tensor right = slice(x, 1, 2, 5);
    Tensor glued = concat(left, right, 1);
    CHECK(glued.values() == x.values());
}

TEST_CASE("every primitive passes the finite-difference contract") {
    GradCheckReport report = check_primitives(/*seed=*/1234);
    for (const auto& e : report.entries) {
        INFO(e.name, " max_rel_err=", e.max_rel_err);
        CHECK(e.pass);
    }
}

TEST_CASE("corrupt hook makes the gradcheck harness fail") {
    GradCheckReport report = check_primitives(1234, 1e-4, /*corrupt_hook=*/true);
    CHECK_FALSE(report.all_pass());
}
