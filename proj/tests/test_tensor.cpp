#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pesa/tensor.hpp"
#include "test_util.hpp"

using namespace pesa;
using testutil::finite_diff_check;
using testutil::random_tensor;

namespace {

Tensor sine_field(std::size_t n) {
    std::vector<double> data(n * n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            data[r * n + c] = std::sin(2.0 * std::numbers::pi * c / n);
    return Tensor::from({1, n, n}, std::move(data));
}

Tensor laplacian_kernel_1ch(double h) {
    double ih2 = 1.0 / (h * h);
    std::vector<double> k(9, 0.0);
    k[1] = ih2;
    k[3] = ih2;
    k[4] = -4.0 * ih2;
    k[5] = ih2;
    k[7] = ih2;
    return Tensor::from({1, 1, 3, 3}, std::move(k));
}

}  // namespace

TEST_CASE("conv2d_periodic identity kernel reproduces the input") {
    Rng rng(1);
    Tensor x = testutil::random_tensor({1, 6, 6}, rng);
    std::vector<double> k(9, 0.0);
    k[4] = 1.0;
    Tensor kernel = Tensor::from({1, 1, 3, 3}, k);
    Tensor bias = Tensor::zeros({1});
    Tensor y = conv2d_periodic(x, kernel, bias);
    CHECK(testutil::max_abs_diff(y.data(), x.data()) == 0.0);
}

TEST_CASE("conv2d_periodic zero-sum kernel annihilates constant fields") {
    Tensor x = Tensor::full({1, 8, 8}, 5.0);
    // Arbitrary kernel whose entries sum to zero.
    Tensor kernel = Tensor::from({1, 1, 3, 3}, {1, -2, 1, 3, 0, -3, -4, 4, 0});
    Tensor y = conv2d_periodic(x, kernel, Tensor::zeros({1}));
    for (double v : y.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("conv2d_periodic Laplacian stencil matches -(2pi)^2 sin to O(h^2)") {
    const std::size_t n = 64;
    const double h = 1.0 / n;
    Tensor x = sine_field(n);
    Tensor y = conv2d_periodic(x, laplacian_kernel_1ch(h), Tensor::zeros({1}));
    const double factor = -4.0 * std::numbers::pi * std::numbers::pi;
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        worst = std::max(worst, std::abs(y.data()[i] - factor * x.data()[i]));
    // O(h^2) truncation: (2pi)^4/12 * h^2 ~ 0.032 at n=64; allow slack.
    CHECK(worst < 0.05);
    CHECK(worst > 1e-6);  // not suspiciously exact
}

TEST_CASE("conv2d_periodic is linear in the input (zero bias)") {
    Rng rng(2);
    Tensor x = testutil::random_tensor({2, 5, 5}, rng);
    Tensor y = testutil::random_tensor({2, 5, 5}, rng);
    Tensor kernel = testutil::random_tensor({3, 2, 3, 3}, rng);
    Tensor bias = Tensor::zeros({3});
    double a = 1.7, b = -0.3;
    Tensor lhs = conv2d_periodic(add(scale(x, a), scale(y, b)), kernel, bias);
    Tensor rhs = add(scale(conv2d_periodic(x, kernel, bias), a),
                     scale(conv2d_periodic(y, kernel, bias), b));
    CHECK(testutil::max_abs_diff(lhs.data(), rhs.data()) < 1e-10);
}

TEST_CASE("conv2d_periodic rejects shape mismatches") {
    Tensor x = Tensor::zeros({2, 4, 4});
    CHECK_THROWS_AS(conv2d_periodic(x, Tensor::zeros({1, 3, 3, 3}), Tensor::zeros({1})),
                    TensorError);
    CHECK_THROWS_AS(conv2d_periodic(x, Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1})),
                    TensorError);  // even kernel
    CHECK_THROWS_AS(conv2d_periodic(x, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({2})),
                    TensorError);  // bias length
}

TEST_CASE("backward: loss = x^2 at x=3 gives grad 6") {
    Tensor x = Tensor::scalar(3.0).set_requires_grad(true);
    Tensor loss = mul(x, x);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward errors on non-scalar loss") {
    Tensor x = Tensor::zeros({2, 2});
    x.set_requires_grad(true);
    Tensor y = add(x, x);
    CHECK_THROWS_AS(backward(y), TensorError);
}

TEST_CASE("backward accumulates: second call without zero_grad doubles grads") {
    Tensor x = Tensor::scalar(3.0).set_requires_grad(true);
    Tensor loss = mul(x, x);
    backward(loss);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(12.0).epsilon(1e-12));
    x.zero_grad();
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("conv kernel gradient matches finite differences (spec oracle)") {
    Rng rng(3);
    Tensor u = testutil::random_tensor({2, 6, 6}, rng);
    Tensor k = testutil::random_tensor({3, 2, 3, 3}, rng);
    Tensor b = testutil::random_tensor({3}, rng);
    Tensor t = testutil::random_tensor({3, 6, 6}, rng);
    k.set_requires_grad(true);
    b.set_requires_grad(true);

    auto loss_value = [&] { return mse(conv2d_periodic(u, k, b), t).item(); };
    backward(mse(conv2d_periodic(u, k, b), t));
    ParamSet params = {{"k", k}, {"b", b}};
    auto res = finite_diff_check(loss_value, params);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("gradients of elementwise/reduction/activation ops match finite differences") {
    Rng rng(4);
    Tensor x = testutil::random_tensor({3, 4}, rng);
    Tensor y = testutil::random_tensor({3, 4}, rng);
    x.set_requires_grad(true);
    y.set_requires_grad(true);

    auto forward = [&] {
        Tensor z = add(mul(sigmoid(x), relu(y)), sub(scale(x, 0.5), y));
        return add(mean(z), mse(x, y));
    };
    backward(forward());
    ParamSet params = {{"x", x}, {"y", y}};
    auto res = finite_diff_check([&] { return forward().item(); }, params);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("linear and channel pooling gradients match finite differences") {
    Rng rng(5);
    Tensor w = testutil::random_tensor({3, 4}, rng);
    Tensor v = testutil::random_tensor({4}, rng);
    Tensor b = testutil::random_tensor({3}, rng);
    Tensor field = testutil::random_tensor({3, 4, 4}, rng);
    Tensor coeff = testutil::random_tensor({3}, rng);
    for (Tensor* t : {&w, &v, &b, &field, &coeff}) t->set_requires_grad(true);

    auto forward = [&] {
        Tensor pooled = add(channel_avg(field), channel_max(field));
        Tensor lin = linear(w, v, add(b, pooled));
        return sum(add(scale_channels(field, coeff), scale_channels(field, lin)));
    };
    backward(forward());
    ParamSet params = {{"w", w}, {"v", v}, {"b", b}, {"field", field}, {"coeff", coeff}};
    auto res = finite_diff_check([&] { return forward().item(); }, params);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("mse hand examples") {
    Tensor a = Tensor::from({2}, {0.0, 2.0});
    Tensor b = Tensor::from({2}, {1.0, 3.0});
    CHECK(mse(a, b).item() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mse(a, a).item() == 0.0);
}

TEST_CASE("NoGradGuard suppresses tape recording") {
    Tensor x = Tensor::scalar(2.0).set_requires_grad(true);
    Tensor loss;
    {
        NoGradGuard guard;
        loss = mul(x, x);
    }
    CHECK_FALSE(loss.requires_grad());
    backward(mul(x, x));
    CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("mutable_data is restricted to leaf tensors") {
    Tensor x = Tensor::scalar(1.0).set_requires_grad(true);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(y.mutable_data(), TensorError);
    CHECK_NOTHROW(x.mutable_data());
}

TEST_CASE("all_finite flags NaN and infinity") {
    Tensor x = Tensor::from({2}, {1.0, 2.0});
    CHECK(all_finite(x));
    x.mutable_data()[1] = std::nan("");
    CHECK_FALSE(all_finite(x));
    x.mutable_data()[1] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(all_finite(x));
}

TEST_CASE("f32 precision mode rounds op results through single precision") {
    Tensor a = Tensor::scalar(0.1);
    Tensor b = Tensor::scalar(0.2);
    set_precision(Precision::f32);
    double got = add(a, b).item();
    set_precision(Precision::f64);
    CHECK(got == static_cast<double>(static_cast<float>(0.1 + 0.2)));
    CHECK(add(a, b).item() == 0.1 + 0.2);
}
