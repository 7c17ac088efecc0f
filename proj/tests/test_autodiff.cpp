#include "doctest.h"

#include <cmath>

#include "milsent/gradcheck.hpp"
#include "milsent/registry.hpp"
#include "milsent/tensor.hpp"
#include "support/test_utils.hpp"

using namespace milsent;
using namespace milsent::testing;

namespace {

void clear_tape() { Tape::active().clear(); }

// runs loss_fn forward+backward once on a clean tape
Tensor run_backward(const std::function<Tensor()>& loss_fn) {
    clear_tape();
    Tensor loss = loss_fn();
    backward(loss);
    return loss;
}

} // namespace

TEST_SUITE("autodiff") {

TEST_CASE("backward on linear and constant losses") {
    Tensor w = Tensor::zeros({2, 2}, true);
    w.values() = {1, 2, 3, 4};

    SUBCASE("loss = sum(W) gives all-ones gradient") {
        run_backward([&] { return sum(w); });
        CHECK(w.grad() == std::vector<Real>{1, 1, 1, 1});
    }
    SUBCASE("loss independent of W gives zero gradient") {
        Tensor other = Tensor::zeros({2}, true);
        run_backward([&] { return sum(mul(other, other)); });
        CHECK(w.grad() == std::vector<Real>{0, 0, 0, 0});
    }
    SUBCASE("non-scalar backward is rejected") {
        clear_tape();
        Tensor y = add(w, w);
        CHECK_THROWS_AS(backward(y), ContractError);
    }
    SUBCASE("gradients accumulate across backward calls until zeroed") {
        run_backward([&] { return sum(w); });
        clear_tape();
        Tensor loss = sum(w);
        backward(loss);
        CHECK(w.grad() == std::vector<Real>{2, 2, 2, 2});
        w.zero_grad();
        CHECK(w.grad() == std::vector<Real>{0, 0, 0, 0});
    }
}

TEST_CASE("matmul gradient matches finite differences on random 3x4 * 4x2") {
    Rng rng(42);
    Tensor a = random_tensor({3, 4}, rng, -1.0, 1.0, true);
    Tensor b = random_tensor({4, 2}, rng, -1.0, 1.0, true);
    auto loss_fn = [&] { return sum(matmul(a, b)); };
    run_backward(loss_fn);

    auto fd = [&] { return loss_fn().item(); };
    auto na = numeric_grad(fd, a);
    auto nb = numeric_grad(fd, b);
    CHECK(max_rel_err(std::vector<double>(a.grad().begin(), a.grad().end()), na) < 1e-6);
    CHECK(max_rel_err(std::vector<double>(b.grad().begin(), b.grad().end()), nb) < 1e-6);
}

TEST_CASE("tanh gradient at 0.7 matches finite differences") {
    Tensor x = Tensor::zeros({1}, true);
    x.values()[0] = 0.7;
    run_backward([&] { return sum(tanh(x)); });
    auto fd = numeric_grad([&] { return std::tanh(x.values()[0]); }, x, 1e-6);
    CHECK(rel_err(x.grad()[0], fd[0]) < 1e-8);
}

TEST_CASE("every primitive passes finite differences on randomized shapes") {
    Rng rng(123);
    auto check_input_grads = [&](const std::function<Tensor()>& loss_fn,
                                 std::vector<Tensor> inputs, double tol) {
        for (Tensor& in : inputs) in.zero_grad();
        run_backward(loss_fn);
        auto fd = [&] { return loss_fn().item(); };
        for (Tensor& in : inputs) {
            auto numeric = numeric_grad(fd, in);
            auto analytic = std::vector<double>(in.grad().begin(), in.grad().end());
            CHECK(max_rel_err(analytic, numeric) < tol);
        }
    };

    for (int iter = 0; iter < 10; ++iter) {
        const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8), n = 1 + rng.below(8);

        SUBCASE("") {} // keep doctest happy about loop subcases
        {
            Tensor a = random_tensor({m, k}, rng, -1, 1, true);
            Tensor b = random_tensor({k, n}, rng, -1, 1, true);
            check_input_grads([&] { return sum_squares(matmul(a, b)); }, {a, b}, 1e-6);
        }
        {
            Tensor a = random_tensor({m, n}, rng, -1, 1, true);
            Tensor b = random_tensor({m, n}, rng, -1, 1, true);
            check_input_grads([&] { return sum(mul(add(a, b), b)); }, {a, b}, 1e-6);
        }
        {
            Tensor a = random_tensor({m, n}, rng, -1, 1, true);
            Tensor v = random_tensor({n}, rng, -1, 1, true);
            check_input_grads([&] { return sum_squares(add(a, v)); }, {a, v}, 1e-6);
        }
        {
            Tensor a = random_tensor({m, n}, rng, -2, 2, true);
            check_input_grads([&] { return sum(sigmoid(a)); }, {a}, 1e-6);
            check_input_grads([&] { return sum(tanh(a)); }, {a}, 1e-6);
            check_input_grads([&] { return sum_squares(transpose(a)); }, {a}, 1e-6);
        }
        {
            // keep relu inputs away from the kink
            Tensor a = random_tensor({m, n}, rng, 0.1, 2.0, true);
            if (rng.bernoulli(0.5))
                for (auto& v : a.values()) v = -v;
            check_input_grads([&] { return sum_squares(relu(a)); }, {a}, 1e-6);
        }
        {
            Tensor a = random_tensor({n}, rng, -3, 3, true);
            const std::size_t pick_at = rng.below(n);
            check_input_grads([&] { return sum_squares(softmax(a)); }, {a}, 1e-5);
            check_input_grads([&] { return pick(softmax(a), pick_at); }, {a}, 1e-5);
        }
        {
            Tensor a = random_tensor({m, n}, rng, -3, 3, true);
            check_input_grads([&] { return sum_squares(softmax_rows(a)); }, {a}, 1e-5);
        }
        {
            Tensor p = random_tensor({n}, rng, 0.05, 1.0, true);
            check_input_grads([&] { return sum(log_clamped(p)); }, {p}, 1e-6);
        }
        {
            Tensor a = random_tensor({m, n}, rng, -1, 1, true);
            Tensor b = random_tensor({m, k}, rng, -1, 1, true);
            check_input_grads([&] { return sum_squares(concat_cols(a, b)); }, {a, b}, 1e-6);
            check_input_grads([&] { return sum_squares(row(a, m - 1)); }, {a}, 1e-6);
            check_input_grads([&] { return sum_squares(reshape(a, {n, m})); }, {a}, 1e-6);
        }
        {
            Tensor table = random_tensor({4, k}, rng, -1, 1, true);
            std::vector<int> ids;
            for (std::size_t i = 0; i < m; ++i) ids.push_back(static_cast<int>(rng.below(4)));
            check_input_grads([&] { return sum_squares(gather_rows(table, ids)); }, {table}, 1e-6);
        }
    }
}

TEST_CASE("primitives pass finite differences in f32 mode at 1e-4") {
    PrecisionGuard guard(Precision::f32);
    Rng rng(77);
    const double eps = 5e-3; // balances truncation against binary32 rounding
    for (int iter = 0; iter < 5; ++iter) {
        const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8);
        Tensor a = random_tensor({m, k}, rng, -1, 1, true);
        Tensor b = random_tensor({k, m}, rng, -1, 1, true);
        auto loss_fn = [&] { return sum(tanh(matmul(a, b))); };
        clear_tape();
        Tensor loss = loss_fn();
        backward(loss);
        auto fd = [&] { return loss_fn().item(); };
        auto numeric = numeric_grad(fd, a, eps);
        double worst = 0.0;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double denom = std::max({std::abs(a.grad()[i]), std::abs(numeric[i]), 1.0});
            worst = std::max(worst, std::abs(a.grad()[i] - numeric[i]) / denom);
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("backward linearity: grad(a*f + b*g) = a*grad(f) + b*grad(g)") {
    Rng rng(9);
    for (int iter = 0; iter < 20; ++iter) {
        Tensor w = random_tensor({3, 3}, rng, -1, 1, true);
        Tensor u = random_tensor({3, 3}, rng, -1, 1, true);
        auto f = [&] { return sum(tanh(matmul(w, u))); };
        auto g = [&] { return sum_squares(sigmoid(add(w, u))); };
        const double ca = rng.uniform(-2, 2), cb = rng.uniform(-2, 2);

        run_backward(f);
        std::vector<Real> gf = w.grad();
        w.zero_grad();
        u.zero_grad();
        run_backward(g);
        std::vector<Real> gg = w.grad();
        w.zero_grad();
        u.zero_grad();
        run_backward([&] { return add(affine(f(), ca, 0.0), affine(g(), cb, 0.0)); });
        for (std::size_t i = 0; i < gf.size(); ++i)
            CHECK(std::abs(w.grad()[i] - (ca * gf[i] + cb * gg[i])) < 1e-9);
        w.zero_grad();
        u.zero_grad();
    }
}

TEST_CASE("zero_grad then backward is bit-identical across repeated calls") {
    Rng rng(5);
    Tensor w = random_tensor({4, 4}, rng, -1, 1, true);
    auto loss_fn = [&] { return sum(sigmoid(matmul(w, transpose(w)))); };

    run_backward(loss_fn);
    std::vector<Real> first = w.grad();
    for (int i = 0; i < 3; ++i) {
        w.zero_grad();
        run_backward(loss_fn);
        CHECK(w.grad() == first);
    }
}

TEST_CASE("grad_check on known scalar derivatives") {
    SUBCASE("quadratic f(w)=w^2 at w=3") {
        ParamRegistry params;
        Tensor w = params.add("w", Tensor::from_values({1}, {3.0}));
        auto report = grad_check([&] { return sum_squares(w); }, params, 1e-5);
        CHECK(report.max_rel_error.at("w") < 1e-9);
        // analytic derivative is 6
        Tape::active().clear();
        params.zero_grad();
        Tensor loss = sum_squares(w);
        backward(loss);
        CHECK(w.grad()[0] == doctest::Approx(6.0));
    }
    SUBCASE("sigmoid at 0 has slope 0.25") {
        ParamRegistry params;
        Tensor w = params.add("w", Tensor::from_values({1}, {0.0}));
        auto report = grad_check([&] { return sum(sigmoid(w)); }, params, 1e-5);
        CHECK(report.worst < 1e-9);
        Tape::active().clear();
        params.zero_grad();
        backward(sum(sigmoid(w)));
        CHECK(w.grad()[0] == doctest::Approx(0.25));
    }
}

TEST_CASE("detach blocks gradient flow") {
    Tensor w = Tensor::from_values({2}, {1.0, 2.0}, true);
    run_backward([&] { return sum(mul(detach(w), w)); });
    // d/dw of detach(w)*w is detach(w) only
    CHECK(w.grad() == std::vector<Real>{1.0, 2.0});
}

TEST_CASE("no-grad mode records nothing") {
    Tensor w = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tape::active().clear();
    {
        NoGradGuard ng;
        Tensor y = sum(mul(w, w));
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(Tape::active().size() == 0);
}

TEST_CASE("param registry contract") {
    ParamRegistry params;
    params.add("b.two", Tensor::zeros({2}));
    params.add("a.one", Tensor::zeros({3}));
    CHECK_THROWS_AS(params.add("a.one", Tensor::zeros({3})), ContractError);
    // lexicographic iteration
    CHECK(params.names() == std::vector<std::string>{"a.one", "b.two"});
    params.set_trainable("a.one", false);
    CHECK(params.trainable_names() == std::vector<std::string>{"b.two"});
    CHECK(params.value_count() == 5);

    auto snap = params.snapshot();
    params.get("b.two").fill(9.0);
    params.restore(snap);
    CHECK(params.get("b.two").values() == std::vector<Real>{0, 0});
}

} // TEST_SUITE
