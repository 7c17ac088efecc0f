#include "doctest.h"

#include <cmath>

#include "milsent/gradcheck.hpp"
#include "milsent/layers.hpp"
#include "support/plain_reference.hpp"
#include "support/test_utils.hpp"

using namespace milsent;
using namespace milsent::testing;

namespace {

void zero_all(ParamRegistry& params) {
    for (auto& [name, e] : params) e.tensor.fill(0.0);
}

} // namespace

TEST_SUITE("layers") {

TEST_CASE("embedding lookup contract") {
    ParamRegistry params;
    Rng rng(1);
    auto table = EmbeddingTable::create(params, "emb", 5, 3, /*pad=*/0, /*unk=*/1, rng);

    SUBCASE("pad row is zero") {
        Tensor out = table.embed({0});
        CHECK(out.values() == std::vector<Real>{0, 0, 0});
    }
    SUBCASE("repeated ids give identical rows") {
        Tensor out = table.embed({3, 3});
        CHECK(out.at(0, 0) == out.at(1, 0));
        CHECK(out.at(0, 2) == out.at(1, 2));
    }
    SUBCASE("non-pad rows are initialized inside the documented range") {
        for (std::size_t r = 1; r < 5; ++r)
            for (std::size_t c = 0; c < 3; ++c) {
                CHECK(table.weights().at(r, c) > -0.25);
                CHECK(table.weights().at(r, c) < 0.25);
            }
    }
    SUBCASE("gradient reaches only looked-up rows") {
        Tape::active().clear();
        params.zero_grad();
        backward(sum(table.embed({2})));
        const auto& g = table.weights().grad();
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(g[r * 3 + c] == (r == 2 ? 1.0 : 0.0));
    }
    SUBCASE("out-of-range id names the offending position") {
        CHECK_THROWS_WITH_AS(table.embed({1, 9}), doctest::Contains("position 1"), DataError);
    }
    SUBCASE("set_row ignores the pad row and rejects bad dims") {
        table.set_row(0, {1, 2, 3});
        Tensor out = table.embed({0});
        CHECK(out.values() == std::vector<Real>{0, 0, 0});
        CHECK_THROWS_AS(table.set_row(2, {1, 2}), DimensionError);
    }
}

TEST_CASE("lstm step algebraic identities") {
    ParamRegistry params;
    Rng rng(2);
    auto cell = LstmCell::create(params, "cell", 3, 2, rng);

    SUBCASE("zero weights and state give zero h and c") {
        zero_all(params);
        Tensor x = Tensor::from_values({1, 3}, {5, -1, 2});
        auto [h, c] = cell.step(Tensor::zeros({1, 2}), Tensor::zeros({1, 2}), x);
        CHECK(h.values() == std::vector<Real>{0, 0});
        CHECK(c.values() == std::vector<Real>{0, 0});
    }
    SUBCASE("c_prev = 0 forces c = i*g regardless of forget gate") {
        Rng data_rng(3);
        Tensor x = random_tensor({1, 3}, data_rng);
        Tensor h0 = random_tensor({1, 2}, data_rng);
        auto [h, c] = cell.step(h0, Tensor::zeros({1, 2}), x);
        // recompute i*g directly
        auto gate = [&](const char* w, const char* u, const char* b) {
            return add(add(matmul(x, params.get(std::string("cell.") + w)),
                           matmul(h0, params.get(std::string("cell.") + u))),
                       params.get(std::string("cell.") + b));
        };
        NoGradGuard ng;
        Tensor ig = mul(sigmoid(gate("w_i", "u_i", "b_i")), tanh(gate("w_g", "u_g", "b_g")));
        for (std::size_t j = 0; j < 2; ++j) CHECK(c.at(0, j) == doctest::Approx(ig.at(0, j)));
    }
    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(cell.step(Tensor::zeros({1, 2}), Tensor::zeros({1, 2}),
                                  Tensor::zeros({1, 4})),
                        DimensionError);
    }
    SUBCASE("single step gradient matches finite differences") {
        Rng data_rng(4);
        Tensor x = random_tensor({1, 3}, data_rng);
        auto loss = [&] {
            auto [h, c] = cell.step(Tensor::zeros({1, 2}), Tensor::zeros({1, 2}), x);
            return sum_squares(h);
        };
        auto report = grad_check(loss, params, 1e-5);
        CHECK(report.worst < 1e-4);
    }
}

TEST_CASE("run_lstm scan semantics") {
    ParamRegistry params;
    Rng rng(5);
    auto cell = LstmCell::create(params, "cell", 2, 3, rng);

    SUBCASE("n=1 equals a single step from zero state") {
        Tensor X = Tensor::from_values({1, 2}, {0.3, -0.4});
        Tensor H = cell.run(X);
        auto [h, c] = cell.step(Tensor::zeros({1, 3}), Tensor::zeros({1, 3}), X);
        CHECK(H.values() == h.values());
    }
    SUBCASE("zero-weight cell gives all-zero states") {
        zero_all(params);
        Rng data_rng(6);
        Tensor H = cell.run(random_tensor({4, 2}, data_rng));
        for (Real v : H.values()) CHECK(v == 0.0);
    }
    SUBCASE("matches an independent plain-double unroll on 3 tokens") {
        Rng data_rng(7);
        Tensor X = random_tensor({3, 2}, data_rng);
        Tensor H = cell.run(X);

        auto plain = PlainLstm::from(params, "cell", 2, 3);
        std::vector<double> h(3, 0.0), c(3, 0.0);
        for (std::size_t t = 0; t < 3; ++t) {
            std::vector<double> x = {X.at(t, 0), X.at(t, 1)};
            plain.step(x, h, c);
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(H.at(t, j) == doctest::Approx(h[j]).epsilon(1e-12));
        }
    }
    SUBCASE("hidden states stay inside the tanh*sigmoid range") {
        Rng data_rng(8);
        Tensor H = cell.run(random_tensor({6, 2}, data_rng, -10.0, 10.0));
        for (Real v : H.values()) CHECK(std::abs(v) <= 1.0);
    }
}

TEST_CASE("bilstm stack") {
    SUBCASE("L=1 with zero backward cell concatenates forward states and zeros") {
        ParamRegistry params;
        Rng rng(9);
        auto stack = BiLstmStack::create(params, "stack", 1, 4, rng);
        // zero out the backward direction only
        for (auto& [name, e] : params)
            if (name.find(".bwd.") != std::string::npos) e.tensor.fill(0.0);

        auto fwd = LstmCell::create(params, "probe", 4, 2, rng);
        // copy forward weights into the probe cell
        for (const char* g : {"w_i", "u_i", "b_i", "w_f", "u_f", "b_f", "w_g", "u_g", "b_g",
                              "w_o", "u_o", "b_o"})
            params.get(std::string("probe.") + g).values() =
                params.get(std::string("stack.0.fwd.") + g).values();

        Rng data_rng(10), drop_rng(11);
        Tensor X = random_tensor({3, 4}, data_rng);
        Tensor H = stack.run(X, 0.0, false, drop_rng);
        Tensor F = fwd.run(X);
        CHECK(H.shape() == Shape{3, 4});
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(H.at(i, 0) == F.at(i, 0));
            CHECK(H.at(i, 1) == F.at(i, 1));
            CHECK(H.at(i, 2) == 0.0);
            CHECK(H.at(i, 3) == 0.0);
        }
    }
    SUBCASE("palindromic input with tied directions gives mirror-symmetric halves") {
        ParamRegistry params;
        Rng rng(12);
        auto stack = BiLstmStack::create(params, "stack", 1, 4, rng);
        // tie backward weights to forward weights
        for (const char* g : {"w_i", "u_i", "b_i", "w_f", "u_f", "b_f", "w_g", "u_g", "b_g",
                              "w_o", "u_o", "b_o"})
            params.get(std::string("stack.0.bwd.") + g).values() =
                params.get(std::string("stack.0.fwd.") + g).values();

        Rng data_rng(13), drop_rng(14);
        Tensor mid = random_tensor({1, 4}, data_rng);
        Tensor edge = random_tensor({1, 4}, data_rng);
        Tensor X = stack_rows({edge, mid, edge}); // palindrome
        Tensor H = stack.run(X, 0.0, false, drop_rng);
        // forward half at i must equal backward half at n-1-i
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(H.at(i, j) == doctest::Approx(H.at(2 - i, 2 + j)).epsilon(1e-12));
    }
    SUBCASE("output shape is n x d for any depth") {
        for (std::size_t L : {1, 2, 3}) {
            ParamRegistry params;
            Rng rng(15);
            auto stack = BiLstmStack::create(params, "stack", L, 6, rng);
            Rng data_rng(16), drop_rng(17);
            Tensor H = stack.run(random_tensor({5, 6}, data_rng), 0.0, false, drop_rng);
            CHECK(H.shape() == Shape{5, 6});
        }
    }
    SUBCASE("odd dimension is rejected") {
        ParamRegistry params;
        Rng rng(18);
        CHECK_THROWS_AS(BiLstmStack::create(params, "stack", 1, 5, rng), ConfigError);
    }
    SUBCASE("L=3 gradient check on 4 tokens") {
        ParamRegistry params;
        Rng rng(19);
        auto stack = BiLstmStack::create(params, "stack", 3, 4, rng);
        Rng data_rng(20);
        Tensor X = random_tensor({4, 4}, data_rng);
        Rng drop_rng(21);
        auto loss = [&] { return sum_squares(stack.run(X, 0.0, false, drop_rng)); };
        auto report = grad_check(loss, params, 1e-5);
        CHECK(report.worst < 1e-4);
    }
}

TEST_CASE("attention head") {
    SUBCASE("zero scores give uniform weights") {
        ParamRegistry params;
        Rng rng(22);
        auto head = AttentionHead::create(params, "att", 3, rng);
        zero_all(params);
        Rng data_rng(23);
        Tensor alpha = head.attend(random_tensor({4, 3}, data_rng));
        for (Real v : alpha.values()) CHECK(v == doctest::Approx(0.25));
    }
    SUBCASE("single token gets weight 1") {
        ParamRegistry params;
        Rng rng(24);
        auto head = AttentionHead::create(params, "att", 3, rng);
        Rng data_rng(25);
        Tensor alpha = head.attend(random_tensor({1, 3}, data_rng));
        CHECK(alpha.values() == std::vector<Real>{1.0});
    }
    SUBCASE("2-token d=2 case matches direct evaluation") {
        ParamRegistry params;
        Rng rng(26);
        auto head = AttentionHead::create(params, "att", 2, rng);
        params.get("att.W").values() = {0.5, -0.3, 0.2, 0.7};
        params.get("att.b").values() = {0.1, -0.2};
        params.get("att.u").values() = {1.0, 0.5};
        Tensor H = Tensor::from_values({2, 2}, {0.3, -0.6, 0.9, 0.4});
        Tensor alpha = head.attend(H);

        // direct evaluation: s_i = u . tanh(W h_i + b), alpha = softmax(s)
        double s[2];
        for (int i = 0; i < 2; ++i) {
            const double h0 = H.at(i, 0), h1 = H.at(i, 1);
            const double m0 = std::tanh(0.5 * h0 + (-0.3) * h1 + 0.1);
            const double m1 = std::tanh(0.2 * h0 + 0.7 * h1 + (-0.2));
            s[i] = 1.0 * m0 + 0.5 * m1;
        }
        const double mx = std::max(s[0], s[1]);
        const double e0 = std::exp(s[0] - mx), e1 = std::exp(s[1] - mx);
        CHECK(alpha.at(0) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
        CHECK(alpha.at(1) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
    }
    SUBCASE("weights land on the simplex for arbitrary finite inputs") {
        ParamRegistry params;
        Rng rng(27);
        auto head = AttentionHead::create(params, "att", 4, rng);
        Rng data_rng(28);
        for (int iter = 0; iter < 100; ++iter) {
            const std::size_t n = 1 + data_rng.below(8);
            Tensor alpha = head.attend(random_tensor({n, 4}, data_rng, -50.0, 50.0));
            double total = 0.0;
            for (Real v : alpha.values()) {
                CHECK(v >= 0.0);
                total += v;
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
    }
    SUBCASE("pad positions get exactly zero weight") {
        ParamRegistry params;
        Rng rng(29);
        auto head = AttentionHead::create(params, "att", 2, rng);
        Rng data_rng(30);
        Tensor H = random_tensor({5, 2}, data_rng);
        Tensor alpha = head.attend(H, 3);
        CHECK(alpha.at(3) == 0.0);
        CHECK(alpha.at(4) == 0.0);
        double total = 0.0;
        for (Real v : alpha.values()) total += v;
        CHECK(std::abs(total - 1.0) < 1e-9);
    }
}

TEST_CASE("linear layer") {
    ParamRegistry params;
    Rng rng(31);
    auto lin = Linear::create(params, "lin", 2, 2, rng);

    SUBCASE("identity weight passes input through") {
        params.get("lin.W").values() = {1, 0, 0, 1};
        Tensor x = Tensor::from_values({1, 2}, {3.5, -1.25});
        CHECK(lin.apply(x).values() == x.values());
    }
    SUBCASE("zero input returns the bias") {
        params.get("lin.b").values() = {0.25, -0.75};
        Tensor y = lin.apply(Tensor::zeros({1, 2}));
        CHECK(y.values() == std::vector<Real>{0.25, -0.75});
    }
    SUBCASE("gradient check") {
        Rng data_rng(32);
        Tensor x = random_tensor({3, 2}, data_rng);
        auto report = grad_check([&] { return sum_squares(lin.apply(x)); }, params, 1e-5);
        CHECK(report.worst < 1e-6);
    }
}

TEST_CASE("layer ops are deterministic with dropout disabled") {
    ParamRegistry params;
    Rng rng(33);
    auto stack = BiLstmStack::create(params, "stack", 2, 4, rng);
    Rng data_rng(34);
    Tensor X = random_tensor({4, 4}, data_rng);
    Rng drop_a(35), drop_b(36);
    Tensor a = stack.run(X, 0.5, false, drop_a);
    Tensor b = stack.run(X, 0.5, false, drop_b);
    CHECK(a.values() == b.values());
}

} // TEST_SUITE
