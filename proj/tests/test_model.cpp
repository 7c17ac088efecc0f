#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "milsent/checkpoint.hpp"
#include "milsent/gradcheck.hpp"
#include "milsent/model.hpp"
#include "milsent/training.hpp"
#include "support/plain_reference.hpp"
#include "support/test_utils.hpp"

using namespace milsent;
using namespace milsent::testing;

namespace {

ModelConfig small_config(ModelVariant variant = ModelVariant::standard, std::size_t n_cats = 2,
                         std::size_t dim = 4, std::size_t depth = 1) {
    ModelConfig cfg;
    cfg.num_categories = n_cats;
    cfg.dim = dim;
    cfg.depth = depth;
    cfg.variant = variant;
    cfg.dropout = 0.0;
    cfg.vocab_size = 8;
    return cfg;
}

std::vector<double> tensor_vec(const Tensor& t) {
    return {t.values().begin(), t.values().end()};
}

Tensor one_hot(std::size_t n, std::size_t k) {
    Tensor t = Tensor::zeros({n});
    t.values()[k] = 1.0;
    return t;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("zero parameters give 0.5 detections and uniform attention") {
    Model model(small_config(), 7);
    for (auto& [name, e] : model.params()) e.tensor.fill(0.0);
    NoGradGuard ng;
    AcdOutput out = model.forward_acd({2, 3, 4});
    for (const Tensor& yhat : out.detection) CHECK(yhat.item() == doctest::Approx(0.5));
    for (const Tensor& alpha : out.attention)
        for (Real v : alpha.values()) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("single-token sentence: attention 1, pooled state is that state") {
    Model model(small_config(), 11);
    NoGradGuard ng;
    AcdOutput out = model.forward_acd({5});
    for (const Tensor& alpha : out.attention) CHECK(alpha.values() == std::vector<Real>{1.0});
    // selection through the pool: alpha=[1] returns the row exactly
    Tensor pooled = attention_pool(out.hidden, out.attention[0]);
    CHECK(tensor_vec(pooled) == tensor_vec(row(out.hidden, 0)));
}

TEST_CASE("3-token detection branch matches direct evaluation") {
    ModelConfig cfg = small_config(ModelVariant::standard, 1, /*dim=*/2);
    Model model(cfg, 13);
    auto& p = model.params();
    const std::vector<int> tokens = {2, 3, 2};

    NoGradGuard ng;
    AcdOutput out = model.forward_acd(tokens);

    // direct evaluation of the embedding -> LSTM -> attention -> pooled
    // sigmoid pipeline on plain doubles
    const auto& emb = p.get("acd.embedding").values();
    std::vector<std::vector<double>> xs;
    for (int t : tokens)
        xs.push_back({emb[static_cast<std::size_t>(t) * 2], emb[static_cast<std::size_t>(t) * 2 + 1]});
    PlainLstm lstm = PlainLstm::from(p, "acd.lstm", 2, 2);
    std::vector<double> H = lstm.run(xs); // [3 x 2]

    const auto& W = p.get("acd.attention.0.W").values();
    const auto& b = p.get("acd.attention.0.b").values();
    const auto& u = p.get("acd.attention.0.u").values();
    std::vector<double> scores(3);
    for (std::size_t i = 0; i < 3; ++i) {
        const double m0 = std::tanh(W[0] * H[i * 2] + W[1] * H[i * 2 + 1] + b[0]);
        const double m1 = std::tanh(W[2] * H[i * 2] + W[3] * H[i * 2 + 1] + b[1]);
        scores[i] = u[0] * m0 + u[1] * m1;
    }
    const auto alpha = plain_softmax(scores);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(out.attention[0].at(i) == doctest::Approx(alpha[i]).epsilon(1e-12));

    double r0 = 0.0, r1 = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        r0 += alpha[i] * H[i * 2];
        r1 += alpha[i] * H[i * 2 + 1];
    }
    const auto& pw = p.get("acd.predict.0.W").values();
    const auto& pb = p.get("acd.predict.0.b").values();
    const double yhat = sigmoid_d(r0 * pw[0] + r1 * pw[1] + pb[0]);
    CHECK(out.detection[0].item() == doctest::Approx(yhat).epsilon(1e-12));
}

TEST_CASE("aggregation selection and convexity") {
    Rng rng(17);
    Tensor P = random_tensor({5, 3}, rng, -2.0, 2.0);

    SUBCASE("one-hot attention selects one word exactly") {
        for (std::size_t k = 0; k < 5; ++k) {
            Tensor alpha = one_hot(5, k);
            Tensor agg = aggregate_presoftmax(P, alpha);
            CHECK(agg.at(0) == P.at(k, 0));
            CHECK(agg.at(1) == P.at(k, 1));
            CHECK(agg.at(2) == P.at(k, 2));
            // p_j = softmax(p^k), bit-exact
            Tensor direct = softmax(reshape(row(P, k), {3}));
            CHECK(tensor_vec(aggregate_standard(P, alpha)) == tensor_vec(direct));
        }
    }
    SUBCASE("perturbing unselected words leaves the result unchanged") {
        Tensor alpha = one_hot(5, 2);
        Tensor before = aggregate_standard(P, alpha);
        Tensor P2 = P.clone_values();
        for (std::size_t i = 0; i < 5; ++i)
            if (i != 2)
                for (std::size_t c = 0; c < 3; ++c) P2.values()[i * 3 + c] += rng.uniform(-5, 5);
        CHECK(tensor_vec(aggregate_standard(P2, alpha)) == tensor_vec(before));
    }
    SUBCASE("uniform attention over identical rows is a fixed point") {
        Tensor v = random_tensor({1, 3}, rng);
        Tensor same = stack_rows({v, v, v, v});
        Tensor alpha = Tensor::full({4}, 0.25);
        Tensor expect = softmax(reshape(v, {3}));
        auto got = tensor_vec(aggregate_standard(same, alpha));
        auto want = tensor_vec(expect);
        for (std::size_t c = 0; c < 3; ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-12));
    }
    SUBCASE("pre-softmax aggregate stays inside the convex hull per class") {
        for (int iter = 0; iter < 50; ++iter) {
            Tensor scores = random_tensor({5}, rng, -3, 3);
            Tensor alpha = softmax(scores);
            Tensor agg = aggregate_presoftmax(P, alpha);
            for (std::size_t c = 0; c < 3; ++c) {
                double lo = P.at(0, c), hi = P.at(0, c);
                for (std::size_t i = 1; i < 5; ++i) {
                    lo = std::min(lo, P.at(i, c));
                    hi = std::max(hi, P.at(i, c));
                }
                CHECK(agg.at(c) >= lo - 1e-12);
                CHECK(agg.at(c) <= hi + 1e-12);
            }
        }
    }
    SUBCASE("brute-force recomputation per class") {
        for (int iter = 0; iter < 100; ++iter) {
            const std::size_t n = 1 + rng.below(8);
            Tensor logits = random_tensor({n, 3}, rng, -4, 4);
            Tensor alpha = softmax(random_tensor({n}, rng, -2, 2));
            Tensor got = aggregate_standard(logits, alpha);

            std::vector<double> agg(3, 0.0);
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t i = 0; i < n; ++i) agg[c] += logits.at(i, c) * alpha.at(i);
            auto want = plain_softmax(agg);
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(std::abs(got.at(c) - want[c]) < 1e-9);
        }
    }
    SUBCASE("shift invariance: adding a constant to every word logit keeps p_j") {
        Tensor alpha = softmax(random_tensor({5}, rng, -1, 1));
        Tensor base = aggregate_standard(P, alpha);
        Tensor shifted = P.clone_values();
        for (Real& v : shifted.values()) v += 3.7;
        Tensor moved = aggregate_standard(shifted, alpha);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(std::abs(base.at(c) - moved.at(c)) < 1e-9);
    }
}

TEST_CASE("forward output invariants and category independence") {
    Model model(small_config(ModelVariant::standard, 3, 4, 2), 23);
    NoGradGuard ng;
    Rng rng(29);

    SUBCASE("simplex invariants over fuzzed inputs") {
        for (int iter = 0; iter < 100; ++iter) {
            const std::size_t n = 1 + rng.below(8);
            std::vector<int> tokens;
            for (std::size_t i = 0; i < n; ++i) tokens.push_back(2 + static_cast<int>(rng.below(6)));
            ForwardOutput out = model.forward_eval(tokens, {0, 1, 2});
            for (const Tensor& alpha : out.attention) {
                double total = 0.0;
                for (Real v : alpha.values()) {
                    CHECK(v >= 0.0);
                    total += v;
                }
                CHECK(std::abs(total - 1.0) < 1e-9);
            }
            for (const Tensor& dist : out.category_dist) {
                double total = 0.0;
                for (Real v : dist.values()) {
                    CHECK(v > 0.0);
                    total += v;
                }
                CHECK(std::abs(total - 1.0) < 1e-9);
            }
            for (const Tensor& yhat : out.detection) {
                CHECK(yhat.item() > 0.0);
                CHECK(yhat.item() < 1.0);
            }
        }
    }
    SUBCASE("p_j does not depend on which other categories are queried") {
        const std::vector<int> tokens = {2, 5, 3, 7};
        ForwardOutput all = model.forward_eval(tokens, {0, 1, 2});
        ForwardOutput lone = model.forward_eval(tokens, {1});
        CHECK(tensor_vec(all.category_dist[1]) == tensor_vec(lone.category_dist[0]));
    }
    SUBCASE("unknown category id is a contract error") {
        CHECK_THROWS_AS(model.forward_eval({2, 3}, {5}), ContractError);
        CHECK_THROWS_AS(model.forward_eval({2, 3}, {}), ContractError);
    }
    SUBCASE("empty sentence is a data error") {
        CHECK_THROWS_AS(model.forward_eval({}, {0}), DataError);
    }
}

TEST_CASE("womil variant") {
    Model model(small_config(ModelVariant::womil), 31);
    NoGradGuard ng;
    Rng rng(37);

    SUBCASE("no word logits are produced") {
        ForwardOutput out = model.forward_eval({2, 3, 4}, {0});
        CHECK_FALSE(out.word_logits.defined());
        CHECK(out.category_dist.size() == 1);
    }
    SUBCASE("one-hot attention reduces to classifying one hidden state") {
        Tensor H = random_tensor({4, 4}, rng);
        for (std::size_t k = 0; k < 4; ++k) {
            Tensor via_pool = model.womil_category_dist(H, one_hot(4, k));
            Tensor direct = model.womil_category_dist(row(H, k), Tensor::full({1}, 1.0));
            CHECK(tensor_vec(via_pool) == tensor_vec(direct));
        }
    }
    SUBCASE("linear regime: pooling before or after the classifier agrees") {
        auto& p = model.params();
        // keep every ReLU pre-activation positive: small weights, large bias
        Rng wrng(41);
        for (Real& v : p.get("acsa.classifier.l1.W").values()) v = wrng.uniform(-0.05, 0.05);
        p.get("acsa.classifier.l1.b").fill(5.0);

        Tensor H = random_tensor({5, 4}, rng);
        Tensor alpha = softmax(random_tensor({5}, rng));
        Tensor pooled_first = model.womil_category_dist(H, alpha);

        // classify each row, then pool the logits with the same weights
        const auto& w1 = p.get("acsa.classifier.l1.W").values();
        const auto& b1 = p.get("acsa.classifier.l1.b").values();
        const auto& w2 = p.get("acsa.classifier.l2.W").values();
        const auto& b2 = p.get("acsa.classifier.l2.b").values();
        std::vector<double> agg(3, 0.0);
        for (std::size_t i = 0; i < 5; ++i) {
            std::vector<double> hidden(4, 0.0);
            for (std::size_t j = 0; j < 4; ++j) {
                double z = b1[j];
                for (std::size_t k = 0; k < 4; ++k) z += H.at(i, k) * w1[k * 4 + j];
                CHECK(z > 0.0); // linear regime assumption
                hidden[j] = z;
            }
            for (std::size_t c = 0; c < 3; ++c) {
                double z = b2[c];
                for (std::size_t j = 0; j < 4; ++j) z += hidden[j] * w2[j * 3 + c];
                agg[c] += alpha.at(i) * z;
            }
        }
        auto want = plain_softmax(agg);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(pooled_first.at(c) == doctest::Approx(want[c]).epsilon(1e-9));
    }
}

TEST_CASE("affine variant") {
    Model model(small_config(ModelVariant::affine), 43);
    NoGradGuard ng;

    SUBCASE("permuting tokens permutes attention identically") {
        ForwardOutput a = model.forward_eval({2, 3, 4}, {0});
        ForwardOutput b = model.forward_eval({4, 2, 3}, {0});
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(a.attention[j].at(0) == doctest::Approx(b.attention[j].at(1)).epsilon(1e-12));
            CHECK(a.attention[j].at(1) == doctest::Approx(b.attention[j].at(2)).epsilon(1e-12));
            CHECK(a.attention[j].at(2) == doctest::Approx(b.attention[j].at(0)).epsilon(1e-12));
        }
    }
    SUBCASE("zero affine weights give uniform attention") {
        for (auto& [name, e] : model.params())
            if (name.rfind("acd.", 0) == 0) e.tensor.fill(0.0);
        ForwardOutput out = model.forward_eval({2, 3, 4, 5}, {0});
        for (Real v : out.attention[0].values()) CHECK(v == doctest::Approx(0.25));
    }
    SUBCASE("3-token encoder matches direct evaluation") {
        auto& p = model.params();
        const std::vector<int> tokens = {2, 6, 3};
        AcdOutput out = model.forward_acd(tokens);
        const auto& emb = p.get("acd.embedding").values();
        const auto& W = p.get("acd.affine.W").values();
        const auto& b = p.get("acd.affine.b").values();
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t t = static_cast<std::size_t>(tokens[i]);
            for (std::size_t j = 0; j < 4; ++j) {
                double z = b[j];
                for (std::size_t k = 0; k < 4; ++k) z += emb[t * 4 + k] * W[k * 4 + j];
                CHECK(out.hidden.at(i, j) == doctest::Approx(std::tanh(z)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("softmax-aggregation variant") {
    Model model(small_config(ModelVariant::softmax_agg), 47);
    NoGradGuard ng;
    Rng rng(53);

    SUBCASE("one-hot attention gives softmax(softmax(word logits))") {
        Tensor P = random_tensor({4, 3}, rng, -2, 2);
        Tensor alpha = one_hot(4, 1);
        Tensor got = aggregate_softmaxed(P, alpha);
        Tensor want = softmax(reshape(row(softmax_rows(P), 1), {3}));
        CHECK(tensor_vec(got) == tensor_vec(want));
    }
    SUBCASE("identical word logits aggregate like a single word") {
        Tensor v = random_tensor({1, 3}, rng, -2, 2);
        Tensor same = stack_rows({v, v, v});
        Tensor alpha = softmax(random_tensor({3}, rng));
        Tensor repeated = aggregate_softmaxed(same, alpha);
        Tensor single = aggregate_softmaxed(v, Tensor::full({1}, 1.0));
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(repeated.at(c) == doctest::Approx(single.at(c)).epsilon(1e-9));
    }
    SUBCASE("brute-force recomputation with softmaxed rows") {
        Tensor P = random_tensor({6, 3}, rng, -3, 3);
        Tensor alpha = softmax(random_tensor({6}, rng));
        Tensor got = aggregate_softmaxed(P, alpha);
        std::vector<double> agg(3, 0.0);
        for (std::size_t i = 0; i < 6; ++i) {
            auto srow = plain_softmax({P.at(i, 0), P.at(i, 1), P.at(i, 2)});
            for (std::size_t c = 0; c < 3; ++c) agg[c] += alpha.at(i) * srow[c];
        }
        auto want = plain_softmax(agg);
        for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(got.at(c) - want[c]) < 1e-9);
    }
}

TEST_CASE("detach-attention stops sentiment gradients at the heads") {
    ModelConfig cfg = small_config(ModelVariant::standard, 1, 4, 1);
    cfg.detach_attention = true;
    Model model(cfg, 59);
    Rng dropout_rng(61);
    Tape::active().clear();
    model.params().zero_grad();
    ForwardOutput out = model.forward(/*tokens=*/{2, 3, 4}, {0}, false, dropout_rng);
    // pure sentiment loss: pick one class probability
    backward(pick(out.category_dist[0], 2));
    for (Real g : model.params().get("acd.attention.0.W").grad()) CHECK(g == 0.0);
    Tape::active().clear();
}

TEST_CASE("full-model gradient check with the combined loss") {
    ModelConfig cfg = small_config(ModelVariant::standard, 2, 4, 2);
    Model model(cfg, 67);
    // move every weight to a generic operating point: at the tiny default
    // init the network is nearly constant and relu pre-activations sit inside
    // the finite-difference step, which makes relative FD comparisons
    // meaningless rather than wrong
    Rng scatter(101);
    for (auto& [name, e] : model.params())
        for (Real& v : e.tensor.values()) v = scatter.uniform(-0.5, 0.5);

    const std::vector<int> tokens = {2, 3, 4, 5};
    const std::vector<std::uint8_t> detection_target = {1, 0};
    const std::vector<int> gold = {0, 2};
    Rng dropout_rng(71);
    auto loss_fn = [&] {
        ForwardOutput out = model.forward(tokens, {0, 1}, false, dropout_rng);
        return combined_loss(acd_loss(out.detection, detection_target),
                             acsa_loss(out.category_dist, gold), /*beta=*/1.0, /*lambda=*/1e-3,
                             model.params());
    };
    auto report = grad_check(loss_fn, model.params(), 1e-5);
    CAPTURE(report.worst_param);
    CHECK(report.worst < 1e-4);
}

TEST_CASE("checkpoint round trip") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "milsent_ckpt_test").string();
    fs::create_directories(dir);
    const std::string path = dir + "/model.ckpt";

    ModelConfig cfg = small_config(ModelVariant::standard, 2, 4, 2);
    cfg.vocab_size = 4;
    Model model(cfg, 73);
    Vocabulary vocab = Vocabulary::from_tokens({"<pad>", "<unk>", "good", "bad"});
    save_checkpoint(path, model, vocab, {"food", "service"});

    LoadedModel loaded = load_checkpoint(path);
    CHECK(loaded.categories == std::vector<std::string>{"food", "service"});
    CHECK(loaded.vocab.size() == 4);
    CHECK(loaded.vocab.token(2) == "good");
    CHECK(loaded.model->config().dim == 4);
    CHECK(loaded.model->config().variant == ModelVariant::standard);
    for (const auto& name : model.params().names())
        CHECK(loaded.model->params().get(name).values() == model.params().get(name).values());

    // forward parity
    NoGradGuard ng;
    ForwardOutput a = model.forward_eval({2, 3}, {0});
    ForwardOutput b = loaded.model->forward_eval({2, 3}, {0});
    CHECK(tensor_vec(a.category_dist[0]) == tensor_vec(b.category_dist[0]));

    SUBCASE("truncated file is rejected") {
        std::string clipped;
        {
            std::ifstream in(path, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            clipped = buf.str().substr(0, 100);
        }
        const std::string bad = dir + "/clipped.ckpt";
        std::ofstream(bad, std::ios::binary) << clipped;
        CHECK_THROWS_AS(load_checkpoint(bad), DataError);
    }
    SUBCASE("foreign file is rejected") {
        const std::string bad = dir + "/not_a_ckpt";
        std::ofstream(bad) << "hello";
        CHECK_THROWS_AS(load_checkpoint(bad), DataError);
    }
}

} // TEST_SUITE
