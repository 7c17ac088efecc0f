#pragma once

#include <string>
#include <utility>
#include <vector>

#include "milsent/registry.hpp"
#include "milsent/rng.hpp"
#include "milsent/tensor.hpp"

namespace milsent {

// Initialization policy (the reference paper is silent on it): weights
// uniform(-0.1, 0.1), biases zero except the forget gate at 1.0, embedding
// rows without pretrained vectors uniform(-0.25, 0.25).
constexpr double kWeightInitRange = 0.1;
constexpr double kEmbeddingInitRange = 0.25;
constexpr double kForgetGateBiasInit = 1.0;

void init_uniform(Tensor t, Rng& rng, double range);

// Word embedding lookup table. Row `pad_index` stays all-zero and is never
// updated; unknown words map to `unk_index`.
class EmbeddingTable {
public:
    static EmbeddingTable create(ParamRegistry& params, const std::string& name,
                                 std::size_t vocab_size, std::size_t dim, std::size_t pad_index,
                                 std::size_t unk_index, Rng& rng);

    // row lookup; gradient flows to the looked-up rows only
    Tensor embed(const std::vector<int>& token_ids) const;

    Tensor weights() const { return weights_; }
    std::size_t vocab_size() const { return weights_.rows(); }
    std::size_t dim() const { return weights_.cols(); }
    std::size_t pad_index() const { return pad_index_; }
    std::size_t unk_index() const { return unk_index_; }

    // overwrite one row (pretrained vector injection); pad row stays zero
    void set_row(std::size_t row, const std::vector<Real>& v);

private:
    Tensor weights_;
    std::size_t pad_index_ = 0;
    std::size_t unk_index_ = 0;
};

// Single LSTM cell with per-gate weights: for gate g, z_g = x*W_g + h*U_g + b_g.
class LstmCell {
public:
    static LstmCell create(ParamRegistry& params, const std::string& prefix,
                           std::size_t input_size, std::size_t hidden_size, Rng& rng);

    // standard recurrence: i,f,o sigmoid gates, g tanh candidate,
    // c = f.c_prev + i.g, h = o.tanh(c)
    std::pair<Tensor, Tensor> step(const Tensor& h_prev, const Tensor& c_prev,
                                   const Tensor& x) const;

    // left-to-right scan from zero state over the rows of X; returns all
    // hidden states [n x hidden]
    Tensor run(const Tensor& X) const;
    // right-to-left scan; output rows stay aligned with input positions
    Tensor run_reverse(const Tensor& X) const;

    std::size_t input_size() const { return input_size_; }
    std::size_t hidden_size() const { return hidden_size_; }

private:
    Tensor w_i_, u_i_, b_i_;
    Tensor w_f_, u_f_, b_f_;
    Tensor w_g_, u_g_, b_g_;
    Tensor w_o_, u_o_, b_o_;
    std::size_t input_size_ = 0;
    std::size_t hidden_size_ = 0;
};

// L bidirectional layers, each direction of hidden size d/2; per-position
// concatenation keeps the output at [n x d]. Dropout is applied to each
// layer's concatenated output when training.
class BiLstmStack {
public:
    static BiLstmStack create(ParamRegistry& params, const std::string& prefix, std::size_t depth,
                              std::size_t dim, Rng& rng);

    Tensor run(const Tensor& X, double dropout_p, bool training, Rng& dropout_rng) const;

    std::size_t depth() const { return forward_.size(); }
    std::size_t dim() const { return dim_; }

private:
    std::vector<LstmCell> forward_;
    std::vector<LstmCell> backward_;
    std::size_t dim_ = 0;
};

// One attention head: scores = u^T tanh(W h_i + b), weights = softmax(scores).
class AttentionHead {
public:
    static AttentionHead create(ParamRegistry& params, const std::string& prefix, std::size_t dim,
                                Rng& rng);

    // H: [n x d] -> weight vector [n] on the simplex; when n_valid > 0 only
    // the first n_valid positions participate (pad positions get weight 0)
    Tensor attend(const Tensor& H, std::size_t n_valid = 0) const;

private:
    Tensor w_, b_, u_;
};

// Affine map y = x*W + b with W [in x out].
class Linear {
public:
    static Linear create(ParamRegistry& params, const std::string& prefix, std::size_t in,
                         std::size_t out, Rng& rng);

    Tensor apply(const Tensor& x) const;

    Tensor weight() const { return w_; }
    Tensor bias() const { return b_; }

private:
    Tensor w_, b_;
};

} // namespace milsent
