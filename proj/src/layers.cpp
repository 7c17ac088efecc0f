#include "milsent/layers.hpp"

#include <algorithm>

#include "milsent/errors.hpp"

namespace milsent {

void init_uniform(Tensor t, Rng& rng, double range) {
    for (auto& v : t.values()) v = rng.uniform(-range, range);
    if (precision() == Precision::f32) {
        for (auto& v : t.values()) v = static_cast<Real>(static_cast<float>(v));
    }
}

// ---- EmbeddingTable ----------------------------------------------------------

EmbeddingTable EmbeddingTable::create(ParamRegistry& params, const std::string& name,
                                      std::size_t vocab_size, std::size_t dim,
                                      std::size_t pad_index, std::size_t unk_index, Rng& rng) {
    if (pad_index >= vocab_size || unk_index >= vocab_size)
        throw ContractError("embedding: pad/unk index out of range");
    EmbeddingTable table;
    table.weights_ = params.add(name, Tensor::zeros({vocab_size, dim}));
    table.pad_index_ = pad_index;
    table.unk_index_ = unk_index;
    init_uniform(table.weights_, rng, kEmbeddingInitRange);
    // pad row: all zeros, excluded from updates
    auto& vals = table.weights_.values();
    std::fill_n(vals.begin() + pad_index * dim, dim, 0.0);
    params.freeze_rows(name, {pad_index});
    return table;
}

Tensor EmbeddingTable::embed(const std::vector<int>& token_ids) const {
    return gather_rows(weights_, token_ids);
}

void EmbeddingTable::set_row(std::size_t r, const std::vector<Real>& v) {
    if (r >= vocab_size()) throw ContractError("embedding set_row: row out of range");
    if (v.size() != dim()) throw DimensionError("embedding set_row: dimension mismatch");
    if (r == pad_index_) return;
    auto& vals = weights_.values();
    for (std::size_t j = 0; j < v.size(); ++j)
        vals[r * dim() + j] = precision() == Precision::f32
                                  ? static_cast<Real>(static_cast<float>(v[j]))
                                  : v[j];
}

// ---- LstmCell ------------------------------------------------------------------

LstmCell LstmCell::create(ParamRegistry& params, const std::string& prefix,
                          std::size_t input_size, std::size_t hidden_size, Rng& rng) {
    LstmCell cell;
    cell.input_size_ = input_size;
    cell.hidden_size_ = hidden_size;
    auto weight = [&](const char* name, std::size_t r, std::size_t c) {
        Tensor t = params.add(prefix + "." + name, Tensor::zeros({r, c}));
        init_uniform(t, rng, kWeightInitRange);
        return t;
    };
    auto bias = [&](const char* name, Real v) {
        return params.add(prefix + "." + name, Tensor::full({hidden_size}, v));
    };
    cell.w_i_ = weight("w_i", input_size, hidden_size);
    cell.u_i_ = weight("u_i", hidden_size, hidden_size);
    cell.b_i_ = bias("b_i", 0.0);
    cell.w_f_ = weight("w_f", input_size, hidden_size);
    cell.u_f_ = weight("u_f", hidden_size, hidden_size);
    cell.b_f_ = bias("b_f", kForgetGateBiasInit);
    cell.w_g_ = weight("w_g", input_size, hidden_size);
    cell.u_g_ = weight("u_g", hidden_size, hidden_size);
    cell.b_g_ = bias("b_g", 0.0);
    cell.w_o_ = weight("w_o", input_size, hidden_size);
    cell.u_o_ = weight("u_o", hidden_size, hidden_size);
    cell.b_o_ = bias("b_o", 0.0);
    return cell;
}

std::pair<Tensor, Tensor> LstmCell::step(const Tensor& h_prev, const Tensor& c_prev,
                                         const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != input_size_)
        throw DimensionError("lstm step: input shape " + shape_str(x.shape()) +
                             " does not match input size " + std::to_string(input_size_));
    if (h_prev.rank() != 2 || h_prev.cols() != hidden_size_ || c_prev.rank() != 2 ||
        c_prev.cols() != hidden_size_)
        throw DimensionError("lstm step: state shape mismatch");
    auto gate = [&](const Tensor& w, const Tensor& u, const Tensor& b) {
        return add(add(matmul(x, w), matmul(h_prev, u)), b);
    };
    Tensor i = sigmoid(gate(w_i_, u_i_, b_i_));
    Tensor f = sigmoid(gate(w_f_, u_f_, b_f_));
    Tensor g = tanh(gate(w_g_, u_g_, b_g_));
    Tensor o = sigmoid(gate(w_o_, u_o_, b_o_));
    Tensor c = add(mul(f, c_prev), mul(i, g));
    Tensor h = mul(o, tanh(c));
    return {h, c};
}

Tensor LstmCell::run(const Tensor& X) const {
    const std::size_t n = X.rows();
    Tensor h = Tensor::zeros({1, hidden_size_});
    Tensor c = Tensor::zeros({1, hidden_size_});
    std::vector<Tensor> states;
    states.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        std::tie(h, c) = step(h, c, row(X, t));
        states.push_back(h);
    }
    return stack_rows(states);
}

Tensor LstmCell::run_reverse(const Tensor& X) const {
    const std::size_t n = X.rows();
    Tensor h = Tensor::zeros({1, hidden_size_});
    Tensor c = Tensor::zeros({1, hidden_size_});
    std::vector<Tensor> states(n);
    for (std::size_t t = n; t-- > 0;) {
        std::tie(h, c) = step(h, c, row(X, t));
        states[t] = h;
    }
    return stack_rows(states);
}

// ---- BiLstmStack ----------------------------------------------------------------

BiLstmStack BiLstmStack::create(ParamRegistry& params, const std::string& prefix,
                                std::size_t depth, std::size_t dim, Rng& rng) {
    if (depth == 0) throw ConfigError("bilstm: depth must be positive");
    if (dim % 2 != 0)
        throw ConfigError("bilstm: model dimension must be even to split across directions");
    BiLstmStack stack;
    stack.dim_ = dim;
    const std::size_t half = dim / 2;
    for (std::size_t l = 0; l < depth; ++l) {
        const std::string base = prefix + "." + std::to_string(l);
        stack.forward_.push_back(LstmCell::create(params, base + ".fwd", dim, half, rng));
        stack.backward_.push_back(LstmCell::create(params, base + ".bwd", dim, half, rng));
    }
    return stack;
}

Tensor BiLstmStack::run(const Tensor& X, double dropout_p, bool training,
                        Rng& dropout_rng) const {
    if (X.rank() != 2 || X.cols() != dim_)
        throw DimensionError("bilstm: input shape " + shape_str(X.shape()) +
                             " does not match dimension " + std::to_string(dim_));
    Tensor h = X;
    for (std::size_t l = 0; l < forward_.size(); ++l) {
        Tensor fwd = forward_[l].run(h);
        Tensor bwd = backward_[l].run_reverse(h);
        h = concat_cols(fwd, bwd);
        h = dropout(h, dropout_p, training, dropout_rng);
    }
    return h;
}

// ---- AttentionHead ---------------------------------------------------------------

AttentionHead AttentionHead::create(ParamRegistry& params, const std::string& prefix,
                                    std::size_t dim, Rng& rng) {
    AttentionHead head;
    head.w_ = params.add(prefix + ".W", Tensor::zeros({dim, dim}));
    head.b_ = params.add(prefix + ".b", Tensor::zeros({dim}));
    head.u_ = params.add(prefix + ".u", Tensor::zeros({dim}));
    init_uniform(head.w_, rng, kWeightInitRange);
    init_uniform(head.u_, rng, kWeightInitRange);
    return head;
}

Tensor AttentionHead::attend(const Tensor& H, std::size_t n_valid) const {
    const std::size_t n = H.rows(), d = H.cols();
    if (d != w_.rows())
        throw DimensionError("attention: hidden size " + std::to_string(d) +
                             " does not match head dimension " + std::to_string(w_.rows()));
    Tensor m = tanh(add(matmul(H, transpose(w_)), b_));
    Tensor scores = reshape(matmul(m, reshape(u_, {d, 1})), {n});
    return n_valid == 0 ? softmax(scores) : masked_softmax(scores, n_valid);
}

// ---- Linear -------------------------------------------------------------------------

Linear Linear::create(ParamRegistry& params, const std::string& prefix, std::size_t in,
                      std::size_t out, Rng& rng) {
    Linear lin;
    lin.w_ = params.add(prefix + ".W", Tensor::zeros({in, out}));
    lin.b_ = params.add(prefix + ".b", Tensor::zeros({out}));
    init_uniform(lin.w_, rng, kWeightInitRange);
    return lin;
}

Tensor Linear::apply(const Tensor& x) const {
    return add(matmul(x, w_), b_);
}

} // namespace milsent
