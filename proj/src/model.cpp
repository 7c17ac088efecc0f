#include "milsent/model.hpp"

#include "milsent/errors.hpp"

namespace milsent {

std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::standard: return "standard";
        case ModelVariant::womil: return "womil";
        case ModelVariant::affine: return "affine";
        case ModelVariant::softmax_agg: return "softmax";
    }
    throw ContractError("unreachable variant");
}

ModelVariant variant_from_string(const std::string& s) {
    if (s == "standard") return ModelVariant::standard;
    if (s == "womil") return ModelVariant::womil;
    if (s == "affine") return ModelVariant::affine;
    if (s == "softmax") return ModelVariant::softmax_agg;
    throw ConfigError("unknown model variant '" + s +
                      "' (expected standard, womil, affine or softmax)");
}

void ModelConfig::validate() const {
    if (num_categories == 0) throw ConfigError("model: need at least one aspect category");
    if (dim == 0 || dim % 2 != 0)
        throw ConfigError("model: dimension must be positive and even, got " + std::to_string(dim));
    if (depth == 0) throw ConfigError("model: depth must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ConfigError("model: dropout must be in [0, 1), got " + std::to_string(dropout));
    if (vocab_size < 2) throw ConfigError("model: vocabulary must contain pad and unk");
    if (pad_index >= vocab_size || unk_index >= vocab_size)
        throw ConfigError("model: pad/unk index out of range");
}

Tensor attention_pool(const Tensor& rows, const Tensor& alpha) {
    if (alpha.rank() != 1 || rows.rank() != 2 || alpha.size() != rows.rows())
        throw DimensionError("attention_pool: weights " + shape_str(alpha.shape()) +
                             " do not match rows " + shape_str(rows.shape()));
    return matmul(reshape(alpha, {1, alpha.size()}), rows);
}

Tensor aggregate_presoftmax(const Tensor& word_logits, const Tensor& alpha) {
    return reshape(attention_pool(word_logits, alpha), {word_logits.cols()});
}

Tensor aggregate_standard(const Tensor& word_logits, const Tensor& alpha) {
    return softmax(aggregate_presoftmax(word_logits, alpha));
}

Tensor aggregate_softmaxed(const Tensor& word_logits, const Tensor& alpha) {
    return softmax(aggregate_presoftmax(softmax_rows(word_logits), alpha));
}

Model::Model(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(init_seed);
    const std::size_t d = config_.dim;
    const std::size_t n_cls = ModelConfig::kNumClasses;

    acd_embedding_ = EmbeddingTable::create(params_, "acd.embedding", config_.vocab_size, d,
                                            config_.pad_index, config_.unk_index, rng);
    if (config_.variant == ModelVariant::affine) {
        acd_affine_ = Linear::create(params_, "acd.affine", d, d, rng);
    } else {
        acd_lstm_ = LstmCell::create(params_, "acd.lstm", d, d, rng);
    }
    for (std::size_t j = 0; j < config_.num_categories; ++j) {
        const std::string idx = std::to_string(j);
        heads_.push_back(AttentionHead::create(params_, "acd.attention." + idx, d, rng));
        detection_out_.push_back(Linear::create(params_, "acd.predict." + idx, d, 1, rng));
    }

    acsa_embedding_ = EmbeddingTable::create(params_, "acsa.embedding", config_.vocab_size, d,
                                             config_.pad_index, config_.unk_index, rng);
    bilstm_ = BiLstmStack::create(params_, "acsa.bilstm", config_.depth, d, rng);
    if (config_.variant == ModelVariant::womil) {
        classifier_l1_ = Linear::create(params_, "acsa.classifier.l1", d, d, rng);
        classifier_l2_ = Linear::create(params_, "acsa.classifier.l2", d, n_cls, rng);
    } else {
        word_l1_ = Linear::create(params_, "acsa.word.l1", d, d, rng);
        word_l2_ = Linear::create(params_, "acsa.word.l2", d, n_cls, rng);
    }

    if (!config_.train_embeddings) {
        params_.set_trainable("acd.embedding", false);
        params_.set_trainable("acsa.embedding", false);
    }
}

Tensor Model::encode_acd(const Tensor& embedded) const {
    if (config_.variant == ModelVariant::affine)
        return tanh(acd_affine_->apply(embedded)); // per-position, no recurrence
    return acd_lstm_->run(embedded);
}

AcdOutput Model::forward_acd(const std::vector<int>& tokens) const {
    if (tokens.empty()) throw DataError("forward: empty sentence");
    AcdOutput out;
    Tensor embedded = acd_embedding_.embed(tokens);
    out.hidden = encode_acd(embedded);
    out.detection.reserve(heads_.size());
    out.attention.reserve(heads_.size());
    for (std::size_t j = 0; j < heads_.size(); ++j) {
        Tensor alpha = heads_[j].attend(out.hidden);
        Tensor pooled = attention_pool(out.hidden, alpha);
        out.detection.push_back(sigmoid(detection_out_[j].apply(pooled)));
        out.attention.push_back(std::move(alpha));
    }
    return out;
}

Tensor Model::word_sentiment_logits(const Tensor& hidden) const {
    // two fully connected layers, no output activation
    return word_l2_->apply(relu(word_l1_->apply(hidden)));
}

Tensor Model::womil_category_dist(const Tensor& hidden, const Tensor& alpha) const {
    if (config_.variant != ModelVariant::womil)
        throw ContractError("womil_category_dist: model is not the womil variant");
    Tensor pooled = attention_pool(hidden, alpha);
    Tensor logits = classifier_l2_->apply(relu(classifier_l1_->apply(pooled)));
    return softmax(reshape(logits, {ModelConfig::kNumClasses}));
}

ForwardOutput Model::forward(const std::vector<int>& tokens,
                             const std::vector<std::size_t>& queried, bool training,
                             Rng& dropout_rng) const {
    if (queried.empty()) throw ContractError("forward: no categories queried");
    for (std::size_t j : queried)
        if (j >= config_.num_categories)
            throw ContractError("forward: unknown category id " + std::to_string(j));

    AcdOutput acd = forward_acd(tokens);

    ForwardOutput out;
    out.detection = std::move(acd.detection);
    out.attention = std::move(acd.attention);
    out.queried.assign(queried.begin(), queried.end());

    Tensor embedded = acsa_embedding_.embed(tokens);
    embedded = dropout(embedded, config_.dropout, training, dropout_rng);
    Tensor hidden = bilstm_->run(embedded, config_.dropout, training, dropout_rng);

    if (config_.variant != ModelVariant::womil)
        out.word_logits = word_sentiment_logits(hidden);

    out.category_dist.reserve(queried.size());
    for (std::size_t j : queried) {
        Tensor alpha = config_.detach_attention ? detach(out.attention[j]) : out.attention[j];
        switch (config_.variant) {
            case ModelVariant::standard:
            case ModelVariant::affine:
                out.category_dist.push_back(aggregate_standard(out.word_logits, alpha));
                break;
            case ModelVariant::softmax_agg:
                out.category_dist.push_back(aggregate_softmaxed(out.word_logits, alpha));
                break;
            case ModelVariant::womil:
                out.category_dist.push_back(womil_category_dist(hidden, alpha));
                break;
        }
    }
    return out;
}

ForwardOutput Model::forward_eval(const std::vector<int>& tokens,
                                  const std::vector<std::size_t>& queried) const {
    Rng unused(0);
    return forward(tokens, queried, false, unused);
}

} // namespace milsent
