#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "milsent/layers.hpp"
#include "milsent/registry.hpp"
#include "milsent/tensor.hpp"

namespace milsent {

// standard      full model: word sentiment logits aggregated by detection attention
// womil         ablation: attention-pooled hidden state fed to a sentence classifier,
//               no word-level sentiment layer
// affine        ablation: detection encoder is a per-position affine+tanh map
//               instead of an LSTM
// softmax_agg   depth-study variant: word logits are softmaxed before aggregation
enum class ModelVariant { standard, womil, affine, softmax_agg };

std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& s);

struct ModelConfig {
    std::size_t num_categories = 0; // N
    std::size_t dim = 300;          // d, split across Bi-LSTM directions
    std::size_t depth = 3;          // L
    ModelVariant variant = ModelVariant::standard;
    double dropout = 0.5;
    bool detach_attention = false; // stop ACSA gradients at the attention weights
    bool train_embeddings = true;
    std::size_t vocab_size = 0;
    std::size_t pad_index = 0;
    std::size_t unk_index = 1;

    static constexpr std::size_t kNumClasses = 3; // Neg, Neu, Pos

    void validate() const;
};

// Everything one sentence produces. Tensors stay attached to the tape so the
// training loop can build losses from them.
struct ForwardOutput {
    std::vector<Tensor> detection;       // per category, [1x1] in (0,1)
    std::vector<Tensor> attention;       // per category, [n] on the simplex
    Tensor word_logits;                  // [n x 3]; undefined for womil
    std::vector<std::size_t> queried;    // category ids the ACSA branch answered
    std::vector<Tensor> category_dist;   // per queried id, [3] on the simplex
};

struct AcdOutput {
    std::vector<Tensor> detection;
    std::vector<Tensor> attention;
    Tensor hidden; // [n x d]
};

// alpha-weighted sum of matrix rows: [n x k], [n] -> [1 x k]. Serves both the
// detection sentence representation and the MIL aggregation.
Tensor attention_pool(const Tensor& rows, const Tensor& alpha);

// category sentiment from word logits and attention weights
Tensor aggregate_standard(const Tensor& word_logits, const Tensor& alpha);
Tensor aggregate_presoftmax(const Tensor& word_logits, const Tensor& alpha); // [3] pre-softmax
Tensor aggregate_softmaxed(const Tensor& word_logits, const Tensor& alpha);

class Model {
public:
    Model(ModelConfig config, std::uint64_t init_seed);

    const ModelConfig& config() const { return config_; }
    ParamRegistry& params() { return params_; }
    const ParamRegistry& params() const { return params_; }

    // detection branch only (attention weights, detection scores)
    AcdOutput forward_acd(const std::vector<int>& tokens) const;

    // full pass; queried must be non-empty category ids
    ForwardOutput forward(const std::vector<int>& tokens, const std::vector<std::size_t>& queried,
                          bool training, Rng& dropout_rng) const;

    // eval-mode convenience (no dropout, no rng consumption)
    ForwardOutput forward_eval(const std::vector<int>& tokens,
                               const std::vector<std::size_t>& queried) const;

    EmbeddingTable& acd_embedding() { return acd_embedding_; }
    EmbeddingTable& acsa_embedding() { return acsa_embedding_; }

    // sentence classifier of the womil variant, exposed for the aggregation
    // oracles
    Tensor womil_category_dist(const Tensor& hidden, const Tensor& alpha) const;

private:
    Tensor encode_acd(const Tensor& embedded) const;
    Tensor word_sentiment_logits(const Tensor& hidden) const;

    ModelConfig config_;
    ParamRegistry params_;

    EmbeddingTable acd_embedding_;
    EmbeddingTable acsa_embedding_;
    std::optional<LstmCell> acd_lstm_;       // standard/womil/softmax_agg
    std::optional<Linear> acd_affine_;       // affine variant
    std::vector<AttentionHead> heads_;
    std::vector<Linear> detection_out_;
    std::optional<BiLstmStack> bilstm_;
    std::optional<Linear> word_l1_, word_l2_;            // word sentiment layer
    std::optional<Linear> classifier_l1_, classifier_l2_; // womil sentence classifier
};

} // namespace milsent
