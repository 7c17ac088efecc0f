#include "milsent/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "milsent/errors.hpp"

namespace milsent {

std::string to_string(Schedule s) {
    switch (s) {
        case Schedule::single_pipeline: return "single-pipeline";
        case Schedule::single_joint: return "single-joint";
        case Schedule::multi_pipeline: return "multi-pipeline";
        case Schedule::multi_joint: return "multi-joint";
    }
    throw ContractError("unreachable schedule");
}

Schedule schedule_from_string(const std::string& s) {
    if (s == "single-pipeline") return Schedule::single_pipeline;
    if (s == "single-joint") return Schedule::single_joint;
    if (s == "multi-pipeline") return Schedule::multi_pipeline;
    if (s == "multi-joint") return Schedule::multi_joint;
    throw ConfigError("unknown schedule '" + s +
                      "' (expected single-pipeline, single-joint, multi-pipeline or multi-joint)");
}

bool schedule_is_single(Schedule s) {
    return s == Schedule::single_pipeline || s == Schedule::single_joint;
}

bool schedule_is_pipeline(Schedule s) {
    return s == Schedule::single_pipeline || s == Schedule::multi_pipeline;
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (beta < 0.0) throw ConfigError("beta must be non-negative");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (clip_norm < 0.0) throw ConfigError("clip norm must be non-negative");
    if (max_epochs == 0) throw ConfigError("max epochs must be positive");
}

// ---- losses --------------------------------------------------------------------

Tensor acd_loss(const std::vector<Tensor>& detection, const std::vector<std::uint8_t>& target) {
    if (detection.size() != target.size())
        throw ContractError("acd_loss: " + std::to_string(detection.size()) +
                            " predictions vs " + std::to_string(target.size()) + " targets");
    if (detection.empty()) throw ContractError("acd_loss: no categories");
    Tensor total;
    for (std::size_t j = 0; j < detection.size(); ++j) {
        // y log p + (1-y) log(1-p); the target picks the term
        Tensor p = reshape(detection[j], {1});
        Tensor term = target[j] ? log_clamped(p) : log_clamped(affine(p, -1.0, 1.0));
        total = total.defined() ? add(total, term) : term;
    }
    return affine(total, -1.0, 0.0);
}

Tensor acsa_loss(const std::vector<Tensor>& dists, const std::vector<int>& gold_classes) {
    if (dists.size() != gold_classes.size())
        throw ContractError("acsa_loss: " + std::to_string(dists.size()) + " distributions vs " +
                            std::to_string(gold_classes.size()) + " gold labels");
    if (dists.empty()) throw ContractError("acsa_loss: no mentioned categories");
    Tensor total;
    for (std::size_t j = 0; j < dists.size(); ++j) {
        const int gold = gold_classes[j];
        if (gold < 0 || gold >= static_cast<int>(ModelConfig::kNumClasses))
            throw ContractError("acsa_loss: gold class " + std::to_string(gold) + " out of range");
        if (dists[j].size() != ModelConfig::kNumClasses)
            throw ContractError("acsa_loss: distribution must have 3 classes");
        Tensor term = pick(log_clamped(dists[j]), static_cast<std::size_t>(gold));
        total = total.defined() ? add(total, term) : term;
    }
    return affine(total, -1.0, 0.0);
}

Tensor l2_penalty(const ParamRegistry& params, double lambda) {
    Tensor total = Tensor::scalar(0.0);
    for (const auto& [name, e] : params) {
        if (!e.trainable) continue;
        total = add(total, sum_squares(e.tensor));
    }
    return affine(total, lambda, 0.0);
}

Tensor combined_loss(const Tensor& detection_loss, const Tensor& sentiment_loss, double beta,
                     double lambda, const ParamRegistry& params) {
    Tensor loss = add(detection_loss, affine(sentiment_loss, beta, 0.0));
    return add(loss, l2_penalty(params, lambda));
}

// ---- optimizer -------------------------------------------------------------------

void AdamOptimizer::step() {
    for (auto& [name, e] : *params_) {
        if (!e.trainable) continue;
        Tensor t = e.tensor;
        auto& vals = t.values();
        const auto& grads = t.grad();
        AdamState& st = state_[name];
        if (st.m.empty()) {
            st.m.assign(vals.size(), 0.0);
            st.v.assign(vals.size(), 0.0);
        }
        ++st.step;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.step));

        std::vector<std::pair<std::size_t, std::size_t>> skip; // [begin, end) per frozen row
        if (!e.frozen_rows.empty()) {
            const std::size_t cols = t.cols();
            for (std::size_t r : e.frozen_rows) skip.emplace_back(r * cols, (r + 1) * cols);
        }
        auto frozen = [&](std::size_t i) {
            for (const auto& [b, eend] : skip)
                if (i >= b && i < eend) return true;
            return false;
        };

        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (!skip.empty() && frozen(i)) continue;
            const double g = grads[i];
            st.m[i] = kBeta1 * st.m[i] + (1.0 - kBeta1) * g;
            st.v[i] = kBeta2 * st.v[i] + (1.0 - kBeta2) * g * g;
            const double mhat = st.m[i] / c1;
            const double vhat = st.v[i] / c2;
            vals[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
        }
        quantize_storage(vals);
    }
}

double gradient_global_norm(const ParamRegistry& params) {
    double sq = 0.0;
    for (const auto& [name, e] : params) {
        if (!e.trainable) continue;
        for (Real g : e.tensor.grad()) sq += g * g;
    }
    return std::sqrt(sq);
}

void clip_gradients(ParamRegistry& params, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = gradient_global_norm(params);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto& [name, e] : params) {
        if (!e.trainable) continue;
        for (Real& g : e.tensor.grad()) g *= scale;
        quantize_storage(e.tensor.grad());
    }
}

// ---- early stopping ------------------------------------------------------------------

bool EarlyStopper::update(double metric) {
    const bool improved =
        !seen_any_ || (higher_better_ ? metric > best_ : metric < best_);
    seen_any_ = true;
    if (improved) {
        best_ = metric;
        since_best_ = 0;
    } else {
        ++since_best_;
    }
    return improved;
}

// ---- training loop -------------------------------------------------------------------

namespace {

enum class Stage { joint, acd_only, acsa_only };

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::joint: return "joint";
        case Stage::acd_only: return "acd";
        case Stage::acsa_only: return "acsa";
    }
    return "?";
}

std::vector<std::size_t> queried_ids(const BatchItem& item) {
    std::vector<std::size_t> ids;
    ids.reserve(item.sentiment_targets.size());
    for (const auto& [cat, cls] : item.sentiment_targets) ids.push_back(cat);
    return ids;
}

std::vector<int> gold_classes(const BatchItem& item) {
    std::vector<int> out;
    out.reserve(item.sentiment_targets.size());
    for (const auto& [cat, cls] : item.sentiment_targets) out.push_back(cls);
    return out;
}

std::vector<int> true_tokens(const BatchItem& item) {
    return {item.token_ids.begin(), item.token_ids.begin() + static_cast<long>(item.length)};
}

struct EpochStats {
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t correct = 0;
    std::size_t total = 0;

    double mean_loss() const { return batches ? loss_sum / static_cast<double>(batches) : 0.0; }
    double accuracy() const {
        return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    }
};

int argmax3(const Tensor& dist) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(ModelConfig::kNumClasses); ++c)
        if (dist.at(static_cast<std::size_t>(c)) > dist.at(static_cast<std::size_t>(best)))
            best = c;
    return best;
}

} // namespace

double dataset_acsa_accuracy(const Model& model, const std::vector<CorpusExample>& examples,
                             const Vocabulary& vocab, const std::vector<std::string>& categories) {
    NoGradGuard ng;
    std::map<std::string, std::size_t> cat_index;
    for (std::size_t i = 0; i < categories.size(); ++i) cat_index[categories[i]] = i;
    std::size_t correct = 0, total = 0;
    for (const auto& ex : examples) {
        std::vector<std::size_t> queried;
        std::vector<int> gold;
        for (const auto& l : ex.labels) {
            queried.push_back(cat_index.at(l.category));
            gold.push_back(polarity_class(l.polarity));
        }
        ForwardOutput out = model.forward_eval(vocab.encode(ex.tokens), queried);
        for (std::size_t k = 0; k < queried.size(); ++k) {
            if (argmax3(out.category_dist[k]) == gold[k]) ++correct;
            ++total;
        }
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

namespace {

// loss and accuracy of one stage over a dataset without touching parameters
std::pair<double, double> evaluate_stage(const Model& model,
                                         const std::vector<CorpusExample>& examples,
                                         const Vocabulary& vocab,
                                         const std::vector<std::string>& categories, Stage stage,
                                         const TrainConfig& cfg) {
    NoGradGuard ng;
    std::map<std::string, std::size_t> cat_index;
    for (std::size_t i = 0; i < categories.size(); ++i) cat_index[categories[i]] = i;

    double loss_sum = 0.0;
    std::size_t n_items = 0, correct = 0, total = 0;
    for (const auto& ex : examples) {
        std::vector<std::uint8_t> det_target(categories.size(), 0);
        std::vector<std::size_t> queried;
        std::vector<int> gold;
        for (const auto& l : ex.labels) {
            const std::size_t cat = cat_index.at(l.category);
            det_target[cat] = 1;
            queried.push_back(cat);
            gold.push_back(polarity_class(l.polarity));
        }
        const std::vector<int> tokens = vocab.encode(ex.tokens);
        if (stage == Stage::acd_only) {
            AcdOutput out = model.forward_acd(tokens);
            loss_sum += acd_loss(out.detection, det_target).item();
            for (std::size_t j = 0; j < det_target.size(); ++j) {
                if ((out.detection[j].item() >= 0.5) == (det_target[j] != 0)) ++correct;
                ++total;
            }
        } else {
            ForwardOutput out = model.forward_eval(tokens, queried);
            const Tensor sentiment = acsa_loss(out.category_dist, gold);
            if (stage == Stage::acsa_only) {
                loss_sum += sentiment.item();
            } else {
                loss_sum += acd_loss(out.detection, det_target).item() + cfg.beta * sentiment.item();
            }
            for (std::size_t k = 0; k < queried.size(); ++k) {
                if (argmax3(out.category_dist[k]) == gold[k]) ++correct;
                ++total;
            }
        }
        ++n_items;
    }
    return {n_items ? loss_sum / static_cast<double>(n_items) : 0.0,
            total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0};
}

struct StageRunner {
    Model& model;
    const std::vector<CorpusExample>& train;
    const std::vector<CorpusExample>& dev;
    const Vocabulary& vocab;
    const std::vector<std::string>& categories;
    const TrainConfig& cfg;
    Rng& batch_rng;
    Rng& dropout_rng;
    const TrainHooks& hooks;
    std::vector<TrainLogRecord>& log;
    std::size_t& global_step;

    // returns the best-dev metric of the stage; leaves the model at its
    // stage-best parameters
    double run(Stage stage, BatchMode mode) {
        const bool higher_better = stage != Stage::acd_only; // accuracy vs dev loss
        EarlyStopper stopper(cfg.patience, higher_better);
        std::map<std::string, std::vector<Real>> best = model.params().snapshot();

        for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            EpochStats stats = run_train_epoch(stage, mode, epoch);
            log.push_back({stage_name(stage), epoch, "train", stats.mean_loss(), stats.accuracy()});

            auto [dev_loss, dev_acc] = evaluate_stage(model, dev, vocab, categories, stage, cfg);
            log.push_back({stage_name(stage), epoch, "dev", dev_loss, dev_acc});

            const double metric = higher_better ? dev_acc : dev_loss;
            if (stopper.update(metric)) best = model.params().snapshot();
            if (stopper.should_stop()) break;
        }
        model.params().restore(best);
        if (hooks.on_stage_end) hooks.on_stage_end(stage_name(stage), model.params());
        return stopper.best();
    }

    EpochStats run_train_epoch(Stage stage, BatchMode mode, std::size_t epoch) {
        EpochStats stats;
        AdamOptimizer& opt = optimizer();
        auto batches = make_batches(train, vocab, categories, cfg.batch_size, mode, batch_rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            Tape::active().clear();
            model.params().zero_grad();

            Tensor batch_loss;
            for (const BatchItem& item : batches[b].items) {
                Tensor item_loss = forward_item_loss(stage, item, stats);
                batch_loss = batch_loss.defined() ? add(batch_loss, item_loss) : item_loss;
            }
            batch_loss = affine(batch_loss, 1.0 / static_cast<double>(batches[b].items.size()), 0.0);
            batch_loss = add(batch_loss, l2_penalty(model.params(), cfg.lambda));

            const double loss_value = batch_loss.item();
            if (!std::isfinite(loss_value))
                throw TrainingError("training diverged: non-finite loss at stage " +
                                    std::string(stage_name(stage)) + ", epoch " +
                                    std::to_string(epoch) + ", batch " + std::to_string(b + 1));

            backward(batch_loss);
            clip_gradients(model.params(), cfg.clip_norm);
            opt.step();
            Tape::active().clear();

            stats.loss_sum += loss_value;
            ++stats.batches;
            ++global_step;
            if (hooks.on_step) hooks.on_step(global_step, loss_value);
        }
        return stats;
    }

    Tensor forward_item_loss(Stage stage, const BatchItem& item, EpochStats& stats) {
        const std::vector<int> tokens = true_tokens(item);
        if (stage == Stage::acd_only) {
            AcdOutput out = model.forward_acd(tokens);
            for (std::size_t j = 0; j < item.detection_target.size(); ++j) {
                if ((out.detection[j].item() >= 0.5) == (item.detection_target[j] != 0))
                    ++stats.correct;
                ++stats.total;
            }
            return acd_loss(out.detection, item.detection_target);
        }
        ForwardOutput out =
            model.forward(tokens, queried_ids(item), /*training=*/true, dropout_rng);
        const std::vector<int> gold = gold_classes(item);
        for (std::size_t k = 0; k < gold.size(); ++k) {
            if (argmax3(out.category_dist[k]) == gold[k]) ++stats.correct;
            ++stats.total;
        }
        Tensor sentiment = acsa_loss(out.category_dist, gold);
        if (stage == Stage::acsa_only) return sentiment;
        return add(acd_loss(out.detection, item.detection_target),
                   affine(sentiment, cfg.beta, 0.0));
    }

    AdamOptimizer& optimizer() {
        // one optimizer per stage: moments must not leak across stages
        if (!opt_ || opt_stage_ != current_stage_) {
            opt_.emplace(model.params(), cfg.lr);
            opt_stage_ = current_stage_;
        }
        return *opt_;
    }

    void begin_stage(int stage_id) { current_stage_ = stage_id; }

    std::optional<AdamOptimizer> opt_;
    int opt_stage_ = -1;
    int current_stage_ = 0;
};

void apply_embedding_trainability(Model& model) {
    if (!model.config().train_embeddings) {
        if (model.params().entry("acd.embedding").trainable)
            model.params().set_trainable("acd.embedding", false);
        if (model.params().entry("acsa.embedding").trainable)
            model.params().set_trainable("acsa.embedding", false);
    }
}

} // namespace

void write_train_log(const std::string& path, const std::vector<TrainLogRecord>& log) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "stage\tepoch\tsplit\tloss\taccuracy\n";
    out.precision(10);
    for (const auto& r : log)
        out << r.stage << '\t' << r.epoch << '\t' << r.split << '\t' << r.loss << '\t'
            << r.accuracy << '\n';
    if (!out) throw DataError("write failed: " + path);
}

TrainResult train_model(Model& model, const std::vector<CorpusExample>& train,
                        const std::vector<CorpusExample>& dev, const Vocabulary& vocab,
                        const std::vector<std::string>& categories, const TrainConfig& cfg,
                        std::uint64_t seed, const TrainHooks& hooks) {
    cfg.validate();
    if (categories.size() != model.config().num_categories)
        throw ContractError("train: category inventory does not match the model");
    if (train.empty()) throw DataError("train: empty training set");
    if (dev.empty()) throw DataError("train: empty dev set");

    Rng batch_rng = Rng::derive(seed, 1);
    Rng dropout_rng = Rng::derive(seed, 2);

    TrainResult result;
    std::size_t global_step = 0;
    StageRunner runner{model,    train,       dev,   vocab,      categories, cfg,
                       batch_rng, dropout_rng, hooks, result.log, global_step};

    const BatchMode mode = schedule_is_single(cfg.schedule) ? BatchMode::single : BatchMode::multi;

    if (schedule_is_pipeline(cfg.schedule)) {
        // stage 1: detection branch alone
        runner.begin_stage(1);
        model.params().set_trainable_prefix("acsa.", false);
        apply_embedding_trainability(model);
        runner.run(Stage::acd_only, mode);

        // stage 2: sentiment branch with detection frozen
        runner.begin_stage(2);
        model.params().set_trainable_prefix("acsa.", true);
        model.params().set_trainable_prefix("acd.", false);
        apply_embedding_trainability(model);
        result.best_dev_metric = runner.run(Stage::acsa_only, mode);

        model.params().set_trainable_prefix("acd.", true);
        apply_embedding_trainability(model);
    } else {
        runner.begin_stage(1);
        result.best_dev_metric = runner.run(Stage::joint, mode);
    }

    result.best_params = model.params().snapshot();
    for (const auto& r : result.log)
        if (r.split == "dev") ++result.epochs_run;
    return result;
}

} // namespace milsent
