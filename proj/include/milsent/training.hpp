#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "milsent/data.hpp"
#include "milsent/model.hpp"

namespace milsent {

// single/multi: one (sentence, category) pair per item vs all categories at
// once. pipeline/joint: detection trained before sentiment vs both losses
// minimized together.
enum class Schedule { single_pipeline, single_joint, multi_pipeline, multi_joint };

std::string to_string(Schedule s);
Schedule schedule_from_string(const std::string& s);
bool schedule_is_single(Schedule s);
bool schedule_is_pipeline(Schedule s);

struct TrainConfig {
    double lr = 0.001;
    std::size_t batch_size = 32;
    double beta = 1.0;     // sentiment loss weight
    double lambda = 1e-5;  // L2 factor
    double clip_norm = 5.0; // global gradient norm; 0 disables
    std::size_t patience = 10;
    std::size_t max_epochs = 100;
    Schedule schedule = Schedule::multi_joint;

    void validate() const;
};

// ---- losses (graph-building) ------------------------------------------------

// summed binary cross-entropy over all categories
Tensor acd_loss(const std::vector<Tensor>& detection, const std::vector<std::uint8_t>& target);

// summed one-hot cross-entropy over the mentioned categories only; dists and
// gold_classes are aligned
Tensor acsa_loss(const std::vector<Tensor>& dists, const std::vector<int>& gold_classes);

// lambda * sum of squared values over every trainable parameter
Tensor l2_penalty(const ParamRegistry& params, double lambda);

Tensor combined_loss(const Tensor& detection_loss, const Tensor& sentiment_loss, double beta,
                     double lambda, const ParamRegistry& params);

// ---- optimizer ------------------------------------------------------------------

struct AdamState {
    std::vector<Real> m, v;
    std::size_t step = 0;
};

class AdamOptimizer {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    AdamOptimizer(ParamRegistry& params, double lr) : params_(&params), lr_(lr) {}

    // bias-corrected update on every trainable parameter; frozen rows and
    // non-trainable entries are left untouched
    void step();

    double lr() const { return lr_; }

private:
    ParamRegistry* params_;
    double lr_;
    std::map<std::string, AdamState> state_;
};

double gradient_global_norm(const ParamRegistry& params);
void clip_gradients(ParamRegistry& params, double max_norm);

// ---- early stopping ---------------------------------------------------------------

// stops after exactly `patience` consecutive non-improving updates
class EarlyStopper {
public:
    EarlyStopper(std::size_t patience, bool higher_is_better)
        : patience_(patience), higher_better_(higher_is_better) {}

    // returns true when `metric` strictly improves on the best so far
    bool update(double metric);
    bool should_stop() const { return since_best_ >= patience_; }
    double best() const { return best_; }
    std::size_t epochs_since_best() const { return since_best_; }

private:
    std::size_t patience_;
    bool higher_better_;
    bool seen_any_ = false;
    double best_ = 0.0;
    std::size_t since_best_ = 0;
};

// ---- training loop ------------------------------------------------------------------

struct TrainLogRecord {
    std::string stage; // "joint", "acd", "acsa"
    std::size_t epoch = 0;
    std::string split; // "train" or "dev"
    double loss = 0.0;
    double accuracy = 0.0;
};

void write_train_log(const std::string& path, const std::vector<TrainLogRecord>& log);

struct TrainHooks {
    // called after every optimizer step with the batch loss
    std::function<void(std::size_t step, double loss)> on_step;
    // called when a stage finishes, after its best parameters are restored
    std::function<void(const std::string& stage, const ParamRegistry& params)> on_stage_end;
};

struct TrainResult {
    std::map<std::string, std::vector<Real>> best_params;
    std::vector<TrainLogRecord> log;
    double best_dev_metric = 0.0;
    std::size_t epochs_run = 0;
};

// trains in place and leaves the model at its best-dev parameters
TrainResult train_model(Model& model, const std::vector<CorpusExample>& train,
                        const std::vector<CorpusExample>& dev, const Vocabulary& vocab,
                        const std::vector<std::string>& categories, const TrainConfig& cfg,
                        std::uint64_t seed, const TrainHooks& hooks = {});

// mentioned-category accuracy of argmax predictions, eval mode
double dataset_acsa_accuracy(const Model& model, const std::vector<CorpusExample>& examples,
                             const Vocabulary& vocab, const std::vector<std::string>& categories);

} // namespace milsent
