#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "milsent/data.hpp"
#include "milsent/model.hpp"

namespace milsent {

constexpr double kKeyInstanceThreshold = 0.1;

// one (sentence, mentioned category) evaluation pair
struct PairPrediction {
    std::string sentence_id;
    std::string category;
    int predicted = -1;
    int gold = -1;
    std::array<double, 3> dist{};
    std::vector<double> alpha;
    std::vector<int> word_argmax;                 // empty for the womil variant
    std::vector<std::array<double, 3>> word_dist; // softmaxed word logits
};

// eval-mode forward over a corpus, querying the gold mentioned categories
std::vector<PairPrediction> predict_corpus(const Model& model,
                                           const std::vector<CorpusExample>& examples,
                                           const Vocabulary& vocab,
                                           const std::vector<std::string>& categories);

double acsa_accuracy(const std::vector<PairPrediction>& preds);
std::map<std::string, double> per_category_accuracy(const std::vector<PairPrediction>& preds);

// positions with weight >= threshold (boundary inclusive)
std::vector<std::size_t> extract_key_instances(const std::vector<double>& alpha,
                                               double threshold = kKeyInstanceThreshold);

// micro-averaged token-level F1 over annotated pairs (macro behind the flag);
// pairs with empty gold are skipped
double kid_f1(const std::vector<PairPrediction>& preds,
              const std::vector<KeyInstanceAnnotation>& annotations,
              double threshold = kKeyInstanceThreshold, bool macro = false);

// fraction of gold key-instance positions whose word argmax matches the
// annotated polarity; nullopt when predictions carry no word sentiments
std::optional<double> kisc_accuracy(const std::vector<PairPrediction>& preds,
                                    const std::vector<KeyInstanceAnnotation>& annotations);

struct RunMetrics {
    double acsa_acc = 0.0;
    std::map<std::string, double> per_category;
    std::optional<double> kid;
    std::optional<double> kisc;
};

RunMetrics compute_run_metrics(const std::vector<PairPrediction>& preds,
                               const std::vector<KeyInstanceAnnotation>* annotations,
                               double threshold = kKeyInstanceThreshold, bool macro_kid = false);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0; // population
};

struct EvalReport {
    std::size_t n_runs = 0;
    MeanStd acsa;
    std::map<std::string, MeanStd> per_category;
    std::optional<MeanStd> kid;
    std::optional<MeanStd> kisc;
    std::vector<RunMetrics> runs;
};

EvalReport aggregate_runs(const std::vector<RunMetrics>& runs);

// prediction dump for external scoring: one TSV line per pair
void write_predictions(const std::string& path, const std::vector<PairPrediction>& preds);

std::string format_report(const EvalReport& report);
// line-delimited JSON records
void write_report_records(const std::string& path, const EvalReport& report);

} // namespace milsent
