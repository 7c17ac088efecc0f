#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "milsent/checkpoint.hpp"
#include "milsent/evaluation.hpp"
#include "milsent/training.hpp"

namespace milsent {

// Fully resolved experiment configuration (defaults already applied). The CLI
// and the python bindings both populate this and drive the functions below.
struct ExperimentConfig {
    // data
    std::string train_path;
    std::string dev_path;      // optional when dev_split_path is given
    std::string test_path;     // optional
    std::string dev_split_path; // id list carving dev out of the train file
    std::string vectors_path;   // optional pretrained vectors
    std::string annotations_path; // optional key-instance annotations
    std::string output_dir;
    std::size_t min_count = 1;

    // model
    std::size_t dim = 300;
    std::size_t depth = 3;
    std::string variant = "standard";
    double dropout = 0.5;
    bool detach_attention = false;
    bool train_embeddings = true;

    // training
    double lr = 0.001;
    std::size_t batch_size = 32;
    double beta = 1.0;
    double lambda = 1e-5;
    double clip_norm = 5.0;
    std::size_t patience = 10;
    std::size_t max_epochs = 100;
    std::string schedule = "multi-joint";
    std::string seeds = "1,2,3,4,5";

    // evaluation
    double kid_threshold = 0.1;
    bool macro_kid = false;

    TrainConfig train_config() const;
    std::vector<std::uint64_t> seed_list() const;
};

// corpus loader: .xml files go through the SemEval parser, anything else
// through the internal line format
std::vector<CorpusExample> load_corpus_file(const std::string& path);

struct PreparedData {
    std::vector<CorpusExample> train;
    std::vector<CorpusExample> dev;
    Vocabulary vocab;
    std::vector<std::string> categories;
};

// parses corpora, applies conflict filtering and the dev split, builds the
// vocabulary from the training split
PreparedData prepare_training_data(const ExperimentConfig& cfg);

// resolved-config echo, re-loadable through the CLI --config option
void write_config_echo(const std::string& path, const ExperimentConfig& cfg);

struct SeedArtifacts {
    std::uint64_t seed = 0;
    std::string checkpoint_path;
    std::string log_path;
    double best_dev_metric = 0.0;
};

// trains one model per seed; writes checkpoints, logs and the config echo
std::vector<SeedArtifacts> run_training(const ExperimentConfig& cfg, std::ostream& progress);

// evaluates checkpoints on a corpus; writes per-seed prediction dumps plus the
// aggregate report when output_dir is non-empty
EvalReport run_evaluation(const std::vector<std::string>& checkpoint_paths,
                          const std::string& corpus_path, const std::string& annotations_path,
                          double kid_threshold, bool macro_kid, const std::string& output_dir);

// per-sentence attention/word-sentiment export: a TSV and a standalone HTML
// heatmap per sentence
void export_attention(const std::string& checkpoint_path, const std::string& corpus_path,
                      const std::string& output_dir);

struct PredictResult {
    std::string category;
    std::array<double, 3> dist{};
    int predicted = -1;
};

std::vector<PredictResult> predict_sentence(const LoadedModel& loaded, const std::string& text,
                                            const std::vector<std::string>& categories);

} // namespace milsent
