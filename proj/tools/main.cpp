// milsent command line: train / eval / predict / make-hard / export-attention.
// Exit codes: 0 success, 2 config error, 3 data error, 4 training divergence.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "milsent/experiment.hpp"

namespace fs = std::filesystem;
using namespace milsent;

namespace {

struct EvalArgs {
    std::vector<std::string> checkpoints;
    std::string corpus;
    std::string annotations;
    std::string output;
    double kid_threshold = 0.1;
    bool macro_kid = false;
};

struct PredictArgs {
    std::string checkpoint;
    std::string text;
    std::vector<std::string> categories;
};

struct MakeHardArgs {
    std::string input;
    std::string output;
};

struct ExportArgs {
    std::string checkpoint;
    std::string corpus;
    std::string output;
};

void check_exists(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

int run_train(const ExperimentConfig& cfg) {
    check_exists(cfg.train_path, "training corpus");
    if (!cfg.dev_path.empty()) check_exists(cfg.dev_path, "dev corpus");
    if (!cfg.dev_split_path.empty()) check_exists(cfg.dev_split_path, "dev split");
    if (!cfg.vectors_path.empty()) check_exists(cfg.vectors_path, "vector file");
    auto artifacts = run_training(cfg, std::cout);
    for (const auto& a : artifacts) std::cout << "wrote " << a.checkpoint_path << "\n";
    return 0;
}

int run_eval(const EvalArgs& args) {
    for (const auto& c : args.checkpoints) check_exists(c, "checkpoint");
    check_exists(args.corpus, "corpus");
    if (!args.annotations.empty()) check_exists(args.annotations, "annotation file");
    EvalReport report = run_evaluation(args.checkpoints, args.corpus, args.annotations,
                                       args.kid_threshold, args.macro_kid, args.output);
    std::cout << format_report(report);
    if (!args.output.empty()) std::cout << "wrote " << args.output << "/report.jsonl\n";
    return 0;
}

int run_predict(const PredictArgs& args) {
    check_exists(args.checkpoint, "checkpoint");
    LoadedModel loaded = load_checkpoint(args.checkpoint);
    const char* cls[3] = {"Neg", "Neu", "Pos"};
    for (const auto& r : predict_sentence(loaded, args.text, args.categories)) {
        std::cout << r.category << '\t' << cls[r.predicted];
        std::cout.precision(6);
        for (double v : r.dist) std::cout << '\t' << v;
        std::cout << '\n';
    }
    return 0;
}

int run_make_hard(const MakeHardArgs& args) {
    check_exists(args.input, "corpus");
    auto hard = make_hard_test_set(filter_conflicts(load_corpus_file(args.input)));
    write_corpus(args.output, hard);
    std::cout << "kept " << hard.size() << " sentences -> " << args.output << "\n";
    return 0;
}

int run_export(const ExportArgs& args) {
    check_exists(args.checkpoint, "checkpoint");
    check_exists(args.corpus, "corpus");
    export_attention(args.checkpoint, args.corpus, args.output);
    std::cout << "wrote attention exports to " << args.output << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"aspect-category sentiment analysis via multi-instance learning"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    auto* train = app.add_subcommand("train", "train one model per seed");
    train->set_config("--config", "", "key=value config file (CLI options take precedence)");
    train->allow_config_extras(false);
    train->add_option("--train", cfg.train_path, "training corpus (XML or internal format)");
    train->add_option("--dev", cfg.dev_path, "dev corpus");
    train->add_option("--test", cfg.test_path, "test corpus (recorded in the config echo)");
    train->add_option("--dev-split", cfg.dev_split_path, "sentence-id list carving dev from train");
    train->add_option("--vectors", cfg.vectors_path, "pretrained word vectors (text format)");
    train->add_option("--annotations", cfg.annotations_path, "key-instance annotations");
    train->add_option("--output", cfg.output_dir, "output directory")->required();
    train->add_option("--min-count", cfg.min_count, "vocabulary frequency cutoff");
    train->add_option("--dim", cfg.dim, "model dimension d");
    train->add_option("--depth", cfg.depth, "Bi-LSTM depth L");
    train->add_option("--variant", cfg.variant, "standard|womil|affine|softmax");
    train->add_option("--dropout", cfg.dropout, "dropout probability");
    train->add_flag("--detach-attention", cfg.detach_attention,
                    "stop sentiment gradients at the attention weights");
    train->add_option("--train-embeddings", cfg.train_embeddings,
                      "update embeddings during training (true/false)");
    train->add_option("--lr", cfg.lr, "Adam learning rate");
    train->add_option("--batch-size", cfg.batch_size, "batch size");
    train->add_option("--beta", cfg.beta, "sentiment loss weight");
    train->add_option("--lambda", cfg.lambda, "L2 regularization factor");
    train->add_option("--clip-norm", cfg.clip_norm, "global gradient norm clip (0 disables)");
    train->add_option("--patience", cfg.patience, "early-stopping patience");
    train->add_option("--max-epochs", cfg.max_epochs, "epoch cap");
    train->add_option("--schedule", cfg.schedule,
                      "single-pipeline|single-joint|multi-pipeline|multi-joint");
    train->add_option("--seeds", cfg.seeds, "comma-separated seed list");
    train->add_option("--kid-threshold", cfg.kid_threshold, "key-instance threshold");
    train->add_flag("--macro-kid", cfg.macro_kid, "macro-average the KID F1");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "evaluate checkpoints on a corpus");
    eval->add_option("--checkpoint", eval_args.checkpoints, "checkpoint file(s)")->required();
    eval->add_option("--corpus", eval_args.corpus, "evaluation corpus")->required();
    eval->add_option("--annotations", eval_args.annotations,
                     "key-instance annotations (enables KID/KISC)");
    eval->add_option("--output", eval_args.output, "directory for dumps and reports");
    eval->add_option("--kid-threshold", eval_args.kid_threshold, "key-instance threshold");
    eval->add_flag("--macro-kid", eval_args.macro_kid, "macro-average the KID F1");

    PredictArgs predict_args;
    auto* predict = app.add_subcommand("predict", "classify one sentence");
    predict->add_option("--checkpoint", predict_args.checkpoint, "checkpoint file")->required();
    predict->add_option("--text", predict_args.text, "sentence text")->required();
    predict->add_option("--categories", predict_args.categories, "aspect categories to query")
        ->required();

    MakeHardArgs hard_args;
    auto* make_hard = app.add_subcommand("make-hard", "build the hard test subset");
    make_hard->add_option("--input", hard_args.input, "test corpus (XML or internal)")->required();
    make_hard->add_option("--output", hard_args.output, "output corpus path")->required();

    ExportArgs export_args;
    auto* exporter = app.add_subcommand("export-attention", "per-sentence heatmap export");
    exporter->add_option("--checkpoint", export_args.checkpoint, "checkpoint file")->required();
    exporter->add_option("--corpus", export_args.corpus, "corpus to visualize")->required();
    exporter->add_option("--output", export_args.output, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(train)) return run_train(cfg);
        if (app.got_subcommand(eval)) return run_eval(eval_args);
        if (app.got_subcommand(predict)) return run_predict(predict_args);
        if (app.got_subcommand(make_hard)) return run_make_hard(hard_args);
        if (app.got_subcommand(exporter)) return run_export(export_args);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
