#include "milsent/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "milsent/errors.hpp"

namespace fs = std::filesystem;

namespace milsent {

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig tc;
    tc.lr = lr;
    tc.batch_size = batch_size;
    tc.beta = beta;
    tc.lambda = lambda;
    tc.clip_norm = clip_norm;
    tc.patience = patience;
    tc.max_epochs = max_epochs;
    tc.schedule = schedule_from_string(schedule);
    return tc;
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
    std::vector<std::uint64_t> out;
    std::string cur;
    for (char c : seeds + ",") {
        if (c == ',') {
            if (!cur.empty()) {
                try {
                    out.push_back(std::stoull(cur));
                } catch (const std::exception&) {
                    throw ConfigError("bad seed value '" + cur + "'");
                }
                cur.clear();
            }
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (out.empty()) throw ConfigError("seed list is empty");
    return out;
}

std::vector<CorpusExample> load_corpus_file(const std::string& path) {
    const bool xml = path.size() >= 4 && path.substr(path.size() - 4) == ".xml";
    return xml ? parse_semeval_xml(path) : read_corpus(path);
}

PreparedData prepare_training_data(const ExperimentConfig& cfg) {
    if (cfg.train_path.empty()) throw ConfigError("no training corpus given");
    PreparedData data;
    auto train = filter_conflicts(load_corpus_file(cfg.train_path));

    if (!cfg.dev_split_path.empty()) {
        auto ids = read_id_list(cfg.dev_split_path);
        auto [rest, dev] = split_by_ids(train, ids);
        data.train = std::move(rest);
        data.dev = std::move(dev);
        if (data.dev.empty())
            throw DataError("dev split " + cfg.dev_split_path +
                            " selected no sentences from the training corpus");
    } else if (!cfg.dev_path.empty()) {
        data.train = std::move(train);
        data.dev = filter_conflicts(load_corpus_file(cfg.dev_path));
    } else {
        throw ConfigError("need either a dev corpus or a dev-split id list");
    }
    if (data.train.empty()) throw DataError("training corpus is empty after filtering");

    data.vocab = Vocabulary::build(data.train, cfg.min_count);

    std::vector<CorpusExample> both = data.train;
    both.insert(both.end(), data.dev.begin(), data.dev.end());
    data.categories = collect_categories(both);
    if (data.categories.empty()) throw DataError("no aspect categories in the corpus");
    return data;
}

namespace {

std::string bool_str(bool b) { return b ? "true" : "false"; }

} // namespace

void write_config_echo(const std::string& path, const ExperimentConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out.precision(17);
    out << "train=" << cfg.train_path << "\n";
    if (!cfg.dev_path.empty()) out << "dev=" << cfg.dev_path << "\n";
    if (!cfg.test_path.empty()) out << "test=" << cfg.test_path << "\n";
    if (!cfg.dev_split_path.empty()) out << "dev-split=" << cfg.dev_split_path << "\n";
    if (!cfg.vectors_path.empty()) out << "vectors=" << cfg.vectors_path << "\n";
    if (!cfg.annotations_path.empty()) out << "annotations=" << cfg.annotations_path << "\n";
    out << "output=" << cfg.output_dir << "\n";
    out << "min-count=" << cfg.min_count << "\n";
    out << "dim=" << cfg.dim << "\n";
    out << "depth=" << cfg.depth << "\n";
    out << "variant=" << cfg.variant << "\n";
    out << "dropout=" << cfg.dropout << "\n";
    out << "detach-attention=" << bool_str(cfg.detach_attention) << "\n";
    out << "train-embeddings=" << bool_str(cfg.train_embeddings) << "\n";
    out << "lr=" << cfg.lr << "\n";
    out << "batch-size=" << cfg.batch_size << "\n";
    out << "beta=" << cfg.beta << "\n";
    out << "lambda=" << cfg.lambda << "\n";
    out << "clip-norm=" << cfg.clip_norm << "\n";
    out << "patience=" << cfg.patience << "\n";
    out << "max-epochs=" << cfg.max_epochs << "\n";
    out << "schedule=" << cfg.schedule << "\n";
    out << "seeds=" << cfg.seeds << "\n";
    out << "kid-threshold=" << cfg.kid_threshold << "\n";
    out << "macro-kid=" << bool_str(cfg.macro_kid) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

std::vector<SeedArtifacts> run_training(const ExperimentConfig& cfg, std::ostream& progress) {
    const TrainConfig tc = cfg.train_config(); // validates schedule early
    tc.validate();
    const auto seeds = cfg.seed_list();
    const ModelVariant variant = variant_from_string(cfg.variant);
    if (cfg.output_dir.empty()) throw ConfigError("no output directory given");

    PreparedData data = prepare_training_data(cfg);

    // one read serves every seed; each seed still randomizes the rows the
    // file does not cover
    std::map<int, std::vector<Real>> pretrained;
    if (!cfg.vectors_path.empty())
        pretrained = read_pretrained_rows(cfg.vectors_path, data.vocab, cfg.dim);

    fs::create_directories(cfg.output_dir);
    write_config_echo((fs::path(cfg.output_dir) / "config_resolved.ini").string(), cfg);

    std::vector<SeedArtifacts> artifacts;
    for (std::uint64_t seed : seeds) {
        ModelConfig mc;
        mc.num_categories = data.categories.size();
        mc.dim = cfg.dim;
        mc.depth = cfg.depth;
        mc.variant = variant;
        mc.dropout = cfg.dropout;
        mc.detach_attention = cfg.detach_attention;
        mc.train_embeddings = cfg.train_embeddings;
        mc.vocab_size = data.vocab.size();

        Model model(mc, seed);
        if (!pretrained.empty()) {
            // both embedding layers start from the same pretrained vectors
            const std::size_t acd = apply_pretrained_rows(pretrained, model.acd_embedding());
            apply_pretrained_rows(pretrained, model.acsa_embedding());
            progress << "seed " << seed << ": loaded " << acd << "/" << data.vocab.size()
                     << " pretrained vectors\n";
        }

        progress << "seed " << seed << ": training (" << cfg.schedule << ", N="
                 << data.categories.size() << ", |V|=" << data.vocab.size() << ")\n";
        TrainResult result =
            train_model(model, data.train, data.dev, data.vocab, data.categories, tc, seed);

        SeedArtifacts art;
        art.seed = seed;
        art.best_dev_metric = result.best_dev_metric;
        art.checkpoint_path =
            (fs::path(cfg.output_dir) / ("model_seed" + std::to_string(seed) + ".ckpt")).string();
        art.log_path =
            (fs::path(cfg.output_dir) / ("train_log_seed" + std::to_string(seed) + ".tsv")).string();
        save_checkpoint(art.checkpoint_path, model, data.vocab, data.categories);
        write_train_log(art.log_path, result.log);
        progress << "seed " << seed << ": best dev metric " << art.best_dev_metric << ", "
                 << result.epochs_run << " epochs\n";
        artifacts.push_back(std::move(art));
    }
    return artifacts;
}

EvalReport run_evaluation(const std::vector<std::string>& checkpoint_paths,
                          const std::string& corpus_path, const std::string& annotations_path,
                          double kid_threshold, bool macro_kid, const std::string& output_dir) {
    if (checkpoint_paths.empty()) throw ConfigError("no checkpoints given");
    auto corpus = filter_conflicts(load_corpus_file(corpus_path));
    if (corpus.empty()) throw DataError("evaluation corpus is empty: " + corpus_path);

    std::vector<KeyInstanceAnnotation> annotations;
    const bool with_annotations = !annotations_path.empty();
    if (with_annotations) {
        annotations = read_key_instances(annotations_path);
        validate_key_instances(annotations, corpus);
    }

    if (!output_dir.empty()) fs::create_directories(output_dir);

    std::vector<RunMetrics> runs;
    for (std::size_t i = 0; i < checkpoint_paths.size(); ++i) {
        LoadedModel loaded = load_checkpoint(checkpoint_paths[i]);
        auto preds = predict_corpus(*loaded.model, corpus, loaded.vocab, loaded.categories);
        runs.push_back(compute_run_metrics(preds, with_annotations ? &annotations : nullptr,
                                           kid_threshold, macro_kid));
        if (!output_dir.empty())
            write_predictions(
                (fs::path(output_dir) / ("predictions_run" + std::to_string(i) + ".tsv")).string(),
                preds);
    }

    EvalReport report = aggregate_runs(runs);
    if (!output_dir.empty()) {
        write_report_records((fs::path(output_dir) / "report.jsonl").string(), report);
        std::ofstream txt(fs::path(output_dir) / "report.txt");
        txt << format_report(report);
    }
    return report;
}

// ---- attention export -------------------------------------------------------------

namespace {

std::string html_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

void write_sentence_html(const std::string& path, const CorpusExample& ex,
                         const std::vector<std::pair<std::string, std::vector<double>>>& alpha_rows,
                         const std::vector<std::array<double, 3>>& word_dist) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n"
        << "<title>" << html_escape(ex.id) << "</title>\n"
        << "<style>body{font-family:sans-serif}table{border-collapse:collapse}"
        << "td,th{padding:4px 8px;text-align:center;border:1px solid #ddd}"
        << "th{background:#f5f5f5}</style></head><body>\n"
        << "<h2>sentence " << html_escape(ex.id) << "</h2>\n"
        << "<p>" << html_escape(ex.text) << "</p>\n<table>\n<tr><th></th>";
    for (const auto& tok : ex.tokens) out << "<th>" << html_escape(tok) << "</th>";
    out << "</tr>\n";
    auto cell = [&](double v, int r, int g, int b) {
        out << "<td style=\"background:rgba(" << r << "," << g << "," << b << "," << v
            << ")\">";
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.3f", v);
        out << buf << "</td>";
    };
    for (const auto& [label, alpha] : alpha_rows) {
        out << "<tr><th>" << html_escape(label) << "</th>";
        for (double v : alpha) cell(v, 30, 90, 200);
        out << "</tr>\n";
    }
    const char* cls[3] = {"Neg", "Neu", "Pos"};
    const int colors[3][3] = {{220, 60, 40}, {150, 150, 150}, {40, 160, 60}};
    if (!word_dist.empty()) {
        for (int c = 0; c < 3; ++c) {
            out << "<tr><th>" << cls[c] << "</th>";
            for (const auto& d : word_dist)
                cell(d[static_cast<std::size_t>(c)], colors[c][0], colors[c][1], colors[c][2]);
            out << "</tr>\n";
        }
    }
    out << "</table></body></html>\n";
}

} // namespace

void export_attention(const std::string& checkpoint_path, const std::string& corpus_path,
                      const std::string& output_dir) {
    LoadedModel loaded = load_checkpoint(checkpoint_path);
    auto corpus = filter_conflicts(load_corpus_file(corpus_path));
    if (corpus.empty()) throw DataError("corpus is empty: " + corpus_path);
    fs::create_directories(output_dir);

    auto preds = predict_corpus(*loaded.model, corpus, loaded.vocab, loaded.categories);
    std::map<std::string, std::vector<const PairPrediction*>> by_sentence;
    for (const auto& p : preds) by_sentence[p.sentence_id].push_back(&p);

    for (const auto& ex : corpus) {
        const auto& pairs = by_sentence.at(ex.id);
        std::vector<std::pair<std::string, std::vector<double>>> alpha_rows;
        for (const PairPrediction* p : pairs) alpha_rows.emplace_back(p->category, p->alpha);
        const auto& word_dist = pairs.front()->word_dist; // shared across categories

        std::ofstream tsv(fs::path(output_dir) / (ex.id + ".tsv"));
        if (!tsv) throw DataError("cannot write attention export for sentence " + ex.id);
        tsv.precision(10);
        tsv << "token";
        for (const auto& tok : ex.tokens) tsv << '\t' << tok;
        tsv << '\n';
        for (const auto& [cat, alpha] : alpha_rows) {
            tsv << "alpha:" << cat;
            for (double v : alpha) tsv << '\t' << v;
            tsv << '\n';
        }
        const char* cls[3] = {"Neg", "Neu", "Pos"};
        if (!word_dist.empty()) {
            for (int c = 0; c < 3; ++c) {
                tsv << "sent:" << cls[c];
                for (const auto& d : word_dist) tsv << '\t' << d[static_cast<std::size_t>(c)];
                tsv << '\n';
            }
        }
        write_sentence_html((fs::path(output_dir) / (ex.id + ".html")).string(), ex, alpha_rows,
                            word_dist);
    }
}

std::vector<PredictResult> predict_sentence(const LoadedModel& loaded, const std::string& text,
                                            const std::vector<std::string>& categories) {
    if (categories.empty()) throw ConfigError("no categories requested");
    std::map<std::string, std::size_t> cat_index;
    for (std::size_t i = 0; i < loaded.categories.size(); ++i)
        cat_index[loaded.categories[i]] = i;

    std::vector<std::size_t> queried;
    for (const auto& name : categories) {
        auto it = cat_index.find(name);
        if (it == cat_index.end()) {
            std::string known;
            for (const auto& c : loaded.categories) known += (known.empty() ? "" : ", ") + c;
            throw ConfigError("unknown category '" + name + "' (model knows: " + known + ")");
        }
        queried.push_back(it->second);
    }

    const auto tokens = tokenize(text);
    if (tokens.empty()) throw DataError("sentence has no tokens");
    NoGradGuard ng;
    ForwardOutput out = loaded.model->forward_eval(loaded.vocab.encode(tokens), queried);

    std::vector<PredictResult> results;
    for (std::size_t k = 0; k < queried.size(); ++k) {
        PredictResult r;
        r.category = categories[k];
        const Tensor& d = out.category_dist[k];
        r.dist = {d.at(0), d.at(1), d.at(2)};
        r.predicted = 0;
        for (int c = 1; c < 3; ++c)
            if (r.dist[static_cast<std::size_t>(c)] > r.dist[static_cast<std::size_t>(r.predicted)])
                r.predicted = c;
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace milsent
