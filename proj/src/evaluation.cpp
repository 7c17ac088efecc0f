#include "milsent/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "milsent/errors.hpp"

namespace milsent {

namespace {

int argmax3(const std::array<double, 3>& d) {
    int best = 0;
    for (int c = 1; c < 3; ++c)
        if (d[static_cast<std::size_t>(c)] > d[static_cast<std::size_t>(best)]) best = c;
    return best;
}

} // namespace

std::vector<PairPrediction> predict_corpus(const Model& model,
                                           const std::vector<CorpusExample>& examples,
                                           const Vocabulary& vocab,
                                           const std::vector<std::string>& categories) {
    NoGradGuard ng;
    std::map<std::string, std::size_t> cat_index;
    for (std::size_t i = 0; i < categories.size(); ++i) cat_index[categories[i]] = i;

    std::vector<PairPrediction> preds;
    for (const auto& ex : examples) {
        std::vector<std::size_t> queried;
        std::vector<int> gold;
        for (const auto& l : ex.labels) {
            auto it = cat_index.find(l.category);
            if (it == cat_index.end())
                throw DataError("sentence " + ex.id + " mentions category '" + l.category +
                                "' unknown to the model");
            queried.push_back(it->second);
            gold.push_back(polarity_class(l.polarity));
        }
        ForwardOutput out = model.forward_eval(vocab.encode(ex.tokens), queried);

        std::vector<int> word_argmax;
        std::vector<std::array<double, 3>> word_dist;
        if (out.word_logits.defined()) {
            Tensor dist = softmax_rows(out.word_logits);
            for (std::size_t i = 0; i < dist.rows(); ++i) {
                std::array<double, 3> row{dist.at(i, 0), dist.at(i, 1), dist.at(i, 2)};
                word_argmax.push_back(argmax3(row));
                word_dist.push_back(row);
            }
        }

        for (std::size_t k = 0; k < queried.size(); ++k) {
            PairPrediction p;
            p.sentence_id = ex.id;
            p.category = ex.labels[k].category;
            p.gold = gold[k];
            const Tensor& d = out.category_dist[k];
            p.dist = {d.at(0), d.at(1), d.at(2)};
            p.predicted = argmax3(p.dist);
            const Tensor& alpha = out.attention[queried[k]];
            p.alpha.assign(alpha.values().begin(), alpha.values().end());
            p.word_argmax = word_argmax;
            p.word_dist = word_dist;
            preds.push_back(std::move(p));
        }
    }
    return preds;
}

double acsa_accuracy(const std::vector<PairPrediction>& preds) {
    if (preds.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& p : preds)
        if (p.predicted == p.gold) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::map<std::string, double> per_category_accuracy(const std::vector<PairPrediction>& preds) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts; // correct, total
    for (const auto& p : preds) {
        auto& [correct, total] = counts[p.category];
        if (p.predicted == p.gold) ++correct;
        ++total;
    }
    std::map<std::string, double> out;
    for (const auto& [cat, ct] : counts)
        out[cat] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    return out;
}

std::vector<std::size_t> extract_key_instances(const std::vector<double>& alpha,
                                               double threshold) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        if (alpha[i] >= threshold) out.push_back(i);
    return out;
}

namespace {

const PairPrediction* find_pair(const std::map<std::pair<std::string, std::string>,
                                               const PairPrediction*>& index,
                                const KeyInstanceAnnotation& ann) {
    auto it = index.find({ann.sentence_id, ann.category});
    return it == index.end() ? nullptr : it->second;
}

std::map<std::pair<std::string, std::string>, const PairPrediction*>
index_pairs(const std::vector<PairPrediction>& preds) {
    std::map<std::pair<std::string, std::string>, const PairPrediction*> index;
    for (const auto& p : preds) index[{p.sentence_id, p.category}] = &p;
    return index;
}

} // namespace

double kid_f1(const std::vector<PairPrediction>& preds,
              const std::vector<KeyInstanceAnnotation>& annotations, double threshold,
              bool macro) {
    auto index = index_pairs(preds);
    std::size_t tp = 0, fp = 0, fn = 0;
    double macro_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& ann : annotations) {
        if (ann.positions.empty()) continue; // empty gold: pair skipped
        const PairPrediction* pair = find_pair(index, ann);
        if (!pair)
            throw DataError("no prediction for annotated pair (" + ann.sentence_id + ", " +
                            ann.category + ")");
        const std::set<std::size_t> gold(ann.positions.begin(), ann.positions.end());
        const auto predicted = extract_key_instances(pair->alpha, threshold);
        std::size_t inter = 0;
        for (std::size_t pos : predicted)
            if (gold.count(pos)) ++inter;
        tp += inter;
        fp += predicted.size() - inter;
        fn += gold.size() - inter;
        if (macro) {
            const double precision =
                predicted.empty() ? 0.0
                                  : static_cast<double>(inter) / static_cast<double>(predicted.size());
            const double recall = static_cast<double>(inter) / static_cast<double>(gold.size());
            macro_sum += (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall)
                                                    : 0.0;
        }
        ++pairs;
    }
    if (pairs == 0) return 0.0;
    if (macro) return macro_sum / static_cast<double>(pairs);
    const double precision =
        tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

std::optional<double> kisc_accuracy(const std::vector<PairPrediction>& preds,
                                    const std::vector<KeyInstanceAnnotation>& annotations) {
    auto index = index_pairs(preds);
    std::size_t correct = 0, total = 0;
    for (const auto& ann : annotations) {
        if (ann.positions.empty()) continue;
        const PairPrediction* pair = find_pair(index, ann);
        if (!pair)
            throw DataError("no prediction for annotated pair (" + ann.sentence_id + ", " +
                            ann.category + ")");
        if (pair->word_argmax.empty()) return std::nullopt; // no word sentiments (womil)
        for (const auto& [pos, pol] : ann.polarities) {
            if (pos >= pair->word_argmax.size())
                throw DataError("annotation position " + std::to_string(pos) +
                                " out of range for sentence " + ann.sentence_id);
            if (pair->word_argmax[pos] == polarity_class(pol)) ++correct;
            ++total;
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(correct) / static_cast<double>(total);
}

RunMetrics compute_run_metrics(const std::vector<PairPrediction>& preds,
                               const std::vector<KeyInstanceAnnotation>* annotations,
                               double threshold, bool macro_kid) {
    RunMetrics m;
    m.acsa_acc = acsa_accuracy(preds);
    m.per_category = per_category_accuracy(preds);
    if (annotations) {
        m.kid = kid_f1(preds, *annotations, threshold, macro_kid);
        m.kisc = kisc_accuracy(preds, *annotations);
    }
    return m;
}

namespace {

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd ms;
    if (xs.empty()) return ms;
    double total = 0.0;
    for (double x : xs) total += x;
    ms.mean = total / static_cast<double>(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - ms.mean) * (x - ms.mean);
    ms.stddev = std::sqrt(sq / static_cast<double>(xs.size()));
    return ms;
}

} // namespace

EvalReport aggregate_runs(const std::vector<RunMetrics>& runs) {
    if (runs.empty()) throw ContractError("aggregate_runs: no runs");
    EvalReport report;
    report.n_runs = runs.size();
    report.runs = runs;

    std::vector<double> acsa;
    for (const auto& r : runs) acsa.push_back(r.acsa_acc);
    report.acsa = mean_std(acsa);

    std::set<std::string> cats;
    for (const auto& r : runs)
        for (const auto& [cat, acc] : r.per_category) cats.insert(cat);
    for (const auto& cat : cats) {
        std::vector<double> vals;
        for (const auto& r : runs) {
            auto it = r.per_category.find(cat);
            if (it != r.per_category.end()) vals.push_back(it->second);
        }
        report.per_category[cat] = mean_std(vals);
    }

    std::vector<double> kid, kisc;
    for (const auto& r : runs) {
        if (r.kid) kid.push_back(*r.kid);
        if (r.kisc) kisc.push_back(*r.kisc);
    }
    if (!kid.empty()) report.kid = mean_std(kid);
    if (!kisc.empty()) report.kisc = mean_std(kisc);
    return report;
}

void write_predictions(const std::string& path, const std::vector<PairPrediction>& preds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "sentence_id\tcategory\tpredicted\tgold\tdist\talpha\tword_argmax\n";
    out.precision(10);
    for (const auto& p : preds) {
        out << p.sentence_id << '\t' << p.category << '\t' << p.predicted << '\t' << p.gold
            << '\t';
        out << p.dist[0] << ',' << p.dist[1] << ',' << p.dist[2] << '\t';
        for (std::size_t i = 0; i < p.alpha.size(); ++i) out << (i ? "," : "") << p.alpha[i];
        out << '\t';
        for (std::size_t i = 0; i < p.word_argmax.size(); ++i)
            out << (i ? "," : "") << p.word_argmax[i];
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

std::string format_report(const EvalReport& report) {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed;
    auto line = [&](const std::string& name, const MeanStd& ms) {
        os << "  " << name;
        for (std::size_t i = name.size(); i < 28; ++i) os << ' ';
        os << ms.mean * 100.0 << " (+-" << ms.stddev * 100.0 << ")\n";
    };
    os << "runs: " << report.n_runs << "\n";
    line("acsa accuracy", report.acsa);
    for (const auto& [cat, ms] : report.per_category) line("accuracy[" + cat + "]", ms);
    if (report.kid) line("key-instance detection F1", *report.kid);
    if (report.kisc) line("key-instance sentiment acc", *report.kisc);
    return os.str();
}

void write_report_records(const std::string& path, const EvalReport& report) {
    using nlohmann::json;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    auto aggregate = [&](const std::string& metric, const MeanStd& ms, json extra = json::object()) {
        json j = {{"record", "aggregate"},
                  {"metric", metric},
                  {"mean", ms.mean},
                  {"std", ms.stddev},
                  {"n_runs", report.n_runs}};
        j.update(extra);
        out << j.dump() << '\n';
    };
    aggregate("acsa_accuracy", report.acsa);
    for (const auto& [cat, ms] : report.per_category)
        aggregate("category_accuracy", ms, {{"category", cat}});
    if (report.kid) aggregate("kid_f1", *report.kid);
    if (report.kisc) aggregate("kisc_accuracy", *report.kisc);
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
        const RunMetrics& r = report.runs[i];
        json j = {{"record", "run"}, {"run", i}, {"acsa_accuracy", r.acsa_acc}};
        if (r.kid) j["kid_f1"] = *r.kid;
        if (r.kisc) j["kisc_accuracy"] = *r.kisc;
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

} // namespace milsent
