#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "milsent/layers.hpp"
#include "milsent/rng.hpp"

namespace milsent {

// class indices are frozen: Neg=0, Neu=1, Pos=2. conflict only exists between
// parsing and filtering.
enum class Polarity { negative = 0, neutral = 1, positive = 2, conflict = 3 };

std::string to_string(Polarity p);
Polarity polarity_from_xml(const std::string& s);   // "negative" etc.
Polarity polarity_from_name(const std::string& s);  // "Neg" etc.
int polarity_class(Polarity p); // 0..2; conflict is a contract error

struct CategoryLabel {
    std::string category;
    Polarity polarity;
    bool operator==(const CategoryLabel&) const = default;
};

struct CorpusExample {
    std::string id;
    std::string text; // verbatim sentence
    std::vector<std::string> tokens;
    std::vector<CategoryLabel> labels;
    bool operator==(const CorpusExample&) const = default;
};

// Frozen tokenizer (key-instance positions depend on it): lowercase,
// whitespace split, leading/trailing ASCII punctuation peeled into separate
// tokens. Interior punctuation ("don't", "u.s") stays put.
std::vector<std::string> tokenize(const std::string& text);

// SemEval-2014 / MAMS sentence XML. Sentences without aspect categories are
// dropped; "conflict" labels survive until filter_conflicts.
std::vector<CorpusExample> parse_semeval_xml(const std::string& path);

// removes (category, conflict) labels, then drops examples left without labels
std::vector<CorpusExample> filter_conflicts(std::vector<CorpusExample> examples);

// keeps examples with >= 2 categories carrying >= 2 distinct polarities
std::vector<CorpusExample> make_hard_test_set(const std::vector<CorpusExample>& test);

// internal line-based corpus format: id \t cat=Pol;cat=Pol \t escaped-text
void write_corpus(const std::string& path, const std::vector<CorpusExample>& examples);
std::vector<CorpusExample> read_corpus(const std::string& path);

std::vector<std::string> read_id_list(const std::string& path);

// examples whose id is in `ids` go second (dev), the rest first; order preserved
std::pair<std::vector<CorpusExample>, std::vector<CorpusExample>>
split_by_ids(const std::vector<CorpusExample>& examples, const std::vector<std::string>& ids);

// sorted unique category names mentioned in the examples
std::vector<std::string> collect_categories(const std::vector<CorpusExample>& examples);

class Vocabulary {
public:
    static constexpr const char* kPadToken = "<pad>";
    static constexpr const char* kUnkToken = "<unk>";

    // built from the training split only; index 0 = pad, 1 = unk; remaining
    // tokens ordered by frequency desc then token asc
    static Vocabulary build(const std::vector<CorpusExample>& train, std::size_t min_count = 1);
    static Vocabulary from_tokens(std::vector<std::string> ordered_tokens);

    int id(const std::string& token) const; // unk id when absent
    const std::string& token(std::size_t id) const;
    std::vector<int> encode(const std::vector<std::string>& tokens) const;

    std::size_t size() const { return tokens_.size(); }
    std::size_t pad_id() const { return 0; }
    std::size_t unk_id() const { return 1; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t count(const std::string& token) const;

    std::uint64_t hash() const; // FNV-1a over tokens, order-sensitive

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
    std::map<std::string, std::size_t> counts_;
};

// text format: token followed by `dim` floats per line. In-vocabulary rows are
// copied; everything else keeps its random initialization; the pad row stays
// zero. Returns how many vocabulary rows were filled.
std::size_t load_pretrained_vectors(const std::string& path, const Vocabulary& vocab,
                                    EmbeddingTable& table);

// parsed in-vocabulary rows, reusable across several tables/seeds
std::map<int, std::vector<Real>> read_pretrained_rows(const std::string& path,
                                                      const Vocabulary& vocab, std::size_t dim);
std::size_t apply_pretrained_rows(const std::map<int, std::vector<Real>>& rows,
                                  EmbeddingTable& table);

struct KeyInstanceAnnotation {
    std::string sentence_id;
    std::string category;
    std::vector<std::size_t> positions;         // sorted, unique
    std::map<std::size_t, Polarity> polarities; // one per position
    bool operator==(const KeyInstanceAnnotation&) const = default;
};

// line format: sentence_id \t category \t pos:Pol,pos:Pol
std::vector<KeyInstanceAnnotation> read_key_instances(const std::string& path);
void write_key_instances(const std::string& path,
                         const std::vector<KeyInstanceAnnotation>& annotations);

// positions must index into the matching example's tokens
void validate_key_instances(const std::vector<KeyInstanceAnnotation>& annotations,
                            const std::vector<CorpusExample>& examples);

enum class BatchMode { single, multi };

BatchMode batch_mode_from_string(const std::string& s);

struct BatchItem {
    std::size_t example_index = 0;
    std::vector<int> token_ids; // padded to the batch max with pad id
    std::size_t length = 0;     // true token count
    std::vector<std::uint8_t> detection_target;                  // N binary
    std::vector<std::pair<std::size_t, int>> sentiment_targets;  // (category id, class)
};

struct Batch {
    std::vector<BatchItem> items;
    std::size_t max_length = 0;
};

// multi: one item per sentence with all its category targets; single: one item
// per (sentence, category) pair. Shuffling is seeded by `rng`.
std::vector<Batch> make_batches(const std::vector<CorpusExample>& examples,
                                const Vocabulary& vocab,
                                const std::vector<std::string>& categories,
                                std::size_t batch_size, BatchMode mode, Rng& rng);

} // namespace milsent
