#include "milsent/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "milsent/errors.hpp"

namespace milsent {

// ---- polarity ----------------------------------------------------------------

std::string to_string(Polarity p) {
    switch (p) {
        case Polarity::negative: return "Neg";
        case Polarity::neutral: return "Neu";
        case Polarity::positive: return "Pos";
        case Polarity::conflict: return "Conflict";
    }
    throw ContractError("unreachable polarity");
}

Polarity polarity_from_xml(const std::string& s) {
    if (s == "negative") return Polarity::negative;
    if (s == "neutral") return Polarity::neutral;
    if (s == "positive") return Polarity::positive;
    if (s == "conflict") return Polarity::conflict;
    throw DataError("unknown polarity string '" + s + "'");
}

Polarity polarity_from_name(const std::string& s) {
    if (s == "Neg") return Polarity::negative;
    if (s == "Neu") return Polarity::neutral;
    if (s == "Pos") return Polarity::positive;
    if (s == "Conflict") return Polarity::conflict;
    throw DataError("unknown polarity name '" + s + "'");
}

int polarity_class(Polarity p) {
    if (p == Polarity::conflict)
        throw ContractError("conflict polarity has no class index; filter first");
    return static_cast<int>(p);
}

// ---- tokenizer ----------------------------------------------------------------

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

} // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string piece;
    auto flush_piece = [&]() {
        if (piece.empty()) return;
        std::size_t begin = 0, end = piece.size();
        std::vector<std::string> lead, trail;
        while (begin < end && is_punct(piece[begin])) lead.emplace_back(1, piece[begin++]);
        while (end > begin && is_punct(piece[end - 1])) trail.emplace_back(1, piece[--end]);
        for (auto& t : lead) tokens.push_back(std::move(t));
        if (end > begin) tokens.push_back(piece.substr(begin, end - begin));
        for (auto it = trail.rbegin(); it != trail.rend(); ++it) tokens.push_back(std::move(*it));
        piece.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush_piece();
        } else {
            piece.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush_piece();
    return tokens;
}

// ---- minimal XML reader ---------------------------------------------------------
// Covers the subset the SemEval/MAMS files use: elements, attributes, text,
// comments, CDATA and the five standard entities.

namespace {

struct XmlNode {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;
    std::vector<XmlNode> children;
    std::string text;
    std::size_t line = 0;

    const std::string* attr(const std::string& key) const {
        for (const auto& [k, v] : attrs)
            if (k == key) return &v;
        return nullptr;
    }
    const XmlNode* child(const std::string& tag) const {
        for (const auto& c : children)
            if (c.name == tag) return &c;
        return nullptr;
    }
};

class XmlCursor {
public:
    XmlCursor(std::string content, std::string path)
        : text_(std::move(content)), path_(std::move(path)) {}

    XmlNode parse_document() {
        skip_misc();
        XmlNode root = parse_element();
        skip_misc();
        if (!at_end()) fail("trailing content after document element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(path_ + ":" + std::to_string(line_) + ": " + msg);
    }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }

    char take() {
        if (at_end()) fail("unexpected end of file");
        char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    bool consume(const std::string& s) {
        if (text_.compare(pos_, s.size(), s) != 0) return false;
        for (std::size_t i = 0; i < s.size(); ++i) take();
        return true;
    }

    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) take();
    }

    void skip_until(const std::string& terminator, const char* what) {
        const std::size_t found = text_.find(terminator, pos_);
        if (found == std::string::npos) fail(std::string("unterminated ") + what);
        while (pos_ < found + terminator.size()) take();
    }

    // prolog, comments, doctype between elements
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (consume("<?"))
                skip_until("?>", "processing instruction");
            else if (consume("<!--"))
                skip_until("-->", "comment");
            else if (consume("<!DOCTYPE"))
                skip_until(">", "doctype");
            else
                return;
        }
    }

    std::string parse_name() {
        std::string name;
        while (!at_end()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' ||
                c == '.')
                name.push_back(take());
            else
                break;
        }
        if (name.empty()) fail("expected a name");
        return name;
    }

    void append_entity(std::string& out) {
        std::string ent;
        while (!at_end() && peek() != ';') {
            ent.push_back(take());
            if (ent.size() > 10) fail("unterminated entity reference");
        }
        take(); // ';'
        if (ent == "amp") out.push_back('&');
        else if (ent == "lt") out.push_back('<');
        else if (ent == "gt") out.push_back('>');
        else if (ent == "quot") out.push_back('"');
        else if (ent == "apos") out.push_back('\'');
        else if (!ent.empty() && ent[0] == '#') {
            const int base = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X') ? 16 : 10;
            const std::string digits = base == 16 ? ent.substr(2) : ent.substr(1);
            unsigned long code = 0;
            try {
                code = std::stoul(digits, nullptr, base);
            } catch (const std::exception&) {
                fail("bad character reference &" + ent + ";");
            }
            // UTF-8 encode
            if (code < 0x80) {
                out.push_back(static_cast<char>(code));
            } else if (code < 0x800) {
                out.push_back(static_cast<char>(0xC0 | (code >> 6)));
                out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
            } else if (code < 0x10000) {
                out.push_back(static_cast<char>(0xE0 | (code >> 12)));
                out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
                out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
            } else {
                out.push_back(static_cast<char>(0xF0 | (code >> 18)));
                out.push_back(static_cast<char>(0x80 | ((code >> 12) & 0x3F)));
                out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3F)));
                out.push_back(static_cast<char>(0x80 | (code & 0x3F)));
            }
        } else {
            fail("unknown entity &" + ent + ";");
        }
    }

    std::string parse_attr_value() {
        const char quote = take();
        if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
        std::string value;
        for (;;) {
            if (at_end()) fail("unterminated attribute value");
            char c = take();
            if (c == quote) break;
            if (c == '&')
                append_entity(value);
            else
                value.push_back(c);
        }
        return value;
    }

    XmlNode parse_element() {
        if (!consume("<")) fail("expected '<'");
        XmlNode node;
        node.line = line_;
        node.name = parse_name();
        for (;;) {
            skip_ws();
            if (at_end()) fail("unterminated start tag <" + node.name + ">");
            if (consume("/>")) return node;
            if (consume(">")) break;
            std::string key = parse_name();
            skip_ws();
            if (!consume("=")) fail("expected '=' after attribute " + key);
            skip_ws();
            node.attrs.emplace_back(std::move(key), parse_attr_value());
        }
        // content
        for (;;) {
            if (at_end()) fail("missing close tag for <" + node.name + ">");
            if (consume("</")) {
                std::string closing = parse_name();
                if (closing != node.name)
                    fail("mismatched close tag </" + closing + "> for <" + node.name + ">");
                skip_ws();
                if (!consume(">")) fail("malformed close tag");
                return node;
            }
            if (consume("<!--")) {
                skip_until("-->", "comment");
            } else if (consume("<![CDATA[")) {
                const std::size_t found = text_.find("]]>", pos_);
                if (found == std::string::npos) fail("unterminated CDATA section");
                while (pos_ < found) node.text.push_back(take());
                consume("]]>");
            } else if (peek() == '<') {
                node.children.push_back(parse_element());
            } else {
                char c = take();
                if (c == '&')
                    append_entity(node.text);
                else
                    node.text.push_back(c);
            }
        }
    }

    std::string text_;
    std::string path_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

std::vector<CorpusExample> parse_semeval_xml(const std::string& path) {
    XmlCursor cursor(read_file(path), path);
    XmlNode root = cursor.parse_document();
    if (root.name != "sentences")
        throw ParseError(path + ":" + std::to_string(root.line) +
                         ": expected <sentences> document element, got <" + root.name + ">");

    std::vector<CorpusExample> examples;
    for (const XmlNode& sent : root.children) {
        if (sent.name != "sentence") continue;
        const std::string* id = sent.attr("id");
        if (!id)
            throw ParseError(path + ":" + std::to_string(sent.line) + ": sentence without id");
        const XmlNode* text = sent.child("text");
        if (!text)
            throw ParseError(path + ":" + std::to_string(sent.line) + ": sentence " + *id +
                             " has no <text>");
        const XmlNode* cats = sent.child("aspectCategories");
        if (!cats || cats->children.empty()) continue; // no aspect categories: dropped

        CorpusExample ex;
        ex.id = *id;
        ex.text = text->text;
        ex.tokens = tokenize(ex.text);
        std::set<std::string> seen;
        for (const XmlNode& cat : cats->children) {
            if (cat.name != "aspectCategory") continue;
            const std::string* name = cat.attr("category");
            const std::string* pol = cat.attr("polarity");
            if (!name || !pol)
                throw ParseError(path + ":" + std::to_string(cat.line) +
                                 ": aspectCategory needs category and polarity attributes");
            if (!seen.insert(*name).second)
                throw DataError("sentence " + ex.id + " repeats category '" + *name + "'");
            ex.labels.push_back({*name, polarity_from_xml(*pol)});
        }
        if (!ex.labels.empty()) examples.push_back(std::move(ex));
    }
    return examples;
}

std::vector<CorpusExample> filter_conflicts(std::vector<CorpusExample> examples) {
    std::vector<CorpusExample> out;
    out.reserve(examples.size());
    for (auto& ex : examples) {
        std::erase_if(ex.labels,
                      [](const CategoryLabel& l) { return l.polarity == Polarity::conflict; });
        if (!ex.labels.empty()) out.push_back(std::move(ex));
    }
    return out;
}

std::vector<CorpusExample> make_hard_test_set(const std::vector<CorpusExample>& test) {
    std::vector<CorpusExample> out;
    for (const auto& ex : test) {
        std::set<Polarity> polarities;
        for (const auto& l : ex.labels) {
            if (l.polarity == Polarity::conflict)
                throw ContractError("make_hard_test_set: conflict labels must be filtered first");
            polarities.insert(l.polarity);
        }
        if (ex.labels.size() >= 2 && polarities.size() >= 2) out.push_back(ex);
    }
    return out;
}

// ---- internal corpus format --------------------------------------------------------

namespace {

std::string escape_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string unescape_text(const std::string& s, const std::string& where) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (++i >= s.size()) throw ParseError(where + ": dangling escape");
        switch (s[i]) {
            case '\\': out.push_back('\\'); break;
            case 't': out.push_back('\t'); break;
            case 'n': out.push_back('\n'); break;
            case 'r': out.push_back('\r'); break;
            default: throw ParseError(where + ": bad escape \\" + s[i]);
        }
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

} // namespace

void write_corpus(const std::string& path, const std::vector<CorpusExample>& examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    for (const auto& ex : examples) {
        out << ex.id << '\t';
        for (std::size_t i = 0; i < ex.labels.size(); ++i) {
            if (i) out << ';';
            out << ex.labels[i].category << '=' << to_string(ex.labels[i].polarity);
        }
        out << '\t' << escape_text(ex.text) << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<CorpusExample> read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<CorpusExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        auto fields = split(line, '\t');
        if (fields.size() != 3) throw ParseError(where + ": expected 3 tab-separated fields");
        CorpusExample ex;
        ex.id = fields[0];
        for (const std::string& part : split(fields[1], ';')) {
            auto eq = part.find('=');
            if (eq == std::string::npos) throw ParseError(where + ": bad label '" + part + "'");
            ex.labels.push_back({part.substr(0, eq), polarity_from_name(part.substr(eq + 1))});
        }
        ex.text = unescape_text(fields[2], where);
        ex.tokens = tokenize(ex.text);
        examples.push_back(std::move(ex));
    }
    return examples;
}

std::vector<std::string> read_id_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

std::pair<std::vector<CorpusExample>, std::vector<CorpusExample>>
split_by_ids(const std::vector<CorpusExample>& examples, const std::vector<std::string>& ids) {
    std::set<std::string> wanted(ids.begin(), ids.end());
    std::pair<std::vector<CorpusExample>, std::vector<CorpusExample>> out;
    for (const auto& ex : examples) {
        if (wanted.count(ex.id))
            out.second.push_back(ex);
        else
            out.first.push_back(ex);
    }
    return out;
}

std::vector<std::string> collect_categories(const std::vector<CorpusExample>& examples) {
    std::set<std::string> names;
    for (const auto& ex : examples)
        for (const auto& l : ex.labels) names.insert(l.category);
    return {names.begin(), names.end()};
}

// ---- vocabulary ------------------------------------------------------------------

Vocabulary Vocabulary::build(const std::vector<CorpusExample>& train, std::size_t min_count) {
    Vocabulary v;
    for (const auto& ex : train)
        for (const auto& t : ex.tokens) ++v.counts_[t];

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [token, count] : v.counts_)
        if (count >= min_count) kept.emplace_back(token, count);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    v.tokens_.push_back(kPadToken);
    v.tokens_.push_back(kUnkToken);
    for (auto& [token, count] : kept) v.tokens_.push_back(token);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = static_cast<int>(i);
    return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> ordered_tokens) {
    if (ordered_tokens.size() < 2 || ordered_tokens[0] != kPadToken ||
        ordered_tokens[1] != kUnkToken)
        throw DataError("vocabulary token list must start with pad and unk");
    Vocabulary v;
    v.tokens_ = std::move(ordered_tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second)
            throw DataError("vocabulary token list contains duplicates: " + v.tokens_[i]);
    }
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? static_cast<int>(unk_id()) : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
    if (id >= tokens_.size())
        throw ContractError("vocabulary: id " + std::to_string(id) + " out of range");
    return tokens_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
}

std::size_t Vocabulary::count(const std::string& token) const {
    auto it = counts_.find(token);
    return it == counts_.end() ? 0 : it->second;
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 14695981039346656037ull; // FNV-1a
    for (const auto& t : tokens_) {
        for (char c : t) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= static_cast<unsigned char>('\n');
        h *= 1099511628211ull;
    }
    return h;
}

// ---- pretrained vectors -------------------------------------------------------------

std::map<int, std::vector<Real>> read_pretrained_rows(const std::string& path,
                                                      const Vocabulary& vocab, std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vector file: " + path);
    std::map<int, std::vector<Real>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::vector<Real> values(dim);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string token;
        fields >> token;
        const int idx = vocab.id(token);
        const bool wanted = idx != static_cast<int>(vocab.unk_id()) || token == Vocabulary::kUnkToken;
        std::size_t got = 0;
        Real v;
        while (fields >> v) {
            if (got < dim) values[got] = v;
            ++got;
        }
        if (got != dim)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(dim) + " values for token '" + token + "', got " +
                            std::to_string(got));
        if (wanted) rows[idx] = values;
    }
    return rows;
}

std::size_t apply_pretrained_rows(const std::map<int, std::vector<Real>>& rows,
                                  EmbeddingTable& table) {
    std::size_t loaded = 0;
    for (const auto& [idx, values] : rows) {
        table.set_row(static_cast<std::size_t>(idx), values);
        ++loaded;
    }
    return loaded;
}

std::size_t load_pretrained_vectors(const std::string& path, const Vocabulary& vocab,
                                    EmbeddingTable& table) {
    return apply_pretrained_rows(read_pretrained_rows(path, vocab, table.dim()), table);
}

// ---- key-instance annotations ----------------------------------------------------------

std::vector<KeyInstanceAnnotation> read_key_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<KeyInstanceAnnotation> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        auto fields = split(line, '\t');
        if (fields.size() != 3) throw ParseError(where + ": expected 3 tab-separated fields");
        KeyInstanceAnnotation ann;
        ann.sentence_id = fields[0];
        ann.category = fields[1];
        if (!fields[2].empty()) {
            for (const std::string& part : split(fields[2], ',')) {
                auto colon = part.find(':');
                if (colon == std::string::npos)
                    throw ParseError(where + ": bad position entry '" + part + "'");
                std::size_t pos = 0;
                try {
                    pos = std::stoul(part.substr(0, colon));
                } catch (const std::exception&) {
                    throw ParseError(where + ": bad position '" + part.substr(0, colon) + "'");
                }
                const Polarity pol = polarity_from_name(part.substr(colon + 1));
                if (pol == Polarity::conflict)
                    throw DataError(where + ": key instances cannot carry conflict polarity");
                if (!ann.polarities.emplace(pos, pol).second)
                    throw DataError(where + ": duplicate position " + std::to_string(pos));
            }
            for (const auto& [pos, pol] : ann.polarities) ann.positions.push_back(pos);
        }
        out.push_back(std::move(ann));
    }
    return out;
}

void write_key_instances(const std::string& path,
                         const std::vector<KeyInstanceAnnotation>& annotations) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    for (const auto& ann : annotations) {
        out << ann.sentence_id << '\t' << ann.category << '\t';
        bool first = true;
        for (const auto& [pos, pol] : ann.polarities) {
            if (!first) out << ',';
            out << pos << ':' << to_string(pol);
            first = false;
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

void validate_key_instances(const std::vector<KeyInstanceAnnotation>& annotations,
                            const std::vector<CorpusExample>& examples) {
    std::map<std::string, std::size_t> lengths;
    for (const auto& ex : examples) lengths[ex.id] = ex.tokens.size();
    for (const auto& ann : annotations) {
        auto it = lengths.find(ann.sentence_id);
        if (it == lengths.end())
            throw DataError("annotation references unknown sentence " + ann.sentence_id);
        for (std::size_t pos : ann.positions)
            if (pos >= it->second)
                throw DataError("annotation position " + std::to_string(pos) +
                                " out of range for sentence " + ann.sentence_id + " (length " +
                                std::to_string(it->second) + ")");
    }
}

// ---- batching ---------------------------------------------------------------------------

BatchMode batch_mode_from_string(const std::string& s) {
    if (s == "single") return BatchMode::single;
    if (s == "multi") return BatchMode::multi;
    throw ConfigError("unknown batch mode '" + s + "' (expected single or multi)");
}

std::vector<Batch> make_batches(const std::vector<CorpusExample>& examples,
                                const Vocabulary& vocab,
                                const std::vector<std::string>& categories,
                                std::size_t batch_size, BatchMode mode, Rng& rng) {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    std::map<std::string, std::size_t> cat_index;
    for (std::size_t i = 0; i < categories.size(); ++i) cat_index[categories[i]] = i;

    std::vector<BatchItem> items;
    for (std::size_t e = 0; e < examples.size(); ++e) {
        const CorpusExample& ex = examples[e];
        BatchItem base;
        base.example_index = e;
        base.token_ids = vocab.encode(ex.tokens);
        base.length = base.token_ids.size();
        base.detection_target.assign(categories.size(), 0);
        std::vector<std::pair<std::size_t, int>> targets;
        for (const auto& l : ex.labels) {
            auto it = cat_index.find(l.category);
            if (it == cat_index.end())
                throw DataError("sentence " + ex.id + " mentions category '" + l.category +
                                "' missing from the inventory");
            base.detection_target[it->second] = 1;
            targets.emplace_back(it->second, polarity_class(l.polarity));
        }
        // detection targets always cover the full inventory; single mode only
        // narrows the sentiment targets
        if (mode == BatchMode::multi) {
            base.sentiment_targets = std::move(targets);
            items.push_back(std::move(base));
        } else {
            for (const auto& t : targets) {
                BatchItem item = base;
                item.sentiment_targets = {t};
                items.push_back(std::move(item));
            }
        }
    }

    rng.shuffle(items);

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < items.size(); start += batch_size) {
        Batch b;
        const std::size_t stop = std::min(items.size(), start + batch_size);
        b.max_length = 0;
        for (std::size_t i = start; i < stop; ++i)
            b.max_length = std::max(b.max_length, items[i].length);
        for (std::size_t i = start; i < stop; ++i) {
            BatchItem item = std::move(items[i]);
            item.token_ids.resize(b.max_length, static_cast<int>(vocab.pad_id()));
            b.items.push_back(std::move(item));
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

} // namespace milsent
