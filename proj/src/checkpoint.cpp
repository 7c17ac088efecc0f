#include "milsent/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "milsent/errors.hpp"

namespace milsent {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'N', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    write_u64(out, bits);
}

void write_str(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated checkpoint: " + path);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
    const std::uint64_t lo = read_u32(in, path);
    const std::uint64_t hi = read_u32(in, path);
    return lo | hi << 32;
}

double read_f64(std::istream& in, const std::string& path) {
    const std::uint64_t bits = read_u64(in, path);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::string read_str(std::istream& in, const std::string& path) {
    const std::uint64_t n = read_u64(in, path);
    if (n > (1ull << 30)) throw DataError("corrupt checkpoint string length: " + path);
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
        throw DataError("truncated checkpoint: " + path);
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocab,
                     const std::vector<std::string>& categories) {
    const ModelConfig& cfg = model.config();
    if (categories.size() != cfg.num_categories)
        throw ContractError("checkpoint: category list does not match the model");
    if (vocab.size() != cfg.vocab_size)
        throw ContractError("checkpoint: vocabulary does not match the model");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);

    write_u64(out, cfg.num_categories);
    write_u64(out, cfg.dim);
    write_u64(out, cfg.depth);
    write_str(out, to_string(cfg.variant));
    write_f64(out, cfg.dropout);
    write_u32(out, cfg.detach_attention ? 1 : 0);
    write_u32(out, cfg.train_embeddings ? 1 : 0);
    write_u64(out, cfg.vocab_size);
    write_u64(out, cfg.pad_index);
    write_u64(out, cfg.unk_index);

    write_u64(out, categories.size());
    for (const auto& c : categories) write_str(out, c);

    write_u64(out, vocab.size());
    for (const auto& t : vocab.tokens()) write_str(out, t);
    write_u64(out, vocab.hash());

    const auto names = model.params().names();
    write_u64(out, names.size());
    for (const auto& name : names) {
        const Tensor t = model.params().get(name);
        write_str(out, name);
        write_u64(out, t.rank());
        for (std::size_t e : t.shape()) write_u64(out, e);
        for (Real v : t.values()) write_f64(out, v);
    }
    if (!out) throw DataError("write failed: " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a checkpoint file: " + path);
    const std::uint32_t version = read_u32(in, path);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);

    ModelConfig cfg;
    cfg.num_categories = read_u64(in, path);
    cfg.dim = read_u64(in, path);
    cfg.depth = read_u64(in, path);
    cfg.variant = variant_from_string(read_str(in, path));
    cfg.dropout = read_f64(in, path);
    cfg.detach_attention = read_u32(in, path) != 0;
    cfg.train_embeddings = read_u32(in, path) != 0;
    cfg.vocab_size = read_u64(in, path);
    cfg.pad_index = read_u64(in, path);
    cfg.unk_index = read_u64(in, path);

    LoadedModel loaded;
    const std::uint64_t n_cats = read_u64(in, path);
    for (std::uint64_t i = 0; i < n_cats; ++i) loaded.categories.push_back(read_str(in, path));
    if (loaded.categories.size() != cfg.num_categories)
        throw DataError("checkpoint category list does not match its config: " + path);

    const std::uint64_t n_tokens = read_u64(in, path);
    std::vector<std::string> tokens;
    tokens.reserve(n_tokens);
    for (std::uint64_t i = 0; i < n_tokens; ++i) tokens.push_back(read_str(in, path));
    loaded.vocab = Vocabulary::from_tokens(std::move(tokens));
    const std::uint64_t stored_hash = read_u64(in, path);
    if (stored_hash != loaded.vocab.hash())
        throw DataError("checkpoint vocabulary hash mismatch: " + path);
    if (loaded.vocab.size() != cfg.vocab_size)
        throw DataError("checkpoint vocabulary size does not match its config: " + path);

    loaded.model = std::make_unique<Model>(cfg, /*init_seed=*/0);

    const std::uint64_t n_params = read_u64(in, path);
    if (n_params != loaded.model->params().size())
        throw DataError("checkpoint parameter count mismatch: " + path);
    for (std::uint64_t i = 0; i < n_params; ++i) {
        const std::string name = read_str(in, path);
        if (!loaded.model->params().has(name))
            throw DataError("checkpoint has unknown parameter '" + name + "': " + path);
        Tensor t = loaded.model->params().get(name);
        const std::uint64_t rank = read_u64(in, path);
        Shape shape;
        for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(read_u64(in, path));
        if (shape != t.shape())
            throw DataError("checkpoint shape mismatch for '" + name + "': stored " +
                            shape_str(shape) + ", model needs " + shape_str(t.shape()));
        for (Real& v : t.values()) v = read_f64(in, path);
    }
    return loaded;
}

} // namespace milsent
