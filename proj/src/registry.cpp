#include "milsent/registry.hpp"

#include "milsent/errors.hpp"

namespace milsent {

Tensor ParamRegistry::add(const std::string& name, Tensor t, bool trainable) {
    if (name.empty()) throw ContractError("param names must be non-empty");
    if (entries_.count(name)) throw ContractError("duplicate parameter name: " + name);
    if (!t.defined()) throw ContractError("cannot register undefined tensor: " + name);
    t.set_requires_grad(true);
    entries_[name] = Entry{t, trainable, {}};
    return t;
}

Tensor ParamRegistry::get(const std::string& name) const {
    return entry(name).tensor;
}

ParamRegistry::Entry& ParamRegistry::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

const ParamRegistry::Entry& ParamRegistry::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

void ParamRegistry::set_trainable(const std::string& name, bool trainable) {
    entry(name).trainable = trainable;
}

void ParamRegistry::set_trainable_prefix(const std::string& prefix, bool trainable) {
    bool any = false;
    for (auto& [name, e] : entries_) {
        if (name.rfind(prefix, 0) == 0) {
            e.trainable = trainable;
            any = true;
        }
    }
    if (!any) throw ContractError("no parameters match prefix: " + prefix);
}

void ParamRegistry::freeze_rows(const std::string& name, std::vector<std::size_t> rows) {
    Entry& e = entry(name);
    for (std::size_t r : rows) {
        if (e.tensor.rank() != 2 || r >= e.tensor.rows())
            throw ContractError("freeze_rows: row " + std::to_string(r) + " out of range for " + name);
    }
    e.frozen_rows = std::move(rows);
}

std::vector<std::string> ParamRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

std::vector<std::string> ParamRegistry::trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_)
        if (e.trainable) out.push_back(name);
    return out;
}

void ParamRegistry::zero_grad() {
    for (auto& [name, e] : entries_) e.tensor.zero_grad();
}

std::size_t ParamRegistry::value_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.tensor.size();
    return n;
}

std::map<std::string, std::vector<Real>> ParamRegistry::snapshot() const {
    std::map<std::string, std::vector<Real>> snap;
    for (const auto& [name, e] : entries_) snap[name] = e.tensor.values();
    return snap;
}

void ParamRegistry::restore(const std::map<std::string, std::vector<Real>>& snap) {
    for (auto& [name, e] : entries_) {
        auto it = snap.find(name);
        if (it == snap.end()) throw ContractError("snapshot missing parameter: " + name);
        if (it->second.size() != e.tensor.size())
            throw ContractError("snapshot size mismatch for parameter: " + name);
        e.tensor.values() = it->second;
    }
}

} // namespace milsent
