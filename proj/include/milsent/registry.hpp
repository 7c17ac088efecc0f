#pragma once

#include <map>
#include <string>
#include <vector>

#include "milsent/tensor.hpp"

namespace milsent {

// Named parameter store. Iteration is lexicographic by name, so every loop
// over parameters (L2 penalty, Adam, snapshots, checkpoints) is deterministic.
class ParamRegistry {
public:
    struct Entry {
        Tensor tensor;
        bool trainable = true;
        // row indices (rank-2 tensors) excluded from updates, e.g. the pad
        // embedding row
        std::vector<std::size_t> frozen_rows;
    };

    Tensor add(const std::string& name, Tensor t, bool trainable = true);

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    Tensor get(const std::string& name) const;
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;

    void set_trainable(const std::string& name, bool trainable);
    // freeze/unfreeze every parameter whose name starts with prefix
    void set_trainable_prefix(const std::string& prefix, bool trainable);
    void freeze_rows(const std::string& name, std::vector<std::size_t> rows);

    std::vector<std::string> names() const;
    std::vector<std::string> trainable_names() const;

    void zero_grad();

    std::size_t size() const { return entries_.size(); }
    std::size_t value_count() const;

    // deep copy of all values, keyed by name
    std::map<std::string, std::vector<Real>> snapshot() const;
    void restore(const std::map<std::string, std::vector<Real>>& snap);

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::map<std::string, Entry> entries_;
};

} // namespace milsent
