#pragma once

#include <memory>
#include <string>
#include <vector>

#include "milsent/data.hpp"
#include "milsent/model.hpp"

namespace milsent {

// Versioned flat binary container: model config, category inventory, the
// vocabulary (tokens in index order plus hash) and every named parameter
// tensor. Loading rebuilds the model and verifies shape agreement and the
// vocabulary hash.
struct LoadedModel {
    std::unique_ptr<Model> model;
    Vocabulary vocab;
    std::vector<std::string> categories;
};

void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocab,
                     const std::vector<std::string>& categories);

LoadedModel load_checkpoint(const std::string& path);

} // namespace milsent
