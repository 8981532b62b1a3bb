#pragma once

#include <optional>
#include <string>

#include "model.hpp"
#include "optim.hpp"

namespace etdpc::model {

// Versioned binary checkpoint: magic + version, a JSON header (config, class
// labels, vocabulary, parameter table, optimizer settings), the raw float64
// data section in registration order, and a trailing content hash. Save ->
// load -> save is byte-identical.
void save_bundle(const std::string& path, const Bundle& bundle, const nn::Adam* optimizer = nullptr);

struct LoadedBundle {
    Bundle bundle;
    std::optional<nn::Adam> optimizer;
};

LoadedBundle load_bundle(const std::string& path);

}  // namespace etdpc::model
