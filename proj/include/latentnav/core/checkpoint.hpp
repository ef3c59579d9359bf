#pragma once

#include <string>

#include "latentnav/core/nn.hpp"

namespace latentnav::core {

// Versioned checkpoint container: all parameter arrays keyed by module path,
// optimizer moments, and the full resolved config as JSON text. Integrity is
// protected by a trailing CRC; loading into a store with mismatched dims is a
// hard error.
void save_checkpoint(const ParamStore& ps, const std::string& config_json, int64_t adam_t,
                     const std::string& path);

// Returns the adam step count. The store must already contain identically
// shaped parameters (build the model from config first).
int64_t load_checkpoint(ParamStore& ps, std::string* config_json, const std::string& path);

// Reads only the embedded config JSON.
std::string checkpoint_config(const std::string& path);

}  // namespace latentnav::core
