#pragma once

#include <string>

#include "lsim/model.hpp"

namespace lsim {

// Self-describing binary checkpoint: magic "LGMN", format version, config
// header, then every named tensor in registry order as raw little-endian
// doubles. Round-trips bit-exactly.
void save_checkpoint(const ModelParams& p, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace lsim
