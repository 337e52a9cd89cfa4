#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "advmask/tensor.hpp"

namespace advmask::nd {

// Checkpoint container: magic "AMCKPT01", then a u64 entry count, then per
// entry a u64 name length, the name bytes, u64 rows, u64 cols, and the raw
// IEEE-754 payload. All integers and doubles little-endian. Round trips are
// bit-exact.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, NodePtr>>& params);

std::map<std::string, Tensor> load_checkpoint(const std::string& path);

// Loads values into existing parameter nodes, matching by name and shape.
// Missing or misshapen entries raise DataError naming the parameter.
void load_checkpoint_into(const std::string& path,
                          const std::vector<std::pair<std::string, NodePtr>>& params);

}  // namespace advmask::nd
