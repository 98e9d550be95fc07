#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cssr/tensor.hpp"

namespace cssr {

// Checkpoint container: a text manifest followed by a flat f32 payload.
//
//   CSSR1\n
//   <name> <count> <n> <c> <h> <w>\n     one line per tensor
//   \n                                   blank separator line
//   <count_0 + count_1 + ...> little-endian f32 values, manifest order
//
// Tensors are written in the order given; loading preserves the payload
// bit-for-bit. Model parameters use their store names prefixed by network
// ("gen.", "disc.", "durcan."); optimizer state lives under "opt." and
// bookkeeping scalars under "meta.".
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors);

std::map<std::string, Tensor<float>> load_checkpoint(const std::string& path);

}  // namespace cssr
