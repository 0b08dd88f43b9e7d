#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xcnn/tensor.hpp"

namespace xcnn {

// Binary layout (little-endian):
//   "XCNN" | version u32 | manifest_len u32 | manifest UTF-8 |
//   tensor_count u32 | per tensor:
//     name_len u16 | name | ndim u8 | dims u32 each | float32 payload
// The writer is deterministic, so save -> load -> save is byte-identical.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;
  std::string manifest;
  std::vector<std::pair<std::string, TensorF>> tensors;  // ordered

  const TensorF* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace xcnn
