#pragma once

#include "ewe/linalg.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ewe::checkpoint {

using TensorList = std::vector<std::pair<std::string, Mat<float>>>;

// Format: "EWE1" line, one "tensor <name> <rows> <cols>" line per tensor,
// a "data" line, then the row-major float32 payloads in manifest order,
// little-endian regardless of host. Names must be space-free and unique.
void save_tensors(const std::string& path, const TensorList& tensors);

// Throws std::runtime_error on bad magic, malformed manifest, or truncation.
TensorList load_tensors(const std::string& path);

}  // namespace ewe::checkpoint
