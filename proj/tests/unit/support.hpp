#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "ocacnn/rng.hpp"
#include "ocacnn/tensor.hpp"

namespace test {

inline ocacnn::Tensor64 random_tensor(ocacnn::DeterministicRng& rng, const ocacnn::Shape& shape,
                                      double lo = -1.0, double hi = 1.0) {
  ocacnn::Tensor64 t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ocacnn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
