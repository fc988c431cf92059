#pragma once

// Parameter checkpoints: "VDGPTCK1", u32 version, u32 tensor count, then per
// tensor a u32 name length, the name, u32 rows, u32 cols and rows*cols
// little-endian float64 values in row-major order.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vdgpt/grounding/toy_model.hpp"

namespace vdgpt::grounding {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;

  bool operator==(const NamedTensor& o) const { return name == o.name && value == o.value; }
};

std::string encode_checkpoint(const std::vector<NamedTensor>& tensors);
/// Throws kIoError on a bad magic, unknown version or truncated payload.
std::vector<NamedTensor> decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::string& path);

/// Every frozen and trainable tensor of the model plus a "config" row.
std::vector<NamedTensor> model_tensors(const ToyDenoiser<double>& model);
/// Rebuilds a model from model_tensors output. kShapeError when a tensor is
/// missing or has the wrong shape.
ToyDenoiser<double> model_from_tensors(const std::vector<NamedTensor>& tensors);

}  // namespace vdgpt::grounding
