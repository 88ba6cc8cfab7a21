#pragma once

#include "gnr/nn.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace gnr::textenc {

// On-disk weights: `<prefix>.manifest.json` lists every tensor (name, shape,
// byte offset) plus a free-form header; `<prefix>.weights.bin` holds the raw
// little-endian float64 values, row-major, concatenated in manifest order.
struct CheckpointTensor {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  std::string kind;
  nlohmann::json header;
  std::vector<CheckpointTensor> tensors;
};

std::filesystem::path manifest_path(const std::filesystem::path& prefix);
std::filesystem::path blob_path(const std::filesystem::path& prefix);

void save_checkpoint(const std::filesystem::path& prefix, const std::string& kind, const nlohmann::json& header,
                     const nn::ConstParamRefs& params);

// Reads and validates manifest/blob consistency (sizes, offsets, kind).
Checkpoint read_checkpoint(const std::filesystem::path& prefix, const std::string& expected_kind);

// Copies tensors into `params`, matching by name and shape. Nothing is
// modified unless every tensor matches; mismatches throw ShapeError naming the tensor.
void assign_tensors(const Checkpoint& checkpoint, const nn::ParamRefs& params);

}  // namespace gnr::textenc
