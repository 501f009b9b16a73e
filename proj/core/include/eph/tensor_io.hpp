#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eph/model.hpp"

namespace eph {

/// Row-major tensor of IEEE-754 doubles.
struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  static NamedTensor from(std::string name, const Matrix& m);
  static NamedTensor from(std::string name, const Vector& v);
  Matrix to_matrix() const;
  Vector to_vector() const;
  std::int64_t element_count() const;

  bool operator==(const NamedTensor&) const = default;
};

/// A JSON manifest plus a sidecar `.bin` holding the tensors back to back
/// as little-endian 64-bit floats.
struct TensorFile {
  std::string kind;
  std::map<std::string, std::string> metadata;
  std::map<std::string, std::string> config;
  std::vector<NamedTensor> tensors;

  const NamedTensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
};

std::filesystem::path sidecar_path(const std::filesystem::path& manifest);

void save_tensor_file(const std::filesystem::path& manifest, const TensorFile& file);
TensorFile load_tensor_file(const std::filesystem::path& manifest);

struct Checkpoint {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  int episodes = 0;
  ModelParams params;
};

void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

}  // namespace eph
