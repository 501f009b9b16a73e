#pragma once

// Internal: shared JSON plumbing for manifest files.

#include <json.hpp>

#include <filesystem>
#include <vector>

#include "eph/tensor_io.hpp"

namespace eph::detail {

/// Writes tensors to the sidecar of `manifest` and returns their
/// descriptors ({name, shape, offset}).
nlohmann::json write_sidecar(const std::filesystem::path& manifest,
                             const std::vector<NamedTensor>& tensors);

std::vector<NamedTensor> read_sidecar(const std::filesystem::path& manifest,
                                      const nlohmann::json& descriptors);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace eph::detail
