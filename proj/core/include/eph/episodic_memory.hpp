#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "eph/harlow_env.hpp"
#include "eph/model.hpp"

namespace eph {

enum class StoreMode : std::uint8_t { Dense, Sparse };

struct StorageReport {
  std::size_t entries = 0;
  std::size_t floats_stored = 0;
  std::size_t dense_equivalent_floats = 0;
  double savings_fraction = 0.0;
};

/// Long-term memory: task id -> committed end-of-episode cell state.
///
/// Sparse mode keeps only the units listed in `sparse_indices`; the index
/// list is shared by every entry and stored once.
class EpisodicStore {
 public:
  explicit EpisodicStore(int hidden);
  EpisodicStore(int hidden, std::vector<int> sparse_indices);
  /// Sparse stores built this way reject writes until indices are set.
  EpisodicStore(int hidden, StoreMode mode);

  void set_sparse_indices(std::vector<int> indices);

  StoreMode mode() const { return mode_; }
  int hidden() const { return hidden_; }
  const std::optional<std::vector<int>>& sparse_indices() const { return sparse_indices_; }

  /// Overwrites any existing entry for the key.
  void store(const ContextKey& key, const Vector& cell_state);
  /// Zero vector for unknown keys.
  Vector retrieve(const ContextKey& key) const;
  Vector retrieve(TaskId id) const;
  bool contains(TaskId id) const { return entries_.count(id) != 0; }
  std::size_t size() const { return entries_.size(); }

  StorageReport storage_report() const;

  /// Same entries restricted to `indices`.
  EpisodicStore to_sparse(std::vector<int> indices) const;

  const std::map<TaskId, std::vector<double>>& entries() const { return entries_; }

  void save(const std::filesystem::path& manifest) const;
  static EpisodicStore load(const std::filesystem::path& manifest);

  bool operator==(const EpisodicStore&) const = default;

 private:
  int hidden_;
  StoreMode mode_ = StoreMode::Dense;
  std::optional<std::vector<int>> sparse_indices_;
  std::map<TaskId, std::vector<double>> entries_;
};

}  // namespace eph
