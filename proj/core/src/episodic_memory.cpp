#include "eph/episodic_memory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eph/error.hpp"
#include "tensor_json.hpp"

namespace eph {

EpisodicStore::EpisodicStore(int hidden) : hidden_(hidden) {}

EpisodicStore::EpisodicStore(int hidden, StoreMode mode) : hidden_(hidden), mode_(mode) {}

EpisodicStore::EpisodicStore(int hidden, std::vector<int> sparse_indices)
    : hidden_(hidden), mode_(StoreMode::Sparse) {
  set_sparse_indices(std::move(sparse_indices));
}

void EpisodicStore::set_sparse_indices(std::vector<int> sparse_indices) {
  if (mode_ != StoreMode::Sparse) throw ConfigError("dense stores take no sparse indices");
  if (!entries_.empty()) throw ConfigError("sparse indices must be set before the first store");
  std::sort(sparse_indices.begin(), sparse_indices.end());
  if (std::adjacent_find(sparse_indices.begin(), sparse_indices.end()) != sparse_indices.end()) {
    throw ConfigError("sparse indices must be unique");
  }
  for (int j : sparse_indices) {
    if (j < 0 || j >= hidden_) throw ConfigError("sparse index " + std::to_string(j) + " out of range");
  }
  sparse_indices_ = std::move(sparse_indices);
}

void EpisodicStore::store(const ContextKey& key, const Vector& cell_state) {
  if (cell_state.size() != hidden_) throw ContractViolation("stored cell state has the wrong width");
  if (!cell_state.allFinite()) throw ContractViolation("stored cell state is not finite");
  if (mode_ == StoreMode::Dense) {
    entries_[key.task_id].assign(cell_state.data(), cell_state.data() + cell_state.size());
    return;
  }
  if (!sparse_indices_) throw ConfigError("sparse store has no indices");
  std::vector<double> compact;
  compact.reserve(sparse_indices_->size());
  for (int j : *sparse_indices_) compact.push_back(cell_state[j]);
  entries_[key.task_id] = std::move(compact);
}

Vector EpisodicStore::retrieve(const ContextKey& key) const { return retrieve(key.task_id); }

Vector EpisodicStore::retrieve(TaskId id) const {
  Vector out = Vector::Zero(hidden_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return out;
  if (mode_ == StoreMode::Dense) {
    std::copy(it->second.begin(), it->second.end(), out.data());
  } else {
    const auto& idx = *sparse_indices_;
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = it->second[k];
  }
  return out;
}

StorageReport EpisodicStore::storage_report() const {
  StorageReport r;
  r.entries = entries_.size();
  const std::size_t sparse_width = sparse_indices_ ? sparse_indices_->size() : 0;
  const std::size_t per_entry =
      mode_ == StoreMode::Dense ? static_cast<std::size_t>(hidden_) : sparse_width;
  const std::size_t index_cost = mode_ == StoreMode::Dense ? 0 : sparse_width;
  r.floats_stored = r.entries * per_entry + index_cost;
  r.dense_equivalent_floats = r.entries * static_cast<std::size_t>(hidden_);
  r.savings_fraction =
      r.dense_equivalent_floats == 0
          ? 0.0
          : 1.0 - static_cast<double>(r.floats_stored) / static_cast<double>(r.dense_equivalent_floats);
  return r;
}

EpisodicStore EpisodicStore::to_sparse(std::vector<int> indices) const {
  EpisodicStore out(hidden_, std::move(indices));
  for (const auto& [id, _] : entries_) out.store(ContextKey{id, {}}, retrieve(id));
  return out;
}

void EpisodicStore::save(const std::filesystem::path& manifest) const {
  if (mode_ == StoreMode::Sparse && !sparse_indices_) throw ConfigError("sparse store has no indices");
  const std::size_t width =
      mode_ == StoreMode::Dense ? static_cast<std::size_t>(hidden_) : sparse_indices_->size();
  NamedTensor values{"memory.values",
                     {static_cast<std::int64_t>(entries_.size()), static_cast<std::int64_t>(width)},
                     {}};
  nlohmann::json table = nlohmann::json::array();
  values.data.reserve(entries_.size() * width);
  for (const auto& [id, v] : entries_) {
    table.push_back({{"task_id", id}, {"offset", values.data.size() * 8}});
    values.data.insert(values.data.end(), v.begin(), v.end());
  }
  nlohmann::json j;
  j["format"] = "eph-tensors";
  j["version"] = 1;
  j["kind"] = "episodic-memory";
  j["mode"] = mode_ == StoreMode::Dense ? "dense" : "sparse";
  j["hidden"] = hidden_;
  if (sparse_indices_) j["sparse_indices"] = *sparse_indices_;
  j["entries"] = table;
  j["binary"] = sidecar_path(manifest).filename().string();
  j["tensors"] = detail::write_sidecar(manifest, {values});
  detail::write_json(manifest, j);
}

EpisodicStore EpisodicStore::load(const std::filesystem::path& manifest) {
  const nlohmann::json j = detail::read_json(manifest);
  try {
    if (j.at("kind") != "episodic-memory") throw IoError(manifest.string() + " is not a memory file");
    const int hidden = j.at("hidden").get<int>();
    EpisodicStore store = j.at("mode") == "sparse"
                              ? EpisodicStore(hidden, j.at("sparse_indices").get<std::vector<int>>())
                              : EpisodicStore(hidden);
    const auto tensors = detail::read_sidecar(manifest, j.at("tensors"));
    const NamedTensor& values = tensors.at(0);
    const auto width = static_cast<std::size_t>(values.shape.at(1));
    for (const auto& e : j.at("entries")) {
      const auto offset = e.at("offset").get<std::size_t>() / 8;
      if (offset + width > values.data.size()) throw IoError("memory entry past end of payload");
      store.entries_[e.at("task_id").get<TaskId>()] =
          std::vector<double>(values.data.begin() + static_cast<std::ptrdiff_t>(offset),
                              values.data.begin() + static_cast<std::ptrdiff_t>(offset + width));
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest.string() + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw IoError(manifest.string() + ": " + e.what());
  }
}

}  // namespace eph
