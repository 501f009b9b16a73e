#include "eph/run_dir.hpp"

#include <fstream>

#include "eph/error.hpp"
#include "eph/logs.hpp"
#include "eph/tensor_io.hpp"

namespace fs = std::filesystem;

namespace eph {
namespace {

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError("missing run file " + p.string());
}

}  // namespace

void write_atomically(const fs::path& dir, const std::function<void(const fs::path&)>& fill) {
  fs::path target = dir;
  if (target.filename().empty()) target = target.parent_path();
  const fs::path staging = target.string() + ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
    fs::create_directories(staging);
    fill(staging);
    fs::remove_all(target);
    fs::rename(staging, target);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw IoError(e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

void save_gate_history(const fs::path& manifest, const Matrix& history) {
  TensorFile file;
  file.kind = "gate-history";
  file.metadata["episodes"] = std::to_string(history.rows());
  file.metadata["hidden"] = std::to_string(history.cols());
  file.tensors.push_back(NamedTensor::from("gate_history", history));
  save_tensor_file(manifest, file);
}

Matrix load_gate_history(const fs::path& manifest) {
  const TensorFile file = load_tensor_file(manifest);
  if (file.kind != "gate-history") throw IoError(manifest.string() + " is not a gate history");
  return file.tensor("gate_history").to_matrix();
}

void write_run(const fs::path& dir, const TrainResult& result) {
  write_atomically(dir, [&](const fs::path& staging) {
    const RunLayout run{staging};
    result.config.save(run.config());
    save_checkpoint(run.checkpoint(), Checkpoint{result.config, result.config.train.seed,
                                                 static_cast<int>(result.log.size()), result.params});
    result.memory.save(run.memory());
    save_gate_history(run.gate_history(), result.gate_history);
    std::ofstream log(run.train_log(), std::ios::binary);
    write_episode_log(log, result.log);
    if (!log) throw IoError("failed to write " + run.train_log().string());
  });
}

RunData load_run(const fs::path& dir, bool with_log) {
  const RunLayout run{dir};
  require_file(run.checkpoint());
  require_file(run.memory());
  require_file(run.gate_history());

  RunData data;
  data.dir = dir;
  Checkpoint ckpt = load_checkpoint(run.checkpoint());
  data.config = ckpt.config;
  data.seed = ckpt.seed;
  data.episodes = ckpt.episodes;
  data.params = std::move(ckpt.params);
  data.memory = EpisodicStore::load(run.memory());
  data.gate_history = load_gate_history(run.gate_history());
  if (with_log) {
    require_file(run.train_log());
    std::ifstream in(run.train_log(), std::ios::binary);
    data.train_log = read_episode_log(in, data.config.env);
  }
  return data;
}

}  // namespace eph
