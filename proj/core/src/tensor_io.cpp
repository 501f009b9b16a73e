#include "eph/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "eph/error.hpp"
#include "tensor_json.hpp"

namespace eph {
namespace {

constexpr const char* kFormat = "eph-tensors";
constexpr int kVersion = 1;

void put_le(std::vector<char>& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

NamedTensor NamedTensor::from(std::string name, const Matrix& m) {
  NamedTensor t{std::move(name), {m.rows(), m.cols()}, {}};
  t.data.resize(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data.data(), m.rows(), m.cols()) = m;
  return t;
}

NamedTensor NamedTensor::from(std::string name, const Vector& v) {
  return NamedTensor{std::move(name), {v.size()}, std::vector<double>(v.data(), v.data() + v.size())};
}

std::int64_t NamedTensor::element_count() const {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

Matrix NamedTensor::to_matrix() const {
  if (shape.size() != 2) throw IoError("tensor " + name + " is not a matrix");
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data.data(), shape[0], shape[1]);
}

Vector NamedTensor::to_vector() const {
  if (shape.size() != 1) throw IoError("tensor " + name + " is not a vector");
  return Eigen::Map<const Vector>(data.data(), shape[0]);
}

const NamedTensor& TensorFile::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw IoError("missing tensor '" + name + "'");
}

bool TensorFile::has_tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

std::filesystem::path sidecar_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

namespace detail {

nlohmann::json write_sidecar(const std::filesystem::path& manifest,
                             const std::vector<NamedTensor>& tensors) {
  std::vector<char> bytes;
  nlohmann::json descriptors = nlohmann::json::array();
  for (const auto& t : tensors) {
    if (t.element_count() != static_cast<std::int64_t>(t.data.size())) {
      throw IoError("tensor " + t.name + " shape does not match its data");
    }
    descriptors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", bytes.size()}});
    bytes.reserve(bytes.size() + 8 * t.data.size());
    for (double v : t.data) put_le(bytes, v);
  }
  const auto path = sidecar_path(manifest);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
  return descriptors;
}

std::vector<NamedTensor> read_sidecar(const std::filesystem::path& manifest,
                                      const nlohmann::json& descriptors) {
  const auto path = sidecar_path(manifest);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<NamedTensor> out;
  for (const auto& d : descriptors) {
    NamedTensor t;
    t.name = d.at("name").get<std::string>();
    t.shape = d.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = d.at("offset").get<std::size_t>();
    const auto count = static_cast<std::size_t>(t.element_count());
    if (offset + 8 * count > bytes.size()) {
      throw IoError("tensor " + t.name + " runs past the end of " + path.string());
    }
    t.data.resize(count);
    for (std::size_t k = 0; k < count; ++k) t.data[k] = get_le(bytes.data() + offset + 8 * k);
    out.push_back(std::move(t));
  }
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

void save_tensor_file(const std::filesystem::path& manifest, const TensorFile& file) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = file.kind;
  j["metadata"] = file.metadata;
  j["config"] = file.config;
  j["binary"] = sidecar_path(manifest).filename().string();
  j["tensors"] = detail::write_sidecar(manifest, file.tensors);
  detail::write_json(manifest, j);
}

TensorFile load_tensor_file(const std::filesystem::path& manifest) {
  const nlohmann::json j = detail::read_json(manifest);
  try {
    if (j.at("format") != kFormat || j.at("version") != kVersion) {
      throw IoError(manifest.string() + ": unsupported tensor file format");
    }
    TensorFile file;
    file.kind = j.at("kind").get<std::string>();
    file.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    file.config = j.at("config").get<std::map<std::string, std::string>>();
    file.tensors = detail::read_sidecar(manifest, j.at("tensors"));
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest.string() + ": " + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& ckpt) {
  TensorFile file;
  file.kind = "checkpoint";
  file.metadata["seed"] = std::to_string(ckpt.seed);
  file.metadata["episodes"] = std::to_string(ckpt.episodes);
  file.config = ckpt.config.to_map();
  ckpt.params.for_each(
      [&](std::string_view name, const auto& t) { file.tensors.push_back(NamedTensor::from(std::string(name), t)); });
  save_tensor_file(manifest, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
  TensorFile file = load_tensor_file(manifest);
  if (file.kind != "checkpoint") throw IoError(manifest.string() + " is not a checkpoint");
  Checkpoint ckpt;
  for (const auto& [k, v] : file.config) ckpt.config.set(k, v);
  ckpt.seed = std::stoull(file.metadata.at("seed"));
  ckpt.episodes = std::stoi(file.metadata.at("episodes"));
  ckpt.params = ModelParams::zeros(ModelDims::from(ckpt.config));
  ckpt.params.for_each([&](std::string_view name, auto& t) {
    const NamedTensor& stored = file.tensor(std::string(name));
    if (stored.element_count() != t.size()) {
      throw IoError("tensor " + stored.name + " has the wrong shape for this config");
    }
    if constexpr (std::remove_reference_t<decltype(t)>::ColsAtCompileTime == 1) {
      t = stored.to_vector();
    } else {
      t = stored.to_matrix();
    }
  });
  return ckpt;
}

}  // namespace eph
