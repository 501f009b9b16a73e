#include "eph/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <type_traits>
#include <variant>

#include "eph/error.hpp"

namespace eph {
namespace {

using FieldRef = std::variant<int*, double*, bool*, std::uint64_t*>;

template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  f("env.world_size", &c.env.world_size);
  f("env.field_size", &c.env.field_size);
  f("env.trials", &c.env.trials);
  f("env.step_cap", &c.env.step_cap);
  f("env.object_count", &c.env.object_count);
  f("env.train_objects", &c.env.train_objects);
  f("env.reward_correct", &c.env.reward_correct);
  f("env.reward_wrong", &c.env.reward_wrong);
  f("env.reward_fixation", &c.env.reward_fixation);
  f("env.shuffle_sides", &c.env.shuffle_sides);
  f("env.one_hot_objects", &c.env.one_hot_objects);
  f("env.object_code_dim", &c.env.object_code_dim);
  f("env.object_code_seed", &c.env.object_code_seed);
  f("model.encoder_hidden", &c.model.encoder_hidden);
  f("model.encoder_out", &c.model.encoder_out);
  f("model.hidden", &c.model.hidden);
  f("model.context_dim", &c.model.context_dim);
  f("train.episodes_train", &c.train.episodes_train);
  f("train.episodes_test", &c.train.episodes_test);
  f("train.gamma", &c.train.gamma);
  f("train.lr", &c.train.lr);
  f("train.rmsprop_alpha", &c.train.rmsprop_alpha);
  f("train.rmsprop_eps", &c.train.rmsprop_eps);
  f("train.value_coef", &c.train.value_coef);
  f("train.entropy_coef_start", &c.train.entropy_coef_start);
  f("train.entropy_coef_end", &c.train.entropy_coef_end);
  f("train.grad_clip_norm", &c.train.grad_clip_norm);
  f("train.seed", &c.train.seed);
  f("train.filter_episodes", &c.train.filter_episodes);
  f("train.filter_keep", &c.train.filter_keep);
  f("analysis.r_star_window", &c.analysis.r_star_window);
  f("analysis.convergence_stride", &c.analysis.convergence_stride);
  f("analysis.sparse_threshold", &c.analysis.sparse_threshold);
  f("analysis.ablation_episodes", &c.analysis.ablation_episodes);
  f("analysis.eval_seed", &c.analysis.eval_seed);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_value(int v) { return std::to_string(v); }
std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T out{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return out;
}

// from_chars for double is available in libstdc++ 11, but strtod keeps
// parsing identical across older toolchains.
template <>
double parse_number<double>(const std::string& key, const std::string& text) {
  if (text.empty()) throw ConfigError("empty value for " + key);
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  ExperimentConfig c;
  visit_fields(c, [&](const char* key, auto*) { out.emplace_back(key); });
  return out;
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> out;
  auto copy = *this;
  visit_fields(copy, [&](const char* key, auto* field) { out[key] = format_value(*field); });
  return out;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  auto copy = *this;
  visit_fields(copy, [&](const char* key, auto* field) {
    os << key << " = " << format_value(*field) << '\n';
  });
  return os.str();
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  bool found = false;
  visit_fields(*this, [&](const char* name, auto* field) {
    if (key != name) return;
    found = true;
    using T = std::remove_pointer_t<decltype(field)>;
    if constexpr (std::is_same_v<T, bool>) {
      *field = parse_bool(key, value);
    } else {
      *field = parse_number<T>(key, value);
    }
  });
  if (!found) throw ConfigError("unknown config key '" + key + "'");
}

std::string env_variable_for(const std::string& key) {
  std::string out = "EPH_";
  for (char ch : key) {
    out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return out;
}

void ExperimentConfig::apply_environment() {
  for (const auto& key : keys()) {
    if (const char* v = std::getenv(env_variable_for(key).c_str())) set(key, v);
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config " + path.string());
  out << to_text();
  if (!out) throw IoError("failed writing " + path.string());
}

void ExperimentConfig::validate() const {
  require(env.world_size >= 8, "env.world_size must be >= 8");
  require(env.field_size >= 5 && env.field_size <= env.world_size,
          "env.field_size must be in [5, world_size]");
  require(env.world_size - env.field_size >= 0, "env.field_size exceeds world");
  require(env.trials >= 1, "env.trials must be >= 1");
  require(env.step_cap >= 1, "env.step_cap must be >= 1");
  require(env.one_hot_objects || env.object_code_dim >= 1, "env.object_code_dim must be positive");
  require(env.object_count >= 4, "env.object_count must be >= 4");
  require(env.train_objects >= 2 && env.object_count - env.train_objects >= 2,
          "each object split needs at least 2 objects");
  require(std::isfinite(env.reward_correct) && std::isfinite(env.reward_wrong) &&
              std::isfinite(env.reward_fixation),
          "rewards must be finite");
  require(model.encoder_hidden >= 1 && model.encoder_out >= 1 && model.hidden >= 1,
          "model widths must be positive");
  require(model.context_dim >= 1, "model.context_dim must be positive");
  require(train.episodes_train >= 1, "train.episodes_train must be >= 1");
  require(train.episodes_test >= 1, "train.episodes_test must be >= 1");
  require(std::isfinite(train.gamma) && train.gamma > 0.0 && train.gamma <= 1.0,
          "train.gamma must be in (0, 1]");
  require(std::isfinite(train.lr) && train.lr > 0.0, "train.lr must be positive");
  require(std::isfinite(train.rmsprop_alpha) && train.rmsprop_alpha >= 0.0 &&
              train.rmsprop_alpha < 1.0,
          "train.rmsprop_alpha must be in [0, 1)");
  require(std::isfinite(train.rmsprop_eps) && train.rmsprop_eps > 0.0,
          "train.rmsprop_eps must be positive");
  require(std::isfinite(train.value_coef) && train.value_coef >= 0.0,
          "train.value_coef must be finite and >= 0");
  require(std::isfinite(train.entropy_coef_start) && std::isfinite(train.entropy_coef_end),
          "entropy coefficients must be finite");
  require(std::isfinite(train.grad_clip_norm) && train.grad_clip_norm > 0.0,
          "train.grad_clip_norm must be positive");
  require(train.filter_episodes >= 1 && train.filter_keep >= 1, "filter sizes must be positive");
  require(analysis.r_star_window >= 1, "analysis.r_star_window must be >= 1");
  require(analysis.convergence_stride >= 1, "analysis.convergence_stride must be >= 1");
  require(analysis.sparse_threshold >= 0.0 && analysis.sparse_threshold <= 1.0,
          "analysis.sparse_threshold must be in [0, 1]");
  require(analysis.ablation_episodes >= 1, "analysis.ablation_episodes must be >= 1");
}

}  // namespace eph
