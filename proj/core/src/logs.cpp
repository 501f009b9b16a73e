#include "eph/logs.hpp"

#include <json.hpp>

#include <charconv>
#include <istream>
#include <ostream>
#include <string>

#include "eph/error.hpp"

namespace eph {
namespace {

template <class T>
T parse_field(const std::string& text, const char* what) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw IoError(std::string("bad ") + what + " field '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ContractViolation("number formatting failed");
  return std::string(buf, ptr);
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out << ',';
    out << csv_field(fields[k]);
  }
  out << "\r\n";
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  bool after_quote = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  char ch;
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == ',') {
      end_field();
    } else if (ch == '\r' || ch == '\n') {
      if (ch == '\r' && in.peek() == '\n') in.get(ch);
      end_row();
    } else if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else {
      if (after_quote) throw IoError("CSV: text after a closing quote");
      if (ch == '"') throw IoError("CSV: stray quote inside an unquoted field");
      field += ch;
      field_started = true;
    }
  }
  if (quoted) throw IoError("CSV: unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

void write_episode_log(std::ostream& out, std::span<const EpisodeRecord> log) {
  out << kEpisodeLogHeader << "\r\n";
  std::vector<std::string> fields(6);
  for (const auto& rec : log) {
    for (std::size_t t = 0; t < rec.trials.size(); ++t) {
      const TrialRecord& tr = rec.trials[t];
      fields[0] = std::to_string(rec.episode);
      fields[1] = std::to_string(t);
      fields[2] = format_number(tr.reward);
      fields[3] = std::to_string(tr.fixated ? tr.steps_to_fixation : -1);
      fields[4] = std::to_string(rec.task_id);
      fields[5] = std::to_string(rec.exposure_count);
      write_csv_row(out, fields);
    }
  }
}

std::vector<EpisodeRecord> read_episode_log(std::istream& in, const EnvConfig& cfg) {
  const auto rows = read_csv(in);
  if (rows.empty()) throw IoError("episode log is empty");
  std::string header;
  for (std::size_t k = 0; k < rows[0].size(); ++k) header += (k ? "," : "") + rows[0][k];
  if (header != kEpisodeLogHeader) throw IoError("unexpected episode log header: " + header);

  std::vector<EpisodeRecord> log;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 6) throw IoError("episode log row " + std::to_string(r) + " has " + std::to_string(f.size()) + " fields");
    const int episode = parse_field<int>(f[0], "episode");
    const int trial = parse_field<int>(f[1], "trial");
    const double reward = parse_field<double>(f[2], "reward");
    const int steps = parse_field<int>(f[3], "steps_to_fixation");
    if (log.empty() || log.back().episode != episode) {
      EpisodeRecord rec;
      rec.episode = episode;
      rec.task_id = parse_field<TaskId>(f[4], "task_id");
      rec.exposure_count = parse_field<int>(f[5], "exposure_count");
      log.push_back(std::move(rec));
    }
    EpisodeRecord& rec = log.back();
    if (trial != static_cast<int>(rec.trials.size())) {
      throw IoError("episode " + std::to_string(episode) + ": trials out of order");
    }
    TrialRecord tr;
    tr.fixated = steps >= 0;
    tr.steps_to_fixation = steps;
    tr.completed = reward == cfg.reward_correct || reward == cfg.reward_wrong;
    tr.correct = tr.completed && reward == cfg.reward_correct;
    tr.reward = reward;
    rec.trials.push_back(tr);
  }
  return log;
}

std::vector<TraceStep> trace_steps(int episode, const RolloutTrace& trace) {
  std::vector<TraceStep> out(trace.length());
  for (std::size_t t = 0; t < trace.length(); ++t) {
    TraceStep& s = out[t];
    s.episode = episode;
    s.step = static_cast<int>(t);
    s.trial = trace.infos[t].trial_index;
    s.phase = trace.infos[t].phase;
    s.action = trace.actions[t];
    s.reward = trace.rewards[t];
    s.done = t + 1 == trace.length();
    s.heading = trace.headings[t];
    s.env_seed = trace.env_seed;
    s.task_id = trace.task.id();
  }
  return out;
}

void write_trace(std::ostream& out, std::span<const TraceStep> steps) {
  for (const auto& s : steps) {
    nlohmann::ordered_json j;
    j["episode"] = s.episode;
    j["step"] = s.step;
    j["trial"] = s.trial;
    j["phase"] = to_string(s.phase);
    j["action"] = to_string(s.action);
    j["reward"] = s.reward;
    j["done"] = s.done;
    j["heading"] = s.heading;
    j["env_seed"] = s.env_seed;
    j["task_id"] = s.task_id;
    out << j.dump() << '\n';
  }
}

std::vector<TraceStep> read_trace(std::istream& in) {
  std::vector<TraceStep> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceStep s;
      s.episode = j.at("episode").get<int>();
      s.step = j.at("step").get<int>();
      s.trial = j.at("trial").get<int>();
      const auto phase = j.at("phase").get<std::string>();
      if (phase != "fixation" && phase != "choice") throw IoError("unknown phase " + phase);
      s.phase = phase == "fixation" ? Phase::Fixation : Phase::Choice;
      const auto action = j.at("action").get<std::string>();
      if (action != "left" && action != "right") throw IoError("unknown action " + action);
      s.action = action == "left" ? Action::Left : Action::Right;
      s.reward = j.at("reward").get<double>();
      s.done = j.at("done").get<bool>();
      s.heading = j.at("heading").get<int>();
      s.env_seed = j.at("env_seed").get<std::uint64_t>();
      s.task_id = j.at("task_id").get<TaskId>();
      out.push_back(s);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Task task_from_id(TaskId id, const EnvConfig& cfg) {
  const TaskId n = cfg.object_count;
  if (id < 0 || id >= n * n || id / n == id % n) {
    throw ContractViolation("invalid task id " + std::to_string(id));
  }
  Task task;
  task.rewarding_object = static_cast<ObjectId>(id / n);
  task.other_object = static_cast<ObjectId>(id % n);
  task.context.task_id = id;
  return task;
}

ReplayReport replay(std::span<const TraceStep> steps, const EnvConfig& cfg) {
  ReplayReport report;
  HarlowEnv env(cfg);
  for (std::size_t k = 0; k < steps.size();) {
    const TraceStep& first = steps[k];
    env.reset(task_from_id(first.task_id, cfg), first.env_seed);
    ++report.episodes;
    std::size_t t = k;
    for (; t < steps.size() && steps[t].episode == first.episode; ++t) {
      const TraceStep& s = steps[t];
      ++report.steps;
      if (env.state().done) {
        ++report.mismatches;
        continue;
      }
      const StepOutcome out = env.step(s.action);
      if (out.reward != s.reward || out.done != s.done || env.state().heading != s.heading) {
        ++report.mismatches;
      }
    }
    k = t;
  }
  return report;
}

}  // namespace eph
