#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include "eph/analysis.hpp"
#include "eph/error.hpp"
#include "eph/logs.hpp"
#include "eph/report.hpp"
#include "eph/run_dir.hpp"
#include "eph/trainer.hpp"

namespace fs = std::filesystem;

namespace eph::cli {
namespace {

std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("not a non-negative integer: '" + std::string(text) + "'");
  }
  return v;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out;
  int jobs = 1;
  int progress = 0;
};

struct EvalArgs {
  std::string run;
  std::optional<int> episodes;
  std::string mask;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string trace;
  std::string split = "test";
};

struct AnalyzeArgs {
  std::vector<std::string> runs;
  std::string out;
  std::optional<int> episodes;
  bool no_ablations = false;
};

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
  cfg.apply_environment();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.seed && !a.seeds.empty()) throw ConfigError("--seed and --seeds are mutually exclusive");
  if (a.jobs < 1) throw ConfigError("--jobs must be at least 1");
  ExperimentConfig base = load_config(a.config);
  base.validate();

  std::vector<std::uint64_t> seeds;
  if (!a.seeds.empty()) {
    seeds = parse_seed_range(a.seeds);
  } else {
    seeds.push_back(a.seed.value_or(base.train.seed));
  }
  const bool fan_out = !a.seeds.empty();

  std::mutex io;
  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < seeds.size(); k = next++) {
      ExperimentConfig cfg = base;
      cfg.train.seed = seeds[k];
      const fs::path dir = fan_out ? fs::path(a.out) / ("seed_" + std::to_string(seeds[k])) : fs::path(a.out);
      try {
        double window_reward = 0.0;
        EpisodeCallback progress;
        if (a.progress > 0) {
          progress = [&, seed = seeds[k]](const EpisodeRecord& r) {
            window_reward += r.total_reward;
            if ((r.episode + 1) % a.progress != 0) return;
            std::lock_guard lock(io);
            err << "seed " << seed << " episode " << r.episode + 1 << " mean reward "
                << format_number(window_reward / a.progress) << '\n';
            window_reward = 0.0;
          };
        }
        const TrainResult result = train_run(cfg, progress);
        write_run(dir, result);
        const std::size_t tail = std::min<std::size_t>(result.log.size(), 1000);
        const double last = mean_episode_reward(std::span(result.log).last(tail));
        std::lock_guard lock(io);
        out << "wrote " << dir.string() << ": " << result.log.size() << " episodes, mean reward over the last "
            << tail << " " << format_number(last);
        if (result.skipped_updates) out << ", " << result.skipped_updates << " skipped updates";
        out << '\n';
      } catch (const std::exception& e) {
        ++failures;
        std::lock_guard lock(io);
        err << "seed " << seeds[k] << ": " << e.what() << '\n';
      }
    }
  };
  const int threads = std::min<int>(a.jobs, static_cast<int>(seeds.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return failures == 0 ? kOk : kFailure;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  if (a.split != "test" && a.split != "train") throw ConfigError("--split must be test or train");
  const RunData run = load_run(a.run, false);
  const ExperimentConfig& cfg = run.config;

  std::optional<MaskSpec> spec;
  std::optional<CellMask> mask;
  if (!a.mask.empty()) {
    spec = parse_mask_spec(a.mask);
    const Vector r_star = compute_r_star(run.gate_history, cfg.analysis.r_star_window);
    mask = region_mask(r_star, spec->theta, spec->region);
  }

  EvalOptions opts;
  opts.split = a.split == "test" ? Split::Test : Split::Train;
  opts.episodes = a.episodes.value_or(cfg.train.episodes_test);
  if (opts.episodes < 1) throw ConfigError("--episodes must be positive");
  opts.seed = a.seed.value_or(cfg.analysis.eval_seed);
  opts.mask = mask ? &*mask : nullptr;

  std::ofstream trace_out;
  if (!a.trace.empty()) {
    trace_out.open(a.trace, std::ios::binary);
    if (!trace_out) throw IoError("cannot write " + a.trace);
    opts.on_episode = [&](const RolloutTrace& t) {
      write_trace(trace_out, trace_steps(t.record.episode, t));
    };
  }
  const auto log = evaluate(cfg, run.params, run.memory, opts);

  fs::path log_path = a.out;
  if (log_path.empty()) {
    std::string name = a.split + "_log";
    if (spec) name += "_" + to_string(spec->region) + "_" + format_number(spec->theta);
    log_path = fs::path(a.run) / "eval" / (name + ".csv");
  }
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  {
    std::ofstream csv(log_path, std::ios::binary);
    write_episode_log(csv, log);
    if (!csv) throw IoError("failed to write " + log_path.string());
  }
  if (trace_out.is_open()) {
    trace_out.close();
    if (!trace_out) throw IoError("failed to write " + a.trace);
  }

  const EvalMetrics m = summarize(log);
  nlohmann::ordered_json j;
  j["log"] = log_path.string();
  j["split"] = a.split;
  j["episodes"] = m.episodes;
  if (spec) {
    j["mask"] = {{"region", to_string(spec->region)}, {"theta", spec->theta},
                 {"dropped", mask->zeroed_indices().size()}};
  }
  j["mean_reward"] = m.mean_reward;
  j["later_trial_accuracy"] = m.later_trial_accuracy;
  j["first_trial_accuracy_exposed"] = m.first_trial_accuracy;
  j["exposed_episodes"] = m.exposed_completed;
  j["mean_steps_to_fixation"] = m.mean_steps_to_fixation;
  out << j.dump(2) << '\n';
  return kOk;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<RunData> runs;
  for (const auto& dir : a.runs) runs.push_back(load_run(dir));
  check_compatible(runs);
  const ExperimentConfig& cfg = runs.front().config;

  std::optional<FilterResult> filter;
  std::vector<const RunData*> accepted;
  if (static_cast<int>(runs.size()) > cfg.train.filter_keep) {
    std::vector<SeedCandidate> candidates;
    for (const auto& r : runs) {
      candidates.push_back({r.dir.string(), r.seed, r.config, r.params, r.memory});
    }
    filter = filter_seeds(candidates, cfg.train.filter_episodes, cfg.train.filter_keep);
    for (const auto& w : filter->warnings) err << "warning: " << w << '\n';
    for (const auto& s : filter->accepted) accepted.push_back(&runs[s.index]);
  } else {
    for (const auto& r : runs) accepted.push_back(&r);
  }

  ReportOptions opts;
  opts.test_episodes = a.episodes.value_or(cfg.train.episodes_test);
  opts.ablation_episodes = a.episodes.value_or(cfg.analysis.ablation_episodes);
  opts.ablations = !a.no_ablations;
  std::vector<RunAnalysis> results;
  for (const RunData* r : accepted) results.push_back(analyze_run(*r, opts));
  write_report(a.out, results, filter ? &*filter : nullptr);
  out << "analyzed " << results.size() << " of " << runs.size() << " runs into " << a.out << '\n';
  return kOk;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw ConfigError("seed range must look like a..b, got '" + text + "'");
  const std::uint64_t lo = parse_u64(std::string_view(text).substr(0, dots));
  const std::uint64_t hi = parse_u64(std::string_view(text).substr(dots + 2));
  if (hi < lo) throw ConfigError("empty seed range '" + text + "'");
  if (hi - lo >= 100000) throw ConfigError("seed range '" + text + "' is too large");
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  return seeds;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Episodic meta-RL on the symbolic Harlow task", "eph"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train one run per seed");
  train->add_option("--config", ta.config, "Key-value config file")->check(CLI::ExistingFile);
  train->add_option("--seed", ta.seed, "Seed (defaults to train.seed)");
  train->add_option("--seeds", ta.seeds, "Inclusive seed range a..b; runs go to OUT/seed_N");
  train->add_option("--out", ta.out, "Run directory")->required();
  train->add_option("--jobs", ta.jobs, "Concurrent trainers for --seeds");
  train->add_option("--progress", ta.progress, "Report mean reward every N episodes");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run");
  eval->add_option("--run", ea.run, "Run directory")->required();
  eval->add_option("--episodes", ea.episodes, "Evaluation episodes (defaults to train.episodes_test)");
  eval->add_option("--mask", ea.mask, "Drop cell units, e.g. episodic:0.9 or abstract:0.3");
  eval->add_option("--seed", ea.seed, "Evaluation seed (defaults to analysis.eval_seed)");
  eval->add_option("--split", ea.split, "Object split: test or train");
  eval->add_option("--out", ea.out, "Log path (defaults to RUN/eval/<split>_log[_mask].csv)");
  eval->add_option("--trace", ea.trace, "Also write a per-step JSON-lines trace");

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Figure tables and summary across runs");
  analyze->add_option("--runs", aa.runs, "Run directories")->required()->expected(1, -1);
  analyze->add_option("--out", aa.out, "Report directory")->required();
  analyze->add_option("--episodes", aa.episodes, "Override evaluation episode counts");
  analyze->add_flag("--no-ablations", aa.no_ablations, "Skip the masking sweeps");

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("eph");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(ta, out, err);
    if (*eval) return cmd_eval(ea, out, err);
    return cmd_analyze(aa, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace eph::cli
