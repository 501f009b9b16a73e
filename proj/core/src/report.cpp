#include "eph/report.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

#include "eph/error.hpp"
#include "eph/logs.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace eph {
namespace {

struct Pooled {
  double mean = std::nan("");
  double std = std::nan("");
  std::size_t n = 0;
};

Pooled pool(const std::vector<double>& values) {
  Pooled p;
  double sum = 0.0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++p.n;
  }
  if (p.n == 0) return p;
  p.mean = sum / static_cast<double>(p.n);
  double ss = 0.0;
  for (double v : values) {
    if (!std::isnan(v)) ss += (v - p.mean) * (v - p.mean);
  }
  p.std = p.n > 1 ? std::sqrt(ss / static_cast<double>(p.n - 1)) : 0.0;
  return p;
}

ordered_json to_json(const Pooled& p) {
  return ordered_json{{"mean", p.mean}, {"std", p.std}, {"n", p.n}};
}

std::string num(double v) { return std::isnan(v) ? std::string() : format_number(v); }

class Csv {
 public:
  Csv(const fs::path& path, std::vector<std::string> header) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
    write_csv_row(out_, header);
  }
  void row(const std::vector<std::string>& fields) { write_csv_row(out_, fields); }
  ~Csv() = default;
  void close() {
    out_.close();
    if (!out_) throw IoError("failed to write " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

const AblationResult* at_theta(const std::vector<AblationResult>& sweep, double theta) {
  const AblationResult* best = nullptr;
  for (const auto& r : sweep) {
    if (!best || std::abs(r.theta - theta) < std::abs(best->theta - theta)) best = &r;
  }
  return best;
}

double relative_change(double base, double value) {
  return base == 0.0 ? std::nan("") : (value - base) / base;
}

std::string seed_label(const RunAnalysis& r) { return std::to_string(r.seed); }

}  // namespace

RunAnalysis analyze_run(const RunData& run, const ReportOptions& options) {
  const ExperimentConfig& cfg = run.config;
  const AnalysisConfig& ac = cfg.analysis;
  RunAnalysis out;
  out.name = run.dir.filename().string();
  out.seed = run.seed;
  out.trials = cfg.env.trials;

  out.r_star = compute_r_star(run.gate_history, ac.r_star_window);
  const auto edges = uniform_edges(options.histogram_bins);
  out.histogram = openness_histogram(out.r_star, edges);
  out.open_fraction = fraction_at_least(out.r_star, 0.9);
  out.closed_fraction = fraction_below(out.r_star, 0.1);

  const int episodes = static_cast<int>(run.gate_history.rows());
  const int window = std::min(ac.r_star_window, episodes);
  out.convergence = gate_convergence(run.gate_history, window, ac.convergence_stride);
  out.first_window_std = window_mean_std(run.gate_history, 0, window);
  out.last_window_std = window_mean_std(run.gate_history, episodes - window, window);

  out.training_curve = training_quantile_curve(run.train_log, options.quantiles, cfg.env.trials);

  out.cosine = CosineConsistency(decile_regions(out.r_star));
  EvalOptions eval;
  eval.split = Split::Test;
  eval.episodes = options.test_episodes;
  eval.seed = ac.eval_seed;
  eval.keep_tape = true;
  std::vector<Vector> cells;
  eval.on_episode = [&](const RolloutTrace& trace) {
    if (trace.retrieval_step < 0) return;
    cells.clear();
    for (const auto& st : trace.tape) cells.push_back(st.c);
    out.cosine.add(cells, trace.retrieval_step);
  };
  const auto test_log = evaluate(cfg, run.params, run.memory, eval);
  out.test = summarize(test_log);
  out.exposure = exposure_curve(test_log, cfg.env.trials);

  if (options.ablations) {
    out.episodic = masking_ablation(cfg, run.params, run.memory, out.r_star, options.thetas,
                                    Region::Episodic, options.ablation_episodes, ac.eval_seed);
    out.abstract = masking_ablation(cfg, run.params, run.memory, out.r_star, options.thetas,
                                    Region::Abstract, options.ablation_episodes, ac.eval_seed);
  }

  std::vector<int> keep;
  for (Eigen::Index j = 0; j < out.r_star.size(); ++j) {
    if (out.r_star[j] >= ac.sparse_threshold) keep.push_back(static_cast<int>(j));
  }
  out.sparse_units = keep.size();
  EpisodicStore sparse = run.memory.to_sparse(std::move(keep));
  out.sparse_storage = sparse.storage_report();
  EvalOptions sparse_eval;
  sparse_eval.split = Split::Test;
  sparse_eval.episodes = options.test_episodes;
  sparse_eval.seed = ac.eval_seed;
  out.sparse_test = summarize(evaluate(cfg, run.params, sparse, sparse_eval));
  return out;
}

void check_compatible(const std::vector<RunData>& runs) {
  if (runs.empty()) throw ConfigError("no runs to analyze");
  auto normalized = [](ExperimentConfig c) {
    c.train.seed = 0;
    return c;
  };
  const ExperimentConfig ref = normalized(runs.front().config);
  for (const auto& r : runs) {
    if (!(normalized(r.config) == ref)) {
      throw ConfigError("run " + r.dir.string() + " was trained with a different configuration than " +
                        runs.front().dir.string());
    }
  }
}

void write_report(const fs::path& out, const std::vector<RunAnalysis>& runs, const FilterResult* filter) {
  if (runs.empty()) throw ContractViolation("write_report needs at least one run");
  fs::create_directories(out);
  const int trials = runs.front().trials;
  const bool singleton = runs.size() == 1;

  {
    Csv csv(out / "fig1d.csv", {"seed", "quantile", "first_episode", "last_episode", "trial", "accuracy", "completed"});
    const auto& ref = runs.front().training_curve;
    for (const auto& r : runs) {
      const auto& c = r.training_curve;
      for (std::size_t q = 0; q < c.trials.size(); ++q) {
        for (int t = 0; t < trials; ++t) {
          csv.row({seed_label(r), std::to_string(q + 1), std::to_string(c.first_episode[q]),
                   std::to_string(c.last_episode[q]), std::to_string(t + 1),
                   num(c.trials[q].accuracy[static_cast<std::size_t>(t)]),
                   std::to_string(c.trials[q].completed[static_cast<std::size_t>(t)])});
        }
      }
    }
    for (std::size_t q = 0; q < ref.trials.size(); ++q) {
      for (int t = 0; t < trials; ++t) {
        std::vector<double> acc;
        std::size_t completed = 0;
        for (const auto& r : runs) {
          acc.push_back(r.training_curve.trials[q].accuracy[static_cast<std::size_t>(t)]);
          completed += r.training_curve.trials[q].completed[static_cast<std::size_t>(t)];
        }
        csv.row({"pooled", std::to_string(q + 1), std::to_string(ref.first_episode[q]),
                 std::to_string(ref.last_episode[q]), std::to_string(t + 1), num(pool(acc).mean),
                 std::to_string(completed)});
      }
    }
    csv.close();
  }

  {
    Csv csv(out / "fig1e.csv", {"seed", "exposure", "trial", "accuracy", "completed"});
    std::set<int> exposures;
    for (const auto& r : runs) {
      for (const auto& [e, acc] : r.exposure) {
        exposures.insert(e);
        for (int t = 0; t < trials; ++t) {
          csv.row({seed_label(r), std::to_string(e), std::to_string(t + 1),
                   num(acc.accuracy[static_cast<std::size_t>(t)]),
                   std::to_string(acc.completed[static_cast<std::size_t>(t)])});
        }
      }
    }
    for (int e : exposures) {
      for (int t = 0; t < trials; ++t) {
        std::vector<double> acc;
        std::size_t completed = 0;
        for (const auto& r : runs) {
          auto it = r.exposure.find(e);
          if (it == r.exposure.end()) continue;
          acc.push_back(it->second.accuracy[static_cast<std::size_t>(t)]);
          completed += it->second.completed[static_cast<std::size_t>(t)];
        }
        csv.row({"pooled", std::to_string(e), std::to_string(t + 1), num(pool(acc).mean), std::to_string(completed)});
      }
    }
    csv.close();
  }

  {
    Csv csv(out / "fig2a.csv", {"seed", "window_start", "window_end", "mean_std"});
    for (const auto& r : runs) {
      const auto& c = r.convergence;
      for (std::size_t k = 0; k < c.window_start.size(); ++k) {
        csv.row({seed_label(r), std::to_string(c.window_start[k]), std::to_string(c.window_start[k] + c.window - 1),
                 num(c.mean_std[k])});
      }
    }
    const auto& ref = runs.front().convergence;
    for (std::size_t k = 0; k < ref.window_start.size(); ++k) {
      std::vector<double> v;
      for (const auto& r : runs) {
        if (k < r.convergence.mean_std.size()) v.push_back(r.convergence.mean_std[k]);
      }
      csv.row({"pooled", std::to_string(ref.window_start[k]), std::to_string(ref.window_start[k] + ref.window - 1),
               num(pool(v).mean)});
    }
    csv.close();
  }

  {
    Csv csv(out / "fig2b.csv", {"seed", "bin_low", "bin_high", "count", "fraction"});
    const auto& edges = runs.front().histogram.edges;
    for (const auto& r : runs) {
      const auto& h = r.histogram;
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        csv.row({seed_label(r), num(h.edges[b]), num(h.edges[b + 1]), std::to_string(h.counts[b]), num(h.fractions[b])});
      }
    }
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      std::vector<double> v;
      std::size_t count = 0;
      for (const auto& r : runs) {
        v.push_back(r.histogram.fractions[b]);
        count += r.histogram.counts[b];
      }
      csv.row({"pooled", num(edges[b]), num(edges[b + 1]), std::to_string(count), num(pool(v).mean)});
    }
    csv.close();
  }

  {
    Csv csv(out / "fig2c.csv", {"seed", "region", "r_low", "r_high", "units", "offset", "similarity"});
    const auto& ref = runs.front().cosine;
    const std::size_t regions = ref.regions().size();
    int lo = 0;
    int hi = 0;
    for (const auto& r : runs) {
      if (r.cosine.episodes() == 0) continue;
      lo = std::min(lo, r.cosine.min_offset());
      hi = std::max(hi, r.cosine.max_offset());
    }
    auto bounds = [&](std::size_t k) {
      return std::pair{num(static_cast<double>(k) / static_cast<double>(regions)),
                       num(static_cast<double>(k + 1) / static_cast<double>(regions))};
    };
    for (const auto& r : runs) {
      if (r.cosine.episodes() == 0) continue;
      for (std::size_t k = 0; k < regions; ++k) {
        if (r.cosine.regions()[k].empty()) continue;
        const auto [rl, rh] = bounds(k);
        for (int off = r.cosine.min_offset(); off <= r.cosine.max_offset(); ++off) {
          csv.row({seed_label(r), std::to_string(k + 1), rl, rh, std::to_string(r.cosine.regions()[k].size()),
                   std::to_string(off), num(r.cosine.mean(k, off))});
        }
      }
    }
    for (std::size_t k = 0; k < regions; ++k) {
      const auto [rl, rh] = bounds(k);
      std::size_t units = 0;
      for (const auto& r : runs) units += r.cosine.regions().size() > k ? r.cosine.regions()[k].size() : 0;
      if (units == 0) continue;
      for (int off = lo; off <= hi; ++off) {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.cosine.mean(k, off));
        const Pooled p = pool(v);
        if (p.n == 0) continue;
        csv.row({"pooled", std::to_string(k + 1), rl, rh, std::to_string(units), std::to_string(off), num(p.mean)});
      }
    }
    csv.close();
  }

  auto write_sweep = [&](const char* file, const char* metric_name, auto metric, bool with_count) {
    std::vector<std::string> header = {"seed", "region", "theta", "dropped", metric_name};
    if (with_count) header.push_back("episodes");
    Csv csv(out / file, header);
    for (const auto& r : runs) {
      for (const auto* sweep : {&r.episodic, &r.abstract}) {
        for (const auto& a : *sweep) {
          std::vector<std::string> row = {seed_label(r), to_string(a.region), num(a.theta),
                                          std::to_string(a.dropped_count), num(metric(a.metrics))};
          if (with_count) row.push_back(std::to_string(a.metrics.exposed_completed));
          csv.row(row);
        }
      }
    }
    for (Region region : {Region::Episodic, Region::Abstract}) {
      const auto& ref = region == Region::Episodic ? runs.front().episodic : runs.front().abstract;
      for (std::size_t k = 0; k < ref.size(); ++k) {
        std::vector<double> dropped;
        std::vector<double> v;
        std::size_t n = 0;
        for (const auto& r : runs) {
          const auto& sweep = region == Region::Episodic ? r.episodic : r.abstract;
          if (k >= sweep.size()) continue;
          dropped.push_back(sweep[k].dropped_count);
          v.push_back(metric(sweep[k].metrics));
          n += sweep[k].metrics.exposed_completed;
        }
        std::vector<std::string> row = {"pooled", to_string(region), num(ref[k].theta), num(pool(dropped).mean),
                                        num(pool(v).mean)};
        if (with_count) row.push_back(std::to_string(n));
        csv.row(row);
      }
    }
    csv.close();
  };
  write_sweep("fig3a.csv", "mean_steps_to_fixation",
              [](const EvalMetrics& m) { return m.mean_steps_to_fixation; }, false);
  write_sweep("fig3b.csv", "first_trial_accuracy",
              [](const EvalMetrics& m) { return m.first_trial_accuracy; }, true);

  ordered_json summary;
  summary["runs"] = runs.size();
  summary["singleton"] = singleton;
  if (filter) {
    ordered_json scores = ordered_json::array();
    for (const auto& s : filter->all) scores.push_back({{"seed", s.seed}, {"mean_reward", s.mean_reward}});
    ordered_json accepted = ordered_json::array();
    for (const auto& s : filter->accepted) accepted.push_back(s.seed);
    summary["filter"] = {{"candidates", filter->all.size()}, {"accepted", accepted}, {"scores", scores},
                         {"warnings", filter->warnings}};
  }

  std::vector<double> open, closed, conv, acc, later, regression, steps_change, abstract_acc_change,
      abstract_steps_change, savings, sparse_acc_change;
  ordered_json per_seed = ordered_json::array();
  for (const auto& r : runs) {
    ordered_json j;
    j["seed"] = r.seed;
    j["run"] = r.name;
    j["open_fraction"] = r.open_fraction;
    j["closed_fraction"] = r.closed_fraction;
    j["gate_std_first_window"] = r.first_window_std;
    j["gate_std_last_window"] = r.last_window_std;
    j["gate_std_ratio"] = r.first_window_std > 0.0 ? r.last_window_std / r.first_window_std : std::nan("");
    j["test"] = {{"episodes", r.test.episodes},
                 {"mean_reward", r.test.mean_reward},
                 {"later_trial_accuracy", r.test.later_trial_accuracy},
                 {"first_trial_accuracy_exposed", r.test.first_trial_accuracy},
                 {"exposed_episodes", r.test.exposed_completed},
                 {"mean_steps_to_fixation", r.test.mean_steps_to_fixation}};
    open.push_back(r.open_fraction);
    closed.push_back(r.closed_fraction);
    conv.push_back(j["gate_std_ratio"].get<double>());
    acc.push_back(r.test.first_trial_accuracy);
    later.push_back(r.test.later_trial_accuracy);

    if (const AblationResult* e = at_theta(r.episodic, 0.9)) {
      const double drop = r.test.first_trial_accuracy - e->metrics.first_trial_accuracy;
      const double ds = relative_change(r.test.mean_steps_to_fixation, e->metrics.mean_steps_to_fixation);
      j["episodic_mask"] = {{"theta", e->theta},
                            {"dropped", e->dropped_count},
                            {"first_trial_accuracy", e->metrics.first_trial_accuracy},
                            {"accuracy_regression", drop},
                            {"steps_relative_change", ds}};
      regression.push_back(drop);
      steps_change.push_back(ds);
    }
    if (const AblationResult* a = at_theta(r.abstract, 0.9)) {
      const double da = a->metrics.first_trial_accuracy - r.test.first_trial_accuracy;
      const double ds = relative_change(r.test.mean_steps_to_fixation, a->metrics.mean_steps_to_fixation);
      j["abstract_mask"] = {{"theta", a->theta},
                            {"dropped", a->dropped_count},
                            {"first_trial_accuracy", a->metrics.first_trial_accuracy},
                            {"accuracy_change", da},
                            {"steps_relative_change", ds}};
      abstract_acc_change.push_back(da);
      abstract_steps_change.push_back(ds);
    }
    const double sparse_change = r.sparse_test.first_trial_accuracy - r.test.first_trial_accuracy;
    j["sparse_storage"] = {{"units", r.sparse_units},
                           {"entries", r.sparse_storage.entries},
                           {"floats_stored", r.sparse_storage.floats_stored},
                           {"dense_floats", r.sparse_storage.dense_equivalent_floats},
                           {"savings", r.sparse_storage.savings_fraction},
                           {"first_trial_accuracy", r.sparse_test.first_trial_accuracy},
                           {"accuracy_change", sparse_change}};
    savings.push_back(r.sparse_storage.savings_fraction);
    sparse_acc_change.push_back(sparse_change);
    per_seed.push_back(std::move(j));
  }

  summary["pooled"] = {{"open_fraction", to_json(pool(open))},
                       {"closed_fraction", to_json(pool(closed))},
                       {"gate_std_ratio", to_json(pool(conv))},
                       {"later_trial_accuracy", to_json(pool(later))},
                       {"first_trial_accuracy_exposed", to_json(pool(acc))},
                       {"episodic_mask_regression", to_json(pool(regression))},
                       {"episodic_mask_steps_change", to_json(pool(steps_change))},
                       {"abstract_mask_accuracy_change", to_json(pool(abstract_acc_change))},
                       {"abstract_mask_steps_change", to_json(pool(abstract_steps_change))},
                       {"storage_savings", to_json(pool(savings))},
                       {"sparse_accuracy_change", to_json(pool(sparse_acc_change))}};
  summary["per_seed"] = std::move(per_seed);

  std::ofstream js(out / "summary.json", std::ios::binary);
  js << summary.dump(2) << '\n';
  if (!js) throw IoError("failed to write summary.json");
}

}  // namespace eph
