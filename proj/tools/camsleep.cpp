// camsleep: command-line front end for data preparation, training,
// evaluation and plotting. Run `camsleep --help` for the subcommands.

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "camsleep/baselines.hpp"
#include "camsleep/checkpoint.hpp"
#include "camsleep/config.hpp"
#include "camsleep/eval.hpp"
#include "camsleep/experiment.hpp"
#include "camsleep/plot.hpp"
#include "camsleep/profiles.hpp"

namespace fs = std::filesystem;
using namespace camsleep;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  int threads = 0;
  bool force = false;
};

/// Exclusive ownership of an output directory for one invocation.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".camsleep.lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw Error("output directory " + dir.string() + " is locked by another run (remove " + path_.string() +
                  " if stale)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) { /* informational only */ }
  }
  ~DirectoryLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (const char* env = std::getenv("CAMSLEEP_OUT"); env && *env) cfg.output_dir = env;
  if (const char* env = std::getenv("CAMSLEEP_THREADS"); env && *env) set_config_value(cfg, "threads", env);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, csv::trim(std::string_view(kv).substr(0, eq)), std::string_view(kv).substr(eq + 1));
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.threads > 0) cfg.threads = o.threads;
  return cfg;
}

/// Output files of one subcommand; refuses to overwrite without --force.
class Outputs {
 public:
  Outputs(const ExperimentConfig& cfg, bool force) : dir_(cfg.output_dir), force_(force) {
    fs::create_directories(dir_);
    lock_.emplace(dir_);
    std::ofstream out(dir_ / "effective.cfg");
    write_config(out, cfg);
  }

  fs::path path(const std::string& name) const {
    const auto p = dir_ / name;
    if (!force_ && fs::exists(p)) throw Error(p.string() + " exists (use --force to overwrite)");
    fs::create_directories(p.parent_path());
    return p;
  }

  std::ofstream open(const std::string& name) const { return csv::open_output(path(name).string()); }

 private:
  fs::path dir_;
  bool force_;
  std::optional<DirectoryLock> lock_;
};

void print_record(const EvalRecord& r, const std::string& context = {}) {
  std::printf("%-24s %-14s %s accuracy %6.2f%%  savings %6.2f%%  high %zu/%zu\n", r.street_id.c_str(),
              r.policy.c_str(), context.c_str(), r.accuracy_pct, r.savings_pct, r.high_minutes, r.total_minutes);
}

Checkpoint require_checkpoint(const std::string& path) {
  if (path.empty()) throw Error("this command needs --checkpoint");
  return load_checkpoint(path);
}

/// Evaluates one named policy on every test street; rl-individual trains per street.
EvalReport evaluate_named(const std::string& name, const ExperimentData& data, const ExperimentConfig& cfg,
                          const Checkpoint* ck, const EvalOptions& opt,
                          const std::vector<OccupancySeries>* streets = nullptr) {
  const auto& targets = streets ? *streets : data.test;
  if (name != "rl-individual") return evaluate(as_policy_fn(fit_policy(name, data, cfg, ck)), name, targets, opt);
  EvalReport report;
  for (const auto& s : targets) {
    const auto policy = fit_policy(name, data, cfg, ck, s.street_id);
    auto one = evaluate(as_policy_fn(policy), name, {s}, opt);
    report.records.push_back(one.records.front());
  }
  aggregate(report, opt.zero_high);
  return report;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  for (auto f : csv::split(s)) out.emplace_back(csv::trim(f));
  return out;
}

EvalOptions eval_options(const ExperimentConfig& cfg) {
  EvalOptions opt;
  opt.thresholds = cfg.thresholds;
  opt.zero_high = cfg.zero_high;
  opt.threads = cfg.threads;
  return opt;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(const CommonOptions& o) {
  const auto cfg = resolve_config(o);
  Outputs out(cfg, o.force);
  const auto streets = load_streets(cfg);
  auto f = out.open("occupancy.csv");
  write_occupancy_csv(f, streets);
  for (const auto& s : streets) {
    const auto c = count_categories(s.values, cfg.thresholds);
    std::printf("%-24s %zu minutes, %.2f%% high\n", s.street_id.c_str(), s.size(),
                100.0 * static_cast<double>(c.high) / static_cast<double>(s.size()));
  }
  return 0;
}

void write_statistics(std::ostream& f, const DatasetStatistics& st) {
  f << "street_id,bay_count,total_minutes,high_minutes,high_pct\n";
  for (const auto& s : st.streets) {
    f << s.street_id << ',' << s.bay_count << ',' << s.total_minutes << ',' << s.high_minutes << ','
      << csv::fixed(s.high_pct) << '\n';
  }
}

int cmd_ingest(const CommonOptions& o) {
  const auto cfg = resolve_config(o);
  if (cfg.events_path.empty()) throw Error("ingest needs data.events and data.bays");
  Outputs out(cfg, o.force);
  const auto streets = load_streets(cfg);
  auto f = out.open("occupancy.csv");
  write_occupancy_csv(f, streets);
  const auto st = dataset_statistics(streets, cfg.thresholds);
  auto s = out.open("statistics.csv");
  write_statistics(s, st);
  for (const auto& r : st.streets) {
    std::printf("%-24s bays %4d  minutes %zu  high %zu (%.2f%%)\n", r.street_id.c_str(), r.bay_count, r.total_minutes,
                r.high_minutes, r.high_pct);
  }
  std::printf("streets %zu  avg bays %.1f  avg high %.2f%%\n", st.streets.size(), st.avg_bays, st.avg_high_pct);
  return 0;
}

int cmd_characterize(const CommonOptions& o, int k_hour, int k_day) {
  const auto cfg = resolve_config(o);
  Outputs out(cfg, o.force);
  const auto streets = load_streets(cfg);
  auto sf = out.open("statistics.csv");
  write_statistics(sf, dataset_statistics(streets, cfg.thresholds));

  struct AxisRun {
    HistogramAxis axis;
    const char* name;
    int k;
    ClusterAssignment result;
  };
  std::vector<AxisRun> runs = {{HistogramAxis::HourOfDay, "hourly", k_hour, {}},
                               {HistogramAxis::DayOfWeek, "daily", k_day, {}}};
  for (auto& run : runs) {
    auto hf = out.open(std::string("histograms_") + run.name + ".csv");
    hf << plot::kHistogramHeader << '\n';
    std::vector<Point> points;
    for (const auto& s : streets) {
      const auto h = high_occupancy_histogram(s, run.axis, cfg.thresholds);
      for (std::size_t b = 0; b < h.weights.size(); ++b) {
        hf << s.street_id << ',' << b << ',' << csv::fixed(h.weights[b]) << '\n';
      }
      points.push_back(h.weights);
    }
    const int k = std::min<int>(run.k, static_cast<int>(points.size()));
    run.result = kmeans(points, k, cfg.seed);
    auto mf = out.open(std::string("cluster_means_") + run.name + ".csv");
    mf << plot::kHistogramHeader << '\n';
    for (std::size_t c = 0; c < run.result.centroids.size(); ++c) {
      for (std::size_t b = 0; b < run.result.centroids[c].size(); ++b) {
        mf << "cluster" << c << ',' << b << ',' << csv::fixed(run.result.centroids[c][b]) << '\n';
      }
    }
    auto inf = out.open(std::string("inertia_") + run.name + ".csv");
    inf << "k,inertia\n";
    const auto curve = inertia_curve(points, std::min<int>(8, static_cast<int>(points.size())), cfg.seed);
    for (std::size_t i = 0; i < curve.size(); ++i) inf << i + 1 << ',' << csv::fixed(curve[i]) << '\n';
  }
  auto cf = out.open("clusters.csv");
  cf << "street_id,hourly_cluster,daily_cluster\n";
  for (std::size_t i = 0; i < streets.size(); ++i) {
    const int h = runs[0].result.labels[i];
    const int d = runs[1].result.labels[i];
    cf << streets[i].street_id << ',' << h << ',' << d << '\n';
    std::printf("%-24s hourly cluster %d  daily cluster %d\n", streets[i].street_id.c_str(), h, d);
  }
  return 0;
}

int cmd_train(const CommonOptions& o) {
  const auto cfg = resolve_config(o);
  Outputs out(cfg, o.force);
  const auto data = prepare_experiment(cfg);
  const auto ckpt_path = out.path("model.ckpt");
  auto mf = out.open("metrics.csv");
  mf << kMetricsHeader << '\n';
  const auto ck = train_agent(data.train, data.validation, cfg, [&](const EpisodeMetrics& m) {
    write_metrics_row(mf, m);
    mf.flush();
    if (m.validation_return) {
      std::printf("episode %4d  steps %8lld  epsilon %.3f  train %.2f  validation %.2f\n", m.episode,
                  static_cast<long long>(m.steps), m.epsilon, m.train_return, *m.validation_return);
      std::fflush(stdout);
    }
  });
  save_checkpoint(ckpt_path.string(), ck);
  const auto report = evaluate(as_policy_fn(ck), "rl", data.test, eval_options(cfg));
  for (const auto& r : report.records) print_record(r, "test");
  std::printf("best episode %d, %.1f s\n", ck.meta.best_episode, ck.meta.wall_seconds);
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& policies, const std::string& ckpt_path) {
  const auto cfg = resolve_config(o);
  Outputs out(cfg, o.force);
  const auto data = prepare_experiment(cfg);
  std::optional<Checkpoint> ck;
  if (!ckpt_path.empty()) ck = load_checkpoint(ckpt_path);
  const auto opt = eval_options(cfg);
  std::vector<std::pair<std::string, EvalReport>> reports;
  std::vector<std::pair<std::string, EvalReport>> city;
  for (const auto& name : split_names(policies)) {
    if (name == "rl" && !ck) {
      std::fprintf(stderr, "skipping rl: no --checkpoint given\n");
      continue;
    }
    reports.emplace_back(name, evaluate_named(name, data, cfg, ck ? &*ck : nullptr, opt));
    for (const auto& r : reports.back().second.records) print_record(r, "test");
    if (!data.cityscale.empty() && name != "rl-individual") {
      city.emplace_back(name, evaluate_named(name, data, cfg, ck ? &*ck : nullptr, opt, &data.cityscale));
      for (const auto& r : city.back().second.records) print_record(r, "city");
    }
  }
  auto rf = out.open("report.csv");
  rf << kReportHeader << '\n';
  for (const auto& [_, r] : reports) write_report_csv(rf, r.records, false);
  auto af = out.open("aggregate.csv");
  write_aggregate_csv(af, reports);
  if (!city.empty()) {
    auto cf = out.open("report_cityscale.csv");
    cf << kReportHeader << '\n';
    for (const auto& [_, r] : city) write_report_csv(cf, r.records, false);
    auto caf = out.open("aggregate_cityscale.csv");
    write_aggregate_csv(caf, city);
  }
  return 0;
}

int cmd_baseline(const CommonOptions& o, const std::string& policy, const std::string& ckpt_path) {
  const auto cfg = resolve_config(o);
  Outputs out(cfg, o.force);
  const auto data = prepare_experiment(cfg);
  std::optional<Checkpoint> ck;
  if (policy == "rl") ck = require_checkpoint(ckpt_path);
  const auto reward = cfg.reward();
  std::optional<Policy> shared;
  if (policy != "rl-individual") shared = fit_policy(policy, data, cfg, ck ? &*ck : nullptr);
  for (const auto& s : data.test) {
    const Policy p = shared ? *shared : fit_policy(policy, data, cfg, nullptr, s.street_id);
    if (const auto* clf = std::get_if<LinearClassifier>(&p); clf && !clf->warning.empty()) {
      std::fprintf(stderr, "warning: %s\n", clf->warning.c_str());
    }
    const auto actions = run_policy(p, s);
    auto f = out.open("traces/" + policy + "_" + s.street_id + ".csv");
    write_trace_csv(f, trace_for(s, actions, reward, cfg.thresholds));
    print_record({s.street_id, policy, accuracy(actions, s, cfg.thresholds), energy_savings(actions),
                  high_minutes(s, cfg.thresholds), s.size()},
                 "test");
  }
  return 0;
}

int cmd_sweep(const CommonOptions& o) {
  const auto cfg = resolve_config(o);
  Outputs out(cfg, o.force);
  const auto data = prepare_experiment(cfg);
  const auto path = out.path("sweep.csv");
  SweepSetup setup{data.train, data.validation, data.test, cfg.agent_config(), cfg.e1, cfg.e2, cfg.thresholds};
  const auto points = sweep_w(setup, cfg.sweep_w, [](const SweepPoint& p) {
    std::printf("w %8.3f  w_hat %.4f  accuracy %6.2f%%  savings %6.2f%%\n", p.w, p.w_hat, p.accuracy_pct,
                p.savings_pct);
    std::fflush(stdout);
  });
  std::ofstream f = csv::open_output(path.string());
  write_sweep_csv(f, points);
  return 0;
}

int cmd_adapt(const CommonOptions& o, const std::string& policies, const std::string& ckpt_path) {
  const auto cfg = resolve_config(o);
  Outputs out(cfg, o.force);
  const auto data = prepare_experiment(cfg);
  std::optional<Checkpoint> ck;
  if (!ckpt_path.empty()) ck = load_checkpoint(ckpt_path);
  std::vector<ShiftSpec> grid;
  for (int h = -6; h <= 6; ++h) grid.push_back(ShiftSpec::shift(h));
  grid.push_back(ShiftSpec::extend());
  std::vector<std::pair<std::string, Policy>> fitted;
  for (const auto& name : split_names(policies)) {
    if (name == "rl-individual") throw Error("adapt evaluates fitted policies; use rl with a checkpoint");
    if (name == "rl" && !ck) throw Error("policy rl needs --checkpoint");
    fitted.emplace_back(name, fit_policy(name, data, cfg, ck ? &*ck : nullptr));
  }
  auto sf = out.open("adapt_summary.csv");
  sf << "transform,policy,accuracy_pct,savings_pct\n";
  for (const auto& spec : grid) {
    auto opt = eval_options(cfg);
    opt.transform = spec;
    auto rf = out.open("adapt/report_" + spec.label() + ".csv");
    rf << kReportHeader << '\n';
    for (const auto& [name, policy] : fitted) {
      const auto report = evaluate(as_policy_fn(policy), name, data.test, opt);
      write_report_csv(rf, report.records, false);
      sf << spec.label() << ',' << name << ',' << csv::fixed(report.accuracy.mean) << ','
         << csv::fixed(report.savings.mean) << '\n';
      for (const auto& r : report.records) print_record(r, spec.label());
    }
  }
  return 0;
}

int cmd_noise(const CommonOptions& o, const std::string& policies, const std::string& ckpt_path) {
  const auto cfg = resolve_config(o);
  Outputs out(cfg, o.force);
  const auto data = prepare_experiment(cfg);
  std::optional<Checkpoint> ck;
  if (!ckpt_path.empty()) ck = load_checkpoint(ckpt_path);
  std::vector<std::pair<std::string, Policy>> fitted;
  for (const auto& name : split_names(policies)) {
    if (name == "rl" && !ck) throw Error("policy rl needs --checkpoint");
    fitted.emplace_back(name, fit_policy(name, data, cfg, ck ? &*ck : nullptr));
  }
  auto sf = out.open("noise_summary.csv");
  sf << "delta,policy,accuracy_pct,savings_pct\n";
  for (double delta : cfg.noise_deltas) {
    auto opt = eval_options(cfg);
    opt.noise = NoiseSpec{delta, cfg.seed};
    auto rf = out.open("noise/report_delta" + plot::tick(delta) + ".csv");
    rf << kReportHeader << '\n';
    for (const auto& [name, policy] : fitted) {
      const auto report = evaluate(as_policy_fn(policy), name, data.test, opt);
      write_report_csv(rf, report.records, false);
      sf << csv::fixed(delta) << ',' << name << ',' << csv::fixed(report.accuracy.mean) << ','
         << csv::fixed(report.savings.mean) << '\n';
      for (const auto& r : report.records) print_record(r, "delta=" + plot::fmt(delta));
    }
  }
  return 0;
}

int cmd_plot(const std::string& kind, const std::string& input, const std::string& output, const std::string& label,
             double high) {
  std::ifstream in = csv::open_input(input);
  std::string svg;
  if (kind == "policy-trace") {
    svg = plot::policy_trace(read_trace_csv(in, input), high);
  } else if (kind == "tradeoff-curve") {
    svg = plot::tradeoff_curve(plot::read_sweep_csv(in, input));
  } else if (kind == "histogram") {
    const auto all = plot::read_histogram_csv(in, input);
    if (all.empty()) throw Error(input + ": no histogram rows");
    auto it = all.begin();
    if (!label.empty()) {
      it = std::find_if(all.begin(), all.end(), [&](const auto& h) { return h.first == label; });
      if (it == all.end()) throw Error(input + ": no histogram labelled '" + label + "'");
    }
    svg = plot::histogram("High-occupancy histogram: " + it->first, it->second);
  } else if (kind == "bar") {
    svg = plot::bar_chart(plot::read_aggregate_csv(in, input));
  } else {
    throw Error("unknown plot kind '" + kind + "'");
  }
  std::ofstream out = csv::open_output(output);
  out << svg;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-saving standby policies for parking cameras"};
  app.require_subcommand(1);
  CommonOptions common;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "Config file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", common.overrides, "Override a config key: key=value (repeatable)");
    sub->add_option("-o,--out", common.out, "Output directory (overrides output_dir and CAMSLEEP_OUT)");
    sub->add_option("-j,--threads", common.threads, "Worker threads for evaluation (overrides CAMSLEEP_THREADS)");
    sub->add_flag("-f,--force", common.force, "Overwrite existing outputs");
  };

  std::string policies = "optimal,naive,svm,rl";
  std::string policy;
  std::string checkpoint;
  int k_hour = 2;
  int k_day = 3;
  std::string kind, input, output, label;
  double high = 0.8;
  bool defaults = false;

  auto* generate = app.add_subcommand("generate", "Write synthetic occupancy series");
  add_common(generate);
  auto* ingest = app.add_subcommand("ingest", "Build occupancy series from parking events");
  add_common(ingest);
  auto* characterize = app.add_subcommand("characterize", "High-occupancy histograms and k-means profiles");
  add_common(characterize);
  characterize->add_option("--k-hour", k_hour, "Clusters for hour-of-day histograms")->check(CLI::PositiveNumber);
  characterize->add_option("--k-day", k_day, "Clusters for day-of-week histograms (Monday = bin 0)")
      ->check(CLI::PositiveNumber);
  auto* train = app.add_subcommand("train", "Train the agent and save a checkpoint");
  add_common(train);
  auto* eval = app.add_subcommand("eval", "Evaluate policies on the test split");
  add_common(eval);
  eval->add_option("--policies", policies, "Comma-separated policies");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint for the rl policy");
  auto* baseline = app.add_subcommand("baseline", "Run one policy and dump per-street traces");
  add_common(baseline);
  baseline->add_option("--policy", policy, "Policy")
      ->required()
      ->check(CLI::IsMember({"optimal", "naive", "svm", "rl", "rl-individual"}));
  baseline->add_option("--checkpoint", checkpoint, "Checkpoint for the rl policy");
  auto* sweep = app.add_subcommand("sweep", "Train one agent per miss penalty w");
  add_common(sweep);
  auto* adapt = app.add_subcommand("adapt", "Evaluate under time shifts -6..+6 h and the extend transform");
  add_common(adapt);
  adapt->add_option("--policies", policies, "Comma-separated policies");
  adapt->add_option("--checkpoint", checkpoint, "Checkpoint for the rl policy");
  auto* noise = app.add_subcommand("noise", "Evaluate under multiplicative occupancy noise");
  add_common(noise);
  noise->add_option("--policies", policies, "Comma-separated policies");
  noise->add_option("--checkpoint", checkpoint, "Checkpoint for the rl policy");
  auto* plot_cmd = app.add_subcommand("plot", "Render an SVG figure from a CSV");
  plot_cmd->add_option("--kind", kind, "policy-trace, tradeoff-curve, histogram or bar")
      ->required()
      ->check(CLI::IsMember({"policy-trace", "tradeoff-curve", "histogram", "bar"}));
  plot_cmd->add_option("-i,--input", input, "Input CSV")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("-o,--output", output, "Output SVG")->required();
  plot_cmd->add_option("--label", label, "Histogram label to draw (default: first)");
  plot_cmd->add_option("--high", high, "High-occupancy threshold line for traces");
  auto* config = app.add_subcommand("config", "Print the effective configuration");
  add_common(config);
  config->add_flag("--defaults", defaults, "Ignore --config and overrides");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(common);
    if (*ingest) return cmd_ingest(common);
    if (*characterize) return cmd_characterize(common, k_hour, k_day);
    if (*train) return cmd_train(common);
    if (*eval) return cmd_eval(common, policies, checkpoint);
    if (*baseline) return cmd_baseline(common, policy, checkpoint);
    if (*sweep) return cmd_sweep(common);
    if (*adapt) return cmd_adapt(common, policies, checkpoint);
    if (*noise) return cmd_noise(common, policies, checkpoint);
    if (*plot_cmd) return cmd_plot(kind, input, output, label, high);
    if (*config) {
      write_config(std::cout, defaults ? ExperimentConfig{} : resolve_config(common));
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
