// Command-line front end: single runs, Monte Carlo batches, statistics,
// predictor training/evaluation and trace utilities.

#include "sat/config.hpp"
#include "sat/errors.hpp"
#include "sat/harness.hpp"
#include "sat/prediction.hpp"
#include "sat/trace_tools.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace sat;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::vector<TrajKind> parse_kinds(const std::string& spec) {
  std::vector<TrajKind> out;
  std::stringstream ss(spec);
  std::string k;
  while (std::getline(ss, k, ',')) {
    if (k == "linear") out.push_back(TrajKind::Linear);
    else if (k == "turning") out.push_back(TrajKind::Turning);
    else if (k == "sinusoidal") out.push_back(TrajKind::Sinusoidal);
    else throw ConfigError("unknown trajectory kind '" + k + "'");
  }
  if (out.empty()) throw ConfigError("no trajectory kinds given");
  return out;
}

void print_summary(const std::vector<SummaryRow>& rows) {
  std::cout << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    std::cout << r.config << "  n=" << r.episodes << "  mission " << r.mission_time.mean << " / "
              << r.mission_time.stddev << "  tracked " << r.tracked_ratio.mean << "  tracking "
              << r.mean_tracking_time.mean << "  traveled " << r.mean_traveled.mean << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent search and tracking simulator"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run one episode and export its trace and metrics");
  std::string run_config, run_out = "out", run_policy;
  std::uint64_t run_seed = 0;
  bool run_uncapped = false, run_no_trace = false;
  run->add_option("--config", run_config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed, "Episode seed");
  run->add_option("--out", run_out, "Output directory");
  run->add_option("--policy", run_policy, "Override the scenario policy");
  run->add_flag("--uncapped", run_uncapped, "Run until every target is cleared");
  run->add_flag("--no-trace", run_no_trace, "Skip trace recording");

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo batch over configs and seeds");
  std::string mc_dir, mc_seeds = "1..20", mc_out = "out", mc_policy;
  std::vector<std::string> mc_configs;
  int mc_threads = 0;
  bool mc_uncapped = false;
  mc->add_option("--config-dir", mc_dir, "Directory of scenario JSON files")->check(CLI::ExistingDirectory);
  mc->add_option("--config", mc_configs, "Scenario JSON (repeatable)");
  mc->add_option("--seeds", mc_seeds, "Seeds, e.g. 1..20 or 1,4,9");
  mc->add_option("--policy", mc_policy, "Override every scenario's policy");
  mc->add_option("--out", mc_out, "Output directory");
  mc->add_option("--threads", mc_threads, "Worker threads (default SAT_THREADS or all cores)");
  mc->add_flag("--uncapped", mc_uncapped, "Run until every target is cleared");

  // stats
  auto* stats = app.add_subcommand("stats", "Welch t-test between two metrics files");
  std::vector<std::string> stats_files;
  std::string stats_metric = "mission_time";
  stats->add_option("--metrics", stats_files, "Two metrics.csv files")->required()->expected(2);
  stats->add_option("--metric", stats_metric, "mission_time, tracked_ratio, mean_tracking_time or mean_traveled");

  // train-predictor
  auto* trainp = app.add_subcommand("train-predictor", "Train the trajectory predictor on synthetic data");
  std::string tp_out = "data/predictor.json", tp_kinds = "linear,turning,sinusoidal", tp_data;
  int tp_n = 160, tp_epochs = 300, tp_stride = 2, tp_hidden = 32;
  std::uint64_t tp_seed = 7;
  bool tp_augment = false;
  double tp_lr = 1e-4;
  trainp->add_option("--out", tp_out, "Weights file");
  trainp->add_option("--n", tp_n, "Synthetic trajectories");
  trainp->add_option("--kinds", tp_kinds, "Comma list of linear, turning, sinusoidal");
  trainp->add_option("--data", tp_data, "Directory of trajectory JSON files instead of synthetic data");
  trainp->add_option("--epochs", tp_epochs, "Epochs");
  trainp->add_option("--stride", tp_stride, "Window stride");
  trainp->add_option("--hidden", tp_hidden, "LSTM hidden size");
  trainp->add_option("--lr", tp_lr, "Adam learning rate");
  trainp->add_option("--seed", tp_seed, "Seed");
  trainp->add_flag("--augment", tp_augment, "Add the 8 rotations of every window");

  // eval-predictor
  auto* evalp = app.add_subcommand("eval-predictor", "Compare the predictor with constant velocity");
  std::string ep_weights = "data/predictor.json", ep_kinds = "turning,sinusoidal";
  int ep_n = 200;
  std::uint64_t ep_seed = 99991;
  evalp->add_option("--weights", ep_weights, "Weights file")->check(CLI::ExistingFile);
  evalp->add_option("--n", ep_n, "Held-out trajectories");
  evalp->add_option("--kinds", ep_kinds, "Comma list of linear, turning, sinusoidal");
  evalp->add_option("--seed", ep_seed, "Seed of the held-out set");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write synthetic trajectories as JSON files");
  std::string gd_out = "data/trajectories", gd_kinds = "linear,turning,sinusoidal";
  int gd_n = 50, gd_len = 40;
  std::uint64_t gd_seed = 1;
  gen->add_option("--out", gd_out, "Output directory");
  gen->add_option("--n", gd_n, "Trajectories");
  gen->add_option("--length", gd_len, "Samples per trajectory");
  gen->add_option("--kinds", gd_kinds, "Comma list of linear, turning, sinusoidal");
  gen->add_option("--seed", gd_seed, "Seed");

  // trace
  auto* trace = app.add_subcommand("trace", "Trace utilities");
  trace->require_subcommand(1);
  auto* paths = trace->add_subcommand("paths", "Extract per-entity paths as CSV");
  std::string tr_in, tr_out = "paths.csv", tr_config;
  paths->add_option("--in", tr_in, "Trace JSONL")->required()->check(CLI::ExistingFile);
  paths->add_option("--out", tr_out, "CSV output");
  auto* verify = trace->add_subcommand("verify", "Re-simulate and compare a trace");
  verify->add_option("--in", tr_in, "Trace JSONL")->required()->check(CLI::ExistingFile);
  verify->add_option("--config", tr_config, "Scenario JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ScenarioConfig cfg = load_config(run_config);
      cfg.seed = run_seed;
      if (!run_policy.empty()) cfg.policy = parse_policy(run_policy);
      if (run_uncapped) cfg.time_cap = 0.0;
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = run_episode(cfg, EpisodeOptions{!run_no_trace, Exec::Parallel});
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      export_run(result.trace, {MonteCarloRow{cfg.name, cfg.seed, result.metrics}}, run_out);
      const auto& m = result.metrics;
      std::cout << std::fixed << std::setprecision(2) << "mission_time " << m.mission_time << "  tracked_ratio "
                << m.tracked_ratio << "  mean_tracking_time " << m.mean_tracking_time << "  mean_traveled "
                << m.mean_traveled << "  (" << secs << " s wall)\n";
    } else if (mc->parsed()) {
      std::vector<fs::path> files(mc_configs.begin(), mc_configs.end());
      if (!mc_dir.empty()) {
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(mc_dir)) {
          if (e.path().extension() == ".json") found.push_back(e.path());
        }
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
      }
      if (files.empty()) throw ConfigError("mc: give --config or --config-dir");
      std::vector<ScenarioConfig> cfgs;
      for (const auto& f : files) {
        ScenarioConfig cfg = load_config(f);
        if (!mc_policy.empty()) {
          cfg.policy = parse_policy(mc_policy);
          cfg.name += "-" + mc_policy;
        }
        if (mc_uncapped) cfg.time_cap = 0.0;
        cfg.validate();
        cfgs.push_back(std::move(cfg));
      }
      const auto rows = run_monte_carlo(cfgs, parse_seeds(mc_seeds), mc_threads);
      fs::create_directories(mc_out);
      write_file(fs::path(mc_out) / "metrics.csv", metrics_to_csv(rows));
      const auto summary = summarize(rows);
      write_file(fs::path(mc_out) / "summary.csv", summary_to_csv(summary));
      print_summary(summary);
    } else if (stats->parsed()) {
      auto column = [&](const std::vector<MonteCarloRow>& rows) {
        std::vector<double> v;
        for (const auto& r : rows) {
          if (stats_metric == "mission_time") v.push_back(r.metrics.mission_time);
          else if (stats_metric == "tracked_ratio") v.push_back(r.metrics.tracked_ratio);
          else if (stats_metric == "mean_tracking_time") v.push_back(r.metrics.mean_tracking_time);
          else if (stats_metric == "mean_traveled") v.push_back(r.metrics.mean_traveled);
          else throw ConfigError("stats: unknown metric '" + stats_metric + "'");
        }
        return v;
      };
      const auto a = column(metrics_from_csv(slurp(stats_files[0])));
      const auto b = column(metrics_from_csv(slurp(stats_files[1])));
      const auto w = welch_t_test(a, b);
      std::cout << std::setprecision(6) << "t " << w.t << "  p " << w.p << "  dof " << w.dof << "\n";
    } else if (trainp->parsed()) {
      std::vector<Window> trajs = tp_data.empty() ? gen_trajectories(tp_n, parse_kinds(tp_kinds), tp_seed)
                                                  : load_trajectory_dir(tp_data);
      auto samples = make_windows(trajs, tp_stride);
      if (tp_augment) samples = augment_dataset(samples);
      TrainConfig tc;
      tc.epochs = tp_epochs;
      tc.learning_rate = tp_lr;
      std::cout << "training on " << samples.size() << " windows\n";
      const auto result = train(samples, tc, tp_seed, tp_hidden);
      save_weights(result.weights, tp_out);
      std::cout << "final loss " << result.epoch_loss.back() << " -> " << tp_out << "\n";
    } else if (evalp->parsed()) {
      const auto w = load_weights(ep_weights);
      const auto trajs = gen_trajectories(ep_n, parse_kinds(ep_kinds), ep_seed);
      std::vector<double> lstm, cv;
      for (const auto& tr : trajs) {
        const auto s = make_windows({tr}, 1 << 20).front();
        lstm.push_back(ade_fde(lstm_forward(w, s.input), s.target).ade);
        cv.push_back(ade_fde(cv_predict(s.input), s.target).ade);
      }
      const auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      const auto welch = welch_t_test(lstm, cv);
      std::cout << std::setprecision(5) << "lstm ADE " << mean(lstm) << "  cv ADE " << mean(cv) << "  t " << welch.t
                << "  p " << welch.p << "\n";
    } else if (gen->parsed()) {
      const auto trajs = gen_trajectories(gd_n, parse_kinds(gd_kinds), gd_seed, gd_len);
      fs::create_directories(gd_out);
      for (std::size_t i = 0; i < trajs.size(); ++i) {
        std::ostringstream name;
        name << "traj_" << std::setw(4) << std::setfill('0') << i << ".json";
        save_trajectory(trajs[i], kPredictDt, fs::path(gd_out) / name.str());
      }
      std::cout << "wrote " << trajs.size() << " trajectories to " << gd_out << "\n";
    } else if (paths->parsed()) {
      write_file(tr_out, paths_to_csv(extract_paths(read_trace(tr_in))));
    } else if (verify->parsed()) {
      const bool ok = replay_check(read_trace(tr_in), load_config(tr_config));
      std::cout << (ok ? "identical" : "MISMATCH") << "\n";
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
