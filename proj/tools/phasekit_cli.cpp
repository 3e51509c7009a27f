#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phasekit/harness.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using namespace phasekit;

namespace {

std::vector<Demonstration> load_demos_dir(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no demonstration CSV files in " + dir);
  std::vector<Demonstration> demos;
  demos.reserve(files.size());
  for (const auto& f : files) demos.push_back(load_demonstration(f.string()));
  return demos;
}

std::vector<Demonstration> apply_mask(std::vector<Demonstration> demos) {
  for (auto& demo : demos) {
    for (auto& ch : demo.channels) {
      if (ch.name == "force_x" || ch.name == "force_z" || ch.name == "torque") {
        ch.role = ChannelRole::Masked;
      }
    }
  }
  return demos;
}

int cmd_demo_gen(int n, std::uint64_t seed, const std::string& out_dir,
                 const std::string& tolerance, double margin) {
  fs::create_directories(out_dir);
  WorldConfig world = make_world_config(tolerance);
  DemoGenConfig gen;
  gen.start_margin = margin;
  for (int i = 0; i < n; ++i) {
    const Demonstration demo = generate_demo(derive_seed(seed, static_cast<std::uint64_t>(i)),
                                             world, gen);
    char name[32];
    std::snprintf(name, sizeof(name), "demo_%03d.csv", i);
    save_demonstration(demo, (fs::path(out_dir) / name).string());
  }
  std::cout << "wrote " << n << " demonstrations to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& demos_dir, const std::string& out_path, int basis_count,
              bool mask_ft, double ridge) {
  std::vector<Demonstration> demos = load_demos_dir(demos_dir);
  if (mask_ft) demos = apply_mask(std::move(demos));
  const BasisLibrary lib = make_basis(demos.front().channel_count(), basis_count, 1.0);
  const TrajectoryModel model = fit_model(demos, lib, ridge);
  save_model(model, out_path);
  std::cout << "trained model on " << demos.size() << " demonstrations -> " << out_path << "\n";
  return 0;
}

int cmd_run(const std::string& model_path, const std::string& policy_name,
            const std::string& world_arg, bool disturbed, std::uint64_t seed,
            const std::string& demos_dir, const std::string& log_path, double margin) {
  TrialConfig trial;
  if (world_arg == "1mm" || world_arg == "5mm") {
    trial.world = make_world_config(world_arg);
  } else {
    trial.world = load_world_config(world_arg);
  }
  if (disturbed) trial.world.perturbations.push_back(default_disturbance());
  trial.policy.kind = policy_kind_from_string(policy_name);
  trial.seed = seed;
  trial.start_margin = margin;

  TrajectoryModel model;
  PrompModel promp;
  BcPolicy bc;
  PolicyArtifacts artifacts;
  if (trial.policy.kind == PolicyKind::Enbip) {
    model = load_model(model_path);
    artifacts.model = &model;
  } else {
    if (demos_dir.empty()) {
      throw std::invalid_argument("baseline policies need --demos for training data");
    }
    std::vector<Demonstration> demos = load_demos_dir(demos_dir);
    const BasisLibrary lib = make_basis(demos.front().channel_count(), 11, 1.0);
    if (trial.policy.kind == PolicyKind::Promp) {
      std::vector<int> controls = demos.front().channels_with_role(ChannelRole::Control);
      int ref = 0;  // demo with median duration
      {
        std::vector<std::pair<double, int>> durations;
        for (std::size_t i = 0; i < demos.size(); ++i) {
          durations.push_back({demos[i].duration(), static_cast<int>(i)});
        }
        std::sort(durations.begin(), durations.end());
        ref = durations[durations.size() / 2].second;
      }
      promp = promp_fit(align_demos_dtw(demos, ref, controls), lib, 1e-6);
      artifacts.promp = &promp;
    } else {
      bc = bc_fit(demos);
      artifacts.bc = &bc;
    }
  }

  const TrialResult result = run_trial(artifacts, trial);
  std::cout << "policy=" << result.policy << " outcome=" << result.outcome
            << " duration=" << result.duration << "s\n";
  if (!log_path.empty()) {
    std::vector<std::string> names;
    if (artifacts.model != nullptr) {
      for (const auto& ch : artifacts.model->channels) names.push_back(ch.name);
    }
    save_estimate_log(result, names, log_path);
  }
  return result.outcome == "success" || result.outcome == "timeout" ? 0 : 2;
}

SuiteConfig suite_from_json_file(const std::string& path, int trials_override) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in);

  SuiteConfig cfg;
  cfg.trials = trials_override > 0 ? trials_override : j.value("trials", 30);
  cfg.seed = j.value("seed", 0ull);
  cfg.timeout = j.value("timeout", 60.0);
  if (j.contains("sensor_noise")) {
    const auto& n = j.at("sensor_noise");
    cfg.sensor_noise.position = n.value("position", 0.0);
    cfg.sensor_noise.rotation = n.value("rotation", 0.0);
    cfg.sensor_noise.force = n.value("force", 0.0);
    cfg.sensor_noise.torque = n.value("torque", 0.0);
  }
  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    cfg.policy.enbip.ensemble_size = p.value("ensemble_size", 0);
    cfg.policy.enbip.lookahead = p.value("lookahead", cfg.policy.enbip.lookahead);
    cfg.policy.promp.sample_duration_uniform = p.value("promp_uniform_duration", false);
    cfg.policy.bc.k = p.value("bc_k", 5);
  }
  for (const auto& c : j.at("conditions")) {
    Condition cond;
    cond.name = c.at("name").get<std::string>();
    cond.policy = policy_kind_from_string(c.at("policy").get<std::string>());
    cond.tolerance = c.at("tolerance").get<std::string>();
    cond.disturbed = c.value("disturbed", false);
    cond.mask_ft = c.value("mask_ft", false);
    cond.start_margin = c.value("start_margin", 0.01);
    cfg.conditions.push_back(cond);
  }
  return cfg;
}

int cmd_eval(const std::string& suite_path, int trials, const std::string& out_path) {
  std::ifstream in(suite_path);
  if (!in) throw std::runtime_error("cannot read " + suite_path);
  nlohmann::json j = nlohmann::json::parse(in);
  in.close();

  const SuiteConfig cfg = suite_from_json_file(suite_path, trials);

  const std::string model_path = j.at("model").get<std::string>();
  const std::string demos_dir = j.at("demos").get<std::string>();

  TrajectoryModel model = load_model(model_path);
  std::vector<Demonstration> demos = load_demos_dir(demos_dir);
  const BasisLibrary lib = model.basis;

  std::vector<int> controls = demos.front().channels_with_role(ChannelRole::Control);
  std::vector<std::pair<double, int>> durations;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    durations.push_back({demos[i].duration(), static_cast<int>(i)});
  }
  std::sort(durations.begin(), durations.end());
  const int ref = durations[durations.size() / 2].second;
  PrompModel promp = promp_fit(align_demos_dtw(demos, ref, controls), lib, 1e-6);
  BcPolicy bc = bc_fit(demos, cfg.policy.bc.k);

  SuiteArtifacts artifacts;
  artifacts.unmasked.model = &model;
  artifacts.unmasked.promp = &promp;
  artifacts.unmasked.bc = &bc;

  // Masked variant trained on the same demonstrations with force/torque
  // channels flagged unusable.
  TrajectoryModel masked_model;
  bool need_masked = false;
  for (const auto& c : cfg.conditions) need_masked |= c.mask_ft;
  if (need_masked) {
    if (j.contains("model_masked")) {
      masked_model = load_model(j.at("model_masked").get<std::string>());
    } else {
      masked_model = fit_model(apply_mask(demos), lib, 1e-6);
    }
    artifacts.masked.model = &masked_model;
    artifacts.masked.promp = &promp;
    artifacts.masked.bc = &bc;
  }

  const SuiteReport report = run_suite(cfg, artifacts);
  save_report(report, out_path);
  for (const auto& cond : report.conditions) {
    std::cout << cond.condition.name << ": " << cond.successes << "/" << cond.trials << "\n";
  }
  std::cout << "report -> " << out_path << " (fingerprint " << report.fingerprint << ")\n";
  return 0;
}

int cmd_export(const std::string& in_path, const std::string& format, const std::string& out_path) {
  const SuiteReport report = load_report(in_path);
  export_report(report, format, out_path);
  std::cout << "exported " << format << " -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phasekit: phase-aware insertion policies from demonstrations"};
  app.require_subcommand(1);

  auto* demo_gen = app.add_subcommand("demo-gen", "generate scripted demonstrations");
  int n = 30;
  std::uint64_t seed = 0;
  std::string out_dir = "demos";
  std::string tolerance = "1mm";
  double margin = 0.01;
  demo_gen->add_option("--n", n, "number of demonstrations");
  demo_gen->add_option("--seed", seed, "base seed");
  demo_gen->add_option("--out", out_dir, "output directory")->required();
  demo_gen->add_option("--tolerance", tolerance, "1mm or 5mm");
  demo_gen->add_option("--margin", margin, "start pose randomization (m)");

  auto* train = app.add_subcommand("train", "fit a trajectory model");
  std::string demos_dir;
  std::string model_out = "model.json";
  int basis_count = 11;
  bool mask_ft = false;
  double ridge = 1e-6;
  train->add_option("--demos", demos_dir, "demonstration directory")->required();
  train->add_option("--out", model_out, "model output path");
  train->add_option("--basis-count", basis_count, "basis functions per channel");
  train->add_flag("--mask-ft", mask_ft, "mask force/torque channels");
  train->add_option("--ridge", ridge, "ridge regularization");

  auto* run = app.add_subcommand("run", "run a single trial");
  std::string model_path = "model.json";
  std::string policy = "enbip";
  std::string world_arg = "5mm";
  bool disturbed = false;
  std::string run_demos;
  std::string log_path;
  double run_margin = 0.01;
  std::uint64_t run_seed = 0;
  run->add_option("--model", model_path, "trained model path");
  run->add_option("--policy", policy, "enbip, promp or bc");
  run->add_option("--world", world_arg, "world JSON path, or 1mm/5mm for defaults");
  run->add_flag("--disturbed", disturbed, "add the default disturbance window");
  run->add_option("--seed", run_seed, "trial seed");
  run->add_option("--demos", run_demos, "demonstration directory (baselines)");
  run->add_option("--log", log_path, "write the estimate log CSV here");
  run->add_option("--margin", run_margin, "start pose randomization (m)");

  auto* eval = app.add_subcommand("eval", "run a suite of conditions");
  std::string suite_path;
  int trials = 0;
  std::string report_out = "report.json";
  eval->add_option("--suite", suite_path, "suite JSON")->required();
  eval->add_option("--trials", trials, "override trials per condition");
  eval->add_option("--out", report_out, "report output path");

  auto* exp = app.add_subcommand("export", "export a report");
  std::string export_in;
  std::string format = "csv";
  std::string export_out = "report";
  exp->add_option("--in", export_in, "report JSON path")->required();
  exp->add_option("--format", format, "csv or json");
  exp->add_option("--out", export_out, "output path (csv: per-condition files)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (demo_gen->parsed()) return cmd_demo_gen(n, seed, out_dir, tolerance, margin);
    if (train->parsed()) return cmd_train(demos_dir, model_out, basis_count, mask_ft, ridge);
    if (run->parsed()) {
      return cmd_run(model_path, policy, world_arg, disturbed, run_seed, run_demos, log_path,
                     run_margin);
    }
    if (eval->parsed()) return cmd_eval(suite_path, trials, report_out);
    if (exp->parsed()) return cmd_export(export_in, format, export_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
