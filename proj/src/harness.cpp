#include "phasekit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace phasekit {

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Enbip: return "enbip";
    case PolicyKind::Promp: return "promp";
    case PolicyKind::Bc: return "bc";
  }
  return "enbip";
}

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "enbip") return PolicyKind::Enbip;
  if (s == "promp") return PolicyKind::Promp;
  if (s == "bc") return PolicyKind::Bc;
  throw std::invalid_argument("unknown policy: " + s);
}

namespace {

Eigen::Vector3d random_start_pose(const WorldConfig& world, double margin, Rng& rng) {
  return Eigen::Vector3d(rng.uniform(-margin, margin),
                         world.geometry.pin_top_height + 0.08 + rng.uniform(-margin, margin), 0.0);
}

Observation make_observation(const SensorReading& reading, const TrajectoryModel& model) {
  Observation obs;
  const int D = model.basis.dims();
  obs.values = Eigen::VectorXd::Zero(D);
  obs.active.assign(static_cast<std::size_t>(D), false);
  obs.timestamp = reading.timestamp;
  for (int d : model.observable_channels()) {
    const std::string& name = model.channels[static_cast<std::size_t>(d)].name;
    double value = 0.0;
    if (name == "pose_x") value = reading.pose(0);
    else if (name == "pose_z") value = reading.pose(1);
    else if (name == "pose_theta") value = reading.pose(2);
    else if (name == "force_x") value = reading.wrench(0);
    else if (name == "force_z") value = reading.wrench(1);
    else if (name == "torque") value = reading.wrench(2);
    else continue;
    obs.values(d) = value;
    obs.active[static_cast<std::size_t>(d)] = true;
  }
  return obs;
}

Eigen::VectorXd sensor_features(const SensorReading& reading, const BcPolicy& policy,
                                const std::vector<ChannelInfo>& channels) {
  Eigen::VectorXd out(policy.observed_channels.size());
  for (std::size_t k = 0; k < policy.observed_channels.size(); ++k) {
    const std::string& name = channels[static_cast<std::size_t>(policy.observed_channels[k])].name;
    double value = 0.0;
    if (name == "pose_x") value = reading.pose(0);
    else if (name == "pose_z") value = reading.pose(1);
    else if (name == "pose_theta") value = reading.pose(2);
    else if (name == "force_x") value = reading.wrench(0);
    else if (name == "force_z") value = reading.wrench(1);
    else if (name == "torque") value = reading.wrench(2);
    out(static_cast<int>(k)) = value;
  }
  return out;
}

}  // namespace

TrialResult run_trial(const PolicyArtifacts& artifacts, const TrialConfig& config) {
  TrialResult result;
  result.policy = to_string(config.policy.kind);

  try {
    config.world.validate();
    InsertionWorld world(config.world, derive_seed(config.seed, 0x17A1));
    Rng start_rng(derive_seed(config.seed, 0x57A7));
    const Eigen::Vector3d start = random_start_pose(config.world, config.start_margin, start_rng);
    world.reset(start);

    const double dt = config.world.timestep;
    const int total_steps = static_cast<int>(std::ceil(config.timeout / dt));

    double policy_rate = 25.0;
    switch (config.policy.kind) {
      case PolicyKind::Enbip: policy_rate = config.policy.enbip.filter_rate; break;
      case PolicyKind::Promp: policy_rate = config.policy.promp.rate; break;
      case PolicyKind::Bc: policy_rate = config.policy.bc.rate; break;
    }
    const int policy_stride = std::max(1, static_cast<int>(std::round(1.0 / (policy_rate * dt))));

    std::optional<EnbipFilter> filter;
    double promp_duration = 0.0;
    if (config.policy.kind == PolicyKind::Enbip) {
      if (artifacts.model == nullptr) throw std::invalid_argument("run_trial: missing model");
      EnbipFilter::Options opts;
      opts.ensemble_size = config.policy.enbip.ensemble_size;
      opts.noise = config.policy.enbip.noise;
      opts.seed = derive_seed(config.seed, 0xF117);
      filter.emplace(*artifacts.model, opts);
    } else if (config.policy.kind == PolicyKind::Promp) {
      if (artifacts.promp == nullptr) throw std::invalid_argument("run_trial: missing promp model");
      if (config.policy.promp.sample_duration_uniform) {
        Rng rng(derive_seed(config.seed, 0xD07A));
        const int idx = rng.uniform_int(0, static_cast<int>(artifacts.promp->durations.size()) - 1);
        promp_duration = artifacts.promp->durations(idx);
      } else {
        promp_duration = artifacts.promp->mean_duration;
      }
    } else {
      if (artifacts.bc == nullptr) throw std::invalid_argument("run_trial: missing bc policy");
    }

    // The first command holds the start pose until the policy first fires.
    Eigen::Vector3d command = start;
    SensorReading reading;
    reading.pose = start;
    reading.timestamp = 0.0;

    int filter_step = 0;
    for (int step = 0; step < total_steps; ++step) {
      if (step % policy_stride == 0) {
        switch (config.policy.kind) {
          case PolicyKind::Enbip: {
            StateEstimate est;
            if (step == 0) {
              est = filter->update(make_observation(reading, *artifacts.model));
            } else {
              filter->predict(policy_stride * dt);
              est = filter->update(make_observation(reading, *artifacts.model));
            }
            const Eigen::VectorXd ctrl = filter->control(config.policy.enbip.lookahead);
            command = Eigen::Vector3d(ctrl(0), ctrl(1), ctrl(2));
            EstimateLogRow row;
            row.step = filter_step++;
            row.t = world.time();
            row.phase_mean = est.phase_mean;
            row.phase_var = est.phase_var;
            row.phase_vel_mean = est.phase_vel_mean;
            row.predicted = est.predicted;
            result.estimates.push_back(std::move(row));
            break;
          }
          case PolicyKind::Promp: {
            const Eigen::VectorXd ctrl =
                promp_policy_step(*artifacts.promp, world.time(), promp_duration);
            command = Eigen::Vector3d(ctrl(0), ctrl(1), ctrl(2));
            EstimateLogRow row;
            row.step = filter_step++;
            row.t = world.time();
            row.phase_mean = std::clamp(world.time() / promp_duration, 0.0, 1.0);
            row.phase_var = 0.0;
            row.phase_vel_mean = 1.0 / promp_duration;
            result.estimates.push_back(std::move(row));
            break;
          }
          case PolicyKind::Bc: {
            const Eigen::VectorXd features =
                sensor_features(reading, *artifacts.bc, demo_channel_layout());
            const Eigen::VectorXd ctrl = bc_policy_step(*artifacts.bc, features);
            command = Eigen::Vector3d(ctrl(0), ctrl(1), ctrl(2));
            EstimateLogRow row;
            row.step = filter_step++;
            row.t = world.time();
            result.estimates.push_back(std::move(row));
            break;
          }
        }
      }
      reading = world.step(command);
      if (world.success()) break;
    }

    result.success = world.success();
    result.outcome = result.success ? "success" : "timeout";
    result.duration = world.time();
    result.final_pose = world.bracket().pose;
  } catch (const std::exception& e) {
    result.success = false;
    result.outcome = std::string("numerical_failure: ") + e.what();
  }
  return result;
}

void save_estimate_log(const TrialResult& result, const std::vector<std::string>& predicted_names,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,t,phase_mean,phase_var,phase_vel_mean";
  for (const auto& name : predicted_names) out << "," << name;
  out << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (const auto& row : result.estimates) {
    out << row.step << ",";
    put(row.t); out << ",";
    put(row.phase_mean); out << ",";
    put(row.phase_var); out << ",";
    put(row.phase_vel_mean);
    for (int i = 0; i < row.predicted.size(); ++i) {
      out << ",";
      put(row.predicted(i));
    }
    out << "\n";
  }
}

WorldConfig condition_world(const Condition& condition, const SensorNoise& noise) {
  WorldConfig world = make_world_config(condition.tolerance);
  if (condition.disturbed) world.perturbations.push_back(default_disturbance());
  world.sensor_noise = noise;
  return world;
}

std::string suite_fingerprint(const SuiteConfig& config) {
  nlohmann::json j;
  j["trials"] = config.trials;
  j["seed"] = config.seed;
  j["timeout"] = config.timeout;
  j["sensor_noise"] = {config.sensor_noise.position, config.sensor_noise.rotation,
                       config.sensor_noise.force, config.sensor_noise.torque};
  j["policy"] = {{"lookahead", config.policy.enbip.lookahead},
                 {"ensemble", config.policy.enbip.ensemble_size},
                 {"noise", {config.policy.enbip.noise.phase, config.policy.enbip.noise.phase_velocity,
                            config.policy.enbip.noise.weights}},
                 {"filter_rate", config.policy.enbip.filter_rate},
                 {"promp_uniform", config.policy.promp.sample_duration_uniform},
                 {"bc_k", config.policy.bc.k}};
  j["conditions"] = nlohmann::json::array();
  for (const auto& c : config.conditions) {
    j["conditions"].push_back({{"name", c.name},
                               {"policy", to_string(c.policy)},
                               {"tolerance", c.tolerance},
                               {"disturbed", c.disturbed},
                               {"mask_ft", c.mask_ft},
                               {"start_margin", c.start_margin}});
  }
  const std::string text = j.dump();
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << hash;
  return os.str();
}

SuiteReport run_suite(const SuiteConfig& config, const SuiteArtifacts& artifacts) {
  if (config.trials < 1) throw std::invalid_argument("run_suite: need at least one trial");

  SuiteReport report;
  report.fingerprint = suite_fingerprint(config);
  report.trials_per_condition = config.trials;
  report.seed = config.seed;

  struct Job {
    std::size_t condition;
    int trial;
  };
  std::vector<Job> jobs;
  report.conditions.resize(config.conditions.size());
  for (std::size_t c = 0; c < config.conditions.size(); ++c) {
    report.conditions[c].condition = config.conditions[c];
    report.conditions[c].trials = config.trials;
    report.conditions[c].results.resize(static_cast<std::size_t>(config.trials));
    for (int t = 0; t < config.trials; ++t) jobs.push_back({c, t});
  }

  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PHASEKIT_WORKERS")) {
    const int requested = std::atoi(env);
    if (requested > 0) workers = static_cast<unsigned>(requested);
  }
  workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));

  auto run_job = [&](const Job& job) {
    const Condition& cond = config.conditions[job.condition];
    TrialConfig trial;
    trial.world = condition_world(cond, config.sensor_noise);
    trial.policy = config.policy;
    trial.policy.kind = cond.policy;
    trial.timeout = config.timeout;
    trial.start_margin = cond.start_margin;
    trial.seed = derive_seed(config.seed, job.condition, static_cast<std::uint64_t>(job.trial));
    const PolicyArtifacts& set = cond.mask_ft ? artifacts.masked : artifacts.unmasked;
    report.conditions[job.condition].results[static_cast<std::size_t>(job.trial)] =
        run_trial(set, trial);
  };

  if (workers <= 1) {
    for (const auto& job : jobs) run_job(job);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= jobs.size()) return;
          run_job(jobs[i]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (auto& cond : report.conditions) {
    cond.successes = 0;
    for (const auto& r : cond.results) {
      if (r.success) cond.successes += 1;
    }
  }
  return report;
}

namespace {

nlohmann::json trial_to_json(const TrialResult& r) {
  nlohmann::json j;
  j["policy"] = r.policy;
  j["outcome"] = r.outcome;
  j["success"] = r.success;
  j["duration"] = r.duration;
  j["final_pose"] = {r.final_pose(0), r.final_pose(1), r.final_pose(2)};
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.estimates) {
    rows.push_back({row.step, row.t, row.phase_mean, row.phase_var, row.phase_vel_mean});
  }
  j["phase_log"] = rows;
  return j;
}

TrialResult trial_from_json(const nlohmann::json& j) {
  TrialResult r;
  r.policy = j.at("policy").get<std::string>();
  r.outcome = j.at("outcome").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.duration = j.at("duration").get<double>();
  const auto& fp = j.at("final_pose");
  r.final_pose = Eigen::Vector3d(fp.at(0).get<double>(), fp.at(1).get<double>(), fp.at(2).get<double>());
  for (const auto& row : j.at("phase_log")) {
    EstimateLogRow e;
    e.step = row.at(0).get<int>();
    e.t = row.at(1).get<double>();
    e.phase_mean = row.at(2).get<double>();
    e.phase_var = row.at(3).get<double>();
    e.phase_vel_mean = row.at(4).get<double>();
    r.estimates.push_back(std::move(e));
  }
  return r;
}

}  // namespace

std::string report_to_json(const SuiteReport& report) {
  nlohmann::json j;
  j["fingerprint"] = report.fingerprint;
  j["trials_per_condition"] = report.trials_per_condition;
  j["seed"] = report.seed;
  j["conditions"] = nlohmann::json::array();
  for (const auto& cond : report.conditions) {
    nlohmann::json c;
    c["name"] = cond.condition.name;
    c["policy"] = to_string(cond.condition.policy);
    c["tolerance"] = cond.condition.tolerance;
    c["disturbed"] = cond.condition.disturbed;
    c["mask_ft"] = cond.condition.mask_ft;
    c["start_margin"] = cond.condition.start_margin;
    c["successes"] = cond.successes;
    c["trials"] = cond.trials;
    c["success_rate"] = cond.trials > 0 ? static_cast<double>(cond.successes) / cond.trials : 0.0;
    c["results"] = nlohmann::json::array();
    for (const auto& r : cond.results) c["results"].push_back(trial_to_json(r));
    j["conditions"].push_back(std::move(c));
  }
  return j.dump(2);
}

SuiteReport report_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  SuiteReport report;
  report.fingerprint = j.at("fingerprint").get<std::string>();
  report.trials_per_condition = j.at("trials_per_condition").get<int>();
  report.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& c : j.at("conditions")) {
    ConditionReport cond;
    cond.condition.name = c.at("name").get<std::string>();
    cond.condition.policy = policy_kind_from_string(c.at("policy").get<std::string>());
    cond.condition.tolerance = c.at("tolerance").get<std::string>();
    cond.condition.disturbed = c.at("disturbed").get<bool>();
    cond.condition.mask_ft = c.at("mask_ft").get<bool>();
    cond.condition.start_margin = c.at("start_margin").get<double>();
    cond.successes = c.at("successes").get<int>();
    cond.trials = c.at("trials").get<int>();
    for (const auto& r : c.at("results")) cond.results.push_back(trial_from_json(r));
    report.conditions.push_back(std::move(cond));
  }
  return report;
}

void save_report(const SuiteReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << report_to_json(report) << "\n";
}

SuiteReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return report_from_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

void export_report(const SuiteReport& report, const std::string& format, const std::string& path) {
  if (format == "json") {
    nlohmann::json j;
    j["fingerprint"] = report.fingerprint;
    j["trials_per_condition"] = report.trials_per_condition;
    j["rows"] = nlohmann::json::array();
    for (const auto& cond : report.conditions) {
      j["rows"].push_back({{"name", cond.condition.name},
                           {"policy", to_string(cond.condition.policy)},
                           {"tolerance", cond.condition.tolerance},
                           {"disturbed", cond.condition.disturbed},
                           {"mask_ft", cond.condition.mask_ft},
                           {"successes", cond.successes},
                           {"trials", cond.trials},
                           {"success_rate",
                            cond.trials > 0 ? static_cast<double>(cond.successes) / cond.trials : 0.0}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
    return;
  }
  if (format != "csv") throw std::invalid_argument("export: unknown format " + format);

  // One phase-progression file per condition: t,trial,phase_mean,phase_var.
  const std::string stem =
      path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0
          ? path.substr(0, path.size() - 4)
          : path;
  char buf[32];
  for (const auto& cond : report.conditions) {
    const std::string file = stem + "_" + cond.condition.name + ".csv";
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file);
    out << "t,trial,phase_mean,phase_var\n";
    for (std::size_t trial = 0; trial < cond.results.size(); ++trial) {
      for (const auto& row : cond.results[trial].estimates) {
        std::snprintf(buf, sizeof(buf), "%.17g", row.t);
        out << buf << "," << trial << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", row.phase_mean);
        out << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", row.phase_var);
        out << buf << "\n";
      }
    }
  }
}

}  // namespace phasekit
