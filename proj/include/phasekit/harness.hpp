#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phasekit/baselines.hpp"
#include "phasekit/enbip.hpp"
#include "phasekit/model.hpp"
#include "phasekit/sim.hpp"

namespace phasekit {

enum class PolicyKind { Enbip, Promp, Bc };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& s);

struct EnbipPolicyConfig {
  int ensemble_size = 0;  // 0: one member per demonstration
  ProcessNoise noise;
  double lookahead = 0.04;    // phase units
  double filter_rate = 25.0;  // Hz
};

struct PrompPolicyConfig {
  bool sample_duration_uniform = false;  // per-trial duration drawn from training durations
  double rate = 25.0;
};

struct BcPolicyConfig {
  int k = 5;
  double rate = 25.0;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Enbip;
  EnbipPolicyConfig enbip;
  PrompPolicyConfig promp;
  BcPolicyConfig bc;
};

/// Everything a trial may need; only the artifact matching the policy
/// kind must be non-null.
struct PolicyArtifacts {
  const TrajectoryModel* model = nullptr;
  const PrompModel* promp = nullptr;
  const BcPolicy* bc = nullptr;
};

struct TrialConfig {
  WorldConfig world;
  PolicyConfig policy;
  double timeout = 60.0;       // s
  double start_margin = 0.01;  // m, +-1 cm default; +-3 cm behind the extended flag
  std::uint64_t seed = 0;
};

struct EstimateLogRow {
  int step = 0;
  double t = 0.0;
  double phase_mean = 0.0;
  double phase_var = 0.0;
  double phase_vel_mean = 0.0;
  Eigen::VectorXd predicted;
};

struct TrialResult {
  std::string policy;
  std::string outcome;  // "success", "timeout", "numerical_failure: ..."
  bool success = false;
  double duration = 0.0;  // s
  Eigen::Vector3d final_pose = Eigen::Vector3d::Zero();
  std::vector<EstimateLogRow> estimates;
};

/// Closed loop: simulator at the world timestep, policy at its own rate
/// with zero-order-hold commands. Numerical failures are recorded as
/// unsuccessful outcomes, never thrown.
TrialResult run_trial(const PolicyArtifacts& artifacts, const TrialConfig& config);

/// Writes the per-step estimate log as CSV:
/// step,t,phase_mean,phase_var,phase_vel_mean,<predicted channels...>
void save_estimate_log(const TrialResult& result, const std::vector<std::string>& predicted_names,
                       const std::string& path);

struct Condition {
  std::string name;
  PolicyKind policy = PolicyKind::Enbip;
  std::string tolerance = "5mm";
  bool disturbed = false;
  bool mask_ft = false;  // use the force/torque-masked model
  double start_margin = 0.01;
};

struct SuiteConfig {
  std::vector<Condition> conditions;
  int trials = 30;
  std::uint64_t seed = 0;
  PolicyConfig policy;
  SensorNoise sensor_noise;  // applied to every trial world
  double timeout = 60.0;
};

struct ConditionReport {
  Condition condition;
  int successes = 0;
  int trials = 0;
  std::vector<TrialResult> results;  // trial index order
};

struct SuiteReport {
  std::string fingerprint;
  int trials_per_condition = 0;
  std::uint64_t seed = 0;
  std::vector<ConditionReport> conditions;
};

/// Artifacts per masking variant: conditions with mask_ft use the masked
/// set.
struct SuiteArtifacts {
  PolicyArtifacts unmasked;
  PolicyArtifacts masked;
};

/// Runs trials (concurrently up to PHASEKIT_WORKERS) with per-trial seeds
/// derived from (suite seed, condition, trial); aggregation is
/// order-independent.
SuiteReport run_suite(const SuiteConfig& config, const SuiteArtifacts& artifacts);

/// 64-bit FNV-1a over the canonical config serialization.
std::string suite_fingerprint(const SuiteConfig& config);

std::string report_to_json(const SuiteReport& report);
SuiteReport report_from_json(const std::string& json_text);
void save_report(const SuiteReport& report, const std::string& path);
SuiteReport load_report(const std::string& path);

/// Phase-progression CSV (`t,trial,phase_mean,phase_var`), one file per
/// condition next to `path` when format is "csv"; summary JSON otherwise.
void export_report(const SuiteReport& report, const std::string& format, const std::string& path);

/// Builds the per-trial world for a condition (tolerance variant,
/// disturbance window, sensor noise).
WorldConfig condition_world(const Condition& condition, const SensorNoise& noise);

}  // namespace phasekit
