#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace phasekit {

/// How a channel participates in learning and inference.
///  - ObservedSensor: fed to the filter as measurements (pose, wrench).
///  - Control: latent at runtime; decoded from the posterior as commands.
///  - Masked: recorded but unusable (e.g. force/torque from kinesthetic
///    demonstrations); carried as zero weight blocks, never dropped.
enum class ChannelRole { ObservedSensor, Control, Masked };

std::string to_string(ChannelRole role);
ChannelRole channel_role_from_string(const std::string& s);

struct ChannelInfo {
  std::string name;
  std::string unit;
  ChannelRole role = ChannelRole::ObservedSensor;
};

/// Time-stamped multi-channel trajectory. One row of `values` per channel.
struct Demonstration {
  Eigen::VectorXd timestamps;         // seconds, strictly increasing
  Eigen::MatrixXd values;             // D x T
  std::vector<ChannelInfo> channels;  // size D

  int channel_count() const { return static_cast<int>(values.rows()); }
  int sample_count() const { return static_cast<int>(values.cols()); }
  double duration() const { return timestamps(timestamps.size() - 1) - timestamps(0); }

  std::vector<int> channels_with_role(ChannelRole role) const;

  /// Throws std::invalid_argument on shape mismatch, non-increasing
  /// timestamps, T < 2, or non-finite values in unmasked channels.
  void validate() const;
};

/// CSV with header `t,<channel>...` plus a JSON sidecar (units, roles).
/// The sidecar path is the CSV path with `.csv` replaced by `.meta.json`.
void save_demonstration(const Demonstration& demo, const std::string& csv_path);
Demonstration load_demonstration(const std::string& csv_path);

std::string sidecar_path(const std::string& csv_path);

}  // namespace phasekit
