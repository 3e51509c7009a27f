#include "phasekit/model.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace phasekit {

namespace {
constexpr double kNoiseFloor = 1e-8;
constexpr int kFormatVersion = 1;
}  // namespace

std::vector<int> TrajectoryModel::observable_channels() const {
  std::vector<int> out;
  for (int d = 0; d < static_cast<int>(channels.size()); ++d) {
    if (channels[static_cast<std::size_t>(d)].role == ChannelRole::ObservedSensor &&
        channel_usable[static_cast<std::size_t>(d)]) {
      out.push_back(d);
    }
  }
  return out;
}

std::vector<int> TrajectoryModel::control_channels() const {
  std::vector<int> out;
  for (int d = 0; d < static_cast<int>(channels.size()); ++d) {
    if (channels[static_cast<std::size_t>(d)].role == ChannelRole::Control) out.push_back(d);
  }
  return out;
}

void TrajectoryModel::validate() const {
  basis.validate();
  if (demo_count() < 2) throw std::invalid_argument("model: need at least two demonstrations");
  if (weights.cols() != basis.total_weights()) {
    throw std::invalid_argument("model: weight columns do not match basis layout");
  }
  if (durations.size() != demo_count()) {
    throw std::invalid_argument("model: durations do not match demo count");
  }
  if (!(phase_vel_mean > 0.0)) throw std::invalid_argument("model: phase velocity mean must be positive");
  if (phase_vel_var < 0.0) throw std::invalid_argument("model: negative phase velocity variance");
  if (static_cast<int>(channels.size()) != basis.dims()) {
    throw std::invalid_argument("model: channel metadata does not match basis dims");
  }
  for (int d : observable_channels()) {
    if (!(observation_noise(d) > 0.0)) {
      throw std::invalid_argument("model: non-positive observation noise on observed channel");
    }
  }
}

TrajectoryModel fit_model(const std::vector<Demonstration>& demos, const BasisLibrary& lib,
                          double ridge) {
  if (demos.size() < 2) throw std::invalid_argument("fit_model: need at least two demonstrations");
  const auto& layout = demos.front().channels;
  for (const auto& demo : demos) {
    if (demo.channels.size() != layout.size()) {
      throw std::invalid_argument("fit_model: inconsistent channel layouts");
    }
    for (std::size_t d = 0; d < layout.size(); ++d) {
      if (demo.channels[d].name != layout[d].name || demo.channels[d].role != layout[d].role) {
        throw std::invalid_argument("fit_model: inconsistent channel layouts");
      }
    }
  }

  TrajectoryModel model;
  model.basis = lib;
  model.channels = layout;
  const int N = static_cast<int>(demos.size());
  const int D = lib.dims();
  model.weights.resize(N, lib.total_weights());
  model.durations.resize(N);
  model.channel_usable.assign(static_cast<std::size_t>(D), true);

  Eigen::MatrixXd rmse(N, D);
  for (int i = 0; i < N; ++i) {
    const WeightVector wv = decompose(demos[static_cast<std::size_t>(i)], lib, ridge);
    model.weights.row(i) = wv.w.transpose();
    rmse.row(i) = wv.residual_rmse.transpose();
    model.durations(i) = demos[static_cast<std::size_t>(i)].duration();
    for (int d = 0; d < D; ++d) {
      if (!wv.usable[static_cast<std::size_t>(d)]) model.channel_usable[static_cast<std::size_t>(d)] = false;
    }
  }

  const Eigen::VectorXd rates = model.durations.cwiseInverse();
  model.phase_vel_mean = rates.mean();
  model.phase_vel_var = (rates.array() - model.phase_vel_mean).square().sum() /
                        static_cast<double>(N > 1 ? N - 1 : 1);

  model.observation_noise.resize(D);
  for (int d = 0; d < D; ++d) {
    const double mean_sq = rmse.col(d).array().square().mean();
    model.observation_noise(d) = std::max(mean_sq, kNoiseFloor);
  }

  model.validate();
  return model;
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<int>(i)) = arr[i].get<double>();
  return v;
}

}  // namespace

void save_model(const TrajectoryModel& model, const std::string& path) {
  model.validate();
  nlohmann::json j;
  j["format_version"] = kFormatVersion;

  nlohmann::json basis;
  basis["counts"] = model.basis.counts;
  basis["centers"] = nlohmann::json::array();
  basis["widths"] = nlohmann::json::array();
  for (int d = 0; d < model.basis.dims(); ++d) {
    basis["centers"].push_back(vector_to_json(model.basis.centers[static_cast<std::size_t>(d)]));
    basis["widths"].push_back(vector_to_json(model.basis.widths[static_cast<std::size_t>(d)]));
  }
  j["basis"] = basis;

  j["weights"] = nlohmann::json::array();
  for (int i = 0; i < model.demo_count(); ++i) {
    j["weights"].push_back(vector_to_json(model.weights.row(i).transpose()));
  }
  j["durations"] = vector_to_json(model.durations);
  j["phase_velocity"] = {{"mean", model.phase_vel_mean}, {"variance", model.phase_vel_var}};
  j["observation_noise"] = vector_to_json(model.observation_noise);
  j["channels"] = nlohmann::json::array();
  for (std::size_t d = 0; d < model.channels.size(); ++d) {
    j["channels"].push_back({{"name", model.channels[d].name},
                             {"unit", model.channels[d].unit},
                             {"role", to_string(model.channels[d].role)},
                             {"usable", static_cast<bool>(model.channel_usable[d])}});
  }

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

TrajectoryModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw std::runtime_error("unsupported model format version in " + path);
  }

  TrajectoryModel model;
  model.basis.counts = j.at("basis").at("counts").get<std::vector<int>>();
  for (const auto& c : j.at("basis").at("centers")) model.basis.centers.push_back(vector_from_json(c));
  for (const auto& w : j.at("basis").at("widths")) model.basis.widths.push_back(vector_from_json(w));

  const auto& rows = j.at("weights");
  model.weights.resize(static_cast<int>(rows.size()), model.basis.total_weights());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    model.weights.row(static_cast<int>(i)) = vector_from_json(rows[i]).transpose();
  }
  model.durations = vector_from_json(j.at("durations"));
  model.phase_vel_mean = j.at("phase_velocity").at("mean").get<double>();
  model.phase_vel_var = j.at("phase_velocity").at("variance").get<double>();
  model.observation_noise = vector_from_json(j.at("observation_noise"));
  for (const auto& ch : j.at("channels")) {
    ChannelInfo info;
    info.name = ch.at("name").get<std::string>();
    info.unit = ch.at("unit").get<std::string>();
    info.role = channel_role_from_string(ch.at("role").get<std::string>());
    model.channels.push_back(info);
    model.channel_usable.push_back(ch.at("usable").get<bool>());
  }
  model.validate();
  return model;
}

}  // namespace phasekit
