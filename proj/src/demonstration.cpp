#include "phasekit/demonstration.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace phasekit {

std::string to_string(ChannelRole role) {
  switch (role) {
    case ChannelRole::ObservedSensor: return "observed-sensor";
    case ChannelRole::Control: return "control";
    case ChannelRole::Masked: return "masked";
  }
  return "observed-sensor";
}

ChannelRole channel_role_from_string(const std::string& s) {
  if (s == "observed-sensor") return ChannelRole::ObservedSensor;
  if (s == "control") return ChannelRole::Control;
  if (s == "masked") return ChannelRole::Masked;
  throw std::invalid_argument("unknown channel role: " + s);
}

std::vector<int> Demonstration::channels_with_role(ChannelRole role) const {
  std::vector<int> out;
  for (int d = 0; d < channel_count(); ++d) {
    if (channels[d].role == role) out.push_back(d);
  }
  return out;
}

void Demonstration::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(channels.size())) {
    throw std::invalid_argument("demonstration: channel metadata does not match value rows");
  }
  if (sample_count() < 2) {
    throw std::invalid_argument("demonstration: need at least two samples");
  }
  if (timestamps.size() != values.cols()) {
    throw std::invalid_argument("demonstration: timestamp count does not match samples");
  }
  for (int i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps(i) > timestamps(i - 1))) {
      throw std::invalid_argument("demonstration: timestamps must be strictly increasing");
    }
  }
  for (int d = 0; d < channel_count(); ++d) {
    if (channels[d].role == ChannelRole::Masked) continue;
    if (!values.row(d).allFinite()) {
      throw std::invalid_argument("demonstration: non-finite values in unmasked channel " +
                                  channels[d].name);
    }
  }
}

std::string sidecar_path(const std::string& csv_path) {
  const std::string ext = ".csv";
  if (csv_path.size() > ext.size() &&
      csv_path.compare(csv_path.size() - ext.size(), ext.size(), ext) == 0) {
    return csv_path.substr(0, csv_path.size() - ext.size()) + ".meta.json";
  }
  return csv_path + ".meta.json";
}

namespace {

void write_double(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void save_demonstration(const Demonstration& demo, const std::string& csv_path) {
  demo.validate();
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "t";
  for (const auto& ch : demo.channels) csv << "," << ch.name;
  csv << "\n";
  for (int i = 0; i < demo.sample_count(); ++i) {
    write_double(csv, demo.timestamps(i));
    for (int d = 0; d < demo.channel_count(); ++d) {
      csv << ",";
      write_double(csv, demo.values(d, i));
    }
    csv << "\n";
  }

  nlohmann::json meta;
  meta["channels"] = nlohmann::json::array();
  for (const auto& ch : demo.channels) {
    meta["channels"].push_back({{"name", ch.name}, {"unit", ch.unit}, {"role", to_string(ch.role)}});
  }
  std::ofstream side(sidecar_path(csv_path));
  if (!side) throw std::runtime_error("cannot write " + sidecar_path(csv_path));
  side << meta.dump(2) << "\n";
}

Demonstration load_demonstration(const std::string& csv_path) {
  std::ifstream side(sidecar_path(csv_path));
  if (!side) throw std::runtime_error("missing sidecar " + sidecar_path(csv_path));
  nlohmann::json meta = nlohmann::json::parse(side);

  Demonstration demo;
  for (const auto& ch : meta.at("channels")) {
    ChannelInfo info;
    info.name = ch.at("name").get<std::string>();
    info.unit = ch.at("unit").get<std::string>();
    info.role = channel_role_from_string(ch.at("role").get<std::string>());
    demo.channels.push_back(info);
  }

  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot read " + csv_path);
  std::string line;
  if (!std::getline(csv, line)) throw std::runtime_error("empty demonstration file " + csv_path);

  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  const std::size_t dims = demo.channels.size();
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != dims + 1) {
      throw std::runtime_error("malformed row in " + csv_path);
    }
    times.push_back(vals[0]);
    vals.erase(vals.begin());
    rows.push_back(std::move(vals));
  }

  const int T = static_cast<int>(times.size());
  demo.timestamps = Eigen::Map<Eigen::VectorXd>(times.data(), T);
  demo.values.resize(static_cast<int>(dims), T);
  for (int i = 0; i < T; ++i) {
    for (std::size_t d = 0; d < dims; ++d) demo.values(static_cast<int>(d), i) = rows[i][d];
  }
  demo.validate();
  return demo;
}

}  // namespace phasekit
