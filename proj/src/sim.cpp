#include "phasekit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace phasekit {

void BracketGeometry::validate() const {
  if (!(tolerance() > 0.0)) {
    throw std::invalid_argument("geometry: clearance fits only (grommet radius > pin radius)");
  }
  if (!(grommet_spacing > 0.0) || !(pin_radius > 0.0) || !(insertion_depth > 0.0) ||
      !(seat_clearance > 0.0)) {
    throw std::invalid_argument("geometry: non-positive dimension");
  }
}

void ContactParams::validate() const {
  if (!(stiffness > 0.0) || !(damping > 0.0) || friction < 0.0) {
    throw std::invalid_argument("contact: stiffness/damping must be positive, friction >= 0");
  }
}

void WorldConfig::validate() const {
  geometry.validate();
  contact.validate();
  admittance.validate();
  if (!(timestep > 0.0) || timestep > 0.1) throw std::invalid_argument("world: bad timestep");
  if (wrench_filter_hz < 0.0) throw std::invalid_argument("world: negative wrench filter cutoff");
  for (std::size_t i = 0; i < perturbations.size(); ++i) {
    const auto& w = perturbations[i];
    if (!(w.start < w.end)) throw std::invalid_argument("world: perturbation window start >= end");
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = perturbations[j];
      if (w.start < o.end && o.start < w.end) {
        throw std::invalid_argument("world: overlapping perturbation windows");
      }
    }
  }
}

AdmittanceParams default_admittance() {
  // Soft laterally so pushes at newton scale displace the bracket by
  // millimeters; stiffer vertically for firm seating.
  return critically_damped(Eigen::Vector3d(5.0, 5.0, 0.2), Eigen::Vector3d(150.0, 400.0, 20.0));
}

WorldConfig make_world_config(const std::string& tolerance_variant) {
  WorldConfig cfg;
  cfg.admittance = default_admittance();
  if (tolerance_variant == "1mm") {
    cfg.geometry.grommet_radius = cfg.geometry.pin_radius + 0.001;
  } else if (tolerance_variant == "5mm") {
    cfg.geometry.grommet_radius = cfg.geometry.pin_radius + 0.005;
  } else {
    throw std::invalid_argument("unknown tolerance variant: " + tolerance_variant);
  }
  cfg.validate();
  return cfg;
}

PerturbationWindow default_disturbance() {
  PerturbationWindow w;
  w.start = 4.5;
  w.end = 7.5;
  w.gaussian = true;
  w.mean = Eigen::Vector3d(1.75, 0.0, 0.0);
  w.stddev = Eigen::Vector3d(std::sqrt(0.5), 0.0, 0.0);
  return w;
}

namespace {

// Regularized Coulomb slip: zero inside the deadband, linear ramp to +-1.
double slip_sign(double v) {
  constexpr double kDeadband = 1e-4;  // m/s
  constexpr double kFullSlip = 1e-3;  // m/s
  const double mag = std::abs(v);
  if (mag <= kDeadband) return 0.0;
  const double s = std::min((mag - kDeadband) / (kFullSlip - kDeadband), 1.0);
  return v > 0.0 ? s : -s;
}

struct GrommetState {
  Eigen::Vector2d position;  // world x, z
  Eigen::Vector2d velocity;
};

GrommetState grommet_state(const BracketGeometry& g, const RobotState& bracket, int side) {
  const double lx = (side == 0 ? -0.5 : 0.5) * g.grommet_spacing;
  const double c = std::cos(bracket.pose(2));
  const double s = std::sin(bracket.pose(2));
  GrommetState out;
  const Eigen::Vector2d r(c * lx, s * lx);  // offset from bracket origin
  out.position = Eigen::Vector2d(bracket.pose(0), bracket.pose(1)) + r;
  const double omega = bracket.velocity(2);
  out.velocity = Eigen::Vector2d(bracket.velocity(0) - omega * r(1),
                                 bracket.velocity(1) + omega * r(0));
  return out;
}

}  // namespace

Eigen::Vector3d contact_wrench(const BracketGeometry& geometry, const ContactParams& contact,
                               const RobotState& bracket) {
  Eigen::Vector3d wrench = Eigen::Vector3d::Zero();
  const double tol = geometry.tolerance();

  for (int side = 0; side < 2; ++side) {
    const GrommetState g = grommet_state(geometry, bracket, side);
    const double pin_x = (side == 0 ? -0.5 : 0.5) * geometry.grommet_spacing;
    const Eigen::Vector2d r(g.position(0) - bracket.pose(0), g.position(1) - bracket.pose(1));

    Eigen::Vector2d force = Eigen::Vector2d::Zero();

    // Pin interaction below the pin-top plane.
    const double depth = geometry.pin_top_height - g.position(1);
    const double dx = g.position(0) - pin_x;
    const double lateral_pen = std::abs(dx) - tol;
    if (depth > 0.0 && lateral_pen > 0.0) {
      if (depth <= lateral_pen) {
        // Plate resting on the pin top: vertical repulsion + sliding friction.
        const double normal = std::max(contact.stiffness * depth - contact.damping * g.velocity(1), 0.0);
        force(1) += normal;
        force(0) += -contact.friction * normal * slip_sign(g.velocity(0));
      } else {
        // Pin shaft against the grommet rim: lateral re-centering + friction.
        const double sgn = dx > 0.0 ? 1.0 : -1.0;
        const double pen_rate = sgn * g.velocity(0);
        const double normal = std::max(contact.stiffness * lateral_pen + contact.damping * pen_rate, 0.0);
        force(0) += -sgn * normal;
        force(1) += -contact.friction * normal * slip_sign(g.velocity(1));
      }
    }

    // Base plate the pins stand on; reachable only once inserted.
    const double seat_pen = geometry.seat_height() - g.position(1);
    if (seat_pen > 0.0) {
      const double normal = std::max(contact.stiffness * seat_pen - contact.damping * g.velocity(1), 0.0);
      force(1) += normal;
      force(0) += -contact.friction * normal * slip_sign(g.velocity(0));
    }

    wrench(0) += force(0);
    wrench(1) += force(1);
    wrench(2) += r(0) * force(1) - r(1) * force(0);
  }
  return wrench;
}

InsertionWorld::InsertionWorld(const WorldConfig& config, std::uint64_t seed)
    : config_(config), rng_(seed), seed_(seed) {
  config_.validate();
  reset(Eigen::Vector3d(0.0, config_.geometry.pin_top_height + 0.08, 0.0));
}

void InsertionWorld::reset(const Eigen::Vector3d& start_pose) {
  bracket_ = RobotState{};
  bracket_.pose = start_pose;
  clock_ = 0.0;
  quiescent_time_ = 0.0;
  success_ = false;
  last_wrench_.setZero();
  filtered_wrench_.setZero();
  rng_ = Rng(derive_seed(seed_, 0x5EED));
  drawn_forces_.clear();
  for (const auto& w : config_.perturbations) {
    Eigen::Vector3d f = w.mean;
    if (w.gaussian) {
      for (int i = 0; i < 3; ++i) f(i) += w.stddev(i) > 0.0 ? rng_.normal(0.0, w.stddev(i)) : 0.0;
    }
    drawn_forces_.push_back(f);
  }
}

Eigen::Vector3d InsertionWorld::active_perturbation() const {
  Eigen::Vector3d total = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < config_.perturbations.size(); ++i) {
    const auto& w = config_.perturbations[i];
    if (clock_ >= w.start && clock_ < w.end) total += drawn_forces_[i];
  }
  return total;
}

bool InsertionWorld::inserted() const {
  const double tol = config_.geometry.tolerance();
  const double depth_z = config_.geometry.pin_top_height - config_.geometry.insertion_depth;
  for (int side = 0; side < 2; ++side) {
    const GrommetState g = grommet_state(config_.geometry, bracket_, side);
    const double pin_x = (side == 0 ? -0.5 : 0.5) * config_.geometry.grommet_spacing;
    if (std::abs(g.position(0) - pin_x) > tol) return false;
    if (g.position(1) > depth_z) return false;
  }
  return true;
}

SensorReading InsertionWorld::step(const Eigen::Vector3d& commanded_target) {
  if (!commanded_target.allFinite()) throw std::invalid_argument("sim step: non-finite command");
  const double dt = config_.timestep;

  const Eigen::Vector3d wrench =
      contact_wrench(config_.geometry, config_.contact, bracket_) + active_perturbation();
  bracket_ = admittance_step(bracket_, commanded_target, wrench, config_.admittance, dt);
  clock_ += dt;
  last_wrench_ = wrench;

  if (config_.wrench_filter_hz > 0.0) {
    const double alpha = 1.0 - std::exp(-2.0 * M_PI * config_.wrench_filter_hz * dt);
    filtered_wrench_ += alpha * (wrench - filtered_wrench_);
  } else {
    filtered_wrench_ = wrench;
  }

  SensorReading reading;
  reading.timestamp = clock_;
  reading.pose = bracket_.pose;
  reading.wrench = filtered_wrench_;
  const auto& noise = config_.sensor_noise;
  if (noise.position > 0.0) {
    reading.pose(0) += rng_.normal(0.0, noise.position);
    reading.pose(1) += rng_.normal(0.0, noise.position);
  }
  if (noise.rotation > 0.0) reading.pose(2) += rng_.normal(0.0, noise.rotation);
  if (noise.force > 0.0) {
    reading.wrench(0) += rng_.normal(0.0, noise.force);
    reading.wrench(1) += rng_.normal(0.0, noise.force);
  }
  if (noise.torque > 0.0) reading.wrench(2) += rng_.normal(0.0, noise.torque);

  const bool quiet = std::abs(reading.wrench(0)) <= 1.0 && std::abs(reading.wrench(1)) <= 1.0 &&
                     std::abs(reading.wrench(2)) <= 0.1;
  if (inserted() && quiet) {
    quiescent_time_ += dt;
  } else {
    quiescent_time_ = 0.0;
  }
  success_ = inserted() && quiescent_time_ >= 0.25;

  return reading;
}

std::vector<ChannelInfo> demo_channel_layout(bool mask_ft) {
  const ChannelRole ft = mask_ft ? ChannelRole::Masked : ChannelRole::ObservedSensor;
  return {
      {"pose_x", "m", ChannelRole::ObservedSensor},
      {"pose_z", "m", ChannelRole::ObservedSensor},
      {"pose_theta", "rad", ChannelRole::ObservedSensor},
      {"force_x", "N", ft},
      {"force_z", "N", ft},
      {"torque", "N m", ft},
      {"target_x", "m", ChannelRole::Control},
      {"target_z", "m", ChannelRole::Control},
      {"target_theta", "rad", ChannelRole::Control},
  };
}

namespace {

double smoothstep5(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

struct DemoScript {
  Eigen::Vector2d bezier[4];  // approach control points in (x, z)
  double approach_T = 0.0;
  double descent_T = 0.0;
  double press_T = 0.0;
  double hover_z = 0.0;
  double hold_z = 0.0;    // final commanded z (presses hold_force into the seat)
  double press_dip = 0.0; // extra commanded dip at the press peak, m
  double slide = 0.0;     // signed lateral slide amplitude during the press, m
  double press_center = 0.0;  // s within the press stage
  double press_sigma = 0.0;   // s

  Eigen::Vector3d target(double t) const {
    Eigen::Vector3d cmd(0.0, hold_z, 0.0);
    if (t < approach_T) {
      const double u = t / approach_T;
      const double v = 1.0 - u;
      const Eigen::Vector2d p = v * v * v * bezier[0] + 3.0 * v * v * u * bezier[1] +
                                3.0 * v * u * u * bezier[2] + u * u * u * bezier[3];
      return Eigen::Vector3d(p(0), p(1), 0.0);
    }
    if (t < approach_T + descent_T) {
      const double u = (t - approach_T) / descent_T;
      cmd(1) = hover_z + (hold_z - hover_z) * smoothstep5(u);
      return cmd;
    }
    // Seating press: gaussian dip in z with an in-tolerance lateral slide.
    const double tp = t - approach_T - descent_T;
    const double zp = (tp - press_center) / press_sigma;
    cmd(1) = hold_z - press_dip * std::exp(-0.5 * zp * zp);
    cmd(0) = slide * smoothstep5(std::min(tp / (0.8 * press_T), 1.0));
    return cmd;
  }
};

}  // namespace

Demonstration generate_demo(std::uint64_t seed, const WorldConfig& world_config,
                            const DemoGenConfig& gen) {
  world_config.validate();
  const auto& geom = world_config.geometry;

  for (int attempt = 0; attempt < gen.max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt), 0xD301));

    DemoScript script;
    const double start_x = rng.uniform(-gen.start_margin, gen.start_margin);
    const double start_z =
        geom.pin_top_height + gen.start_height + rng.uniform(-gen.start_margin, gen.start_margin);
    script.hover_z = geom.pin_top_height + gen.hover_height;
    script.hold_z = geom.seat_height() - gen.hold_force / world_config.admittance.stiffness(1);
    script.bezier[0] = Eigen::Vector2d(start_x, start_z);
    script.bezier[3] = Eigen::Vector2d(0.0, script.hover_z);
    const Eigen::Vector2d delta = script.bezier[3] - script.bezier[0];
    script.bezier[1] = script.bezier[0] + delta / 3.0 +
                       Eigen::Vector2d(rng.normal(0.0, gen.bezier_jitter),
                                       rng.normal(0.0, gen.bezier_jitter));
    script.bezier[2] = script.bezier[0] + 2.0 * delta / 3.0 +
                       Eigen::Vector2d(rng.normal(0.0, gen.bezier_jitter),
                                       rng.normal(0.0, gen.bezier_jitter));
    script.approach_T = rng.uniform(gen.approach_min, gen.approach_max);
    script.descent_T = rng.uniform(gen.descent_min, gen.descent_max);
    script.press_T = gen.press_duration;
    script.press_center = 0.45 * gen.press_duration;
    script.press_sigma = 0.18 * gen.press_duration;
    const double press_force = gen.press_force * rng.uniform(0.75, 1.25);
    script.press_dip = press_force / world_config.admittance.stiffness(1);
    const double slide_sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    script.slide = slide_sign * gen.slide_max * rng.uniform(0.6, 1.0);

    InsertionWorld world(world_config, derive_seed(seed, static_cast<std::uint64_t>(attempt), 0x30D1));
    world.reset(Eigen::Vector3d(start_x, start_z, 0.0));

    const int record_stride =
        std::max(1, static_cast<int>(std::round(1.0 / (gen.record_rate * world_config.timestep))));
    std::vector<double> times;
    std::vector<Eigen::VectorXd> samples;

    auto record = [&](double t, const SensorReading& reading, const Eigen::Vector3d& cmd) {
      Eigen::VectorXd row(9);
      row << reading.pose(0), reading.pose(1), reading.pose(2), reading.wrench(0),
          reading.wrench(1), reading.wrench(2), cmd(0), cmd(1), cmd(2);
      times.push_back(t);
      samples.push_back(row);
    };

    {
      SensorReading initial;
      initial.pose = world.bracket().pose;
      record(0.0, initial, script.target(0.0));
    }

    bool ok = false;
    int step_index = 0;
    while (world.time() < gen.rollout_timeout) {
      const Eigen::Vector3d cmd = script.target(world.time());
      const SensorReading reading = world.step(cmd);
      ++step_index;
      if (step_index % record_stride == 0) record(reading.timestamp, reading, cmd);
      if (world.success()) {
        if (step_index % record_stride != 0) record(reading.timestamp, reading, cmd);
        ok = true;
        break;
      }
    }
    if (!ok) continue;

    Demonstration demo;
    demo.channels = demo_channel_layout();
    const int T = static_cast<int>(times.size());
    demo.timestamps.resize(T);
    demo.values.resize(9, T);
    for (int i = 0; i < T; ++i) {
      demo.timestamps(i) = times[static_cast<std::size_t>(i)];
      demo.values.col(i) = samples[static_cast<std::size_t>(i)];
    }
    demo.validate();
    return demo;
  }
  throw std::runtime_error("generate_demo: no successful rollout within attempt budget");
}

namespace {

nlohmann::json vec3_json(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }

Eigen::Vector3d vec3_from(const nlohmann::json& j) {
  return Eigen::Vector3d(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace

std::string world_config_to_json(const WorldConfig& config) {
  nlohmann::json j;
  j["geometry"] = {{"grommet_spacing", config.geometry.grommet_spacing},
                   {"grommet_radius", config.geometry.grommet_radius},
                   {"pin_radius", config.geometry.pin_radius},
                   {"pin_top_height", config.geometry.pin_top_height},
                   {"insertion_depth", config.geometry.insertion_depth},
                   {"seat_clearance", config.geometry.seat_clearance}};
  j["contact"] = {{"stiffness", config.contact.stiffness},
                  {"damping", config.contact.damping},
                  {"friction", config.contact.friction}};
  j["admittance"] = {{"M", vec3_json(config.admittance.inertia)},
                     {"K", vec3_json(config.admittance.stiffness)},
                     {"D", vec3_json(config.admittance.damping)}};
  j["perturbation"] = nlohmann::json::array();
  for (const auto& w : config.perturbations) {
    j["perturbation"].push_back({{"start", w.start},
                                 {"end", w.end},
                                 {"draw", w.gaussian ? "gaussian" : "fixed"},
                                 {"mean", vec3_json(w.mean)},
                                 {"stddev", vec3_json(w.stddev)}});
  }
  j["sensor_noise"] = {{"position", config.sensor_noise.position},
                       {"rotation", config.sensor_noise.rotation},
                       {"force", config.sensor_noise.force},
                       {"torque", config.sensor_noise.torque}};
  j["wrench_filter_hz"] = config.wrench_filter_hz;
  j["timestep"] = config.timestep;
  return j.dump(2);
}

WorldConfig world_config_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  WorldConfig cfg;
  const auto& g = j.at("geometry");
  cfg.geometry.grommet_spacing = g.at("grommet_spacing").get<double>();
  cfg.geometry.grommet_radius = g.at("grommet_radius").get<double>();
  cfg.geometry.pin_radius = g.at("pin_radius").get<double>();
  cfg.geometry.pin_top_height = g.at("pin_top_height").get<double>();
  cfg.geometry.insertion_depth = g.at("insertion_depth").get<double>();
  cfg.geometry.seat_clearance = g.at("seat_clearance").get<double>();
  const auto& c = j.at("contact");
  cfg.contact.stiffness = c.at("stiffness").get<double>();
  cfg.contact.damping = c.at("damping").get<double>();
  cfg.contact.friction = c.at("friction").get<double>();
  const auto& a = j.at("admittance");
  if (a.contains("critical") && a.at("critical").get<bool>()) {
    cfg.admittance = critically_damped(vec3_from(a.at("M")), vec3_from(a.at("K")));
  } else {
    cfg.admittance.inertia = vec3_from(a.at("M"));
    cfg.admittance.stiffness = vec3_from(a.at("K"));
    cfg.admittance.damping = vec3_from(a.at("D"));
  }
  for (const auto& w : j.at("perturbation")) {
    PerturbationWindow win;
    win.start = w.at("start").get<double>();
    win.end = w.at("end").get<double>();
    win.gaussian = w.at("draw").get<std::string>() == "gaussian";
    win.mean = vec3_from(w.at("mean"));
    win.stddev = vec3_from(w.at("stddev"));
    cfg.perturbations.push_back(win);
  }
  const auto& n = j.at("sensor_noise");
  cfg.sensor_noise.position = n.at("position").get<double>();
  cfg.sensor_noise.rotation = n.at("rotation").get<double>();
  cfg.sensor_noise.force = n.at("force").get<double>();
  cfg.sensor_noise.torque = n.at("torque").get<double>();
  cfg.wrench_filter_hz = j.at("wrench_filter_hz").get<double>();
  cfg.timestep = j.at("timestep").get<double>();
  cfg.validate();
  return cfg;
}

void save_world_config(const WorldConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << world_config_to_json(config) << "\n";
}

WorldConfig load_world_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return world_config_from_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

}  // namespace phasekit
