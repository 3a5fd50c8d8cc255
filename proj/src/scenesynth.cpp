#include "flows/scene.hpp"

#include <cmath>
#include <cstdint>

#include <json.hpp>

#include "flows/errors.hpp"

namespace flows {

namespace {
using nlohmann::json;

constexpr double kPi = 3.141592653589793;

double wrap_angle(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a <= -kPi) a += 2 * kPi;
  return a;
}

// Constant-curvature arc from the origin, initial heading +x, total heading
// change `theta` across the horizon.
Traj arc_future(int t_steps, double speed, double dt, double theta) {
  Traj f(t_steps);
  if (std::abs(theta) < 1e-12) {
    for (int n = 1; n <= t_steps; ++n) f.set(n - 1, n * speed * dt, 0.0);
    return f;
  }
  const double total_time = t_steps * dt;
  const double omega = theta / total_time;
  const double radius = speed / omega;
  for (int n = 1; n <= t_steps; ++n) {
    const double a = omega * n * dt;
    f.set(n - 1, radius * std::sin(a), radius * (1.0 - std::cos(a)));
  }
  return f;
}

// Decelerating straight: segment speed hits zero at stop_fraction of the
// horizon, after which waypoints coincide exactly.
Traj stop_future(int t_steps, double speed, double dt, double stop_fraction) {
  Traj f(t_steps);
  const double n_stop = stop_fraction * t_steps;
  double x = 0.0;
  for (int n = 1; n <= t_steps; ++n) {
    const double s = speed * std::max(0.0, 1.0 - n / n_stop);
    x += s * dt;
    f.set(n - 1, x, 0.0);
  }
  return f;
}

}  // namespace

const char* maneuver_name(Maneuver m) {
  switch (m) {
    case Maneuver::kStraight: return "straight";
    case Maneuver::kLeft: return "left";
    case Maneuver::kRight: return "right";
    case Maneuver::kStop: return "stop";
  }
  return "?";
}

Maneuver maneuver_from_name(const std::string& name) {
  for (int i = 0; i < kManeuverCount; ++i)
    if (name == maneuver_name(static_cast<Maneuver>(i))) return static_cast<Maneuver>(i);
  throw DataError("unknown maneuver label '" + name + "'");
}

const char* density_name(DensityBucket b) {
  switch (b) {
    case DensityBucket::kSparse: return "sparse";
    case DensityBucket::kMedium: return "medium";
    case DensityBucket::kDense: return "dense";
  }
  return "?";
}

DensityBucket density_from_name(const std::string& name) {
  for (int i = 0; i < kDensityCount; ++i)
    if (name == density_name(static_cast<DensityBucket>(i))) return static_cast<DensityBucket>(i);
  throw DataError("unknown density label '" + name + "'");
}

double SceneSample::history_speed(double dt) const {
  const int h = history_steps();
  if (h < 2) return 0.0;
  double total = 0.0;
  for (int i = 1; i < h; ++i) {
    const double dx = history[2 * i] - history[2 * (i - 1)];
    const double dy = history[2 * i + 1] - history[2 * (i - 1) + 1];
    total += std::hypot(dx, dy);
  }
  return total / ((h - 1) * dt);
}

SceneSample normalize_scene(const RawScene& raw) {
  const std::size_t h = raw.history.size() / 2;
  if (h < 2) throw DataError("scene history too short to normalize");
  const double ox = raw.history[2 * (h - 1)];
  const double oy = raw.history[2 * (h - 1) + 1];
  const double sx = ox - raw.history[2 * (h - 2)];
  const double sy = oy - raw.history[2 * (h - 2) + 1];
  const double heading = (std::abs(sx) < 1e-15 && std::abs(sy) < 1e-15) ? 0.0 : std::atan2(sy, sx);
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  auto rot = [&](double px, double py, double& qx, double& qy) {
    const double tx = px - ox;
    const double ty = py - oy;
    qx = c * tx + s * ty;
    qy = -s * tx + c * ty;
  };

  SceneSample out;
  out.scene_id = raw.scene_id;
  out.maneuver = raw.maneuver;
  out.density = raw.density;
  out.history.resize(raw.history.size());
  for (std::size_t i = 0; i < h; ++i)
    rot(raw.history[2 * i], raw.history[2 * i + 1], out.history[2 * i], out.history[2 * i + 1]);
  out.future = Traj(raw.future.steps());
  for (int n = 0; n < raw.future.steps(); ++n) {
    double qx, qy;
    rot(raw.future.x(n), raw.future.y(n), qx, qy);
    out.future.set(n, qx, qy);
  }
  out.map_features.resize(kMapFeatureLen);
  for (int m = 0; m < kManeuverCount; ++m) {
    out.map_features[m] = raw.avail[m];
    out.map_features[kManeuverCount + m] =
        raw.avail[m] > 0.0 ? wrap_angle(raw.exit_angle[m] - heading) : 0.0;
  }
  out.map_features[2 * kManeuverCount] = raw.lane_offset;
  return out;
}

RawScene apply_rigid(const RawScene& raw, double rotation, double tx, double ty) {
  RawScene out = raw;
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  auto rot = [&](double px, double py, double& qx, double& qy) {
    qx = c * px - s * py + tx;
    qy = s * px + c * py + ty;
  };
  for (std::size_t i = 0; i < raw.history.size() / 2; ++i)
    rot(raw.history[2 * i], raw.history[2 * i + 1], out.history[2 * i], out.history[2 * i + 1]);
  for (int n = 0; n < raw.future.steps(); ++n) {
    double qx, qy;
    rot(raw.future.x(n), raw.future.y(n), qx, qy);
    out.future.set(n, qx, qy);
  }
  for (int m = 0; m < kManeuverCount; ++m)
    out.exit_angle[m] = wrap_angle(raw.exit_angle[m] + rotation);
  return out;
}

SceneSample generate_scene(const RunConfig& cfg, int scene_id, Rng& rng) {
  RawScene raw;
  raw.scene_id = scene_id;

  const double avail_prob[kManeuverCount] = {cfg.avail_straight, cfg.avail_left, cfg.avail_right,
                                             cfg.avail_stop};
  int available = 0;
  while (available == 0) {
    available = 0;
    for (int m = 0; m < kManeuverCount; ++m) {
      raw.avail[m] = rng.uniform() < avail_prob[m] ? 1.0 : 0.0;
      available += raw.avail[m] > 0.0 ? 1 : 0;
    }
  }
  raw.density = available <= 2 ? DensityBucket::kSparse
                               : (available == 3 ? DensityBucket::kMedium : DensityBucket::kDense);

  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  raw.exit_angle[0] = cfg.angle_straight_jitter * rng.uniform(-1.0, 1.0);
  raw.exit_angle[1] = rng.uniform(cfg.angle_left_min, cfg.angle_left_max);
  raw.exit_angle[2] = rng.uniform(cfg.angle_right_min, cfg.angle_right_max);
  raw.exit_angle[3] = 0.0;
  raw.lane_offset = rng.uniform(-cfg.lane_offset_max, cfg.lane_offset_max);

  const double mix[kManeuverCount] = {cfg.mix_straight, cfg.mix_left, cfg.mix_right, cfg.mix_stop};
  double mass = 0.0;
  for (int m = 0; m < kManeuverCount; ++m) mass += raw.avail[m] > 0.0 ? mix[m] : 0.0;
  double pick = rng.uniform() * mass;
  int chosen = -1;
  for (int m = 0; m < kManeuverCount; ++m) {
    if (raw.avail[m] <= 0.0) continue;
    pick -= mix[m];
    chosen = m;
    if (pick <= 0.0) break;
  }
  raw.maneuver = static_cast<Maneuver>(chosen);

  raw.history.resize(static_cast<std::size_t>(2 * cfg.history_steps));
  for (int i = 0; i < cfg.history_steps; ++i) {
    raw.history[2 * i] = -(cfg.history_steps - 1 - i) * speed * cfg.dt;
    raw.history[2 * i + 1] = 0.0;
  }
  raw.future = raw.maneuver == Maneuver::kStop
                   ? stop_future(cfg.t_steps, speed, cfg.dt, cfg.stop_fraction)
                   : arc_future(cfg.t_steps, speed, cfg.dt,
                                raw.exit_angle[static_cast<int>(raw.maneuver)]);

  if (cfg.noise_scale > 0.0) {
    for (double& v : raw.history) v += cfg.noise_scale * rng.normal();
    for (double& v : raw.future.pts) v += cfg.noise_scale * rng.normal();
  }
  return normalize_scene(raw);
}

std::uint64_t split_stream_seed(const RunConfig& cfg, const std::string& split) {
  return Rng::derive(cfg.seed, "scenesynth:" + split);
}

namespace {

int split_size(const RunConfig& cfg, const std::string& split) {
  if (split == "train") return cfg.n_train;
  if (split == "val") return cfg.n_val;
  if (split == "test") return cfg.n_test;
  throw ConfigError("unknown split '" + split + "' (expected train/val/test)");
}

json scene_to_json(const SceneSample& s) {
  json j;
  j["scene_id"] = s.scene_id;
  j["maneuver"] = maneuver_name(s.maneuver);
  j["density"] = density_name(s.density);
  j["history"] = s.history;
  j["map"] = s.map_features;
  j["future"] = s.future.pts;
  return j;
}

SceneSample scene_from_json(const json& j) {
  SceneSample s;
  s.scene_id = j.at("scene_id").get<int>();
  s.maneuver = maneuver_from_name(j.at("maneuver").get<std::string>());
  s.density = density_from_name(j.at("density").get<std::string>());
  s.history = j.at("history").get<std::vector<double>>();
  s.map_features = j.at("map").get<std::vector<double>>();
  if (s.map_features.size() != kMapFeatureLen) throw DataError("bad map feature length");
  s.future.pts = j.at("future").get<std::vector<double>>();
  if (s.history.size() % 2 != 0 || s.future.pts.size() % 2 != 0)
    throw DataError("odd coordinate count in scene record");
  return s;
}

}  // namespace

void generate_dataset(const RunConfig& cfg, const std::string& split, const std::string& path) {
  const int n = split_size(cfg, split);
  Rng rng(split_stream_seed(cfg, split));
  std::string out;
  json header;
  header["config_hash"] = cfg.scenario_hash();
  header["split"] = split;
  header["version"] = 1;
  out += header.dump();
  out += "\n";
  for (int i = 0; i < n; ++i) {
    out += scene_to_json(generate_scene(cfg, i, rng)).dump();
    out += "\n";
  }
  write_text_file(path, out);
}

Dataset load_dataset(const std::string& path) {
  const std::string text = read_text_file(path);
  Dataset ds;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    if (!line.empty()) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw DataError("parse error in " + path + " at byte offset " + std::to_string(pos) +
                        ": " + e.what());
      }
      try {
        if (!header_seen) {
          if (!j.contains("version") || j.at("version").get<int>() != 1)
            throw DataError("unsupported dataset version in " + path);
          ds.config_hash = j.at("config_hash").get<std::string>();
          header_seen = true;
        } else {
          ds.samples.push_back(scene_from_json(j));
        }
      } catch (const json::exception& e) {
        throw DataError("bad record in " + path + " at byte offset " + std::to_string(pos) + ": " +
                        e.what());
      }
    }
    pos = eol + 1;
  }
  if (!header_seen) throw DataError("missing dataset header in " + path);
  return ds;
}

}  // namespace flows
