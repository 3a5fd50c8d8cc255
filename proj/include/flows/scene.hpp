#pragma once

#include <array>
#include <string>
#include <vector>

#include "flows/config.hpp"
#include "flows/rng.hpp"

namespace flows {

// Planar trajectory stored row-major: (x0, y0, x1, y1, ...).
struct Traj {
  std::vector<double> pts;

  Traj() = default;
  explicit Traj(int steps) : pts(static_cast<std::size_t>(2 * steps), 0.0) {}
  int steps() const { return static_cast<int>(pts.size() / 2); }
  double x(int n) const { return pts[2 * n]; }
  double y(int n) const { return pts[2 * n + 1]; }
  void set(int n, double px, double py) {
    pts[2 * n] = px;
    pts[2 * n + 1] = py;
  }
};

enum class Maneuver { kStraight = 0, kLeft, kRight, kStop };
constexpr int kManeuverCount = 4;
const char* maneuver_name(Maneuver m);
Maneuver maneuver_from_name(const std::string& name);

enum class DensityBucket { kSparse = 0, kMedium, kDense };
constexpr int kDensityCount = 3;
const char* density_name(DensityBucket b);
DensityBucket density_from_name(const std::string& name);

// Map feature layout: [avail x4, exit angle x4, lane offset].
constexpr int kMapFeatureLen = 2 * kManeuverCount + 1;

// One agent-centric training/evaluation unit. History ends at the origin with
// heading +x; map exit angles are relative to that heading.
struct SceneSample {
  int scene_id = 0;
  Maneuver maneuver = Maneuver::kStraight;
  DensityBucket density = DensityBucket::kSparse;
  std::vector<double> history;       // 2 * history_steps
  std::vector<double> map_features;  // kMapFeatureLen
  Traj future;

  int history_steps() const { return static_cast<int>(history.size() / 2); }
  // Mean history speed in scene units / s; the ground-truth-free scale proxy.
  double history_speed(double dt) const;
};

// A scene in an arbitrary world frame, before agent-centric normalization.
struct RawScene {
  int scene_id = 0;
  Maneuver maneuver = Maneuver::kStraight;
  DensityBucket density = DensityBucket::kSparse;
  std::vector<double> history;
  std::array<double, kManeuverCount> avail{};
  std::array<double, kManeuverCount> exit_angle{};  // absolute headings
  double lane_offset = 0.0;
  Traj future;
};

// Translates to the last history point and rotates the final history segment
// onto +x; exit angles become heading-relative.
SceneSample normalize_scene(const RawScene& raw);
RawScene apply_rigid(const RawScene& raw, double rotation, double tx, double ty);

SceneSample generate_scene(const RunConfig& cfg, int scene_id, Rng& rng);

struct Dataset {
  std::string config_hash;
  std::vector<SceneSample> samples;
};

// JSON-lines dataset: header object {config_hash, version}, then one scene
// object per line. Byte-deterministic for a fixed (config, split).
void generate_dataset(const RunConfig& cfg, const std::string& split, const std::string& path);
Dataset load_dataset(const std::string& path);
std::uint64_t split_stream_seed(const RunConfig& cfg, const std::string& split);

}  // namespace flows
