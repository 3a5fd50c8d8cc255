#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flows {

// Every tunable of the pipeline, resolved from a flat key=value file.
// Unknown keys are rejected; the resolved config is written into each run
// directory so runs replay from (config, code) alone.
struct RunConfig {
  // scenario geometry
  int t_steps = 16;        // prediction horizon length
  int history_steps = 5;   // observed history length
  double dt = 0.25;        // seconds per waypoint
  double speed_min = 0.5;  // scene units / s
  double speed_max = 2.0;
  double angle_left_min = 0.6;  // exit heading change, radians
  double angle_left_max = 1.4;
  double angle_right_min = -1.4;
  double angle_right_max = -0.6;
  double angle_straight_jitter = 0.0;
  double stop_fraction = 0.6;    // fraction of horizon after which speed is 0
  double noise_scale = 0.05;     // per-waypoint isotropic noise, scene units
  double lane_offset_max = 0.15; // contextual map feature only
  double mix_straight = 0.4;
  double mix_left = 0.2;
  double mix_right = 0.2;
  double mix_stop = 0.2;
  double avail_straight = 1.0;
  double avail_left = 0.7;
  double avail_right = 0.7;
  double avail_stop = 0.7;
  int n_train = 8000;
  int n_val = 1000;
  int n_test = 1000;

  // model dimensions
  int context_dim = 32;
  int enc_hidden = 64;
  int prior_hidden = 64;
  int query_dim = 16;
  int field_hidden = 128;
  int rank_hidden = 32;
  int modes = 6;        // K
  int embed_freqs = 8;  // per scalar for the (t, d) sinusoidal encodings
  double log_sigma_min = -4.0;
  double sigma_ramp_start = -0.5;
  double sigma_ramp_end = 0.0;

  // training
  std::uint64_t seed = 7;
  int epochs = 8;
  int batch_size = 32;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // 0 disables
  double ema_decay = 0.999;
  double lambda_nll = 1.0;
  double lambda_mix = 0.5;
  double lambda_ent = 0.01;
  double lambda_div = 0.1;
  double lambda_flow = 1.0;
  double lambda_cons = 0.5;
  double lambda_rank = 0.1;
  double tau_train = 1.0;
  double tau_infer = 0.5;
  double tau_mix = 1.0;
  double diversity_margin_m = 4.5;           // meters, scaled by unit_ratio
  std::vector<double> d_set = {0.0, 0.125, 0.25, 0.5};
  bool field_wta = false;  // winner-take-all mode masking for the field losses

  // selection & metrics
  double unit_ratio = 0.2;  // scene units per meter
  double nms_lo_m = 2.5;
  double nms_hi_m = 3.5;
  int nms_keep = 6;
  double miss_threshold = 0.5;  // scene units
  std::vector<double> map_horizons = {0.375, 0.625, 1.0};
  std::vector<double> probe_ts = {0.0, 0.25, 0.5, 0.75};
  std::vector<double> horizon_fracs = {0.125, 0.375, 0.625, 1.0};
  std::vector<int> sweep_steps = {1, 2, 4, 8, 16};
  std::vector<int> ablate_seeds = {1, 2, 3};
  int threads = 1;
  bool log_anchors = false;

  double diversity_margin() const { return diversity_margin_m * unit_ratio; }
  double nms_lo() const { return nms_lo_m * unit_ratio; }
  double nms_hi() const { return nms_hi_m * unit_ratio; }

  void validate() const;  // throws ConfigError naming the offending key
  std::string serialize() const;
  // Hash over the scenario-relevant keys; identifies dataset files.
  std::string scenario_hash() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Shortest round-trip decimal formatting; the single formatter used for all
// deterministic text outputs.
std::string fmt_double(double v);

}  // namespace flows
