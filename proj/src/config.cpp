#include "flows/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "flows/errors.hpp"

namespace flows {

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad real value '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer value '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer value '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': bad boolean value '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += fmt_double(v[i]);
  }
  return s;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

// Single table describing every key: name, setter, getter. Keeps parse,
// serialize, and unknown-key rejection in lockstep.
struct KeyDef {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, KeyDef>& key_table() {
  static const auto* table = [] {
    auto* m = new std::map<std::string, KeyDef>();
    auto real = [m](const std::string& k, double RunConfig::* f) {
      (*m)[k] = {[f](RunConfig& c, const std::string& key, const std::string& v) {
                   c.*f = parse_double(key, v);
                 },
                 [f](const RunConfig& c) { return fmt_double(c.*f); }};
    };
    auto integer = [m](const std::string& k, int RunConfig::* f) {
      (*m)[k] = {[f](RunConfig& c, const std::string& key, const std::string& v) {
                   c.*f = parse_int(key, v);
                 },
                 [f](const RunConfig& c) { return std::to_string(c.*f); }};
    };
    auto boolean = [m](const std::string& k, bool RunConfig::* f) {
      (*m)[k] = {[f](RunConfig& c, const std::string& key, const std::string& v) {
                   c.*f = parse_bool(key, v);
                 },
                 [f](const RunConfig& c) { return c.*f ? "true" : "false"; }};
    };
    auto dlist = [m](const std::string& k, std::vector<double> RunConfig::* f) {
      (*m)[k] = {[f](RunConfig& c, const std::string& key, const std::string& v) {
                   c.*f = parse_double_list(key, v);
                 },
                 [f](const RunConfig& c) { return join(c.*f); }};
    };
    auto ilist = [m](const std::string& k, std::vector<int> RunConfig::* f) {
      (*m)[k] = {[f](RunConfig& c, const std::string& key, const std::string& v) {
                   c.*f = parse_int_list(key, v);
                 },
                 [f](const RunConfig& c) { return join(c.*f); }};
    };

    integer("t_steps", &RunConfig::t_steps);
    integer("history_steps", &RunConfig::history_steps);
    real("dt", &RunConfig::dt);
    real("speed_min", &RunConfig::speed_min);
    real("speed_max", &RunConfig::speed_max);
    real("angle_left_min", &RunConfig::angle_left_min);
    real("angle_left_max", &RunConfig::angle_left_max);
    real("angle_right_min", &RunConfig::angle_right_min);
    real("angle_right_max", &RunConfig::angle_right_max);
    real("angle_straight_jitter", &RunConfig::angle_straight_jitter);
    real("stop_fraction", &RunConfig::stop_fraction);
    real("noise_scale", &RunConfig::noise_scale);
    real("lane_offset_max", &RunConfig::lane_offset_max);
    real("mix_straight", &RunConfig::mix_straight);
    real("mix_left", &RunConfig::mix_left);
    real("mix_right", &RunConfig::mix_right);
    real("mix_stop", &RunConfig::mix_stop);
    real("avail_straight", &RunConfig::avail_straight);
    real("avail_left", &RunConfig::avail_left);
    real("avail_right", &RunConfig::avail_right);
    real("avail_stop", &RunConfig::avail_stop);
    integer("n_train", &RunConfig::n_train);
    integer("n_val", &RunConfig::n_val);
    integer("n_test", &RunConfig::n_test);
    integer("context_dim", &RunConfig::context_dim);
    integer("enc_hidden", &RunConfig::enc_hidden);
    integer("prior_hidden", &RunConfig::prior_hidden);
    integer("query_dim", &RunConfig::query_dim);
    integer("field_hidden", &RunConfig::field_hidden);
    integer("rank_hidden", &RunConfig::rank_hidden);
    integer("modes", &RunConfig::modes);
    integer("embed_freqs", &RunConfig::embed_freqs);
    real("log_sigma_min", &RunConfig::log_sigma_min);
    real("sigma_ramp_start", &RunConfig::sigma_ramp_start);
    real("sigma_ramp_end", &RunConfig::sigma_ramp_end);
    (*m)["seed"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                      c.seed = parse_u64(key, v);
                    },
                    [](const RunConfig& c) { return std::to_string(c.seed); }};
    integer("epochs", &RunConfig::epochs);
    integer("batch_size", &RunConfig::batch_size);
    real("lr", &RunConfig::lr);
    real("adam_beta1", &RunConfig::adam_beta1);
    real("adam_beta2", &RunConfig::adam_beta2);
    real("adam_eps", &RunConfig::adam_eps);
    real("grad_clip", &RunConfig::grad_clip);
    real("ema_decay", &RunConfig::ema_decay);
    real("lambda_nll", &RunConfig::lambda_nll);
    real("lambda_mix", &RunConfig::lambda_mix);
    real("lambda_ent", &RunConfig::lambda_ent);
    real("lambda_div", &RunConfig::lambda_div);
    real("lambda_flow", &RunConfig::lambda_flow);
    real("lambda_cons", &RunConfig::lambda_cons);
    real("lambda_rank", &RunConfig::lambda_rank);
    real("tau_train", &RunConfig::tau_train);
    real("tau_infer", &RunConfig::tau_infer);
    real("tau_mix", &RunConfig::tau_mix);
    real("diversity_margin_m", &RunConfig::diversity_margin_m);
    dlist("d_set", &RunConfig::d_set);
    boolean("field_wta", &RunConfig::field_wta);
    real("unit_ratio", &RunConfig::unit_ratio);
    real("nms_lo_m", &RunConfig::nms_lo_m);
    real("nms_hi_m", &RunConfig::nms_hi_m);
    integer("nms_keep", &RunConfig::nms_keep);
    real("miss_threshold", &RunConfig::miss_threshold);
    dlist("map_horizons", &RunConfig::map_horizons);
    dlist("probe_ts", &RunConfig::probe_ts);
    dlist("horizon_fracs", &RunConfig::horizon_fracs);
    ilist("sweep_steps", &RunConfig::sweep_steps);
    ilist("ablate_seeds", &RunConfig::ablate_seeds);
    integer("threads", &RunConfig::threads);
    boolean("log_anchors", &RunConfig::log_anchors);
    return m;
  }();
  return *table;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw ConfigError("config key '" + key + "': " + why);
  };
  require(t_steps >= 2, "t_steps", "horizon must be at least 2");
  require(history_steps >= 2, "history_steps", "history must be at least 2");
  require(dt > 0, "dt", "must be positive");
  require(speed_min > 0 && speed_max >= speed_min, "speed_min", "need 0 < speed_min <= speed_max");
  require(noise_scale >= 0, "noise_scale", "must be non-negative");
  require(stop_fraction > 0 && stop_fraction <= 1, "stop_fraction", "must lie in (0,1]");
  const double mix_sum = mix_straight + mix_left + mix_right + mix_stop;
  for (auto [k, v] : {std::pair<const char*, double>{"mix_straight", mix_straight},
                      {"mix_left", mix_left},
                      {"mix_right", mix_right},
                      {"mix_stop", mix_stop}})
    require(v >= 0 && v <= 1, k, "must lie in [0,1]");
  require(std::abs(mix_sum - 1.0) < 1e-9, "mix_straight",
          "maneuver mixture must sum to 1 (got " + fmt_double(mix_sum) + ")");
  for (auto [k, v] : {std::pair<const char*, double>{"avail_straight", avail_straight},
                      {"avail_left", avail_left},
                      {"avail_right", avail_right},
                      {"avail_stop", avail_stop}})
    require(v >= 0 && v <= 1, k, "must lie in [0,1]");
  require(avail_straight + avail_left + avail_right + avail_stop > 0, "avail_straight",
          "at least one branch must be possible");
  require(n_train > 0 && n_val > 0 && n_test > 0, "n_train", "split sizes must be positive");
  require(context_dim > 0 && enc_hidden > 0 && prior_hidden > 0 && field_hidden > 0 &&
              rank_hidden > 0 && query_dim > 0,
          "context_dim", "model dims must be positive");
  require(modes >= 2, "modes", "need at least two modes");
  require(embed_freqs >= 1, "embed_freqs", "need at least one frequency");
  require(epochs >= 1 && batch_size >= 1, "epochs", "training sizes must be positive");
  require(lr > 0, "lr", "must be positive");
  require(ema_decay > 0 && ema_decay < 1, "ema_decay", "must lie in (0,1)");
  for (auto [k, v] : {std::pair<const char*, double>{"lambda_nll", lambda_nll},
                      {"lambda_mix", lambda_mix},
                      {"lambda_ent", lambda_ent},
                      {"lambda_div", lambda_div},
                      {"lambda_flow", lambda_flow},
                      {"lambda_cons", lambda_cons},
                      {"lambda_rank", lambda_rank}})
    require(v >= 0, k, "must be non-negative");
  require(tau_train > 0 && tau_infer > 0 && tau_mix > 0, "tau_train", "must be positive");
  require(diversity_margin_m > 0, "diversity_margin_m", "must be positive");
  for (double d : d_set) require(d >= 0 && d <= 1, "d_set", "entries must lie in [0,1]");
  bool has_pair = false;
  for (double d : d_set)
    if (d > 0 && 2 * d <= 1.0) has_pair = true;
  require(has_pair, "d_set", "needs at least one d with 0 < d <= 1/2");
  require(unit_ratio > 0, "unit_ratio", "must be positive");
  require(nms_lo_m > 0 && nms_hi_m >= nms_lo_m, "nms_lo_m", "need 0 < lo <= hi");
  require(nms_keep >= 1, "nms_keep", "must keep at least one candidate");
  require(miss_threshold > 0, "miss_threshold", "must be positive");
  for (double h : map_horizons) require(h > 0 && h <= 1, "map_horizons", "fractions in (0,1]");
  for (double f : horizon_fracs) require(f > 0 && f <= 1, "horizon_fracs", "fractions in (0,1]");
  for (double t : probe_ts) require(t >= 0 && t < 1, "probe_ts", "probes in [0,1)");
  for (int s : sweep_steps) require(s >= 1, "sweep_steps", "steps must be >= 1");
  require(threads >= 1, "threads", "must be positive");
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [key, def] : key_table()) out += key + " = " + def.get(*this) + "\n";
  return out;
}

std::string RunConfig::scenario_hash() const {
  static const char* scenario_keys[] = {
      "t_steps",       "history_steps",    "dt",
      "speed_min",     "speed_max",        "angle_left_min",
      "angle_left_max", "angle_right_min", "angle_right_max",
      "angle_straight_jitter", "stop_fraction", "noise_scale",
      "lane_offset_max", "mix_straight",   "mix_left",
      "mix_right",     "mix_stop",         "avail_straight",
      "avail_left",    "avail_right",      "avail_stop",
      "n_train",       "n_val",            "n_test",
      "seed"};
  std::string blob;
  const auto& table = key_table();
  for (const char* k : scenario_keys) blob += std::string(k) + "=" + table.at(k).get(*this) + ";";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(blob)));
  return buf;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  const auto& table = key_table();
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = table.find(key);
    if (it == table.end())
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second.set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config_text(read_text_file(path)); }

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw DataError("write failure: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace flows
