#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gameclr/dataio.hpp"
#include "gameclr/errors.hpp"
#include "gameclr/probe.hpp"
#include "gameclr/training.hpp"

namespace gameclr {

// Flat key=value experiment configuration. Every trainer, loss, augmentation
// and probe field has a key; unknown keys are hard errors so typos cannot
// silently fall back to defaults.
struct ExperimentConfig {
  int epochs = 20;
  int anchors_per_epoch = 2000;
  int batch_size = 64;
  double lr = 1e-3;
  double temperature = 0.2;
  int k_p = 2;
  int k_n = 2;
  double p_flip = 0.05;
  double brightness_delta_max = 0.2;
  double noise_sigma = 0.05;
  double max_rotate = 0.1;
  double crop_scale_min = 0.8;
  std::uint64_t seed = 42;
  int max_vehicles = 2;
  bool frozen_data = false;
  bool record_timing = false;
  int runs = 5;
  double lambda = 1.0;
  double test_fraction = 0.2;
  bool probe_embeddings = false;
  int probe_anchors = 1000;
  int train_data_anchors = 256;

  TrainConfig to_train_config(Method method) const {
    TrainConfig t;
    t.method = method;
    t.epochs = epochs;
    t.anchors_per_epoch = anchors_per_epoch;
    t.lr = lr;
    t.loss.temperature = temperature;
    t.loss.k_p = k_p;
    t.loss.k_n = k_n;
    t.loss.batch_size = batch_size;
    t.policy.p_flip = p_flip;
    t.policy.brightness_delta_max = brightness_delta_max;
    t.policy.noise_sigma = noise_sigma;
    t.policy.max_rotate = max_rotate;
    t.policy.crop_scale_min = crop_scale_min;
    t.seed = seed;
    t.max_vehicles = max_vehicles;
    t.frozen_data = frozen_data;
    t.record_timing = record_timing;
    return t;
  }

  ProbeConfig to_probe_config() const {
    ProbeConfig p;
    p.runs = runs;
    p.lambda = lambda;
    p.test_fraction = test_fraction;
    p.seed = seed;
    p.probe_embeddings = probe_embeddings;
    return p;
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "' expects true/false, got '" + v + "'");
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  std::uint64_t out = 0;
  const char* b = v.data();
  const char* e = b + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e)
    throw ConfigError("key '" + key + "' expects an unsigned integer, got '" + v + "'");
  return out;
}

inline int parse_int(const std::string& v, const std::string& key) {
  int out = 0;
  const char* b = v.data();
  const char* e = b + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e)
    throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& v, const std::string& key) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = b + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e)
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  return out;
}

}  // namespace detail

inline void apply_config_entry(ExperimentConfig& c, const std::string& key,
                               const std::string& value) {
  if (key == "epochs") c.epochs = detail::parse_int(value, key);
  else if (key == "anchors_per_epoch") c.anchors_per_epoch = detail::parse_int(value, key);
  else if (key == "batch_size") c.batch_size = detail::parse_int(value, key);
  else if (key == "lr") c.lr = detail::parse_real(value, key);
  else if (key == "temperature") c.temperature = detail::parse_real(value, key);
  else if (key == "k_p") c.k_p = detail::parse_int(value, key);
  else if (key == "k_n") c.k_n = detail::parse_int(value, key);
  else if (key == "p_flip") c.p_flip = detail::parse_real(value, key);
  else if (key == "brightness_delta_max") c.brightness_delta_max = detail::parse_real(value, key);
  else if (key == "noise_sigma") c.noise_sigma = detail::parse_real(value, key);
  else if (key == "max_rotate") c.max_rotate = detail::parse_real(value, key);
  else if (key == "crop_scale_min") c.crop_scale_min = detail::parse_real(value, key);
  else if (key == "seed") c.seed = detail::parse_u64(value, key);
  else if (key == "max_vehicles") c.max_vehicles = detail::parse_int(value, key);
  else if (key == "frozen_data") c.frozen_data = detail::parse_bool(value, key);
  else if (key == "record_timing") c.record_timing = detail::parse_bool(value, key);
  else if (key == "runs") c.runs = detail::parse_int(value, key);
  else if (key == "lambda") c.lambda = detail::parse_real(value, key);
  else if (key == "test_fraction") c.test_fraction = detail::parse_real(value, key);
  else if (key == "probe_embeddings") c.probe_embeddings = detail::parse_bool(value, key);
  else if (key == "probe_anchors") c.probe_anchors = detail::parse_int(value, key);
  else if (key == "train_data_anchors") c.train_data_anchors = detail::parse_int(value, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

// key=value per line; blank lines and lines starting with '#' are skipped.
inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  ExperimentConfig c;
  for (const std::string& raw : detail::split_lines(detail::read_file(path))) {
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line without '=': '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto ke = key.find_last_not_of(" \t");
    key = key.substr(0, ke == std::string::npos ? 0 : ke + 1);
    const auto vs = value.find_first_not_of(" \t");
    value = vs == std::string::npos ? std::string{} : value.substr(vs);
    apply_config_entry(c, key, value);
  }
  return c;
}

inline void require_valid_experiment_config(const ExperimentConfig& c) {
  require_valid_train_config(c.to_train_config(Method::gameclr));
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  if (!(c.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
    throw ConfigError("test_fraction must be in (0,1)");
  if (c.probe_anchors < 100) throw ConfigError("probe_anchors must be >= 100");
  if (c.train_data_anchors < 1) throw ConfigError("train_data_anchors must be >= 1");
}

}  // namespace gameclr
