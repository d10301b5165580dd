#pragma once

// JSON run configuration. Every section and key is optional; unknown keys are
// rejected so a typo cannot silently fall back to a default.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sav/autoencoder.hpp"
#include "sav/dataset.hpp"
#include "sav/denoiser.hpp"
#include "sav/sampler.hpp"
#include "sav/schedule.hpp"
#include "sav/temporal.hpp"

namespace sav {

struct ScheduleConfig {
  std::size_t T = 30;
  double beta_start = 1e-3;
  double beta_end = 0.2;
};

struct ModelConfig {
  std::size_t channels = 16;  // denoiser hidden width
  std::size_t heads = 2;
  std::size_t head_dim = 8;
  std::size_t latent = 4;  // latent channels of the learned autoencoder
  std::size_t ae_hidden = 16;
  std::string autoencoder = "learned";  // learned | identity
};

struct TrainingConfig {
  std::size_t steps = 2000;
  std::size_t batch = 8;
  double lr = 1e-3;
  std::string optimizer = "sgd";  // sgd | adam
  double p_drop = 0.1;
  std::uint64_t seed = 7;
  std::size_t ae_steps = 600;
  double ae_lr = 3e-3;
  std::size_t deflicker_steps = 400;
  double flicker_amplitude = 0.15;
};

struct DataConfig {
  std::size_t n = 10;
  std::size_t size = 32;
  std::size_t frames = 16;
  std::uint64_t seed = 1;
};

// Scene ranges for a canvas size; shape radii shrink on small canvases.
inline SceneRanges scene_ranges(const DataConfig& d) {
  SceneRanges r;
  r.size = d.size;
  r.frames = d.frames;
  r.radius_max = std::min(r.radius_max, 0.25 * static_cast<double>(d.size));
  r.radius_min = std::min(r.radius_min, r.radius_max);
  return r;
}

struct PathsConfig {
  std::string data = "data";
  std::string models = "models";
};

struct RunConfig {
  ScheduleConfig schedule;
  ModelConfig model;
  GuidanceScales guidance;
  SamplerConfig sampler;
  DeflickerTrainConfig temporal;
  TrainingConfig training;
  DataConfig data;
  PathsConfig paths;

  NoiseSchedule make_schedule() const { return make_linear_schedule(schedule.T, schedule.beta_start, schedule.beta_end); }

  DenoiserConfig denoiser_config() const {
    DenoiserConfig c;
    c.latent_channels = model.autoencoder == "identity" ? 3 : model.latent;
    c.hidden = model.channels;
    c.heads = model.heads;
    c.head_dim = model.head_dim;
    c.timesteps = schedule.T;
    return c;
  }

  AutoencoderConfig autoencoder_config() const {
    AutoencoderConfig c;
    c.mode = model.autoencoder == "identity" ? AutoencoderMode::kIdentity : AutoencoderMode::kLearned;
    c.latent_channels = model.latent;
    c.hidden = model.ae_hidden;
    return c;
  }

  DenoiserTrainConfig denoiser_train_config() const {
    DenoiserTrainConfig c;
    c.batch = training.batch;
    c.p_drop = training.p_drop;
    c.optimizer.kind = training.optimizer == "adam" ? OptimizerKind::kAdam : OptimizerKind::kSgdMomentum;
    c.optimizer.lr = training.lr;
    return c;
  }

  SamplerConfig sampler_config() const {
    SamplerConfig s = sampler;
    s.scales = guidance;
    return s;
  }
};

namespace config_detail {

using nlohmann::json;

class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    node_ = &root.at(name);
    if (!node_->is_object()) throw ConfigError("config: section '" + name + "' must be an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) return;
    try {
      out = node_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: " + name_ + "." + key + " has the wrong type");
    }
  }

  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& [k, v] : node_->items()) {
      if (!seen_.contains(k)) throw ConfigError("config: unknown key '" + name_ + "." + k + "'");
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

}  // namespace config_detail

inline void validate(const RunConfig& c) {
  using config_detail::check;
  check(c.schedule.T >= 1, "schedule.T must be >= 1");
  check(c.schedule.beta_start > 0.0 && c.schedule.beta_start <= c.schedule.beta_end && c.schedule.beta_end < 1.0,
        "schedule betas must satisfy 0 < beta_start <= beta_end < 1");
  check(c.model.channels >= 1 && c.model.heads >= 1 && c.model.head_dim >= 1 && c.model.latent >= 1,
        "model sizes must be positive");
  check(c.model.autoencoder == "learned" || c.model.autoencoder == "identity",
        "model.autoencoder must be learned|identity");
  check(c.guidance.finite(), "guidance scales must be finite");
  check(c.sampler.steps >= 1 && c.sampler.steps <= c.schedule.T, "sampler.steps must lie in [1, schedule.T]");
  check(c.sampler.structure.lambda >= 0.0, "sampler.lambda must be >= 0");
  check(c.sampler.noising_strength > 0.0 && c.sampler.noising_strength <= 1.0,
        "sampler.noising_strength must lie in (0, 1]");
  check(c.training.optimizer == "sgd" || c.training.optimizer == "adam", "training.optimizer must be sgd|adam");
  check(c.training.p_drop >= 0.0 && c.training.p_drop <= 1.0, "training.p_drop must lie in [0, 1]");
  check(c.training.batch >= 1, "training.batch must be >= 1");
  check(c.temporal.tau >= 0.0 && c.temporal.alpha >= 0.0 && c.temporal.beta >= 0.0,
        "temporal weights must be >= 0");
  check(c.data.n >= 1 && c.data.size >= 8 && c.data.size % 2 == 0 && c.data.frames >= 1,
        "data needs n >= 1, an even size >= 8 and frames >= 1");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  using config_detail::Section;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  static const std::set<std::string> sections{"schedule", "model", "guidance", "sampler",
                                              "temporal", "training", "data", "paths"};
  for (const auto& [k, v] : j.items()) {
    if (!sections.contains(k)) throw ConfigError("config: unknown section '" + k + "'");
  }
  RunConfig c;
  {
    Section s(j, "schedule");
    s.read("T", c.schedule.T);
    s.read("beta_start", c.schedule.beta_start);
    s.read("beta_end", c.schedule.beta_end);
    s.finish();
  }
  {
    Section s(j, "model");
    s.read("channels", c.model.channels);
    s.read("heads", c.model.heads);
    s.read("head_dim", c.model.head_dim);
    s.read("latent", c.model.latent);
    s.read("ae_hidden", c.model.ae_hidden);
    s.read("autoencoder", c.model.autoencoder);
    s.finish();
  }
  {
    Section s(j, "guidance");
    s.read("s_I", c.guidance.content);
    s.read("s_T", c.guidance.style);
    s.read("s_M", c.guidance.mask);
    s.finish();
  }
  {
    Section s(j, "sampler");
    std::string mean = to_string(c.sampler.mean), mode = to_string(c.sampler.structure.mode);
    s.read("steps", c.sampler.steps);
    s.read("seed", c.sampler.seed);
    s.read("lambda", c.sampler.structure.lambda);
    s.read("noising_strength", c.sampler.noising_strength);
    s.read("mean_convention", mean);
    s.read("structure_mode", mode);
    s.read("temporal", c.sampler.use_temporal);
    s.finish();
    try {
      c.sampler.mean = parse_mean_convention(mean);
      c.sampler.structure.mode = parse_structure_mode(mode);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  {
    Section s(j, "temporal");
    s.read("alpha", c.temporal.alpha);
    s.read("beta", c.temporal.beta);
    s.read("tau", c.temporal.tau);
    s.read("hidden", c.temporal.hidden);
    s.read("window", c.temporal.window);
    s.read("lr", c.temporal.lr);
    s.finish();
  }
  {
    Section s(j, "training");
    s.read("steps", c.training.steps);
    s.read("batch", c.training.batch);
    s.read("lr", c.training.lr);
    s.read("optimizer", c.training.optimizer);
    s.read("p_drop", c.training.p_drop);
    s.read("seed", c.training.seed);
    s.read("ae_steps", c.training.ae_steps);
    s.read("ae_lr", c.training.ae_lr);
    s.read("deflicker_steps", c.training.deflicker_steps);
    s.read("flicker_amplitude", c.training.flicker_amplitude);
    s.finish();
  }
  {
    Section s(j, "data");
    s.read("n", c.data.n);
    s.read("size", c.data.size);
    s.read("frames", c.data.frames);
    s.read("seed", c.data.seed);
    s.finish();
  }
  {
    Section s(j, "paths");
    s.read("data", c.paths.data);
    s.read("models", c.paths.models);
    s.finish();
  }
  c.temporal.steps = c.training.deflicker_steps;
  validate(c);
  return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["schedule"] = {{"T", c.schedule.T}, {"beta_start", c.schedule.beta_start}, {"beta_end", c.schedule.beta_end}};
  j["model"] = {{"channels", c.model.channels}, {"heads", c.model.heads},         {"head_dim", c.model.head_dim},
                {"latent", c.model.latent},     {"ae_hidden", c.model.ae_hidden}, {"autoencoder", c.model.autoencoder}};
  j["guidance"] = {{"s_I", c.guidance.content}, {"s_T", c.guidance.style}, {"s_M", c.guidance.mask}};
  j["sampler"] = {{"steps", c.sampler.steps},
                  {"seed", c.sampler.seed},
                  {"lambda", c.sampler.structure.lambda},
                  {"noising_strength", c.sampler.noising_strength},
                  {"mean_convention", to_string(c.sampler.mean)},
                  {"structure_mode", to_string(c.sampler.structure.mode)},
                  {"temporal", c.sampler.use_temporal}};
  j["temporal"] = {{"alpha", c.temporal.alpha}, {"beta", c.temporal.beta},     {"tau", c.temporal.tau},
                   {"hidden", c.temporal.hidden}, {"window", c.temporal.window}, {"lr", c.temporal.lr}};
  j["training"] = {{"steps", c.training.steps},
                   {"batch", c.training.batch},
                   {"lr", c.training.lr},
                   {"optimizer", c.training.optimizer},
                   {"p_drop", c.training.p_drop},
                   {"seed", c.training.seed},
                   {"ae_steps", c.training.ae_steps},
                   {"ae_lr", c.training.ae_lr},
                   {"deflicker_steps", c.training.deflicker_steps},
                   {"flicker_amplitude", c.training.flicker_amplitude}};
  j["data"] = {{"n", c.data.n}, {"size", c.data.size}, {"frames", c.data.frames}, {"seed", c.data.seed}};
  j["paths"] = {{"data", c.paths.data}, {"models", c.paths.models}};
  return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace sav
