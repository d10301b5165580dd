#pragma once

// Model directories: <dir>/model.json (architecture + parameter order) and
// one SAVT container per parameter.

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sav/autoencoder.hpp"
#include "sav/denoiser.hpp"
#include "sav/io/container.hpp"
#include "sav/metrics.hpp"
#include "sav/structure.hpp"
#include "sav/temporal.hpp"

namespace sav::io {

using nlohmann::json;
namespace fs = std::filesystem;

inline void write_json_atomic(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_bytes_atomic(path, text.data(), text.size());
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline json save_parameters(const fs::path& dir, const ParameterSet& params) {
  json names = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    save_grid(dir / (params.name(i) + ".savt"), params[i]);
    names.push_back(params.name(i));
  }
  return names;
}

inline ParameterSet load_parameters(const fs::path& dir, const json& names) {
  ParameterSet params;
  for (const auto& n : names) {
    const std::string name = n.get<std::string>();
    params.add(name, load_grid(dir / (name + ".savt")));
  }
  return params;
}

template <typename F>
auto with_manifest(const fs::path& dir, F&& f) {
  try {
    return f(read_json(dir / "model.json"));
  } catch (const json::exception& e) {
    throw FormatError((dir / "model.json").string() + ": " + e.what());
  }
}

inline void save_autoencoder(const fs::path& dir, const Autoencoder& ae) {
  json j;
  j["kind"] = "autoencoder";
  j["mode"] = ae.learned() ? "learned" : "identity";
  j["pixel_channels"] = ae.config.pixel_channels;
  j["latent_channels"] = ae.config.latent_channels;
  j["hidden"] = ae.config.hidden;
  j["latent_scale"] = ae.latent_scale;
  j["params"] = save_parameters(dir, ae.params);
  write_json_atomic(dir / "model.json", j);
}

inline Autoencoder load_autoencoder(const fs::path& dir) {
  return with_manifest(dir, [&](const json& j) {
    Autoencoder ae;
    ae.config.mode = j.at("mode").get<std::string>() == "learned" ? AutoencoderMode::kLearned : AutoencoderMode::kIdentity;
    ae.config.pixel_channels = j.at("pixel_channels").get<std::size_t>();
    ae.config.latent_channels = j.at("latent_channels").get<std::size_t>();
    ae.config.hidden = j.at("hidden").get<std::size_t>();
    ae.latent_scale = j.at("latent_scale").get<double>();
    ae.params = load_parameters(dir, j.at("params"));
    return ae;
  });
}

inline void save_denoiser(const fs::path& dir, const Denoiser& d) {
  json j;
  j["kind"] = "denoiser";
  j["latent_channels"] = d.config.latent_channels;
  j["hidden"] = d.config.hidden;
  j["heads"] = d.config.heads;
  j["head_dim"] = d.config.head_dim;
  j["timesteps"] = d.config.timesteps;
  j["vocab"] = d.config.vocab;
  j["params"] = save_parameters(dir, d.params);
  write_json_atomic(dir / "model.json", j);
}

inline Denoiser load_denoiser(const fs::path& dir) {
  return with_manifest(dir, [&](const json& j) {
    Denoiser d;
    d.config.latent_channels = j.at("latent_channels").get<std::size_t>();
    d.config.hidden = j.at("hidden").get<std::size_t>();
    d.config.heads = j.at("heads").get<std::size_t>();
    d.config.head_dim = j.at("head_dim").get<std::size_t>();
    d.config.timesteps = j.at("timesteps").get<std::size_t>();
    d.config.vocab = j.at("vocab").get<std::size_t>();
    d.params = load_parameters(dir, j.at("params"));
    return d;
  });
}

inline void save_deflicker(const fs::path& dir, const DeflickerNet& net) {
  json j;
  j["kind"] = "deflicker";
  j["channels"] = net.channels;
  j["params"] = save_parameters(dir, net.params);
  write_json_atomic(dir / "model.json", j);
}

inline DeflickerNet load_deflicker(const fs::path& dir) {
  return with_manifest(dir, [&](const json& j) {
    DeflickerNet net;
    net.channels = j.at("channels").get<std::size_t>();
    net.params = load_parameters(dir, j.at("params"));
    return net;
  });
}

inline void save_extractor(const fs::path& dir, const FeatureExtractor& fe) {
  json j;
  j["kind"] = "extractor";
  j["pixel_channels"] = fe.pixel_channels;
  j["params"] = save_parameters(dir, fe.params);
  write_json_atomic(dir / "model.json", j);
}

inline FeatureExtractor load_extractor(const fs::path& dir) {
  return with_manifest(dir, [&](const json& j) {
    FeatureExtractor fe;
    fe.pixel_channels = j.at("pixel_channels").get<std::size_t>();
    fe.params = load_parameters(dir, j.at("params"));
    return fe;
  });
}

inline void save_embedder(const fs::path& dir, const Embedder& emb) {
  save_extractor(dir / "extractor", emb.extractor);
  save_grid(dir / "projection.savt", emb.projection);
  save_grid(dir / "style_table.savt", emb.style_table);
}

inline Embedder load_embedder(const fs::path& dir) {
  Embedder emb;
  emb.extractor = load_extractor(dir / "extractor");
  emb.projection = load_grid(dir / "projection.savt");
  emb.style_table = load_grid(dir / "style_table.savt");
  return emb;
}

}  // namespace sav::io
