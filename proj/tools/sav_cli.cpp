// sav: command-line driver for data generation, training, stylization and
// evaluation. Progress goes to stderr, a JSON summary to stdout.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sav/sav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sav;

namespace {

enum ExitCode { kOk = 0, kMalformed = 1, kNumerical = 2, kConfig = 3 };

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void log(const std::string& msg) { std::cerr << "[sav] " << msg << "\n"; }

std::size_t worker_count() {
  const char* v = std::getenv("SAV_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  try {
    const long n = std::stol(v);
    if (n < 1) throw ConfigError("SAV_THREADS must be >= 1");
    return static_cast<std::size_t>(n);
  } catch (const std::logic_error&) {
    throw ConfigError(std::string("SAV_THREADS is not an integer: ") + v);
  }
}

std::size_t parse_style(const std::string& s) {
  if (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0]))) {
    const std::size_t id = std::stoul(s);
    if (id >= kStyleCount) throw ConfigError("style id " + s + " out of range");
    return id;
  }
  try {
    return style_id(s);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

std::string video_name(std::size_t v) { return io::frame_filename("video_", v, ""); }

// Data directory written by gen-data.
struct DataDir {
  std::vector<FrameSequence> videos;
  std::vector<std::size_t> train, heldout;
  json meta;
};

DataDir load_data(const fs::path& dir) {
  DataDir d;
  d.meta = io::read_json(dir / "corpus.json");
  try {
    const std::size_t n = d.meta.at("n").get<std::size_t>();
    for (std::size_t v = 0; v < n; ++v) d.videos.push_back(io::load_sequence(dir / "videos" / (video_name(v) + ".savt")));
    d.train = d.meta.at("train").get<std::vector<std::size_t>>();
    d.heldout = d.meta.at("heldout").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw FormatError((dir / "corpus.json").string() + ": " + e.what());
  }
  return d;
}

// Config resolution: --config if given, else <models>/config.json when
// present, else built-in defaults. Command-line flags are applied after.
RunConfig resolve_config(const std::string& config_path, const std::string& models_dir) {
  if (!config_path.empty()) return load_config(config_path);
  if (!models_dir.empty() && fs::exists(fs::path(models_dir) / "config.json")) {
    return load_config(fs::path(models_dir) / "config.json");
  }
  return RunConfig{};
}

void print_summary(const json& j) { std::cout << j.dump() << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stylize synthetic videos with a small multi-condition latent diffusion model."};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration (flags override it)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic content-video corpus");
  std::optional<std::size_t> g_n, g_size, g_frames;
  std::optional<std::uint64_t> g_seed;
  std::string g_out = "data";
  gen->add_option("--n", g_n, "number of videos (default 10)");
  gen->add_option("--size", g_size, "canvas size in pixels, even (default 32)");
  gen->add_option("--frames", g_frames, "frames per video (default 16)");
  gen->add_option("--seed", g_seed, "corpus seed (default 1)");
  gen->add_option("--out", g_out, "output directory")->capture_default_str();

  // train-ae
  auto* tae = app.add_subcommand("train-ae", "Train the latent autoencoder");
  std::string t_data = "data", t_models = "models";
  std::optional<std::size_t> tae_steps;
  tae->add_option("--data", t_data, "data directory from gen-data")->capture_default_str();
  tae->add_option("--out", t_models, "models directory")->capture_default_str();
  tae->add_option("--steps", tae_steps, "Adam steps (default 600)");

  // train
  auto* tr = app.add_subcommand("train", "Train the conditional denoiser and fit the metric embedder");
  std::optional<std::size_t> tr_steps;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--data", t_data, "data directory from gen-data")->capture_default_str();
  tr->add_option("--models", t_models, "models directory (reads the autoencoder, writes the rest)")
      ->capture_default_str();
  tr->add_option("--steps", tr_steps, "optimizer steps (default 2000)");
  tr->add_option("--seed", tr_seed, "training seed (default 7)");

  // train-deflicker
  auto* tdf = app.add_subcommand("train-deflicker", "Train the temporal refinement network");
  std::optional<std::size_t> tdf_steps;
  tdf->add_option("--data", t_data, "data directory from gen-data")->capture_default_str();
  tdf->add_option("--models", t_models, "models directory")->capture_default_str();
  tdf->add_option("--steps", tdf_steps, "Adam steps (default 400)");

  // stylize
  auto* sty = app.add_subcommand("stylize", "Stylize a video container");
  std::string s_input, s_out, s_style = "invert", s_dump_latents, s_dump_masks, s_raw_out;
  std::optional<std::size_t> s_steps;
  std::optional<std::uint64_t> s_seed;
  std::optional<double> s_ns, s_si, s_st, s_sm, s_lambda;
  std::optional<std::string> s_mode, s_mean;
  bool s_no_temporal = false;
  sty->add_option("--input", s_input, "input sequence (.savt, [F,C,H,W])")->required();
  sty->add_option("--out", s_out, "output sequence (.savt)")->required();
  sty->add_option("--models", t_models, "models directory")->capture_default_str();
  sty->add_option("--style", s_style, "style token name or id")->capture_default_str();
  sty->add_option("--steps", s_steps, "sampler steps, <= schedule T (default 30)");
  sty->add_option("--seed", s_seed, "sampler seed (default 1234)");
  sty->add_option("--noising-strength", s_ns, "fraction of the chain applied to the input (default 0.8)");
  sty->add_option("--scale-content", s_si, "content guidance scale s_I (default 1.2)");
  sty->add_option("--scale-style", s_st, "style guidance scale s_T (default 1.5)");
  sty->add_option("--scale-mask", s_sm, "mask guidance scale s_M (default 0.5)");
  sty->add_option("--lambda", s_lambda, "structure-loss step size (default 0.1)");
  sty->add_option("--structure-mode", s_mode, "self-similarity | pooled-cosine");
  sty->add_option("--mean-convention", s_mean, "ddpm | paper");
  sty->add_flag("--no-temporal", s_no_temporal, "skip the temporal refinement");
  sty->add_option("--raw-out", s_raw_out, "also write the unrefined per-frame outputs");
  sty->add_option("--dump-latents", s_dump_latents, "directory for per-step z_t containers");
  sty->add_option("--dump-masks", s_dump_masks, "directory for per-step mask containers");

  // deflicker
  auto* dfl = app.add_subcommand("deflicker", "Apply temporal refinement to a sequence");
  std::string d_input, d_weights, d_out;
  dfl->add_option("--input", d_input, "input sequence (.savt)")->required();
  dfl->add_option("--weights", d_weights, "deflicker model directory")->required();
  dfl->add_option("--out", d_out, "output sequence (.savt)")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Temporal consistency, prompt consistency and frame accuracy");
  std::string e_input, e_output, e_style;
  ev->add_option("--input", e_input, "content sequence (.savt)")->required();
  ev->add_option("--output", e_output, "stylized sequence (.savt)")->required();
  ev->add_option("--style", e_style, "style token name or id")->required();
  ev->add_option("--models", t_models, "models directory (embedder)")->capture_default_str();

  // inspect-schedule
  auto* ins = app.add_subcommand("inspect-schedule", "Print t, beta, alpha_bar, beta_tilde as CSV");
  std::optional<std::size_t> i_steps;
  ins->add_option("--steps", i_steps, "number of steps T (default from config, 30)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  Clock clock;
  try {
    if (*gen) {
      RunConfig cfg = resolve_config(config_path, "");
      if (g_n) cfg.data.n = *g_n;
      if (g_size) cfg.data.size = *g_size;
      if (g_frames) cfg.data.frames = *g_frames;
      if (g_seed) cfg.data.seed = *g_seed;
      validate(cfg);
      Rng rng(cfg.data.seed, streams::kData);
      const Corpus corpus = build_dataset(cfg.data.n, scene_ranges(cfg.data), rng);
      const fs::path out = g_out;
      for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
        io::save_sequence(out / "videos" / (video_name(v) + ".savt"), corpus.videos[v]);
        io::export_pgm(corpus.videos[v], out / "preview" / video_name(v));
      }
      json meta{{"n", cfg.data.n},
                {"size", cfg.data.size},
                {"frames", cfg.data.frames},
                {"seed", cfg.data.seed},
                {"train", corpus.train_videos},
                {"heldout", corpus.heldout_videos},
                {"styles", std::vector<std::string>(kStyleNames.begin(), kStyleNames.end())}};
      io::write_json_atomic(out / "corpus.json", meta);
      print_summary({{"command", "gen-data"},
                     {"videos", corpus.videos.size()},
                     {"train_triples", corpus.train.size()},
                     {"heldout_triples", corpus.heldout.size()},
                     {"out", out.string()}});
    } else if (*tae) {
      RunConfig cfg = resolve_config(config_path, "");
      if (tae_steps) cfg.training.ae_steps = *tae_steps;
      validate(cfg);
      const DataDir data = load_data(t_data);
      const auto triples = make_triples(data.videos, data.train);
      std::vector<FloatGrid> frames;
      for (const auto& t : triples) frames.push_back(t.styled);
      Autoencoder ae;
      std::vector<double> losses;
      if (cfg.model.autoencoder == "identity") {
        ae = Autoencoder::identity(frames[0].extent(0));
      } else {
        AutoencoderTrainConfig tc;
        tc.steps = cfg.training.ae_steps;
        tc.lr = cfg.training.ae_lr;
        Rng rng(cfg.training.seed, streams::kInit);
        log("training autoencoder for " + std::to_string(tc.steps) + " steps on " + std::to_string(frames.size()) +
            " frames");
        auto res = train_autoencoder(frames, cfg.autoencoder_config(), tc, rng);
        ae = std::move(res.model);
        losses = std::move(res.losses);
      }
      const fs::path models = t_models;
      io::save_autoencoder(models / "autoencoder", ae);
      io::write_json_atomic(models / "config.json", config_to_json(cfg));
      print_summary({{"command", "train-ae"},
                     {"mode", cfg.model.autoencoder},
                     {"reconstruction_mse", reconstruction_mse(ae, frames)},
                     {"latent_scale", ae.latent_scale},
                     {"seconds", clock.seconds()}});
    } else if (*tr) {
      RunConfig cfg = resolve_config(config_path, t_models);
      if (tr_steps) cfg.training.steps = *tr_steps;
      if (tr_seed) cfg.training.seed = *tr_seed;
      validate(cfg);
      const fs::path models = t_models;
      const DataDir data = load_data(t_data);
      const Autoencoder ae = io::load_autoencoder(models / "autoencoder");
      const auto train_triples = make_triples(data.videos, data.train);
      const auto heldout_triples = make_triples(data.videos, data.heldout);
      const auto train_ex = encode_examples(train_triples, ae);
      const auto heldout_ex = encode_examples(heldout_triples, ae);
      DenoiserRunConfig rc;
      rc.steps = cfg.training.steps;
      rc.seed = cfg.training.seed;
      rc.log_every = 100;
      rc.train = cfg.denoiser_train_config();
      const NoiseSchedule schedule = cfg.make_schedule();
      log("training denoiser for " + std::to_string(rc.steps) + " steps on " + std::to_string(train_ex.size()) +
          " examples");
      auto result = train_denoiser(train_ex, heldout_ex, cfg.denoiser_config(), schedule, rc,
                                   [](std::size_t s, double l) { log("step " + std::to_string(s) + " loss " + std::to_string(l)); });
      io::save_denoiser(models / "denoiser", result.model);

      const FeatureExtractor extractor = FeatureExtractor::initialize(ae.config.pixel_channels, cfg.training.seed);
      io::save_extractor(models / "extractor", extractor);
      const FeatureExtractor metric_fe = FeatureExtractor::initialize(ae.config.pixel_channels, cfg.training.seed + 1);
      const Embedder emb = fit_embedder(metric_fe, identity_style_table(kStyleCount), train_triples);
      io::save_embedder(models / "embedder", emb);
      io::write_json_atomic(models / "config.json", config_to_json(cfg));
      print_summary({{"command", "train"},
                     {"steps", rc.steps},
                     {"heldout_loss_initial", result.initial_heldout},
                     {"heldout_loss_final", result.final_heldout},
                     {"heldout_ratio", result.final_heldout / result.initial_heldout},
                     {"seconds", clock.seconds()}});
    } else if (*tdf) {
      RunConfig cfg = resolve_config(config_path, t_models);
      if (tdf_steps) cfg.training.deflicker_steps = *tdf_steps;
      cfg.temporal.steps = cfg.training.deflicker_steps;
      validate(cfg);
      const DataDir data = load_data(t_data);
      std::vector<FrameSequence> videos;
      for (std::size_t v : data.train) videos.push_back(data.videos[v]);
      Rng rng(cfg.training.seed, streams::kTrain);
      const auto corpus = flicker_corpus(videos, cfg.training.flicker_amplitude, rng);
      log("training deflicker for " + std::to_string(cfg.temporal.steps) + " steps");
      auto res = train_deflicker(corpus, cfg.temporal, rng);
      io::save_deflicker(fs::path(t_models) / "deflicker", res.net);
      double before = 0.0, after = 0.0;
      for (const auto& ex : corpus) {
        before += flicker_score(ex.raw, &ex.original, cfg.temporal.tau);
        after += flicker_score(deflicker_sequence(ex.raw, res.net), &ex.original, cfg.temporal.tau);
      }
      print_summary({{"command", "train-deflicker"},
                     {"final_loss", res.losses.empty() ? 0.0 : res.losses.back()},
                     {"flicker_before", before / static_cast<double>(corpus.size())},
                     {"flicker_after", after / static_cast<double>(corpus.size())},
                     {"seconds", clock.seconds()}});
    } else if (*sty) {
      RunConfig cfg = resolve_config(config_path, t_models);
      SamplerConfig& sc = cfg.sampler;
      if (s_steps) sc.steps = *s_steps;
      if (s_seed) sc.seed = *s_seed;
      if (s_ns) sc.noising_strength = *s_ns;
      if (s_si) cfg.guidance.content = *s_si;
      if (s_st) cfg.guidance.style = *s_st;
      if (s_sm) cfg.guidance.mask = *s_sm;
      if (s_lambda) sc.structure.lambda = *s_lambda;
      try {
        if (s_mode) sc.structure.mode = parse_structure_mode(*s_mode);
        if (s_mean) sc.mean = parse_mean_convention(*s_mean);
      } catch (const ContractError& e) {
        throw ConfigError(e.what());
      }
      if (s_no_temporal) sc.use_temporal = false;
      sc.style = parse_style(s_style);
      validate(cfg);

      const fs::path models = t_models;
      const Autoencoder ae = io::load_autoencoder(models / "autoencoder");
      const Denoiser net = io::load_denoiser(models / "denoiser");
      const FeatureExtractor fe = io::load_extractor(models / "extractor");
      std::optional<DeflickerNet> defl;
      if (sc.use_temporal && fs::exists(models / "deflicker" / "model.json")) defl = io::load_deflicker(models / "deflicker");
      const FrameSequence input = io::load_sequence(s_input);
      input.validate(true);

      SamplerTrace trace;
      const bool dumping = !s_dump_latents.empty() || !s_dump_masks.empty();
      if (dumping) {
        trace.on_step = [&](std::size_t f, std::size_t t, const FloatGrid& z, const FloatGrid& mask) {
          const std::string stem = io::frame_filename("frame_", f, "") + io::frame_filename("_t", t, ".savt");
          if (!s_dump_latents.empty()) io::save_grid(fs::path(s_dump_latents) / stem, z);
          if (!s_dump_masks.empty()) io::save_grid(fs::path(s_dump_masks) / stem, mask);
        };
      }
      // Dumps are written from the sampling loop, so they force one worker.
      const std::size_t workers = dumping ? 1 : worker_count();
      const Models m{ae, net, fe, defl ? &*defl : nullptr};
      const SamplerConfig run = cfg.sampler_config();
      const VideoResult res = stylize_video(input, run, m, cfg.make_schedule(), workers, dumping ? &trace : nullptr);
      io::save_sequence(s_out, res.output);
      if (!s_raw_out.empty()) io::save_sequence(s_raw_out, res.raw);
      print_summary({{"command", "stylize"},
                     {"frames", res.output.size()},
                     {"style", std::string(style_name(sc.style))},
                     {"steps", run.steps},
                     {"start_timestep", start_timestep(run)},
                     {"temporal", defl.has_value()},
                     {"workers", workers},
                     {"out", s_out},
                     {"seconds", clock.seconds()}});
    } else if (*dfl) {
      const DeflickerNet net = io::load_deflicker(d_weights);
      const FrameSequence input = io::load_sequence(d_input);
      input.validate(false);
      const FrameSequence out = deflicker_sequence(input, net);
      io::save_sequence(d_out, out);
      print_summary({{"command", "deflicker"},
                     {"frames", out.size()},
                     {"flicker_before", flicker_score(input)},
                     {"flicker_after", flicker_score(out)},
                     {"out", d_out}});
    } else if (*ev) {
      const Embedder emb = io::load_embedder(fs::path(t_models) / "embedder");
      const FrameSequence input = io::load_sequence(e_input);
      const FrameSequence output = io::load_sequence(e_output);
      const std::size_t style = parse_style(e_style);
      const MetricTriad m = evaluate(input, output, style, emb);
      std::printf("temporal_consistency,prompt_consistency,frame_accuracy\n%.6f,%.6f,%.6f\n", m.temporal_consistency,
                  m.prompt_consistency, m.frame_accuracy);
      print_summary({{"command", "eval"},
                     {"style", std::string(style_name(style))},
                     {"temporal_consistency", m.temporal_consistency},
                     {"prompt_consistency", m.prompt_consistency},
                     {"frame_accuracy", m.frame_accuracy}});
    } else if (*ins) {
      RunConfig cfg = resolve_config(config_path, "");
      if (i_steps) cfg.schedule.T = *i_steps;
      if (cfg.sampler.steps > cfg.schedule.T) cfg.sampler.steps = cfg.schedule.T;
      validate(cfg);
      const NoiseSchedule s = cfg.make_schedule();
      std::printf("t,beta,alpha_bar,beta_tilde\n");
      for (std::size_t t = 1; t <= s.steps(); ++t) {
        std::printf("%zu,%.17g,%.17g,%.17g\n", t, s.beta(t), s.alpha_bar(t), s.beta_tilde(t));
      }
    }
  } catch (const ConfigError& e) {
    log(std::string("config error: ") + e.what());
    return kConfig;
  } catch (const NumericalError& e) {
    log(std::string("numerical failure: ") + e.what());
    return kNumerical;
  } catch (const FormatError& e) {
    log(std::string("malformed input: ") + e.what());
    return kMalformed;
  } catch (const ContractError& e) {
    log(std::string("invalid input: ") + e.what());
    return kMalformed;
  } catch (const std::filesystem::filesystem_error& e) {
    log(std::string("file error: ") + e.what());
    return kMalformed;
  }
  return kOk;
}
