#pragma once

// Glue shared by the command-line tool and the acceptance harness: corpus
// encoding, the denoiser training run and the flicker corpus.

#include <functional>
#include <vector>

#include "sav/autoencoder.hpp"
#include "sav/dataset.hpp"
#include "sav/denoiser.hpp"
#include "sav/schedule.hpp"
#include "sav/temporal.hpp"

namespace sav {

inline std::vector<TrainingExample> encode_examples(const std::vector<StyleTriple>& triples, const Autoencoder& ae) {
  std::vector<TrainingExample> out;
  out.reserve(triples.size());
  for (const auto& tr : triples) out.push_back({ae.encode(tr.styled), ae.encode(tr.content), tr.style});
  return out;
}

// Every k-th element so that at most `limit` remain, order preserved.
template <typename T>
std::vector<T> strided_subset(const std::vector<T>& xs, std::size_t limit) {
  if (limit == 0 || xs.size() <= limit) return xs;
  std::vector<T> out;
  const std::size_t stride = (xs.size() + limit - 1) / limit;
  for (std::size_t i = 0; i < xs.size(); i += stride) out.push_back(xs[i]);
  return out;
}

struct DenoiserRunConfig {
  std::size_t steps = 2000;
  std::uint64_t seed = 7;
  std::size_t heldout_limit = 80;  // held-out examples used for the loss probe
  std::size_t log_every = 0;       // 0 = silent
  DenoiserTrainConfig train;
};

struct DenoiserRunResult {
  Denoiser model;
  double initial_heldout = 0.0;
  double final_heldout = 0.0;
  std::vector<double> losses;
  DropoutAudit audit;
};

/// Initializes from (seed, init stream) and runs `steps` minibatch updates
/// drawn epoch-wise from `train` on the (seed, train stream) generator.
inline DenoiserRunResult train_denoiser(const std::vector<TrainingExample>& train,
                                        const std::vector<TrainingExample>& heldout, const DenoiserConfig& mc,
                                        const NoiseSchedule& schedule, const DenoiserRunConfig& rc,
                                        const std::function<void(std::size_t, double)>& log = {}) {
  require(!train.empty(), "train_denoiser: empty training set");
  DenoiserRunResult r;
  Rng init(rc.seed, streams::kInit);
  r.model = Denoiser::initialize(mc, init);

  const std::vector<TrainingExample> probe_set = strided_subset(heldout.empty() ? train : heldout, rc.heldout_limit);
  Rng eval(rc.seed, streams::kEval);
  const HeldoutProbe probe = make_heldout_probe(probe_set, schedule.steps(), eval);
  r.initial_heldout = heldout_loss(r.model, probe_set, probe, schedule);

  Rng rng(rc.seed, streams::kTrain);
  Rng order_rng(rc.seed, streams::kData);
  EpochSampler sampler(train.size(), order_rng);
  DenoiserTrainer trainer(r.model, schedule, rc.train);
  std::vector<TrainingExample> batch(rc.train.batch);
  for (std::size_t step = 0; step < rc.steps; ++step) {
    for (auto& ex : batch) ex = train[sampler.next()];
    r.losses.push_back(trainer.train_step(batch, rng));
    if (log && rc.log_every > 0 && (step + 1) % rc.log_every == 0) log(step + 1, r.losses.back());
  }
  r.final_heldout = heldout_loss(r.model, probe_set, probe, schedule);
  r.audit = trainer.audit();
  return r;
}

/// Flicker corpus: each content video is styled and then given per-frame
/// global brightness jitter. The clean content video is kept as the
/// reference for the static-region mask.
inline std::vector<FlickerExample> flicker_corpus(const std::vector<FrameSequence>& videos, double amplitude,
                                                  Rng& rng) {
  std::vector<FlickerExample> out;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const std::size_t style = v % kStyleCount;
    out.push_back({add_flicker(apply_style(videos[v], style), amplitude, rng), videos[v]});
  }
  return out;
}

// One-hot style rows; the fitted projection then maps each token straight to
// its centroid.
inline FloatGrid identity_style_table(std::size_t vocab) {
  FloatGrid t({vocab, vocab});
  for (std::size_t i = 0; i < vocab; ++i) t.at(i, i) = 1.0;
  return t;
}

}  // namespace sav
