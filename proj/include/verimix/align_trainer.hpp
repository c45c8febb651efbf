// Copyright 2026 The verimix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VERIMIX_ALIGN_TRAINER_HPP_
#define VERIMIX_ALIGN_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "verimix/gatemixer.hpp"
#include "verimix/gradcheck.hpp"
#include "verimix/objectives.hpp"

namespace verimix {

// Desk-scale alignment pretraining. Only GateMixerParams move; the vision
// encoders and the language model are replaced by fixed random linear maps
// (FrozenModel) that are never written to.

struct FrozenModel {
  Tensor encoder_v;     // latent_dim x d_v: latent -> ViT features
  Tensor encoder_c;     // latent_dim x d_c: latent -> CNN features
  Tensor text_encoder;  // latent_dim x d_llm: pooled latent -> text rep
  Tensor teacher;       // latent_dim x d_llm: latent -> target hidden state
  Tensor llm_mix;       // d_llm x d_llm: stand-in for the language model
  Tensor readout;       // d_llm x vocab: hidden state -> token logits

  std::vector<const Tensor*> tensors() const {
    return {&encoder_v, &encoder_c, &text_encoder,
            &teacher,   &llm_mix,   &readout};
  }
};

struct TrainConfig {
  ConnectorConfig connector;
  std::size_t steps = 300;
  std::size_t batch_size = 4;
  double lr = 0.5;
  double lambda = 1.0;
  double tau = 1.0;
  std::uint64_t seed = 0;
  std::size_t latent_dim = 4;
  std::size_t vocab = 16;
  std::size_t n_targets = 4;  // supervised token positions per item
  double feature_noise = 0.05;
  double gradcheck_eps = 1e-5;
  double gradcheck_tol = 1e-4;
  std::vector<std::string> frozen{"vision_encoder", "llm"};

  void validate() const;

  /// Keys mirror the field names, with "connector" as a nested object.
  /// Unknown keys are rejected so typos do not silently fall back.
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SyntheticBatch {
  std::vector<EncoderFeatures> feats;
  std::vector<std::vector<std::size_t>> target_tokens;
  Tensor txt_reps;  // b x d_llm
  // Per-item latent rows (n_tokens x latent_dim) that drive the features,
  // and the pooled latent that drives the text representation.
  std::vector<Tensor> feature_latents;
  std::vector<Tensor> text_latents;

  std::size_t size() const { return feats.size(); }
};

FrozenModel make_frozen_model(const TrainConfig& cfg);

/// Deterministic in (seed, b, cfg). Item i's text representation is
/// mean_t(latent_i[t]) * text_encoder, the same latent that generates its
/// features, so the pairing is learnable.
SyntheticBatch synth_batch(std::uint64_t seed, std::size_t b,
                           const TrainConfig& cfg, const FrozenModel& frozen);
SyntheticBatch synth_batch(std::uint64_t seed, std::size_t b,
                           const TrainConfig& cfg);

struct LossTerms {
  double total = 0.0;
  double generation = 0.0;
  double creg = 0.0;
};

/// Loss of the full composed objective and, when `grad` is non-null, its
/// gradient with respect to the flattened parameters.
LossTerms stage1_loss(const GateMixerParams& params, const SyntheticBatch& batch,
                      const FrozenModel& frozen, const TrainConfig& cfg,
                      std::vector<double>* grad = nullptr);

/// The same objective as a flat-vector function, for finite_diff_check.
Objective stage1_objective_fn(const GateMixerParams& shape_of,
                              const SyntheticBatch& batch,
                              const FrozenModel& frozen,
                              const TrainConfig& cfg);

struct OptimizerState {
  std::size_t step = 0;
};

struct StepResult {
  double loss = 0.0;
  GateMixerParams params;
  OptimizerState state;
};

/// One plain gradient-descent step: params - lr * grad.
StepResult train_step(const GateMixerParams& params, const SyntheticBatch& batch,
                      const OptimizerState& state, const FrozenModel& frozen,
                      const TrainConfig& cfg);

struct TrainingReport {
  std::vector<double> curve;  // loss before each step
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double gradcheck_max_rel_err = 0.0;
  double wall_time_s = 0.0;
  std::size_t steps = 0;

  /// The JSON form omits wall time unless asked, so reports from identical
  /// runs are byte-identical.
  nlohmann::json to_json(bool include_timing = false) const;
};

struct TrainingRun {
  TrainingReport report;
  GateMixerParams initial_params;
  GateMixerParams params;
  FrozenModel frozen_before;
  FrozenModel frozen_after;
};

TrainingRun train_stage1(const TrainConfig& cfg);

/// Max gradient-check error of the composed objective for one seed.
double gradcheck_stage1(const TrainConfig& cfg, std::uint64_t seed);

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

/// Finite-difference checks of every differentiable op, the connector, each
/// loss term and the composed objective, all from one seed.
std::vector<GradCheckEntry> gradcheck_suite(const TrainConfig& cfg,
                                            std::uint64_t seed);

/// Validates a later-stage fine-tuning config (batch size, peak learning
/// rate, schedule, warm-up, weight decay, epochs, optimizer, precision,
/// sharding, trainable modules). These are descriptive only and never run.
/// Returns the normalized config.
nlohmann::json validate_stage_config(const nlohmann::json& j);

}  // namespace verimix

#endif  // VERIMIX_ALIGN_TRAINER_HPP_
