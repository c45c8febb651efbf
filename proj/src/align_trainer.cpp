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

#include "verimix/align_trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "json_util.hpp"
#include "verimix/error.hpp"
#include "verimix/rng.hpp"

namespace verimix {

using nlohmann::json;

namespace {

// Seed offsets keep the frozen world, the data and the parameter init on
// independent streams derived from one user seed.
constexpr std::uint64_t kWorldStream = 0x5eed0001;
constexpr std::uint64_t kDataStream = 0x5eed0002;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed * 0x9E3779B97F4A7C15ULL + stream;
}

bool is_numeric_blowup(ErrorCode c) {
  return c == ErrorCode::kInvalidSimilarity || c == ErrorCode::kNonFinite ||
         c == ErrorCode::kDegenerateVector;
}

double inv_sqrt(std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

}  // namespace

void TrainConfig::validate() const {
  connector.validate();
  if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (!(lr >= 0.0)) throw Error(ErrorCode::kConfig, "lr must be >= 0");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kConfig, "lambda must be >= 0");
  if (!(tau > 0.0)) throw Error(ErrorCode::kConfig, "tau must be > 0");
  if (latent_dim < 1 || vocab < 2) {
    throw Error(ErrorCode::kConfig, "latent_dim >= 1 and vocab >= 2 required");
  }
  if (n_targets < 1 || n_targets > connector.n_tokens) {
    throw Error(ErrorCode::kConfig, "n_targets must lie in [1, n_tokens]");
  }
  const std::set<std::string> frozen_set(frozen.begin(), frozen.end());
  if (frozen_set.count("gatemixer")) {
    throw Error(ErrorCode::kConfig,
                "the connector is the only trainable module in this stage and "
                "cannot be frozen");
  }
  if (frozen_set != std::set<std::string>{"vision_encoder", "llm"}) {
    throw Error(ErrorCode::kConfig,
                "frozen modules must be exactly {vision_encoder, llm}");
  }
}

TrainConfig TrainConfig::from_json(const json& j) {
  const std::string what = "training config";
  detail::check_keys(j,
                     {"connector", "steps", "batch_size", "lr", "lambda", "tau",
                      "seed", "latent_dim", "vocab", "n_targets",
                      "feature_noise", "gradcheck_eps", "gradcheck_tol",
                      "frozen"},
                     what);
  TrainConfig c;
  if (j.contains("connector")) c.connector = ConnectorConfig::from_json(j.at("connector"));
  detail::read_key(j, "steps", c.steps, what);
  detail::read_key(j, "batch_size", c.batch_size, what);
  detail::read_key(j, "lr", c.lr, what);
  detail::read_key(j, "lambda", c.lambda, what);
  detail::read_key(j, "tau", c.tau, what);
  detail::read_key(j, "seed", c.seed, what);
  detail::read_key(j, "latent_dim", c.latent_dim, what);
  detail::read_key(j, "vocab", c.vocab, what);
  detail::read_key(j, "n_targets", c.n_targets, what);
  detail::read_key(j, "feature_noise", c.feature_noise, what);
  detail::read_key(j, "gradcheck_eps", c.gradcheck_eps, what);
  detail::read_key(j, "gradcheck_tol", c.gradcheck_tol, what);
  detail::read_key(j, "frozen", c.frozen, what);
  c.validate();
  return c;
}

json TrainConfig::to_json() const {
  return json{{"connector", connector.to_json()},
              {"steps", steps},
              {"batch_size", batch_size},
              {"lr", lr},
              {"lambda", lambda},
              {"tau", tau},
              {"seed", seed},
              {"latent_dim", latent_dim},
              {"vocab", vocab},
              {"n_targets", n_targets},
              {"feature_noise", feature_noise},
              {"gradcheck_eps", gradcheck_eps},
              {"gradcheck_tol", gradcheck_tol},
              {"frozen", frozen}};
}

FrozenModel make_frozen_model(const TrainConfig& cfg) {
  const ConnectorConfig& c = cfg.connector;
  Rng rng(mix_seed(cfg.seed, kWorldStream));
  const std::size_t k = cfg.latent_dim;
  FrozenModel m;
  m.encoder_v = Tensor::normal({k, c.d_v}, inv_sqrt(k), rng);
  m.encoder_c = Tensor::normal({k, c.d_c}, inv_sqrt(k), rng);
  m.text_encoder = Tensor::normal({k, c.d_llm}, inv_sqrt(k), rng);
  m.teacher = Tensor::normal({k, c.d_llm}, inv_sqrt(k), rng);
  m.llm_mix = Tensor::normal({c.d_llm, c.d_llm}, inv_sqrt(c.d_llm), rng);
  m.readout = Tensor::normal({c.d_llm, cfg.vocab}, inv_sqrt(c.d_llm), rng);
  return m;
}

SyntheticBatch synth_batch(std::uint64_t seed, std::size_t b,
                           const TrainConfig& cfg, const FrozenModel& frozen) {
  if (b < 1) throw Error(ErrorCode::kConfig, "batch size must be >= 1");
  const ConnectorConfig& c = cfg.connector;
  Rng rng(mix_seed(seed, kDataStream));
  const std::size_t n = c.n_tokens;
  const std::size_t first_target = n - cfg.n_targets;
  // Logit map the targets are read off: teacher -> llm_mix -> readout.
  const Tensor target_map =
      matmul(matmul(frozen.teacher, frozen.llm_mix), frozen.readout);

  SyntheticBatch batch;
  batch.txt_reps = Tensor::zeros({b, c.d_llm});
  for (std::size_t i = 0; i < b; ++i) {
    const Tensor latent = Tensor::normal({n, cfg.latent_dim}, 1.0, rng);
    EncoderFeatures f;
    f.v_v = add(matmul(latent, frozen.encoder_v),
                Tensor::normal({n, c.d_v}, cfg.feature_noise, rng));
    f.v_c = add(matmul(latent, frozen.encoder_c),
                Tensor::normal({n, c.d_c}, cfg.feature_noise, rng));

    const Tensor logits =
        matmul(slice_rows(latent, first_target, n), target_map);
    std::vector<std::size_t> targets(cfg.n_targets);
    for (std::size_t t = 0; t < cfg.n_targets; ++t) {
      const auto row = logits.row(t);
      targets[t] = static_cast<std::size_t>(
          std::max_element(row.begin(), row.end()) - row.begin());
    }

    const Tensor pooled = mean_pool(latent);
    const Tensor txt = matmul(Tensor({1, cfg.latent_dim}, pooled.data),
                              frozen.text_encoder);
    std::copy(txt.data.begin(), txt.data.end(),
              batch.txt_reps.data.begin() + i * c.d_llm);

    batch.feats.push_back(std::move(f));
    batch.target_tokens.push_back(std::move(targets));
    batch.feature_latents.push_back(latent);
    batch.text_latents.push_back(pooled);
  }
  return batch;
}

SyntheticBatch synth_batch(std::uint64_t seed, std::size_t b,
                           const TrainConfig& cfg) {
  return synth_batch(seed, b, cfg, make_frozen_model(cfg));
}

LossTerms stage1_loss(const GateMixerParams& params, const SyntheticBatch& batch,
                      const FrozenModel& frozen, const TrainConfig& cfg,
                      std::vector<double>* grad) {
  params.validate();
  const ConnectorConfig& c = params.cfg;
  const std::size_t rows = c.output_rows();
  const std::size_t b = batch.size();

  Graph g;
  const ParamVars p = register_params(g, params);
  const Var llm_mix = g.constant(frozen.llm_mix);
  const Var readout = g.constant(frozen.readout);

  Var gen_sum{}, img{};
  for (std::size_t i = 0; i < b; ++i) {
    check_features(batch.feats[i], c);
    const MixVars mv = forward(g, batch.feats[i], p);
    const Var hidden = g.matmul(mv.h_img0, llm_mix);
    const Var pooled = g.mean_pool(hidden);
    const Var logits =
        g.matmul(g.slice_rows(hidden, rows - cfg.n_targets, rows), readout);
    const Var gen_i = generation_loss(g, logits, batch.target_tokens[i]);
    gen_sum = i == 0 ? gen_i : g.add(gen_sum, gen_i);
    img = i == 0 ? g.concat_rows(pooled, pooled) : g.concat_rows(img, pooled);
  }
  // The first concat duplicated item 0 to get a matrix; drop the copy.
  img = g.slice_rows(img, 1, b + 1);

  const Var gen = g.scale(gen_sum, 1.0 / static_cast<double>(b));
  const Var s = similarity_matrix(g, img, g.constant(batch.txt_reps),
                                  SimilarityMode::kExpCosine, cfg.tau);
  const Var creg = creg_loss(g, s);
  const Var total = stage1_objective(g, gen, creg, cfg.lambda);

  LossTerms terms{g.value(total).item(), g.value(gen).item(),
                  g.value(creg).item()};
  if (grad != nullptr) {
    g.backward(total);
    grad->clear();
    grad->reserve(params.num_values());
    for (Var v : p.all()) {
      const auto& gv = g.grad(v);
      grad->insert(grad->end(), gv.begin(), gv.end());
    }
  }
  return terms;
}

Objective stage1_objective_fn(const GateMixerParams& shape_of,
                              const SyntheticBatch& batch,
                              const FrozenModel& frozen,
                              const TrainConfig& cfg) {
  return [=](std::span<const double> x, std::span<double> grad) {
    GateMixerParams p = shape_of;
    p.unflatten(x);
    if (grad.empty()) return stage1_loss(p, batch, frozen, cfg).total;
    std::vector<double> gv;
    const double v = stage1_loss(p, batch, frozen, cfg, &gv).total;
    std::copy(gv.begin(), gv.end(), grad.begin());
    return v;
  };
}

StepResult train_step(const GateMixerParams& params, const SyntheticBatch& batch,
                      const OptimizerState& state, const FrozenModel& frozen,
                      const TrainConfig& cfg) {
  const std::string where = "at step " + std::to_string(state.step) +
                            " (lr " + std::to_string(cfg.lr) + ", batch " +
                            std::to_string(batch.size()) + ")";
  std::vector<double> grad;
  double loss = 0.0;
  try {
    loss = stage1_loss(params, batch, frozen, cfg, &grad).total;
  } catch (const Error& e) {
    // Overflowed parameters surface as NaN similarities or log of zero
    // before a loss value exists; report them as what they are.
    if (!is_numeric_blowup(e.code())) throw;
    throw Error(ErrorCode::kDivergence,
                "non-finite values " + where + ": " + e.what());
  }
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kDivergence, "non-finite loss " + where);
  }
  StepResult r{loss, params, {state.step + 1}};
  std::vector<double> flat = params.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= cfg.lr * grad[i];
  r.params.unflatten(flat);
  return r;
}

json TrainingReport::to_json(bool include_timing) const {
  json j{{"steps", steps},
         {"initial_loss", initial_loss},
         {"final_loss", final_loss},
         {"gradcheck_max_rel_err", gradcheck_max_rel_err},
         {"curve", curve}};
  if (include_timing) j["wall_time_s"] = wall_time_s;
  return j;
}

double gradcheck_stage1(const TrainConfig& cfg, std::uint64_t seed) {
  TrainConfig c = cfg;
  c.seed = seed;
  c.validate();
  const FrozenModel frozen = make_frozen_model(c);
  const SyntheticBatch batch = synth_batch(seed, c.batch_size, c, frozen);
  const GateMixerParams params = init_params(c.connector, seed);
  const auto x = params.flatten();
  return finite_diff_check(stage1_objective_fn(params, batch, frozen, c), x,
                           c.gradcheck_eps);
}

TrainingRun train_stage1(const TrainConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  TrainingRun run;
  // Training reads the live copy in frozen_after; frozen_before is a
  // snapshot taken before any step, so callers can compare bit for bit.
  run.frozen_before = make_frozen_model(cfg);
  run.frozen_after = run.frozen_before;
  const FrozenModel& frozen = run.frozen_after;
  const SyntheticBatch batch = synth_batch(cfg.seed, cfg.batch_size, cfg, frozen);
  run.initial_params = init_params(cfg.connector, cfg.seed);

  const auto x0 = run.initial_params.flatten();
  run.report.gradcheck_max_rel_err = finite_diff_check(
      stage1_objective_fn(run.initial_params, batch, frozen, cfg), x0,
      cfg.gradcheck_eps);
  if (!(run.report.gradcheck_max_rel_err <= cfg.gradcheck_tol)) {
    throw Error(ErrorCode::kValidation,
                "gradient check at initialization failed: max rel err " +
                    std::to_string(run.report.gradcheck_max_rel_err));
  }

  GateMixerParams params = run.initial_params;
  OptimizerState state;
  run.report.curve.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    StepResult r = train_step(params, batch, state, frozen, cfg);
    run.report.curve.push_back(r.loss);
    params = std::move(r.params);
    state = r.state;
  }
  run.report.steps = cfg.steps;
  run.report.initial_loss = stage1_loss(run.initial_params, batch, frozen, cfg).total;
  try {
    run.report.final_loss =
        cfg.steps == 0 ? run.report.initial_loss
                       : stage1_loss(params, batch, frozen, cfg).total;
  } catch (const Error& e) {
    if (!is_numeric_blowup(e.code())) throw;
    throw Error(ErrorCode::kDivergence, "non-finite values after step " +
                                            std::to_string(cfg.steps) + ": " +
                                            e.what());
  }
  if (!std::isfinite(run.report.final_loss)) {
    throw Error(ErrorCode::kDivergence,
                "non-finite loss after step " + std::to_string(cfg.steps));
  }
  run.params = std::move(params);
  run.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return run;
}

json validate_stage_config(const json& j) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kValidation, "stage config: " + msg);
  };
  if (!j.is_object()) fail("expected a JSON object");
  static const std::set<std::string> known{
      "stage",        "batch_size",  "peak_lr",   "lr_schedule",
      "warmup_ratio", "weight_decay", "epochs",   "optimizer",
      "precision",    "deepspeed",   "trainable_modules", "data_size",
      "dataset"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) fail("unknown key '" + key + "'");
  }
  json out = j;
  try {
    const int stage = j.at("stage").get<int>();
    if (stage < 1 || stage > 3) fail("stage must be 1, 2 or 3");
    if (j.at("batch_size").get<int>() < 1) fail("batch_size must be >= 1");
    if (!(j.at("peak_lr").get<double>() > 0.0)) fail("peak_lr must be > 0");
    const auto sched = j.value("lr_schedule", std::string("cosine"));
    if (sched != "cosine" && sched != "linear" && sched != "constant") {
      fail("lr_schedule must be cosine, linear or constant");
    }
    const double warm = j.value("warmup_ratio", 0.03);
    if (!(warm >= 0.0 && warm < 1.0)) fail("warmup_ratio must lie in [0, 1)");
    if (!(j.value("weight_decay", 0.0) >= 0.0)) fail("weight_decay must be >= 0");
    if (j.value("epochs", 1) < 1) fail("epochs must be >= 1");
    const auto opt = j.value("optimizer", std::string("adamw"));
    if (opt != "adamw" && opt != "sgd") fail("optimizer must be adamw or sgd");
    const auto prec = j.value("precision", std::string("bfloat16"));
    if (prec != "bfloat16" && prec != "float16" && prec != "float32") {
      fail("precision must be bfloat16, float16 or float32");
    }
    const auto ds = j.value("deepspeed", std::string("zero2"));
    if (ds != "none" && ds != "zero1" && ds != "zero2" && ds != "zero3") {
      fail("deepspeed must be none or zero1..zero3");
    }
    auto mods = j.at("trainable_modules").get<std::vector<std::string>>();
    std::sort(mods.begin(), mods.end());
    mods.erase(std::unique(mods.begin(), mods.end()), mods.end());
    static const std::vector<std::vector<std::string>> expected{
        {"gatemixer"}, {"gatemixer", "llm"}, {"llm"}};
    if (mods != expected[static_cast<std::size_t>(stage - 1)]) {
      fail("stage " + std::to_string(stage) +
           " trains the wrong module set (the vision encoder is always "
           "frozen)");
    }
    out["lr_schedule"] = sched;
    out["warmup_ratio"] = warm;
    out["weight_decay"] = j.value("weight_decay", 0.0);
    out["epochs"] = j.value("epochs", 1);
    out["optimizer"] = opt;
    out["precision"] = prec;
    out["deepspeed"] = ds;
    out["trainable_modules"] = mods;
    out["executable"] = stage == 1;
  } catch (const json::exception& e) {
    fail(e.what());
  }
  return out;
}

}  // namespace verimix
