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

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "verimix/align_trainer.hpp"
#include "verimix/error.hpp"

using namespace verimix;
using nlohmann::json;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.steps = 20;
  return c;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

bool frozen_equal(const FrozenModel& a, const FrozenModel& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (!bitwise_equal(*ta[i], *tb[i])) return false;
  return true;
}

json read_fixture(const std::string& name) {
  std::ifstream in(std::string(VMX_FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  return json::parse(in);
}

}  // namespace

TEST_CASE("synthetic batches are deterministic") {
  const TrainConfig cfg = small_config();
  const SyntheticBatch a = synth_batch(5, 4, cfg);
  const SyntheticBatch b = synth_batch(5, 4, cfg);
  const SyntheticBatch c = synth_batch(6, 4, cfg);
  REQUIRE(a.size() == 4);
  CHECK(bitwise_equal(a.txt_reps, b.txt_reps));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(bitwise_equal(a.feats[i].v_v, b.feats[i].v_v));
    CHECK(bitwise_equal(a.feats[i].v_c, b.feats[i].v_c));
    CHECK(a.target_tokens[i] == b.target_tokens[i]);
  }
  CHECK_FALSE(bitwise_equal(a.txt_reps, c.txt_reps));

  const SyntheticBatch one = synth_batch(5, 1, cfg);
  CHECK(one.size() == 1);
  CHECK(one.txt_reps.shape == Shape{1, cfg.connector.d_llm});
  CHECK(one.feats[0].v_v.shape == Shape{cfg.connector.n_tokens, cfg.connector.d_v});
  CHECK(one.target_tokens[0].size() == cfg.n_targets);
  CHECK_THROWS_AS(synth_batch(5, 0, cfg), Error);
}

TEST_CASE("features and text share one latent per item") {
  TrainConfig cfg;
  const FrozenModel frozen = make_frozen_model(cfg);
  const std::size_t n_items = 1000;
  const SyntheticBatch batch = synth_batch(77, n_items, cfg, frozen);
  const std::size_t k = cfg.latent_dim, d = cfg.connector.d_llm;

  // Recover the text latent from txt_rep by least squares against the text
  // encoder: z = txt * T^T (T T^T)^-1, solved by Gaussian elimination.
  const Tensor& enc = frozen.text_encoder;  // k x d
  std::vector<double> gram(k * k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t j = 0; j < d; ++j) gram[a * k + b] += enc.at(a, j) * enc.at(b, j);

  std::vector<double> feat_lat, text_lat, other_lat;
  for (std::size_t i = 0; i < n_items; ++i) {
    // Pool the latent that produced the features.
    std::vector<double> pooled(k, 0.0);
    const Tensor& lat = batch.feature_latents[i];
    for (std::size_t t = 0; t < lat.rows(); ++t)
      for (std::size_t a = 0; a < k; ++a) pooled[a] += lat.at(t, a) / lat.rows();

    std::vector<double> m = gram, rhs(k, 0.0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t j = 0; j < d; ++j) rhs[a] += batch.txt_reps.at(i, j) * enc.at(a, j);
    for (std::size_t col = 0; col < k; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < k; ++r)
        if (std::abs(m[r * k + col]) > std::abs(m[piv * k + col])) piv = r;
      for (std::size_t c = 0; c < k; ++c) std::swap(m[col * k + c], m[piv * k + c]);
      std::swap(rhs[col], rhs[piv]);
      for (std::size_t r = 0; r < k; ++r) {
        if (r == col) continue;
        const double f = m[r * k + col] / m[col * k + col];
        for (std::size_t c = 0; c < k; ++c) m[r * k + c] -= f * m[col * k + c];
        rhs[r] -= f * rhs[col];
      }
    }
    for (std::size_t a = 0; a < k; ++a) {
      const double z = rhs[a] / m[a * k + a];
      CHECK(std::abs(z - pooled[a]) <= 1e-9);
      feat_lat.push_back(pooled[a]);
      text_lat.push_back(z);
    }
  }
  // Pair item i's feature latent with item i+1's text latent.
  for (std::size_t i = 0; i < n_items; ++i)
    for (std::size_t a = 0; a < k; ++a)
      other_lat.push_back(text_lat[((i + 1) % n_items) * k + a]);

  CHECK(pearson(feat_lat, text_lat) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(pearson(feat_lat, other_lat)) < 0.1);
}

TEST_CASE("a zero learning rate leaves parameters unchanged") {
  TrainConfig cfg = small_config();
  cfg.lr = 0.0;
  const FrozenModel frozen = make_frozen_model(cfg);
  const SyntheticBatch batch = synth_batch(0, cfg.batch_size, cfg, frozen);
  const GateMixerParams p = init_params(cfg.connector, 0);
  const StepResult r = train_step(p, batch, {}, frozen, cfg);
  CHECK(r.params.flatten() == p.flatten());
  CHECK(r.state.step == 1);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == stage1_loss(p, batch, frozen, cfg).total);
}

TEST_CASE("the update is params minus lr times grad") {
  TrainConfig cfg = small_config();
  cfg.lr = 0.05;
  const FrozenModel frozen = make_frozen_model(cfg);
  const SyntheticBatch batch = synth_batch(1, cfg.batch_size, cfg, frozen);
  const GateMixerParams p = init_params(cfg.connector, 1);
  std::vector<double> grad;
  const double before = stage1_loss(p, batch, frozen, cfg, &grad).total;
  const StepResult r = train_step(p, batch, {}, frozen, cfg);
  const auto x0 = p.flatten(), x1 = r.params.flatten();
  REQUIRE(grad.size() == x0.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i)
    worst = std::max(worst, std::abs(x1[i] - (x0[i] - cfg.lr * grad[i])));
  CHECK(worst <= 1e-12);
  CHECK(r.loss == before);

  // A small step along the negative gradient lowers the objective.
  TrainConfig tiny = cfg;
  tiny.lr = 1e-3;
  const StepResult small = train_step(p, batch, {}, frozen, tiny);
  CHECK(stage1_loss(small.params, batch, frozen, cfg).total < before);
}

TEST_CASE("loss terms combine with lambda") {
  TrainConfig cfg = small_config();
  const FrozenModel frozen = make_frozen_model(cfg);
  const SyntheticBatch batch = synth_batch(2, cfg.batch_size, cfg, frozen);
  const GateMixerParams p = init_params(cfg.connector, 2);
  cfg.lambda = 0.25;
  const LossTerms t = stage1_loss(p, batch, frozen, cfg);
  CHECK(std::abs(t.total - (t.generation + 0.25 * t.creg)) <= 1e-12);
  CHECK(t.creg >= 0.0);
  CHECK(t.generation > 0.0);
}

TEST_CASE("non-finite loss is a divergence error") {
  TrainConfig cfg = small_config();
  const FrozenModel frozen = make_frozen_model(cfg);
  const SyntheticBatch batch = synth_batch(0, cfg.batch_size, cfg, frozen);
  GateMixerParams p = init_params(cfg.connector, 0);
  p.w2.data[0] = std::numeric_limits<double>::infinity();
  try {
    train_step(p, batch, OptimizerState{7}, frozen, cfg);
    FAIL("expected a divergence error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDivergence);
    CHECK(std::string(e.what()).find("step 7") != std::string::npos);
  }

  TrainConfig wild = small_config();
  wild.lr = 1e300;
  wild.steps = 5;
  try {
    train_stage1(wild);
    FAIL("expected a divergence error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDivergence);
  }
}

TEST_CASE("zero steps is a no-op run") {
  TrainConfig cfg = small_config();
  cfg.steps = 0;
  const TrainingRun run = train_stage1(cfg);
  CHECK(run.report.curve.empty());
  CHECK(run.report.initial_loss == run.report.final_loss);
  CHECK(run.params.flatten() == run.initial_params.flatten());
}

TEST_CASE("default desk run") {
  const TrainConfig cfg;
  CHECK(cfg.connector.d == 8);
  CHECK(cfg.batch_size == 4);
  CHECK(cfg.steps == 300);
  const TrainingRun a = train_stage1(cfg);
  CHECK(a.report.curve.size() == 300);
  for (double v : a.report.curve) CHECK(std::isfinite(v));
  CHECK(a.report.gradcheck_max_rel_err <= 1e-4);
  CHECK(a.report.final_loss <= 0.5 * a.report.initial_loss);
  CHECK(frozen_equal(a.frozen_before, a.frozen_after));
  CHECK(frozen_equal(a.frozen_before, make_frozen_model(cfg)));
  CHECK(a.params.flatten() != a.initial_params.flatten());

  const TrainingRun b = train_stage1(cfg);
  CHECK(a.report.curve == b.report.curve);
  CHECK(a.params.flatten() == b.params.flatten());
  CHECK(a.report.to_json().dump() == b.report.to_json().dump());
  CHECK_FALSE(a.report.to_json().contains("wall_time_s"));
  CHECK(a.report.to_json(true).contains("wall_time_s"));
}

TEST_CASE("gradient check of the composed objective") {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    CHECK(gradcheck_stage1(TrainConfig{}, seed) <= 1e-4);
}

TEST_CASE("training config validation") {
  TrainConfig c;
  c.frozen = {"vision_encoder", "llm", "gatemixer"};
  CHECK_THROWS_AS(c.validate(), Error);
  c.frozen = {"vision_encoder"};
  CHECK_THROWS_AS(c.validate(), Error);
  c = TrainConfig{};
  c.n_targets = c.connector.n_tokens + 1;
  CHECK_THROWS_AS(c.validate(), Error);

  const TrainConfig parsed = TrainConfig::from_json(json{{"steps", 12}, {"lr", 0.1}});
  CHECK(parsed.steps == 12);
  CHECK(parsed.lr == 0.1);
  CHECK(TrainConfig::from_json(parsed.to_json()).to_json() == parsed.to_json());
  try {
    TrainConfig::from_json(json{{"stpes", 12}});
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
}

TEST_CASE("later-stage configs validate but are not executable") {
  const json s2 = validate_stage_config(read_fixture("stage2_config.json"));
  CHECK(s2.at("executable") == false);
  CHECK(s2.at("batch_size") == 256);
  CHECK(s2.at("peak_lr") == 2e-5);
  const json s3 = validate_stage_config(read_fixture("stage3_config.json"));
  CHECK(s3.at("trainable_modules") == json{"llm"});
  CHECK(s3.at("epochs") == 3);

  json bad = read_fixture("stage2_config.json");
  bad["trainable_modules"] = {"gatemixer", "llm", "vision_encoder"};
  try {
    validate_stage_config(bad);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidation);
  }
  bad = read_fixture("stage3_config.json");
  bad["peak_lr"] = -1.0;
  CHECK_THROWS_AS(validate_stage_config(bad), Error);
  bad = read_fixture("stage3_config.json");
  bad["learning_rate"] = 1e-5;
  CHECK_THROWS_AS(validate_stage_config(bad), Error);

  const json s1 = validate_stage_config(
      json{{"stage", 1}, {"batch_size", 4}, {"peak_lr", 0.5}, {"trainable_modules", {"gatemixer"}}});
  CHECK(s1.at("executable") == true);
}
