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

#include <functional>

#include "verimix/align_trainer.hpp"
#include "verimix/graph.hpp"
#include "verimix/rng.hpp"

namespace verimix {

namespace {

using OpFn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Checks x -> sum(R * op(x)) for a fixed random R, so every output entry
// contributes to the gradient with a distinct weight.
double check_op(const std::vector<Shape>& shapes, const OpFn& op, Rng& rng,
                double eps, bool positive) {
  std::vector<double> x;
  for (const Shape& s : shapes) {
    for (std::size_t i = 0; i < shape_numel(s); ++i) {
      x.push_back(positive ? rng.uniform(0.5, 2.0) : rng.normal());
    }
  }
  auto build = [&](Graph& g, std::span<const double> flat) {
    std::vector<Var> in;
    std::size_t off = 0;
    for (const Shape& s : shapes) {
      const std::size_t n = shape_numel(s);
      in.push_back(g.param(Tensor(s, std::vector<double>(flat.begin() + off,
                                                         flat.begin() + off + n))));
      off += n;
    }
    return std::make_pair(in, op(g, in));
  };
  Tensor weights;
  {
    Graph g;
    const Shape out = g.value(build(g, x).second).shape;
    weights = Tensor::normal(out, 1.0, rng);
  }
  const Objective f = [&](std::span<const double> flat, std::span<double> grad) {
    Graph g;
    auto [in, y] = build(g, flat);
    const Var loss = g.sum(g.mul(y, g.constant(weights)));
    if (!grad.empty()) {
      g.backward(loss);
      std::size_t off = 0;
      for (Var v : in) {
        const auto& gv = g.grad(v);
        std::copy(gv.begin(), gv.end(), grad.begin() + off);
        off += gv.size();
      }
    }
    return g.value(loss).item();
  };
  return finite_diff_check(f, x, eps);
}

}  // namespace

std::vector<GradCheckEntry> gradcheck_suite(const TrainConfig& cfg,
                                            std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const double eps = cfg.gradcheck_eps;
  const std::size_t n = 3, m = 4, k = 5;
  std::vector<GradCheckEntry> out;
  auto add = [&](const char* name, const std::vector<Shape>& shapes, OpFn op,
                 bool positive = false) {
    out.push_back({name, check_op(shapes, op, rng, eps, positive)});
  };
  add("matmul", {{n, m}, {m, k}},
      [](Graph& g, const auto& v) { return g.matmul(v[0], v[1]); });
  add("transpose", {{n, m}}, [](Graph& g, const auto& v) { return g.transpose(v[0]); });
  add("add", {{n, m}, {n, m}}, [](Graph& g, const auto& v) { return g.add(v[0], v[1]); });
  add("sub", {{n, m}, {n, m}}, [](Graph& g, const auto& v) { return g.sub(v[0], v[1]); });
  add("mul", {{n, m}, {n, m}}, [](Graph& g, const auto& v) { return g.mul(v[0], v[1]); });
  add("add_row", {{n, m}, {m}},
      [](Graph& g, const auto& v) { return g.add_row(v[0], v[1]); });
  add("scale", {{n, m}}, [](Graph& g, const auto& v) { return g.scale(v[0], -1.7); });
  add("sigmoid", {{n, m}}, [](Graph& g, const auto& v) { return g.sigmoid(v[0]); });
  add("exp", {{n, m}}, [](Graph& g, const auto& v) { return g.exp(v[0]); });
  add("log", {{n, m}}, [](Graph& g, const auto& v) { return g.log(v[0]); }, true);
  add("blend", {{n, m}, {n, m}, {n, m}}, [](Graph& g, const auto& v) {
    return g.blend(v[0], v[1], g.sigmoid(v[2]));
  });
  add("mean_pool", {{n, m}}, [](Graph& g, const auto& v) { return g.mean_pool(v[0]); });
  add("mean", {{n, m}}, [](Graph& g, const auto& v) { return g.mean(v[0]); });
  add("sum_rows", {{n, m}}, [](Graph& g, const auto& v) { return g.sum_rows(v[0]); });
  add("concat_cols", {{n, m}, {n, k}},
      [](Graph& g, const auto& v) { return g.concat_cols(v[0], v[1]); });
  add("concat_rows", {{n, m}, {k, m}},
      [](Graph& g, const auto& v) { return g.concat_rows(v[0], v[1]); });
  add("slice_rows", {{k, m}},
      [](Graph& g, const auto& v) { return g.slice_rows(v[0], 1, 4); });
  add("normalize_rows", {{n, m}},
      [](Graph& g, const auto& v) { return g.normalize_rows(v[0]); });
  add("diag", {{m, m}}, [](Graph& g, const auto& v) { return g.diag(v[0]); });
  add("log_softmax_rows", {{n, k}},
      [](Graph& g, const auto& v) { return g.log_softmax_rows(v[0]); });
  add("pick", {{n, k}}, [](Graph& g, const auto& v) { return g.pick(v[0], {4, 0, 2}); });

  const ConnectorConfig& c = cfg.connector;
  add("gate_mix", {{c.n_tokens, c.d}, {c.n_tokens, c.d}, {c.d, 2 * c.d}, {c.d}},
      [](Graph& g, const auto& v) {
        auto [alpha, h] = gate_mix(g, v[0], v[1], v[2], v[3]);
        return g.add(h, alpha);
      });
  add("similarity_exp_cosine", {{n, m}, {n, m}}, [&](Graph& g, const auto& v) {
    return similarity_matrix(g, v[0], v[1], SimilarityMode::kExpCosine, cfg.tau);
  });
  add("creg", {{n, n}}, [](Graph& g, const auto& v) { return creg_loss(g, v[0]); }, true);
  add("generation", {{n, k}}, [](Graph& g, const auto& v) {
    return generation_loss(g, v[0], {1, 4, 0});
  });

  // Full connector forward with respect to every parameter block.
  {
    const GateMixerParams p0 = init_params(c, seed);
    const FrozenModel frozen = make_frozen_model(cfg);
    const SyntheticBatch batch = synth_batch(seed, 1, cfg, frozen);
    const Tensor weights =
        Tensor::normal({c.output_rows(), c.d_llm}, 1.0, rng);
    const Objective f = [&](std::span<const double> x, std::span<double> grad) {
      GateMixerParams p = p0;
      p.unflatten(x);
      Graph g;
      const ParamVars pv = register_params(g, p);
      const MixVars mv = forward(g, batch.feats[0], pv);
      const Var loss = g.sum(g.mul(mv.h_img0, g.constant(weights)));
      if (!grad.empty()) {
        g.backward(loss);
        std::size_t off = 0;
        for (Var v : pv.all()) {
          const auto& gv = g.grad(v);
          std::copy(gv.begin(), gv.end(), grad.begin() + off);
          off += gv.size();
        }
      }
      return g.value(loss).item();
    };
    out.push_back({"gatemixer_forward", finite_diff_check(f, p0.flatten(), eps)});
  }
  out.push_back({"stage1_objective", gradcheck_stage1(cfg, seed)});
  return out;
}

}  // namespace verimix
