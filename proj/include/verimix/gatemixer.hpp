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

#ifndef VERIMIX_GATEMIXER_HPP_
#define VERIMIX_GATEMIXER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "verimix/graph.hpp"
#include "verimix/tensor.hpp"

namespace verimix {

/// Connector dimensions. Defaults are the desk-scale configuration; the
/// production encoder shapes are 729 tokens, 1152 ViT and 5760 CNN channels.
struct ConnectorConfig {
  std::size_t n_tokens = 9;
  std::size_t d_v = 12;
  std::size_t d_c = 20;
  std::size_t d = 8;
  std::size_t d_llm = 8;
  std::size_t n_prefix = 24;

  void validate() const;
  std::size_t output_rows() const { return n_prefix + n_tokens; }
  bool operator==(const ConnectorConfig&) const = default;

  static ConnectorConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Per-token features from the two vision encoders.
struct EncoderFeatures {
  Tensor v_v;  // n_tokens x d_v
  Tensor v_c;  // n_tokens x d_c
};

/// Learnable connector parameters, in checkpoint order.
struct GateMixerParams {
  ConnectorConfig cfg;
  Tensor w1_v;    // d_v x d
  Tensor w1_c;    // d_c x d
  Tensor w_g;     // d x 2d, applied to the row [h_v ; h_c]
  Tensor b_g;     // d
  Tensor h_p;     // n_prefix x d
  Tensor w2;      // d x d_llm, no bias

  static constexpr std::size_t kNumBlocks = 6;

  std::vector<Tensor*> blocks();
  std::vector<const Tensor*> blocks() const;
  std::size_t num_values() const;

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  void validate() const;
};

struct MixOutput {
  Tensor h_v;
  Tensor h_c;
  Tensor alpha;   // gate, strictly inside (0, 1)
  Tensor h;       // (1 - alpha) * h_v + alpha * h_c
  Tensor h_img0;  // (n_prefix + n_tokens) x d_llm
};

/// Graph handles for the parameter leaves of one recorded forward pass.
struct ParamVars {
  Var w1_v, w1_c, w_g, b_g, h_p, w2;
  std::vector<Var> all() const { return {w1_v, w1_c, w_g, b_g, h_p, w2}; }
};

/// Graph handles for the intermediate values of one forward pass.
struct MixVars {
  Var h_v, h_c, alpha, h, h_img0;
};

/// Scaled-uniform init, bound 1/sqrt(fan_in) per block; b_g is zero. The
/// fan-in of h_p is taken to be d.
GateMixerParams init_params(const ConnectorConfig& cfg, std::uint64_t seed);

/// Gate attention: alpha = sigmoid([h_v ; h_c] W_g^T + b_g) per token row,
/// h = (1 - alpha) * h_v + alpha * h_c.
struct GateResult {
  Tensor alpha;
  Tensor h;
};
GateResult gate_mix(const Tensor& h_v, const Tensor& h_c, const Tensor& w_g,
                    const Tensor& b_g);

MixOutput forward(const EncoderFeatures& feats, const GateMixerParams& params);

/// Registers the parameters as graph leaves (requires_grad on).
ParamVars register_params(Graph& g, const GateMixerParams& params);

/// Records the gate on an existing graph.
std::pair<Var, Var> gate_mix(Graph& g, Var h_v, Var h_c, Var w_g, Var b_g);

/// Records a full forward pass on an existing graph.
MixVars forward(Graph& g, const EncoderFeatures& feats, const ParamVars& p);

void check_features(const EncoderFeatures& feats, const ConnectorConfig& cfg);

// Checkpoint file (little-endian):
//   8 bytes  magic "VMXGMIX1"
//   6 x u64  n_tokens, d_v, d_c, d, d_llm, n_prefix
//   f64 blocks w1_v, w1_c, w_g, b_g, h_p, w2 (row-major, field order)
void save_checkpoint(const GateMixerParams& params, const std::string& path);
GateMixerParams load_checkpoint(const std::string& path);

std::vector<unsigned char> encode_checkpoint(const GateMixerParams& params);
GateMixerParams decode_checkpoint(std::span<const unsigned char> bytes);

}  // namespace verimix

#endif  // VERIMIX_GATEMIXER_HPP_
