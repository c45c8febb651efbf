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

#include "verimix/gatemixer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json_util.hpp"
#include "verimix/error.hpp"
#include "verimix/rng.hpp"

namespace verimix {

namespace {

constexpr char kMagic[8] = {'V', 'M', 'X', 'G', 'M', 'I', 'X', '1'};
constexpr std::size_t kHeaderBytes = 8 + 6 * 8;

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const unsigned char> in, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[off + i]} << (8 * i);
  return v;
}

Shape expected_shape(const ConnectorConfig& c, std::size_t block) {
  switch (block) {
    case 0: return {c.d_v, c.d};
    case 1: return {c.d_c, c.d};
    case 2: return {c.d, 2 * c.d};
    case 3: return {c.d};
    case 4: return {c.n_prefix, c.d};
    default: return {c.d, c.d_llm};
  }
}

const char* block_name(std::size_t block) {
  static const char* names[] = {"w1_v", "w1_c", "w_g", "b_g", "h_p", "w2"};
  return names[block];
}

}  // namespace

void ConnectorConfig::validate() const {
  const std::size_t dims[] = {n_tokens, d_v, d_c, d, d_llm, n_prefix};
  for (std::size_t v : dims) {
    if (v < 1) {
      throw Error(ErrorCode::kConfig, "connector dimensions must all be >= 1");
    }
  }
}

ConnectorConfig ConnectorConfig::from_json(const nlohmann::json& j) {
  const std::string what = "connector";
  detail::check_keys(j, {"n_tokens", "d_v", "d_c", "d", "d_llm", "n_prefix"},
                     what);
  ConnectorConfig c;
  detail::read_key(j, "n_tokens", c.n_tokens, what);
  detail::read_key(j, "d_v", c.d_v, what);
  detail::read_key(j, "d_c", c.d_c, what);
  detail::read_key(j, "d", c.d, what);
  detail::read_key(j, "d_llm", c.d_llm, what);
  detail::read_key(j, "n_prefix", c.n_prefix, what);
  c.validate();
  return c;
}

nlohmann::json ConnectorConfig::to_json() const {
  return {{"n_tokens", n_tokens}, {"d_v", d_v},     {"d_c", d_c},
          {"d", d},               {"d_llm", d_llm}, {"n_prefix", n_prefix}};
}

std::vector<Tensor*> GateMixerParams::blocks() {
  return {&w1_v, &w1_c, &w_g, &b_g, &h_p, &w2};
}

std::vector<const Tensor*> GateMixerParams::blocks() const {
  return {&w1_v, &w1_c, &w_g, &b_g, &h_p, &w2};
}

std::size_t GateMixerParams::num_values() const {
  std::size_t n = 0;
  for (const Tensor* t : blocks()) n += t->size();
  return n;
}

std::vector<double> GateMixerParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(num_values());
  for (const Tensor* t : blocks()) {
    flat.insert(flat.end(), t->data.begin(), t->data.end());
  }
  return flat;
}

void GateMixerParams::unflatten(std::span<const double> flat) {
  if (flat.size() != num_values()) {
    throw Error(ErrorCode::kDimension,
                "unflatten: expected " + std::to_string(num_values()) +
                    " values, got " + std::to_string(flat.size()));
  }
  std::size_t off = 0;
  for (Tensor* t : blocks()) {
    std::copy_n(flat.begin() + off, t->size(), t->data.begin());
    off += t->size();
  }
}

void GateMixerParams::validate() const {
  cfg.validate();
  const auto bs = blocks();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const Shape want = expected_shape(cfg, i);
    if (bs[i]->shape != want) {
      throw Error(ErrorCode::kDimension,
                  std::string(block_name(i)) + " has shape " +
                      shape_to_string(bs[i]->shape) + ", expected " +
                      shape_to_string(want));
    }
  }
}

GateMixerParams init_params(const ConnectorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  auto bound = [](std::size_t fan_in) {
    return 1.0 / std::sqrt(static_cast<double>(fan_in));
  };
  GateMixerParams p;
  p.cfg = cfg;
  p.w1_v = Tensor::uniform({cfg.d_v, cfg.d}, bound(cfg.d_v), rng);
  p.w1_c = Tensor::uniform({cfg.d_c, cfg.d}, bound(cfg.d_c), rng);
  p.w_g = Tensor::uniform({cfg.d, 2 * cfg.d}, bound(2 * cfg.d), rng);
  p.b_g = Tensor::zeros({cfg.d});
  p.h_p = Tensor::uniform({cfg.n_prefix, cfg.d}, bound(cfg.d), rng);
  p.w2 = Tensor::uniform({cfg.d, cfg.d_llm}, bound(cfg.d), rng);
  for (Tensor* t : p.blocks()) t->requires_grad = true;
  return p;
}

void check_features(const EncoderFeatures& feats, const ConnectorConfig& cfg) {
  const Shape want_v{cfg.n_tokens, cfg.d_v};
  const Shape want_c{cfg.n_tokens, cfg.d_c};
  if (feats.v_v.shape != want_v || feats.v_c.shape != want_c) {
    throw Error(ErrorCode::kDimension,
                "features " + shape_to_string(feats.v_v.shape) + " / " +
                    shape_to_string(feats.v_c.shape) + " do not match " +
                    shape_to_string(want_v) + " / " + shape_to_string(want_c));
  }
}

std::pair<Var, Var> gate_mix(Graph& g, Var h_v, Var h_c, Var w_g, Var b_g) {
  const Tensor& tv = g.value(h_v);
  const Tensor& tc = g.value(h_c);
  const Tensor& tw = g.value(w_g);
  if (tv.rank() != 2 || tv.shape != tc.shape) {
    throw Error(ErrorCode::kDimension,
                "gate_mix: h_v " + shape_to_string(tv.shape) + " vs h_c " +
                    shape_to_string(tc.shape));
  }
  const std::size_t d = tv.shape[1];
  if (tw.shape != Shape{d, 2 * d} || g.value(b_g).shape != Shape{d}) {
    throw Error(ErrorCode::kDimension,
                "gate_mix: W_g " + shape_to_string(tw.shape) + " / b_g " +
                    shape_to_string(g.value(b_g).shape) + " for width " +
                    std::to_string(d));
  }
  const Var cat = g.concat_cols(h_v, h_c);
  const Var pre = g.add_row(g.matmul(cat, g.transpose(w_g)), b_g);
  const Var alpha = g.sigmoid(pre);
  const Var h = g.blend(h_v, h_c, alpha);
  return {alpha, h};
}

GateResult gate_mix(const Tensor& h_v, const Tensor& h_c, const Tensor& w_g,
                    const Tensor& b_g) {
  Graph g;
  auto [alpha, h] = gate_mix(g, g.constant(h_v), g.constant(h_c),
                             g.constant(w_g), g.constant(b_g));
  return {g.value(alpha), g.value(h)};
}

ParamVars register_params(Graph& g, const GateMixerParams& p) {
  return {g.param(p.w1_v), g.param(p.w1_c), g.param(p.w_g),
          g.param(p.b_g),  g.param(p.h_p),  g.param(p.w2)};
}

MixVars forward(Graph& g, const EncoderFeatures& feats, const ParamVars& p) {
  MixVars out;
  out.h_v = g.matmul(g.constant(feats.v_v), p.w1_v);
  out.h_c = g.matmul(g.constant(feats.v_c), p.w1_c);
  auto [alpha, h] = gate_mix(g, out.h_v, out.h_c, p.w_g, p.b_g);
  out.alpha = alpha;
  out.h = h;
  out.h_img0 = g.matmul(g.concat_rows(p.h_p, h), p.w2);
  return out;
}

MixOutput forward(const EncoderFeatures& feats, const GateMixerParams& params) {
  params.validate();
  check_features(feats, params.cfg);
  Graph g;
  const ParamVars p{g.constant(params.w1_v), g.constant(params.w1_c),
                    g.constant(params.w_g),  g.constant(params.b_g),
                    g.constant(params.h_p),  g.constant(params.w2)};
  const MixVars v = forward(g, feats, p);
  return {g.value(v.h_v), g.value(v.h_c), g.value(v.alpha), g.value(v.h),
          g.value(v.h_img0)};
}

std::vector<unsigned char> encode_checkpoint(const GateMixerParams& params) {
  params.validate();
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  const ConnectorConfig& c = params.cfg;
  for (std::size_t v : {c.n_tokens, c.d_v, c.d_c, c.d, c.d_llm, c.n_prefix}) {
    put_u64(out, v);
  }
  for (const Tensor* t : params.blocks()) {
    for (double x : t->data) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

GateMixerParams decode_checkpoint(std::span<const unsigned char> bytes) {
  if (bytes.size() < kHeaderBytes ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kParse, "checkpoint: bad magic or truncated header");
  }
  GateMixerParams p;
  ConnectorConfig& c = p.cfg;
  std::size_t off = 8;
  for (std::size_t* f :
       {&c.n_tokens, &c.d_v, &c.d_c, &c.d, &c.d_llm, &c.n_prefix}) {
    *f = static_cast<std::size_t>(get_u64(bytes, off));
    off += 8;
  }
  c.validate();
  std::size_t need = kHeaderBytes;
  for (std::size_t i = 0; i < GateMixerParams::kNumBlocks; ++i) {
    need += 8 * shape_numel(expected_shape(c, i));
  }
  if (bytes.size() != need) {
    throw Error(ErrorCode::kParse,
                "checkpoint: expected " + std::to_string(need) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  auto bs = p.blocks();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    Shape s = expected_shape(c, i);
    std::vector<double> data(shape_numel(s));
    for (double& x : data) {
      x = std::bit_cast<double>(get_u64(bytes, off));
      off += 8;
    }
    *bs[i] = Tensor(std::move(s), std::move(data), true);
  }
  return p;
}

void save_checkpoint(const GateMixerParams& params, const std::string& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::kIo, "write failed: " + path);
}

GateMixerParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace verimix
