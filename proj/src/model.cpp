// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "reloop/model.hpp"

#include <cmath>

#include "reloop/error.hpp"
#include "reloop/rng.hpp"

namespace reloop {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLR: return "lr";
    case ModelKind::kFM: return "fm";
    case ModelKind::kMLP: return "mlp";
    case ModelKind::kDeepFM: return "deepfm";
    case ModelKind::kDCN: return "dcn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : kAllModelKinds)
    if (to_string(k) == name) return k;
  throw UsageError("unknown model kind '" + std::string(name) + "' (expected lr|fm|mlp|deepfm|dcn)");
}

// ---------------------------------------------------------------------------

std::vector<std::span<double>> ParamTensors::blocks() {
  std::vector<std::span<double>> out;
  out.emplace_back(&bias, 1);
  out.emplace_back(linear);
  out.emplace_back(embeddings);
  for (auto& l : mlp) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  for (auto& c : cross) {
    out.emplace_back(c.weight);
    out.emplace_back(c.bias);
  }
  out.emplace_back(head);
  return out;
}

std::vector<std::span<const double>> ParamTensors::blocks() const {
  auto mutable_blocks = const_cast<ParamTensors*>(this)->blocks();
  return {mutable_blocks.begin(), mutable_blocks.end()};
}

std::size_t ParamTensors::parameter_count() const {
  std::size_t n = 0;
  for (auto b : blocks()) n += b.size();
  return n;
}

bool PredictorParams::has_linear() const {
  return kind == ModelKind::kLR || kind == ModelKind::kFM || kind == ModelKind::kDeepFM;
}

bool PredictorParams::has_mlp() const {
  return kind == ModelKind::kMLP || kind == ModelKind::kDeepFM || kind == ModelKind::kDCN;
}

PredictorGrads PredictorGrads::zeros_like(const PredictorParams& params) {
  PredictorGrads g;
  g.linear.assign(params.linear.size(), 0.0);
  g.embeddings.assign(params.embeddings.size(), 0.0);
  g.mlp = params.mlp;
  for (auto& l : g.mlp) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  g.cross = params.cross;
  for (auto& c : g.cross) {
    std::fill(c.weight.begin(), c.weight.end(), 0.0);
    std::fill(c.bias.begin(), c.bias.end(), 0.0);
  }
  g.head.assign(params.head.size(), 0.0);
  g.touched_mask.assign(params.n_features, 0);
  return g;
}

void PredictorGrads::touch(std::uint64_t row) {
  if (!touched_mask[row]) {
    touched_mask[row] = 1;
    touched_rows.push_back(row);
  }
}

void PredictorGrads::clear(std::uint32_t embed_dim) {
  bias = 0.0;
  for (auto row : touched_rows) {
    if (!linear.empty()) linear[row] = 0.0;
    for (std::uint32_t k = 0; k < embed_dim; ++k) embeddings[row * embed_dim + k] = 0.0;
    touched_mask[row] = 0;
  }
  touched_rows.clear();
  for (auto& l : mlp) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  for (auto& c : cross) {
    std::fill(c.weight.begin(), c.weight.end(), 0.0);
    std::fill(c.bias.begin(), c.bias.end(), 0.0);
  }
  std::fill(head.begin(), head.end(), 0.0);
}

void check_same_shape(const PredictorParams& params, const ParamTensors& other) {
  auto a = params.blocks();
  auto b = other.blocks();
  if (a.size() != b.size()) throw ShapeError("parameter block count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].size() != b[i].size())
      throw ShapeError("parameter block " + std::to_string(i) + " has size " + std::to_string(b[i].size()) +
                       ", expected " + std::to_string(a[i].size()));
}

// ---------------------------------------------------------------------------

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void fill_uniform(std::vector<double>& v, double bound, SplitMix64& rng) {
  for (auto& x : v) x = rng.uniform(-bound, bound);
}

double xavier(double fan_in, double fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

}  // namespace

PredictorParams init_params(ModelKind kind, const FeatureSchema& schema, const ModelHyper& hyper) {
  if (schema.size() == 0) throw UsageError("init: schema has no fields");
  PredictorParams p;
  p.kind = kind;
  p.hyper = hyper;
  p.n_fields = static_cast<std::uint32_t>(schema.size());
  p.n_features = schema.n_features();
  p.schema_digest = schema.digest();
  if (kind == ModelKind::kLR) {
    p.hyper.mlp_widths.clear();
    p.hyper.n_cross_layers = 0;
  } else {
    if (hyper.embed_dim == 0) throw UsageError("init: embed_dim must be positive");
  }
  if (kind == ModelKind::kFM) {
    p.hyper.mlp_widths.clear();
    p.hyper.n_cross_layers = 0;
  }
  if (kind != ModelKind::kDCN) p.hyper.n_cross_layers = 0;
  for (auto w : p.hyper.mlp_widths)
    if (w == 0) throw UsageError("init: MLP widths must be positive");

  SplitMix64 rng(derive_seed(hyper.seed, 0xC0FFEE));
  if (p.has_linear()) p.linear.assign(p.n_features, 0.0);
  if (p.has_embeddings()) {
    p.embeddings.resize(p.n_features * p.embed_dim());
    fill_uniform(p.embeddings, xavier(static_cast<double>(p.n_features), p.embed_dim()), rng);
  }
  std::uint32_t width = p.concat_dim();
  if (p.has_mlp()) {
    for (auto out : p.hyper.mlp_widths) {
      DenseLayer layer;
      layer.in = width;
      layer.out = out;
      layer.weight.resize(std::size_t{out} * width);
      fill_uniform(layer.weight, xavier(width, out), rng);
      layer.bias.assign(out, 0.0);
      p.mlp.push_back(std::move(layer));
      width = out;
    }
  }
  const std::uint32_t d = p.concat_dim();
  for (std::uint32_t l = 0; l < p.hyper.n_cross_layers; ++l) {
    CrossLayer c;
    c.weight.resize(d);
    fill_uniform(c.weight, xavier(d, 1), rng);
    c.bias.assign(d, 0.0);
    p.cross.push_back(std::move(c));
  }
  std::size_t head_in = 0;
  if (kind == ModelKind::kMLP || kind == ModelKind::kDeepFM) {
    head_in = width;
  } else if (kind == ModelKind::kDCN) {
    head_in = d + (p.mlp.empty() ? 0 : width);
  }
  if (head_in > 0) {
    p.head.resize(head_in);
    fill_uniform(p.head, xavier(static_cast<double>(head_in), 1), rng);
  }
  return p;
}

// ---------------------------------------------------------------------------

namespace {

void check_instance(const PredictorParams& p, const EncodedInstance& x) {
  if (x.indices.size() != p.n_fields || x.values.size() != p.n_fields)
    throw ShapeError("instance has " + std::to_string(x.indices.size()) + " fields, model expects " +
                     std::to_string(p.n_fields));
  for (auto idx : x.indices)
    if (idx >= p.n_features)
      throw ShapeError("feature index " + std::to_string(idx) + " outside model range " +
                       std::to_string(p.n_features));
}

// Runs the ReLU tower on `input`, storing activations. Returns the output.
const std::vector<double>& mlp_forward(const PredictorParams& p, const std::vector<double>& input,
                                       ForwardTrace& t) {
  t.pre.resize(p.mlp.size());
  t.act.resize(p.mlp.size());
  const std::vector<double>* in = &input;
  for (std::size_t l = 0; l < p.mlp.size(); ++l) {
    const DenseLayer& layer = p.mlp[l];
    auto& pre = t.pre[l];
    auto& act = t.act[l];
    pre.resize(layer.out);
    act.resize(layer.out);
    for (std::uint32_t o = 0; o < layer.out; ++o) {
      const double* w = layer.weight.data() + std::size_t{o} * layer.in;
      double s = layer.bias[o];
      for (std::uint32_t i = 0; i < layer.in; ++i) s += w[i] * (*in)[i];
      pre[o] = s;
      act[o] = s > 0.0 ? s : 0.0;
    }
    in = &act;
  }
  return *in;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

ForwardResult forward(const PredictorParams& p, const EncodedInstance& x, ForwardTrace& t) {
  check_instance(p, x);
  t.indices = x.indices;
  t.values = x.values;
  const std::size_t F = p.n_fields;
  const std::size_t D = p.embed_dim();

  double z = p.bias;
  if (p.has_linear())
    for (std::size_t f = 0; f < F; ++f) z += p.linear[x.indices[f]] * x.values[f];

  if (p.has_embeddings()) {
    t.x0.resize(F * D);
    for (std::size_t f = 0; f < F; ++f) {
      const double* e = p.embeddings.data() + x.indices[f] * D;
      for (std::size_t k = 0; k < D; ++k) t.x0[f * D + k] = e[k] * x.values[f];
    }
  } else {
    t.x0.clear();
  }

  if (p.kind == ModelKind::kFM || p.kind == ModelKind::kDeepFM) {
    t.fm_sum.assign(D, 0.0);
    double pair = 0.0;
    for (std::size_t k = 0; k < D; ++k) {
      double s = 0.0, sq = 0.0;
      for (std::size_t f = 0; f < F; ++f) {
        const double v = t.x0[f * D + k];
        s += v;
        sq += v * v;
      }
      t.fm_sum[k] = s;
      pair += s * s - sq;
    }
    z += 0.5 * pair;
  }

  if (p.kind == ModelKind::kMLP || p.kind == ModelKind::kDeepFM) {
    const auto& h = mlp_forward(p, t.x0, t);
    z += dot(p.head.data(), h.data(), h.size());
  }

  if (p.kind == ModelKind::kDCN) {
    const std::size_t d = t.x0.size();
    t.cross.resize(p.cross.size() + 1);
    t.cross_dot.resize(p.cross.size());
    t.cross[0] = t.x0;
    for (std::size_t l = 0; l < p.cross.size(); ++l) {
      const auto& xl = t.cross[l];
      auto& next = t.cross[l + 1];
      next.resize(d);
      const double s = dot(p.cross[l].weight.data(), xl.data(), d);
      t.cross_dot[l] = s;
      for (std::size_t i = 0; i < d; ++i) next[i] = t.x0[i] * s + p.cross[l].bias[i] + xl[i];
    }
    z += dot(p.head.data(), t.cross.back().data(), d);
    if (!p.mlp.empty()) {
      const auto& h = mlp_forward(p, t.x0, t);
      z += dot(p.head.data() + d, h.data(), h.size());
    }
  }

  t.z = z;
  return {z, sigmoid(z)};
}

ForwardResult forward(const PredictorParams& params, const EncodedInstance& x) {
  ForwardTrace trace;
  return forward(params, x, trace);
}

namespace {

// Backpropagates d(loss)/d(output of the tower) down to d/d(input), adding
// weight gradients into g.
void mlp_backward(const PredictorParams& p, const ForwardTrace& t, std::vector<double> grad_out,
                  PredictorGrads& g, std::vector<double>& grad_input) {
  for (std::size_t l = p.mlp.size(); l-- > 0;) {
    const DenseLayer& layer = p.mlp[l];
    DenseLayer& gl = g.mlp[l];
    const std::vector<double>& input = l == 0 ? t.x0 : t.act[l - 1];
    std::vector<double> grad_in(layer.in, 0.0);
    for (std::uint32_t o = 0; o < layer.out; ++o) {
      // ReLU subgradient at 0 is 0.
      const double d = t.pre[l][o] > 0.0 ? grad_out[o] : 0.0;
      if (d == 0.0) continue;
      gl.bias[o] += d;
      const double* w = layer.weight.data() + std::size_t{o} * layer.in;
      double* gw = gl.weight.data() + std::size_t{o} * layer.in;
      for (std::uint32_t i = 0; i < layer.in; ++i) {
        gw[i] += d * input[i];
        grad_in[i] += d * w[i];
      }
    }
    grad_out = std::move(grad_in);
  }
  for (std::size_t i = 0; i < grad_input.size(); ++i) grad_input[i] += grad_out[i];
}

}  // namespace

void accumulate_backward(const PredictorParams& p, const ForwardTrace& t, double g, PredictorGrads& grads) {
  if (g == 0.0) return;
  const std::size_t F = p.n_fields;
  const std::size_t D = p.embed_dim();

  grads.bias += g;
  for (std::size_t f = 0; f < F; ++f) grads.touch(t.indices[f]);
  if (p.has_linear())
    for (std::size_t f = 0; f < F; ++f) grads.linear[t.indices[f]] += g * t.values[f];
  if (!p.has_embeddings()) return;

  // Gradient with respect to the concatenated embedding vector x0.
  std::vector<double> dx0(F * D, 0.0);

  if (p.kind == ModelKind::kFM || p.kind == ModelKind::kDeepFM) {
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t k = 0; k < D; ++k) dx0[f * D + k] += g * (t.fm_sum[k] - t.x0[f * D + k]);
  }

  if (p.kind == ModelKind::kMLP || p.kind == ModelKind::kDeepFM) {
    const std::vector<double>& h = p.mlp.empty() ? t.x0 : t.act.back();
    std::vector<double> dh(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      grads.head[i] += g * h[i];
      dh[i] = g * p.head[i];
    }
    if (p.mlp.empty()) {
      for (std::size_t i = 0; i < dh.size(); ++i) dx0[i] += dh[i];
    } else {
      mlp_backward(p, t, std::move(dh), grads, dx0);
    }
  }

  if (p.kind == ModelKind::kDCN) {
    const std::size_t d = t.x0.size();
    const auto& xl_final = t.cross.back();
    std::vector<double> delta(d);
    for (std::size_t i = 0; i < d; ++i) {
      grads.head[i] += g * xl_final[i];
      delta[i] = g * p.head[i];
    }
    for (std::size_t l = p.cross.size(); l-- > 0;) {
      const auto& xl = t.cross[l];
      const double s = t.cross_dot[l];
      const double ds = dot(t.x0.data(), delta.data(), d);
      CrossLayer& gc = grads.cross[l];
      for (std::size_t i = 0; i < d; ++i) {
        gc.bias[i] += delta[i];
        gc.weight[i] += ds * xl[i];
        dx0[i] += s * delta[i];
      }
      const auto& w = p.cross[l].weight;
      for (std::size_t i = 0; i < d; ++i) delta[i] += ds * w[i];
    }
    for (std::size_t i = 0; i < d; ++i) dx0[i] += delta[i];
    if (!p.mlp.empty()) {
      const auto& h = t.act.back();
      std::vector<double> dh(h.size());
      for (std::size_t i = 0; i < h.size(); ++i) {
        grads.head[d + i] += g * h[i];
        dh[i] = g * p.head[d + i];
      }
      mlp_backward(p, t, std::move(dh), grads, dx0);
    }
  }

  for (std::size_t f = 0; f < F; ++f) {
    double* ge = grads.embeddings.data() + t.indices[f] * D;
    for (std::size_t k = 0; k < D; ++k) ge[k] += dx0[f * D + k] * t.values[f];
  }
}

PredictorGrads backward(const PredictorParams& params, const ForwardTrace& trace, double dl_dz) {
  PredictorGrads g = PredictorGrads::zeros_like(params);
  accumulate_backward(params, trace, dl_dz, g);
  return g;
}

}  // namespace reloop
