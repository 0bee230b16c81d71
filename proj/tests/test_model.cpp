// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>
#include <cmath>

#include "gradcheck.hpp"
#include "reloop/error.hpp"
#include "reloop/model.hpp"

using namespace reloop;
using Catch::Matchers::WithinAbs;

namespace {

EncodedInstance instance(const FeatureSchema& s, const std::vector<std::uint32_t>& tokens) {
  EncodedInstance x;
  for (std::size_t f = 0; f < tokens.size(); ++f) {
    x.indices.push_back(s.base(f) + tokens[f]);
    x.values.push_back(1.0);
  }
  return x;
}

// Plain double loop over all field pairs.
double fm_bruteforce(const PredictorParams& p, const EncodedInstance& x) {
  const std::size_t D = p.embed_dim();
  double z = p.bias;
  for (std::size_t i = 0; i < x.indices.size(); ++i) z += p.linear[x.indices[i]] * x.values[i];
  for (std::size_t i = 0; i < x.indices.size(); ++i)
    for (std::size_t j = i + 1; j < x.indices.size(); ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < D; ++k)
        dot += p.embeddings[x.indices[i] * D + k] * p.embeddings[x.indices[j] * D + k];
      z += dot * x.values[i] * x.values[j];
    }
  return z;
}

std::vector<double> dense(const DenseLayer& l, const std::vector<double>& in, bool relu) {
  std::vector<double> out(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    double s = l.bias[o];
    for (std::size_t i = 0; i < l.in; ++i) s += l.weight[o * l.in + i] * in[i];
    out[o] = relu ? std::max(0.0, s) : s;
  }
  return out;
}

std::vector<double> stacked_embeddings(const PredictorParams& p, const EncodedInstance& x) {
  const std::size_t D = p.embed_dim();
  std::vector<double> x0;
  for (std::size_t f = 0; f < x.indices.size(); ++f)
    for (std::size_t k = 0; k < D; ++k) x0.push_back(p.embeddings[x.indices[f] * D + k] * x.values[f]);
  return x0;
}

// DCN written directly from x_{l+1} = x_0 (w_l . x_l) + b_l + x_l.
double dcn_reference(const PredictorParams& p, const EncodedInstance& x) {
  const auto x0 = stacked_embeddings(p, x);
  std::vector<double> xl = x0;
  for (const auto& c : p.cross) {
    double dot = 0;
    for (std::size_t i = 0; i < xl.size(); ++i) dot += c.weight[i] * xl[i];
    for (std::size_t i = 0; i < xl.size(); ++i) xl[i] = x0[i] * dot + c.bias[i] + xl[i];
  }
  std::vector<double> h = x0;
  for (const auto& l : p.mlp) h = dense(l, h, true);
  double z = p.bias;
  for (std::size_t i = 0; i < xl.size(); ++i) z += p.head[i] * xl[i];
  for (std::size_t i = 0; i < h.size(); ++i) z += p.head[xl.size() + i] * h[i];
  return z;
}

}  // namespace

TEST_CASE("zero LR predicts one half") {
  const auto s = FeatureSchema::uniform({"a", "b"}, 10);
  const auto p = init_params(ModelKind::kLR, s, {});
  const auto r = forward(p, instance(s, {3, 4}));
  CHECK(r.z == 0.0);
  CHECK(r.y_hat == 0.5);
  for (double w : p.linear) CHECK(w == 0.0);
}

TEST_CASE("FM with two fields reduces to a single dot product") {
  const auto s = FeatureSchema::uniform({"a", "b"}, 1);
  ModelHyper h;
  h.embed_dim = 1;
  auto p = init_params(ModelKind::kFM, s, h);
  p.embeddings = {0.5, 0.4};
  CHECK_THAT(forward(p, instance(s, {0, 0})).z, WithinAbs(0.2, 1e-15));
}

TEST_CASE("FM efficient formula equals the pairwise sum") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = test::random_grad_case(ModelKind::kFM, rng);
    CHECK_THAT(forward(c.params, c.x).z, WithinAbs(fm_bruteforce(c.params, c.x), 1e-10));
  }
}

TEST_CASE("DeepFM logit is the FM logit plus the MLP logit") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto c = test::random_grad_case(ModelKind::kDeepFM, rng);
    const FeatureSchema s = test::gradcheck_schema();
    auto fm = init_params(ModelKind::kFM, s, c.params.hyper);
    fm.bias = c.params.bias;
    fm.linear = c.params.linear;
    fm.embeddings = c.params.embeddings;
    auto mlp = init_params(ModelKind::kMLP, s, c.params.hyper);
    mlp.bias = 0.0;
    mlp.embeddings = c.params.embeddings;
    mlp.mlp = c.params.mlp;
    mlp.head = c.params.head;
    CHECK_THAT(forward(c.params, c.x).z, WithinAbs(forward(fm, c.x).z + forward(mlp, c.x).z, 1e-12));
  }
}

TEST_CASE("DCN matches a direct cross-network evaluation") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto c = test::random_grad_case(ModelKind::kDCN, rng);
    CHECK_THAT(forward(c.params, c.x).z, WithinAbs(dcn_reference(c.params, c.x), 1e-12));
  }
}

TEST_CASE("DCN without cross layers and a zero cross head is the MLP") {
  SplitMix64 rng(6);
  const FeatureSchema s = test::gradcheck_schema();
  for (int trial = 0; trial < 20; ++trial) {
    auto m = test::random_grad_case(ModelKind::kMLP, rng);
    ModelHyper h = m.params.hyper;
    h.n_cross_layers = 0;
    auto d = init_params(ModelKind::kDCN, s, h);
    d.bias = m.params.bias;
    d.embeddings = m.params.embeddings;
    d.mlp = m.params.mlp;
    const std::size_t dim = d.concat_dim();
    REQUIRE(d.head.size() == dim + m.params.head.size());
    std::fill(d.head.begin(), d.head.begin() + static_cast<std::ptrdiff_t>(dim), 0.0);
    std::copy(m.params.head.begin(), m.params.head.end(), d.head.begin() + static_cast<std::ptrdiff_t>(dim));
    CHECK_THAT(forward(d, m.x).z, WithinAbs(forward(m.params, m.x).z, 1e-12));
  }
}

TEST_CASE("backward matches finite differences of the logit for every model kind") {
  SplitMix64 rng(2024);
  for (ModelKind kind : kAllModelKinds) {
    INFO("model " << to_string(kind));
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      auto c = test::random_grad_case(kind, rng);
      const auto rep = test::check_gradients(c.params, c.x, 1.0, [](double z) { return z; });
      CHECK(rep.failures == 0);
      CHECK(rep.coords == c.params.parameter_count());
      worst = std::max(worst, rep.max_rel_err);
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  SplitMix64 rng(8);
  for (ModelKind kind : kAllModelKinds) {
    auto c = test::random_grad_case(kind, rng);
    ForwardTrace t;
    forward(c.params, c.x, t);
    const auto g = backward(c.params, t, 0.0);
    for (auto block : g.blocks())
      for (double v : block) CHECK(v == 0.0);
  }
}

TEST_CASE("LR weight gradient is the feature value") {
  const auto s = FeatureSchema::uniform({"a", "b"}, 10);
  const auto p = init_params(ModelKind::kLR, s, {});
  const auto x = instance(s, {2, 7});
  ForwardTrace t;
  forward(p, x, t);
  const auto g = backward(p, t, 1.0);
  CHECK(g.linear[x.indices[0]] == 1.0);
  CHECK(g.linear[x.indices[1]] == 1.0);
  CHECK(g.bias == 1.0);
  CHECK(g.linear[x.indices[0] + 1] == 0.0);
  CHECK(g.touched_rows.size() == 2);
}

TEST_CASE("init is deterministic and respects Xavier bounds") {
  const auto s = FeatureSchema::uniform({"a", "b"}, 25);
  ModelHyper h;
  h.embed_dim = 4;
  h.mlp_widths = {4, 3};
  h.seed = 17;
  const auto p = init_params(ModelKind::kMLP, s, h);
  const auto q = init_params(ModelKind::kMLP, s, h);
  auto pb = p.blocks();
  auto qb = q.blocks();
  for (std::size_t b = 0; b < pb.size(); ++b)
    CHECK(std::equal(pb[b].begin(), pb[b].end(), qb[b].begin(), qb[b].end()));
  REQUIRE(p.mlp[0].in == 8);
  REQUIRE(p.mlp[0].out == 4);
  const double bound = std::sqrt(6.0 / 12.0);
  for (double w : p.mlp[0].weight) CHECK(std::abs(w) < bound);
  for (double b : p.mlp[0].bias) CHECK(b == 0.0);
  const double ebound = std::sqrt(6.0 / (50.0 + 4.0));
  for (double e : p.embeddings) CHECK(std::abs(e) < ebound);
  h.seed = 18;
  const auto r = init_params(ModelKind::kMLP, s, h);
  CHECK(r.embeddings != p.embeddings);
}

TEST_CASE("init rejects degenerate shapes") {
  const auto s = FeatureSchema::uniform({"a"}, 5);
  ModelHyper h;
  h.embed_dim = 0;
  CHECK_THROWS_AS(init_params(ModelKind::kFM, s, h), UsageError);
  h.embed_dim = 2;
  h.mlp_widths = {3, 0};
  CHECK_THROWS_AS(init_params(ModelKind::kMLP, s, h), UsageError);
}

TEST_CASE("shape checks catch mismatched gradients") {
  const auto s = FeatureSchema::uniform({"a", "b"}, 5);
  const auto p = init_params(ModelKind::kDeepFM, s, {});
  const auto q = init_params(ModelKind::kFM, s, {});
  CHECK_NOTHROW(check_same_shape(p, PredictorGrads::zeros_like(p)));
  CHECK_THROWS_AS(check_same_shape(p, q), ShapeError);
}
