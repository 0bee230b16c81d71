// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "reloop/optimizer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "reloop/error.hpp"
#include "reloop/rng.hpp"

namespace reloop {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::kSGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSGD;
  if (name == "adam") return OptimizerKind::kAdam;
  throw UsageError("unknown optimizer '" + std::string(name) + "' (expected sgd|adam)");
}

namespace {

ParamTensors zeros_shaped(const PredictorParams& p) {
  ParamTensors t = PredictorGrads::zeros_like(p);
  return t;
}

}  // namespace

Optimizer::Optimizer(const OptimizerConfig& cfg, const PredictorParams& params) : cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw UsageError("optimizer: lr must be positive");
  if (cfg_.kind == OptimizerKind::kAdam) {
    m_ = zeros_shaped(params);
    v_ = zeros_shaped(params);
  }
}

void Optimizer::apply_update(PredictorParams& params, const PredictorGrads& grads) {
  check_same_shape(params, grads);
  ++step_;
  const std::size_t D = params.embed_dim();
  auto theta = params.blocks();
  auto g = grads.blocks();

  if (cfg_.kind == OptimizerKind::kSGD) {
    auto sgd = [&](double& w, double gw) { w -= cfg_.lr * gw; };
    for (auto row : grads.touched_rows) {
      if (!params.linear.empty()) sgd(params.linear[row], grads.linear[row]);
      for (std::size_t k = 0; k < D; ++k) sgd(params.embeddings[row * D + k], grads.embeddings[row * D + k]);
    }
    // Blocks 1 and 2 are the sparse linear / embedding tables.
    for (std::size_t b = 0; b < theta.size(); ++b) {
      if (b == 1 || b == 2) continue;
      for (std::size_t i = 0; i < theta[b].size(); ++i) sgd(theta[b][i], g[b][i]);
    }
  } else {
    check_same_shape(params, m_);
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    auto m = m_.blocks();
    auto v = v_.blocks();
    auto adam = [&](std::size_t b, std::size_t i) {
      const double gi = g[b][i];
      m[b][i] = cfg_.beta1 * m[b][i] + (1.0 - cfg_.beta1) * gi;
      v[b][i] = cfg_.beta2 * v[b][i] + (1.0 - cfg_.beta2) * gi * gi;
      const double m_hat = m[b][i] / c1;
      const double v_hat = v[b][i] / c2;
      theta[b][i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    };
    for (auto row : grads.touched_rows) {
      if (!params.linear.empty()) adam(1, row);
      for (std::size_t k = 0; k < D; ++k) adam(2, row * D + k);
    }
    for (std::size_t b = 0; b < theta.size(); ++b) {
      if (b == 1 || b == 2) continue;
      for (std::size_t i = 0; i < theta[b].size(); ++i) adam(b, i);
    }
  }

  for (auto row : grads.touched_rows) {
    bool ok = params.linear.empty() || std::isfinite(params.linear[row]);
    for (std::size_t k = 0; k < D; ++k) ok = ok && std::isfinite(params.embeddings[row * D + k]);
    if (!ok) throw Error("optimizer produced a non-finite parameter in feature row " + std::to_string(row));
  }
  for (std::size_t b = 0; b < theta.size(); ++b) {
    if (b == 1 || b == 2) continue;
    for (double w : theta[b])
      if (!std::isfinite(w)) throw Error("optimizer produced a non-finite parameter in block " + std::to_string(b));
  }
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  loss.validate();
  if (!(optimizer.lr > 0.0)) throw UsageError("lr must be positive");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint32_t epoch, bool shuffle) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    SplitMix64 rng(derive_seed(seed, epoch));
    shuffle_in_place(std::span<std::size_t>(order), rng);
  }
  return order;
}

void check_loss_coverage(const LossConfig& loss, const Dataset& data) {
  if (!loss.needs_y_last()) return;
  for (std::size_t i = 0; i < data.rows.size(); ++i)
    if (!data.rows[i].y_last)
      throw DataError(std::string(to_string(loss.kind)) + " loss requires y_last, but row " + std::to_string(i) +
                      " (row_id " + std::to_string(data.rows[i].row_id) + ") has none");
}

TrainLog train_epochs(PredictorParams& params, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  TrainLog log;
  if (cfg.epochs == 0) return log;
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  if (data.schema.digest() != params.schema_digest)
    throw ShapeError("dataset schema does not match the model's schema");
  check_loss_coverage(cfg.loss, data);

  Optimizer opt(cfg.optimizer, params);
  PredictorGrads grads = PredictorGrads::zeros_like(params);
  ForwardTrace trace;
  const std::size_t n = data.size();
  const std::uint32_t dim = params.embed_dim();

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(n, cfg.seed, epoch, cfg.shuffle);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.clear(dim);
      for (std::size_t i = start; i < end; ++i) {
        const EncodedInstance& x = data.rows[order[i]];
        const ForwardResult out = forward(params, x, trace);
        epoch_loss += combined_loss(cfg.loss, x.label, out.y_hat, x.y_last);
        accumulate_backward(params, trace, scale * loss_grad_z(cfg.loss, x.label, out.y_hat, x.y_last), grads);
      }
      opt.apply_update(params, grads);
      ++log.steps;
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  return log;
}

}  // namespace reloop
