// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "reloop/losses.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "reloop/error.hpp"

namespace reloop {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCE: return "ce";
    case LossKind::kReLoop: return "reloop";
    case LossKind::kKD: return "kd";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "ce") return LossKind::kCE;
  if (name == "reloop") return LossKind::kReLoop;
  if (name == "kd") return LossKind::kKD;
  throw UsageError("unknown loss '" + std::string(name) + "' (expected ce|reloop|kd)");
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0,1]");
  if (!(clip_eps > 0.0 && clip_eps < 0.5)) throw UsageError("clip_eps must lie in (0, 0.5)");
}

double ce_loss(int y, double y_hat, double clip_eps) {
  const double p = clip_probability(y_hat, clip_eps);
  return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double sc_loss(int y, double y_hat, double y_last) {
  return y * std::max(y_last - y_hat, 0.0) + (1 - y) * std::max(y_hat - y_last, 0.0);
}

double kd_loss(double y_last, double y_hat, double clip_eps) {
  const double p = clip_probability(y_hat, clip_eps);
  const double t = clip_probability(y_last, clip_eps);
  return -t * std::log(p) - (1.0 - t) * std::log(1.0 - p);
}

namespace {

double require_y_last(const LossConfig& cfg, std::optional<double> y_last) {
  if (!y_last) throw DataError(std::string(to_string(cfg.kind)) + " loss requires y_last for every row");
  return *y_last;
}

}  // namespace

double combined_loss(const LossConfig& cfg, int y, double y_hat, std::optional<double> y_last) {
  switch (cfg.kind) {
    case LossKind::kCE: return ce_loss(y, y_hat, cfg.clip_eps);
    case LossKind::kKD: return kd_loss(require_y_last(cfg, y_last), y_hat, cfg.clip_eps);
    case LossKind::kReLoop: {
      const double last = require_y_last(cfg, y_last);
      return cfg.alpha * sc_loss(y, y_hat, last) + (1.0 - cfg.alpha) * ce_loss(y, y_hat, cfg.clip_eps);
    }
  }
  return 0.0;
}

double loss_grad_z(const LossConfig& cfg, int y, double y_hat, std::optional<double> y_last) {
  const double ce_grad = y_hat - y;
  switch (cfg.kind) {
    case LossKind::kCE: return ce_grad;
    case LossKind::kKD: return y_hat - clip_probability(require_y_last(cfg, y_last), cfg.clip_eps);
    case LossKind::kReLoop: {
      const double last = require_y_last(cfg, y_last);
      double d_yhat = 0.0;
      if (y == 1 && last > y_hat) d_yhat = -1.0;
      if (y == 0 && y_hat > last) d_yhat = 1.0;
      const double sc_grad = d_yhat * y_hat * (1.0 - y_hat);
      return cfg.alpha * sc_grad + (1.0 - cfg.alpha) * ce_grad;
    }
  }
  return 0.0;
}

std::vector<LossCurvePoint> emit_loss_curves(int y, double y_last, std::size_t n, double clip_eps) {
  if (n == 0) throw UsageError("loss curves: grid must have at least one point");
  if (y != 0 && y != 1) throw UsageError("loss curves: y must be 0 or 1");
  if (!(y_last >= 0.0 && y_last <= 1.0)) throw UsageError("loss curves: y_last must lie in [0,1]");
  std::vector<LossCurvePoint> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const double y_hat = static_cast<double>(i) / static_cast<double>(n + 1);
    out.push_back({y_hat, ce_loss(y, y_hat, clip_eps), kd_loss(y_last, y_hat, clip_eps), sc_loss(y, y_hat, y_last)});
  }
  return out;
}

std::string loss_curves_csv(const std::vector<LossCurvePoint>& points) {
  std::string out = "y_hat,l_ce,l_kd,l_sc\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", p.y_hat, p.l_ce, p.l_kd, p.l_sc);
    out += buf;
  }
  return out;
}

}  // namespace reloop
