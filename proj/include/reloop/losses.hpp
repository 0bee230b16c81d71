// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "reloop/features.hpp"

namespace reloop {

enum class LossKind { kCE, kReLoop, kKD };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct LossConfig {
  LossKind kind = LossKind::kCE;
  double alpha = 0.0;  // weight of the self-correction term; ignored for ce and kd
  double clip_eps = kProbClip;

  bool needs_y_last() const { return kind != LossKind::kCE; }
  void validate() const;
};

/// Binary cross-entropy with y_hat clipped into [eps, 1 - eps].
double ce_loss(int y, double y_hat, double clip_eps = kProbClip);

/// Self-correction hinge: charges only the amount by which y_hat is worse
/// than the previous model's y_last in the direction of the label.
double sc_loss(int y, double y_hat, double y_last);

/// Cross-entropy against the previous model's soft label.
double kd_loss(double y_last, double y_hat, double clip_eps = kProbClip);

/// Per-sample objective for cfg. Throws DataError when y_last is required
/// but absent.
double combined_loss(const LossConfig& cfg, int y, double y_hat, std::optional<double> y_last);

/// d(combined_loss)/dz through y_hat = sigmoid(z). The hinge and CE use the
/// unclipped y_hat; the subgradient at y_hat == y_last is 0.
double loss_grad_z(const LossConfig& cfg, int y, double y_hat, std::optional<double> y_last);

struct LossCurvePoint {
  double y_hat = 0.0;
  double l_ce = 0.0;
  double l_kd = 0.0;
  double l_sc = 0.0;
};

/// Evaluates the three losses on y_hat = i / (n + 1), i = 1..n.
std::vector<LossCurvePoint> emit_loss_curves(int y, double y_last, std::size_t n,
                                             double clip_eps = kProbClip);

/// CSV `y_hat,l_ce,l_kd,l_sc` with 9 significant digits.
std::string loss_curves_csv(const std::vector<LossCurvePoint>& points);

}  // namespace reloop
