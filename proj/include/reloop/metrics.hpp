// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace reloop {

struct MetricsReport {
  std::uint64_t n = 0;
  std::uint64_t n_pos = 0;
  std::uint64_t n_neg = 0;
  double auc = 0.0;
  double logloss = 0.0;

  /// `n,n_pos,n_neg,auc,logloss` with six decimals, no trailing newline.
  std::string csv_line() const;
  static std::string csv_header() { return "n,n_pos,n_neg,auc,logloss"; }
  /// `n=...,n_pos=...,n_neg=...,auc=...,logloss=...`
  std::string pretty() const;
};

/// Mann-Whitney AUC with average ranks for ties. Throws DataError
/// ("AUC undefined") unless both classes are present.
double auc(std::span<const int> labels, std::span<const double> scores);

/// Mean clipped cross-entropy.
double logloss(std::span<const int> labels, std::span<const double> scores);

MetricsReport evaluate(std::span<const int> labels, std::span<const double> scores);

}  // namespace reloop
