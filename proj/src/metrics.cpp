// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "reloop/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <vector>

#include "reloop/error.hpp"
#include "reloop/losses.hpp"

namespace reloop {

std::string MetricsReport::csv_line() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%llu,%llu,%llu,%.6f,%.6f", static_cast<unsigned long long>(n),
                static_cast<unsigned long long>(n_pos), static_cast<unsigned long long>(n_neg), auc, logloss);
  return buf;
}

std::string MetricsReport::pretty() const {
  char buf[200];
  std::snprintf(buf, sizeof buf, "n=%llu,n_pos=%llu,n_neg=%llu,auc=%.6f,logloss=%.6f",
                static_cast<unsigned long long>(n), static_cast<unsigned long long>(n_pos),
                static_cast<unsigned long long>(n_neg), auc, logloss);
  return buf;
}

namespace {

void check_lengths(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size())
    throw DataError("labels and scores differ in length (" + std::to_string(labels.size()) + " vs " +
                    std::to_string(scores.size()) + ")");
}

}  // namespace

double auc(std::span<const int> labels, std::span<const double> scores) {
  check_lengths(labels, scores);
  std::uint64_t n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  const std::uint64_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC undefined: need at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are 1-based; a tie group spanning ranks [i+1, j] shares (i+1+j)/2.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    std::uint64_t pos_in_group = 0;
    for (std::size_t k = i; k < j; ++k) pos_in_group += (labels[order[k]] == 1);
    rank_sum_pos += avg_rank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double logloss(std::span<const int> labels, std::span<const double> scores) {
  check_lengths(labels, scores);
  if (labels.empty()) throw DataError("logloss of an empty set");
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) s += ce_loss(labels[i], scores[i]);
  return s / static_cast<double>(labels.size());
}

MetricsReport evaluate(std::span<const int> labels, std::span<const double> scores) {
  MetricsReport r;
  r.n = labels.size();
  for (int y : labels) r.n_pos += (y == 1);
  r.n_neg = r.n - r.n_pos;
  r.auc = auc(labels, scores);
  r.logloss = logloss(labels, scores);
  return r;
}

}  // namespace reloop
