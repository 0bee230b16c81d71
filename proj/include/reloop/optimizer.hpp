// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "reloop/features.hpp"
#include "reloop/losses.hpp"
#include "reloop/model.hpp"

namespace reloop {

enum class OptimizerKind { kSGD, kAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// SGD or lazy sparse Adam. Moments of embedding / linear rows are only
/// advanced on steps where the row appears in the batch.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, const PredictorParams& params);

  void apply_update(PredictorParams& params, const PredictorGrads& grads);

  const OptimizerConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return step_; }
  const ParamTensors& first_moment() const { return m_; }
  const ParamTensors& second_moment() const { return v_; }

 private:
  OptimizerConfig cfg_;
  ParamTensors m_;
  ParamTensors v_;
  std::uint64_t step_ = 0;
};

struct TrainConfig {
  std::uint32_t batch_size = 256;
  std::uint32_t epochs = 5;
  std::uint64_t seed = 0;
  bool shuffle = true;
  LossConfig loss;
  OptimizerConfig optimizer;

  void validate() const;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean per-sample training objective
  std::uint64_t steps = 0;
};

/// Visiting order for one epoch; a pure function of (n, seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint32_t epoch, bool shuffle);

/// Mini-batch training with batch-averaged gradients. Throws DataError
/// naming the first row that lacks y_last when the loss needs it.
TrainLog train_epochs(PredictorParams& params, const Dataset& data, const TrainConfig& cfg);

/// Checks that every row carries y_last when the loss needs it.
void check_loss_coverage(const LossConfig& loss, const Dataset& data);

}  // namespace reloop
