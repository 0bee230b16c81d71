// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reloop/features.hpp"
#include "reloop/metrics.hpp"
#include "reloop/model.hpp"
#include "reloop/optimizer.hpp"

namespace reloop {

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout, all integers and floats little-endian:
//   "RLPCKPT1" | u32 format version | u8 model kind | u64 schema digest |
//   u32 embed_dim | u32 n_fields | u64 n_features | u32 n_mlp | u32 width[n_mlp] |
//   u32 n_cross | u64 init seed |
//   per parameter block (ParamTensors::blocks() order): u64 count, count x f64

inline constexpr char kCheckpointMagic[8] = {'R', 'L', 'P', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const PredictorParams& params);
PredictorParams deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const PredictorParams& params, const std::filesystem::path& path);
PredictorParams load_checkpoint(const std::filesystem::path& path);
/// Also checks the stored schema digest against `schema`.
PredictorParams load_checkpoint(const std::filesystem::path& path, const FeatureSchema& schema);

// ---------------------------------------------------------------------------
// Scoring

struct ScoreEntry {
  std::uint64_t row_id = 0;
  double y_last = 0.0;
};

using ScoreLog = std::vector<ScoreEntry>;

/// Worker count from RELOOP_THREADS (default: hardware concurrency).
std::size_t worker_threads();

/// Predicted probabilities in row order. Rows are scored in parallel; each
/// row is independent so the result does not depend on the thread count.
std::vector<double> predict(const PredictorParams& params, const Dataset& data);

/// One clipped score per row. Throws CheckpointError on schema mismatch.
ScoreLog infer_scores(const PredictorParams& params, const Dataset& data);

/// CSV `row_id,y_last`, nine decimals.
void write_score_log(const std::filesystem::path& path, const ScoreLog& log);
ScoreLog read_score_log(const std::filesystem::path& path);

/// Sets y_last on every row from the log. Every row must be covered exactly once.
void attach_scores(Dataset& data, const ScoreLog& log);

MetricsReport evaluate_model(const PredictorParams& params, const Dataset& data);

// ---------------------------------------------------------------------------
// Loop driver

enum class LoopMode { kStaticPrior, kContinual };

struct LoopConfig {
  LoopMode mode = LoopMode::kStaticPrior;
  ModelKind model = ModelKind::kDeepFM;
  ModelHyper hyper;
  TrainConfig train;                 // loss field is ignored; see `losses`
  std::vector<LossConfig> losses{LossConfig{}};  // one chain (continual) or current model (static) each
  bool warm_start = true;
  double prior_fraction = 0.9;
  double holdout_fraction = 0.2;     // tail of the last window, continual mode
  std::filesystem::path checkpoint_dir;  // empty: keep everything in memory

  void validate() const;
};

struct ReportRow {
  std::optional<int> version;  // empty on summary rows
  std::optional<int> window;
  std::string phase;           // prior | baseline | current | next_window | holdout | mean
  LossConfig loss;
  MetricsReport metrics;
};

/// Where a trained model came from.
struct ModelVersion {
  int version = 0;
  std::string phase;
  LossConfig loss;
  int train_window = 0;
  std::size_t train_begin = 0;           // row range of the training window
  std::size_t train_end = 0;
  std::size_t rows_with_y_last = 0;
  std::optional<int> y_last_from_version;  // version whose scores were attached
  std::optional<int> y_last_from_window;   // window that version was trained on
  std::filesystem::path checkpoint;
  PredictorParams params;
};

struct LoopState {
  std::vector<ModelVersion> versions;
  std::vector<ReportRow> report;
  std::vector<ScoreLog> score_logs;  // one per scored window, in scoring order

  /// Mean AUC / logloss of the rows a chain reports for versions >= 2
  /// (continual) or of the current model (static).
  std::optional<MetricsReport> summary(const LossConfig& loss) const;
};

/// Offline emulation of the loop: a prior model trained with CE on the first
/// prior_fraction of `train` scores the whole of `train`; the current model
/// is trained on all of `train` with each configured loss. A CE baseline on
/// all of `train` is reported alongside.
LoopState run_static_prior(const LoopConfig& cfg, const Dataset& train, const Dataset& valid, const Dataset& test);

/// Sliding-window loop. Version 1 is trained on window 0 with CE; version
/// t+1 is trained on window t with y_last from version t and evaluated on
/// window t+1, the last version on a held-out tail of the final window.
LoopState run_continual(const LoopConfig& cfg, const std::vector<Dataset>& windows);

/// `version,window,phase,loss_kind,alpha,auc,logloss`
void write_loop_report(const std::filesystem::path& path, const LoopState& state);

/// File-name friendly tag such as `reloop_a0.2`.
std::string loss_tag(const LossConfig& loss);

}  // namespace reloop
