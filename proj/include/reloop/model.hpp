// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reloop/features.hpp"

namespace reloop {

enum class ModelKind : std::uint8_t { kLR = 0, kFM = 1, kMLP = 2, kDeepFM = 3, kDCN = 4 };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::kLR, ModelKind::kFM, ModelKind::kMLP, ModelKind::kDeepFM,
                                               ModelKind::kDCN};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelHyper {
  std::uint32_t embed_dim = 16;
  std::vector<std::uint32_t> mlp_widths{64, 32};
  std::uint32_t n_cross_layers = 2;
  std::uint64_t seed = 0;
};

/// Fully connected layer, weight stored row-major as [out][in].
struct DenseLayer {
  std::uint32_t in = 0;
  std::uint32_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

/// One layer of the original cross network: x' = x0 * (w . x) + b + x.
struct CrossLayer {
  std::vector<double> weight;
  std::vector<double> bias;
};

/// Parameter storage shared by PredictorParams and PredictorGrads.
///
/// Block order (used by checkpoints, optimizers and gradient checks):
/// bias, linear, embeddings, mlp[i].weight, mlp[i].bias for each layer,
/// cross[i].weight, cross[i].bias for each layer, head.
struct ParamTensors {
  double bias = 0.0;
  std::vector<double> linear;      // [n_features], LR / FM / DeepFM
  std::vector<double> embeddings;  // [n_features * embed_dim], all but LR
  std::vector<DenseLayer> mlp;     // MLP / DeepFM / DCN
  std::vector<CrossLayer> cross;   // DCN
  std::vector<double> head;        // MLP / DeepFM / DCN

  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  std::size_t parameter_count() const;
};

struct PredictorParams : ParamTensors {
  ModelKind kind = ModelKind::kLR;
  ModelHyper hyper;
  std::uint32_t n_fields = 0;
  std::uint64_t n_features = 0;
  std::uint64_t schema_digest = 0;

  std::uint32_t embed_dim() const { return kind == ModelKind::kLR ? 0 : hyper.embed_dim; }
  /// Width of the concatenated field embeddings.
  std::uint32_t concat_dim() const { return n_fields * embed_dim(); }
  bool has_linear() const;
  bool has_embeddings() const { return kind != ModelKind::kLR; }
  bool has_mlp() const;
};

/// Gradients with the same shape as the parameters. Rows of `linear` and
/// `embeddings` that received a gradient are listed in `touched_rows` in
/// first-touch order; every other row is zero.
struct PredictorGrads : ParamTensors {
  std::vector<std::uint64_t> touched_rows;
  std::vector<std::uint8_t> touched_mask;

  static PredictorGrads zeros_like(const PredictorParams& params);
  void touch(std::uint64_t row);
  /// Zeroes everything, clearing sparse rows in O(touched).
  void clear(std::uint32_t embed_dim);
};

/// Activations cached by forward() for an exact backward pass.
struct ForwardTrace {
  std::vector<std::uint64_t> indices;
  std::vector<double> values;
  std::vector<double> x0;                  // concatenated embeddings * value
  std::vector<double> fm_sum;              // per latent dim: sum_f e * value
  std::vector<std::vector<double>> pre;    // per MLP layer, before ReLU
  std::vector<std::vector<double>> act;    // per MLP layer, after ReLU
  std::vector<std::vector<double>> cross;  // x_0 .. x_L of the cross network
  std::vector<double> cross_dot;           // w_l . x_l
  double z = 0.0;
};

struct ForwardResult {
  double z = 0.0;
  double y_hat = 0.5;
};

double sigmoid(double z);

/// Builds freshly initialized parameters for `schema`.
PredictorParams init_params(ModelKind kind, const FeatureSchema& schema, const ModelHyper& hyper);

/// Computes the logit and fills `trace`. Throws ShapeError when the instance
/// does not fit the parameters.
ForwardResult forward(const PredictorParams& params, const EncodedInstance& x, ForwardTrace& trace);
ForwardResult forward(const PredictorParams& params, const EncodedInstance& x);

/// Adds dL/dz * dz/dtheta into `grads`.
void accumulate_backward(const PredictorParams& params, const ForwardTrace& trace, double dl_dz,
                         PredictorGrads& grads);
PredictorGrads backward(const PredictorParams& params, const ForwardTrace& trace, double dl_dz);

/// Throws ShapeError unless grads has the layout of params.
void check_same_shape(const PredictorParams& params, const ParamTensors& other);

}  // namespace reloop
