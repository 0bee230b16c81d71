// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reloop {

inline constexpr std::string_view kMissingToken = "__MISSING__";

/// Bounds applied to every logged or ingested probability.
inline constexpr double kProbClip = 1e-7;

enum class FieldKind { kCategorical, kNumerical };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  std::uint32_t buckets = 1;
};

/// Ordered field layout mapping each field into a slice of one flat
/// feature-index space.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FieldSpec> fields);

  /// All fields categorical with the same bucket count.
  static FeatureSchema uniform(const std::vector<std::string>& names, std::uint32_t buckets);

  /// Reads `name,kind,buckets` lines (kind is `categorical` or `numerical`).
  static FeatureSchema load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<FieldSpec>& fields() const { return fields_; }
  std::size_t size() const { return fields_.size(); }
  const FieldSpec& field(std::size_t f) const { return fields_.at(f); }
  std::uint64_t base(std::size_t f) const { return base_.at(f); }
  std::uint64_t n_features() const { return n_features_; }
  std::optional<std::size_t> find(std::string_view name) const;

  /// `name:kind:buckets;` per field, in order.
  std::string canonical() const;
  /// FNV-1a of canonical().
  std::uint64_t digest() const;

  bool operator==(const FeatureSchema& other) const { return canonical() == other.canonical(); }

 private:
  std::vector<FieldSpec> fields_;
  std::vector<std::uint64_t> base_;
  std::uint64_t n_features_ = 0;
};

struct EncodedInstance {
  int label = 0;
  std::vector<std::uint64_t> indices;
  std::vector<double> values;
  std::optional<double> y_last;
  std::uint64_t row_id = 0;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<EncodedInstance> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  /// Copy of rows [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
};

/// Raw, un-hashed CSV content. Cells hold the literal text; nullopt is an
/// empty (missing) cell.
struct RawRow {
  int label = 0;
  std::vector<std::optional<std::string>> cells;
  std::optional<double> y_last;
};

struct RawTable {
  std::vector<std::string> field_names;
  std::vector<RawRow> rows;
  bool has_y_last = false;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state);

struct NumericBucket {
  int bucket = 0;
  double value = 1.0;
};

/// floor(log2(v + 1)) for v >= 0; bucket 0 for negative, NaN or missing.
NumericBucket transform_numerical(std::optional<double> v);

/// Token that gets hashed for a raw cell: the bucket number for numerical
/// fields, the cell text for categorical ones, kMissingToken when empty.
std::string canonical_token(const FieldSpec& field, const std::optional<std::string>& cell);

/// base(f) + FNV-1a("name=token") mod buckets.
std::uint64_t hash_feature(const FeatureSchema& schema, std::size_t field, std::string_view token);

EncodedInstance encode_row(const FeatureSchema& schema, const RawRow& row, std::uint64_t row_id);
Dataset encode(const FeatureSchema& schema, const RawTable& table);

RawTable read_csv_table(const std::filesystem::path& path);
void write_csv_table(const std::filesystem::path& path, const RawTable& table);

/// read_csv_table + encode, with the header checked against the schema.
Dataset ingest_csv(const std::filesystem::path& path, const FeatureSchema& schema);

/// Clips an ingested probability into [kProbClip, 1 - kProbClip].
double clip_probability(double p, double eps = kProbClip);

// ---------------------------------------------------------------------------
// Synthetic click logs

struct SyntheticSpec {
  std::uint32_t n_fields = 8;
  std::uint32_t buckets_per_field = 100;
  std::uint32_t latent_dim = 4;
  std::uint64_t n_rows = 10000;  // per window
  std::uint64_t seed = 42;
  std::uint32_t n_windows = 1;
  double drift_rate = 0.0;

  void validate() const;
};

/// Hidden ground-truth CTR model: per-token bias and latent vector, with a
/// factorization-machine logit. Drift re-draws a fraction of the tokens
/// between consecutive windows.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(const SyntheticSpec& spec);

  const SyntheticSpec& spec() const { return spec_; }
  double global_bias() const { return global_bias_; }
  /// Ground-truth click probability of a token tuple in window w.
  double ctr(std::uint32_t window, const std::vector<std::uint32_t>& tokens) const;
  /// Number of (field, token) entries that differ between window w-1 and w.
  std::size_t changed_entries(std::uint32_t window) const;

  /// Rows of window w; labels are Bernoulli(ctr).
  RawTable sample_window(std::uint32_t window) const;

  std::vector<std::string> field_names() const;

 private:
  struct Table {
    std::vector<double> bias;    // [field * B + token]
    std::vector<double> latent;  // [(field * B + token) * D + k]
  };

  SyntheticSpec spec_;
  double global_bias_ = -1.2;
  std::vector<Table> windows_;
  std::vector<std::size_t> changed_;
};

std::vector<RawTable> generate_synthetic(const SyntheticSpec& spec);

/// Writes window_000.csv, window_001.csv, ... into dir. Returns the paths.
std::vector<std::filesystem::path> write_windows(const std::filesystem::path& dir,
                                                 const std::vector<RawTable>& windows);

}  // namespace reloop
