// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <numeric>

#include "reloop/error.hpp"
#include "reloop/features.hpp"
#include "reloop/rng.hpp"

namespace reloop {

namespace {

constexpr std::uint64_t kWorldStream = 0;
constexpr std::uint64_t kRowStream = 1000;
constexpr std::uint64_t kDriftStream = 2000000;
constexpr double kLinearStd = 1.0;
constexpr double kPairStd = 0.7;

// Popular tokens get most of the traffic: P(token < t) = sqrt(t / B).
std::uint32_t draw_token(SplitMix64& rng, std::uint32_t buckets) {
  const double u = rng.uniform01();
  return static_cast<std::uint32_t>(static_cast<double>(buckets) * u * u);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_fields < 1) throw UsageError("synthetic: n_fields must be positive");
  if (buckets_per_field < 1) throw UsageError("synthetic: buckets_per_field must be positive");
  if (latent_dim < 1) throw UsageError("synthetic: latent_dim must be positive");
  if (n_rows < 1) throw UsageError("synthetic: n_rows must be positive");
  if (n_windows < 1) throw UsageError("synthetic: n_windows must be positive");
  if (!(drift_rate >= 0.0 && drift_rate <= 1.0)) throw UsageError("synthetic: drift_rate must lie in [0,1]");
}

SyntheticWorld::SyntheticWorld(const SyntheticSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::size_t entries = std::size_t{spec_.n_fields} * spec_.buckets_per_field;
  const std::size_t dim = spec_.latent_dim;
  const double n_pairs = std::max(1.0, 0.5 * spec_.n_fields * (spec_.n_fields - 1.0));
  // Per-token biases sum to a logit term with standard deviation ~kLinearStd,
  // the pairwise term to ~kPairStd.
  const double latent_scale = std::sqrt(kPairStd) * std::pow(n_pairs * static_cast<double>(dim), -0.25);
  const double bias_scale = kLinearStd / std::sqrt(static_cast<double>(spec_.n_fields));

  SplitMix64 rng(derive_seed(spec_.seed, kWorldStream));
  auto draw_entry = [&](Table& t, std::size_t e) {
    t.bias[e] = bias_scale * rng.normal();
    for (std::size_t k = 0; k < dim; ++k) t.latent[e * dim + k] = latent_scale * rng.normal();
  };

  Table first;
  first.bias.resize(entries);
  first.latent.resize(entries * dim);
  for (std::size_t e = 0; e < entries; ++e) draw_entry(first, e);
  windows_.push_back(std::move(first));
  changed_.push_back(0);

  const std::size_t n_changed =
      static_cast<std::size_t>(std::llround(spec_.drift_rate * static_cast<double>(entries)));
  std::vector<std::size_t> order(entries);
  for (std::uint32_t w = 1; w < spec_.n_windows; ++w) {
    Table next = windows_.back();
    if (n_changed > 0) {
      SplitMix64 drift(derive_seed(spec_.seed, kDriftStream + w));
      std::iota(order.begin(), order.end(), std::size_t{0});
      // Partial Fisher-Yates picks n_changed distinct entries.
      for (std::size_t i = 0; i < n_changed; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(drift.below(entries - i));
        std::swap(order[i], order[j]);
      }
      for (std::size_t i = 0; i < n_changed; ++i) {
        const std::size_t e = order[i];
        next.bias[e] = bias_scale * drift.normal();
        for (std::size_t k = 0; k < dim; ++k) next.latent[e * dim + k] = latent_scale * drift.normal();
      }
    }
    windows_.push_back(std::move(next));
    changed_.push_back(n_changed);
  }
}

double SyntheticWorld::ctr(std::uint32_t window, const std::vector<std::uint32_t>& tokens) const {
  const Table& t = windows_.at(window);
  const std::size_t dim = spec_.latent_dim;
  const std::size_t B = spec_.buckets_per_field;
  double logit = global_bias_;
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  for (std::size_t f = 0; f < tokens.size(); ++f) {
    const std::size_t e = f * B + tokens[f];
    logit += t.bias[e];
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = t.latent[e * dim + k];
      sum[k] += v;
      sum_sq[k] += v * v;
    }
  }
  for (std::size_t k = 0; k < dim; ++k) logit += 0.5 * (sum[k] * sum[k] - sum_sq[k]);
  return 1.0 / (1.0 + std::exp(-logit));
}

std::size_t SyntheticWorld::changed_entries(std::uint32_t window) const { return changed_.at(window); }

std::vector<std::string> SyntheticWorld::field_names() const {
  std::vector<std::string> names;
  for (std::uint32_t f = 0; f < spec_.n_fields; ++f) names.push_back("f" + std::to_string(f));
  return names;
}

RawTable SyntheticWorld::sample_window(std::uint32_t window) const {
  RawTable table;
  table.field_names = field_names();
  table.rows.reserve(spec_.n_rows);
  SplitMix64 rng(derive_seed(spec_.seed, kRowStream + window));
  std::vector<std::uint32_t> tokens(spec_.n_fields);
  for (std::uint64_t r = 0; r < spec_.n_rows; ++r) {
    for (auto& tok : tokens) tok = draw_token(rng, spec_.buckets_per_field);
    const double p = ctr(window, tokens);
    RawRow row;
    row.label = rng.bernoulli(p) ? 1 : 0;
    row.cells.reserve(tokens.size());
    for (auto tok : tokens) row.cells.emplace_back(std::to_string(tok));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<RawTable> generate_synthetic(const SyntheticSpec& spec) {
  SyntheticWorld world(spec);
  std::vector<RawTable> out;
  out.reserve(spec.n_windows);
  for (std::uint32_t w = 0; w < spec.n_windows; ++w) out.push_back(world.sample_window(w));
  return out;
}

std::vector<std::filesystem::path> write_windows(const std::filesystem::path& dir,
                                                 const std::vector<RawTable>& windows) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  char name[32];
  for (std::size_t w = 0; w < windows.size(); ++w) {
    std::snprintf(name, sizeof name, "window_%03zu.csv", w);
    paths.push_back(dir / name);
    write_csv_table(paths.back(), windows[w]);
  }
  return paths;
}

}  // namespace reloop
