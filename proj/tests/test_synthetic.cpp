// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>
#include <cmath>

#include "reloop/error.hpp"
#include "reloop/features.hpp"
#include "support.hpp"

using namespace reloop;

namespace {

double mean_label(const RawTable& t) {
  double s = 0;
  for (const auto& r : t.rows) s += r.label;
  return s / static_cast<double>(t.rows.size());
}

}  // namespace

TEST_CASE("same spec and seed give identical windows") {
  SyntheticSpec spec;
  spec.n_rows = 500;
  spec.n_windows = 2;
  spec.drift_rate = 0.3;
  spec.seed = 7;
  test::TempDir a("syn_a"), b("syn_b");
  const auto pa = write_windows(a.path(), generate_synthetic(spec));
  const auto pb = write_windows(b.path(), generate_synthetic(spec));
  REQUIRE(pa.size() == 2);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(test::slurp(pa[i]) == test::slurp(pb[i]));
  CHECK(pa[0].filename() == "window_000.csv");
}

TEST_CASE("different seeds give different data") {
  SyntheticSpec spec;
  spec.n_rows = 200;
  const auto a = generate_synthetic(spec);
  spec.seed = 43;
  const auto b = generate_synthetic(spec);
  bool differ = false;
  for (std::size_t r = 0; r < 200 && !differ; ++r) differ = a[0].rows[r].cells != b[0].rows[r].cells;
  CHECK(differ);
}

TEST_CASE("zero drift keeps the ground truth fixed") {
  SyntheticSpec spec;
  spec.n_rows = 20000;
  spec.n_windows = 3;
  SyntheticWorld world(spec);
  std::vector<std::uint32_t> tokens(spec.n_fields);
  reloop::SplitMix64 rng(5);
  for (int i = 0; i < 50; ++i) {
    for (auto& t : tokens) t = static_cast<std::uint32_t>(rng.below(spec.buckets_per_field));
    CHECK(world.ctr(0, tokens) == world.ctr(2, tokens));
  }
  CHECK(world.changed_entries(1) == 0);
  // Window CTRs differ only by sampling noise.
  const double p0 = mean_label(world.sample_window(0));
  for (std::uint32_t w = 1; w < 3; ++w) {
    const double pw = mean_label(world.sample_window(w));
    const double sigma = std::sqrt(2.0 * p0 * (1 - p0) / static_cast<double>(spec.n_rows));
    CHECK(std::abs(pw - p0) < 3 * sigma + 1e-12);
  }
}

TEST_CASE("drift re-draws the configured share of ground-truth entries") {
  SyntheticSpec spec;
  spec.n_rows = 10;
  spec.n_windows = 3;
  spec.drift_rate = 0.3;
  SyntheticWorld world(spec);
  CHECK(world.changed_entries(0) == 0);
  CHECK(world.changed_entries(1) == 240);
  CHECK(world.changed_entries(2) == 240);
}

TEST_CASE("empirical CTR matches the mean of the hidden CTR function") {
  SyntheticSpec spec;
  spec.n_rows = 100000;
  spec.seed = 11;
  SyntheticWorld world(spec);
  const RawTable t = world.sample_window(0);
  // Independent Monte-Carlo estimate of E[ctr] under the token distribution P(token < k) = sqrt(k/B).
  reloop::SplitMix64 rng(999);
  std::vector<std::uint32_t> tokens(spec.n_fields);
  double expected = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    for (auto& tok : tokens) {
      const double u = rng.uniform01();
      tok = static_cast<std::uint32_t>(spec.buckets_per_field * u * u);
    }
    expected += world.ctr(0, tokens);
  }
  expected /= draws;
  CHECK(std::abs(mean_label(t) - expected) < 0.02);
  CHECK(expected > 0.05);
  CHECK(expected < 0.6);
}

TEST_CASE("invalid specs are rejected") {
  SyntheticSpec spec;
  spec.n_rows = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
  spec.n_rows = 10;
  spec.drift_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
}
