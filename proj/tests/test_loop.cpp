// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>
#include <cmath>
#include <cstdlib>

#include "gradcheck.hpp"
#include "reloop/error.hpp"
#include "reloop/loop.hpp"
#include "support.hpp"

using namespace reloop;
using Kind = CheckpointError::Kind;

namespace {

bool params_equal(const PredictorParams& a, const PredictorParams& b) {
  return serialize_checkpoint(a) == serialize_checkpoint(b);
}

Kind load_error(const std::vector<std::uint8_t>& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("checkpoint unexpectedly loaded");
  return Kind::kIo;
}

std::vector<Dataset> windows(std::uint64_t rows, std::uint32_t n, double drift, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_fields = 4;
  spec.buckets_per_field = 20;
  spec.n_rows = rows;
  spec.n_windows = n;
  spec.drift_rate = drift;
  spec.seed = seed;
  SyntheticWorld world(spec);
  const auto schema = FeatureSchema::uniform(world.field_names(), 50);
  std::vector<Dataset> out;
  for (std::uint32_t w = 0; w < n; ++w) out.push_back(encode(schema, world.sample_window(w)));
  return out;
}

LoopConfig small_config(LoopMode mode, ModelKind model = ModelKind::kFM) {
  LoopConfig cfg;
  cfg.mode = mode;
  cfg.model = model;
  cfg.hyper.embed_dim = 4;
  cfg.hyper.mlp_widths = {8};
  cfg.train.epochs = 1;
  cfg.train.batch_size = 64;
  return cfg;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value, 1);
  }
  ~ScopedEnv() {
    if (old_) ::setenv(name_, old_->c_str(), 1);
    else ::unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST_CASE("checkpoints round-trip bitwise for every model kind") {
  SplitMix64 rng(40);
  test::TempDir dir("ckpt");
  for (ModelKind kind : kAllModelKinds) {
    const auto c = test::random_grad_case(kind, rng);
    const auto path = dir / (std::string(to_string(kind)) + ".ckpt");
    save_checkpoint(c.params, path);
    const auto back = load_checkpoint(path, test::gradcheck_schema());
    CHECK(params_equal(back, c.params));
    CHECK(back.kind == kind);
    CHECK(back.hyper.mlp_widths == c.params.hyper.mlp_widths);
    CHECK(forward(back, c.x).z == forward(c.params, c.x).z);
  }
}

TEST_CASE("corrupted checkpoints fail with specific error kinds") {
  SplitMix64 rng(41);
  const auto c = test::random_grad_case(ModelKind::kDeepFM, rng);
  const auto good = serialize_checkpoint(c.params);

  auto bad = good;
  bad[0] ^= 0xFF;
  CHECK(load_error(bad) == Kind::kBadMagic);
  CHECK(load_error({'R', 'L'}) == Kind::kBadMagic);

  bad = good;
  bad[8] = 2;
  CHECK(load_error(bad) == Kind::kVersionMismatch);

  for (std::size_t cut : {std::size_t{10}, std::size_t{40}, good.size() / 2, good.size() - 1})
    CHECK(load_error({good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut)}) == Kind::kTruncated);

  bad = good;
  bad.push_back(0);
  CHECK(load_error(bad) == Kind::kCorrupt);

  bad = good;
  bad[12] = 9;  // model kind byte
  CHECK(load_error(bad) == Kind::kCorrupt);

  test::TempDir dir("ckpt_bad");
  const auto five = FeatureSchema::uniform({"a", "b", "c", "d", "e"}, 10);
  const auto six = FeatureSchema::uniform({"a", "b", "c", "d", "e", "f"}, 10);
  save_checkpoint(init_params(ModelKind::kLR, five, {}), dir / "five.ckpt");
  try {
    load_checkpoint(dir / "five.ckpt", six);
    FAIL("expected a schema mismatch");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == Kind::kSchemaDigestMismatch);
  }
  try {
    load_checkpoint(dir / "absent.ckpt");
    FAIL("expected an I/O error");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == Kind::kIo);
  }
}

TEST_CASE("score logs round-trip and attach by row id") {
  test::TempDir dir("scores");
  Dataset d = test::synthetic_dataset(300, 6);
  auto p = init_params(ModelKind::kFM, d.schema, {});
  const auto log = infer_scores(p, d);
  CHECK(log.size() == d.size());
  write_score_log(dir / "s.csv", log);
  const auto back = read_score_log(dir / "s.csv");
  REQUIRE(back.size() == log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(back[i].row_id == log[i].row_id);
    CHECK(std::abs(back[i].y_last - log[i].y_last) <= 1e-9);
  }
  attach_scores(d, back);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.rows[i].y_last == back[i].y_last);

  auto dup = back;
  dup.push_back(back[0]);
  CHECK_THROWS_AS(attach_scores(d, dup), DataError);
  auto partial = back;
  partial.pop_back();
  CHECK_THROWS_AS(attach_scores(d, partial), DataError);
}

TEST_CASE("zero LR scores one half everywhere and scoring is repeatable") {
  const Dataset d = test::synthetic_dataset(200, 7);
  const auto p = init_params(ModelKind::kLR, d.schema, {});
  const auto a = infer_scores(p, d);
  for (const auto& e : a) CHECK(e.y_last == 0.5);
  SplitMix64 rng(1);
  const auto q = test::random_grad_case(ModelKind::kDCN, rng).params;
  const Dataset g = [&] {
    Dataset out;
    out.schema = test::gradcheck_schema();
    for (std::uint64_t i = 0; i < 20000; ++i) {
      EncodedInstance x;
      for (std::size_t f = 0; f < out.schema.size(); ++f) {
        x.indices.push_back(out.schema.base(f) + rng.below(out.schema.field(f).buckets));
        x.values.push_back(1.0);
      }
      x.row_id = i;
      out.rows.push_back(std::move(x));
    }
    return out;
  }();
  const auto parallel = predict(q, g);
  std::vector<double> serial;
  {
    ScopedEnv env("RELOOP_THREADS", "1");
    CHECK(worker_threads() == 1);
    serial = predict(q, g);
  }
  CHECK(parallel == serial);
}

TEST_CASE("static prior trains on the leading 90% and scores every training row") {
  const Dataset all = test::synthetic_dataset(100000, 8);
  const Dataset train = all.slice(0, 100000);
  const Dataset small = test::synthetic_dataset(2000, 9);
  auto cfg = small_config(LoopMode::kStaticPrior, ModelKind::kLR);
  cfg.losses = {LossConfig{}, LossConfig{LossKind::kReLoop, 0.2}};
  const auto state = run_static_prior(cfg, train, small, small);
  REQUIRE(state.versions.size() == 4);
  const auto& prior = state.versions[0];
  CHECK(prior.phase == "prior");
  CHECK(prior.train_begin == 0);
  CHECK(prior.train_end == 90000);
  for (std::size_t v = 1; v < state.versions.size(); ++v) {
    CHECK(state.versions[v].train_end == 100000);
    CHECK(state.versions[v].rows_with_y_last == 100000);
    CHECK(state.versions[v].y_last_from_version == 0);
  }
  REQUIRE(state.score_logs.size() == 1);
  CHECK(state.score_logs[0].size() == 100000);
  REQUIRE(state.report.size() == 4);
  CHECK(state.report[0].phase == "prior");
  CHECK(state.report[1].phase == "baseline");
  CHECK(state.report[2].phase == "current");
}

TEST_CASE("static loop with ce reproduces a plain training run") {
  const Dataset d = test::synthetic_dataset(3000, 10);
  auto cfg = small_config(LoopMode::kStaticPrior);
  cfg.train.seed = 3;
  const auto state = run_static_prior(cfg, d.slice(0, 2400), d.slice(2400, 2700), d.slice(2700, 3000));
  ModelHyper h = cfg.hyper;
  h.seed = 3;
  auto plain = init_params(cfg.model, d.schema, h);
  TrainConfig tc = cfg.train;
  train_epochs(plain, d.slice(0, 2400), tc);
  CHECK(params_equal(state.versions[2].params, plain));
  CHECK(params_equal(state.versions[1].params, plain));
  CHECK(state.report[2].metrics.auc == evaluate_model(plain, d.slice(2700, 3000)).auc);
}

TEST_CASE("continual loop structure and causality") {
  const auto ws = windows(800, 6, 0.3, 12);
  for (bool warm : {true, false}) {
    auto cfg = small_config(LoopMode::kContinual);
    cfg.warm_start = warm;
    cfg.losses = {LossConfig{}, LossConfig{LossKind::kReLoop, 0.2}};
    const auto state = run_continual(cfg, ws);
    REQUIRE(state.versions.size() == 12);
    // Each chain: 6 version rows plus a mean row.
    REQUIRE(state.report.size() == 14);
    for (std::size_t chain = 0; chain < 2; ++chain) {
      for (int v = 0; v < 6; ++v) {
        const auto& mv = state.versions[chain * 6 + static_cast<std::size_t>(v)];
        CHECK(mv.version == v + 1);
        CHECK(mv.train_window == v);
        if (v == 0) {
          CHECK_FALSE(mv.y_last_from_version);
          continue;
        }
        CHECK(*mv.y_last_from_version == v);
        CHECK(*mv.y_last_from_window < mv.train_window);
        CHECK(mv.rows_with_y_last == mv.train_end);
        // Scores came from the previous version on the window being trained.
        const auto& prev = state.versions[chain * 6 + static_cast<std::size_t>(v) - 1];
        const auto expect = infer_scores(prev.params, ws[static_cast<std::size_t>(v)]);
        const auto& got = state.score_logs[chain * 5 + static_cast<std::size_t>(v) - 1];
        REQUIRE(got.size() == expect.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].y_last == expect[i].y_last);
      }
      for (int r = 0; r < 5; ++r) {
        const auto& row = state.report[chain * 7 + static_cast<std::size_t>(r)];
        CHECK(row.phase == "next_window");
        CHECK(*row.window == r + 1);
      }
      CHECK(state.report[chain * 7 + 5].phase == "holdout");
      CHECK(state.report[chain * 7 + 6].phase == "mean");
      CHECK_FALSE(state.report[chain * 7 + 6].version);
    }
    CHECK(state.versions[5].train_end == 640);
  }
}

TEST_CASE("two-window continual loop is train then incremental train") {
  const auto ws = windows(1000, 2, 0.0, 13);
  auto cfg = small_config(LoopMode::kContinual);
  cfg.train.seed = 21;
  const auto state = run_continual(cfg, ws);
  REQUIRE(state.versions.size() == 2);
  ModelHyper h = cfg.hyper;
  h.seed = 21;
  auto p = init_params(cfg.model, ws[0].schema, h);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(21, 1);
  train_epochs(p, ws[0], tc);
  CHECK(params_equal(state.versions[0].params, p));
  tc.seed = derive_seed(21, 2);
  train_epochs(p, ws[1].slice(0, 800), tc);
  CHECK(params_equal(state.versions[1].params, p));
}

TEST_CASE("loop writes checkpoints and a report") {
  test::TempDir dir("loop_io");
  const auto ws = windows(300, 3, 0.3, 14);
  auto cfg = small_config(LoopMode::kContinual);
  cfg.checkpoint_dir = dir / "ckpt";
  cfg.losses = {LossConfig{LossKind::kKD, 0.0}};
  const auto state = run_continual(cfg, ws);
  CHECK(std::filesystem::exists(dir / "ckpt" / "kd_v3.ckpt"));
  CHECK(std::filesystem::exists(dir / "ckpt" / "kd_scores_w001.csv"));
  CHECK(params_equal(load_checkpoint(dir / "ckpt" / "kd_v3.ckpt"), state.versions.back().params));
  write_loop_report(dir / "r.csv", state);
  const std::string text = test::slurp(dir / "r.csv");
  CHECK(text.rfind("version,window,phase,loss_kind,alpha,auc,logloss\n1,1,next_window,kd,0,", 0) == 0);
  CHECK(text.find("\n,,mean,kd,0,") != std::string::npos);
}

TEST_CASE("loop configuration errors") {
  auto cfg = small_config(LoopMode::kContinual);
  cfg.losses.clear();
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = small_config(LoopMode::kStaticPrior);
  cfg.prior_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  const auto ws = windows(100, 1, 0.0, 15);
  CHECK_THROWS_AS(run_continual(small_config(LoopMode::kContinual), ws), DataError);
}

TEST_CASE("static reloop keeps pace with the ce baseline across seeds", "[empirical]") {
  double ce = 0, rl = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    SyntheticSpec spec;
    spec.n_rows = 20000;
    spec.seed = 500 + s;
    SyntheticWorld world(spec);
    const Dataset d = encode(FeatureSchema::uniform(world.field_names(), 1000), world.sample_window(0));
    LoopConfig cfg;
    cfg.train.seed = s;
    cfg.losses = {LossConfig{LossKind::kReLoop, 0.2}};
    const auto state = run_static_prior(cfg, d.slice(0, 16000), d.slice(16000, 18000), d.slice(18000, 20000));
    ce += state.report[1].metrics.auc;
    rl += state.report[2].metrics.auc;
  }
  INFO("mean ce " << ce / 10 << " reloop " << rl / 10);
  CHECK(rl / 10 >= ce / 10 - 0.002);
}
