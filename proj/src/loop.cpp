// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "reloop/loop.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>
#include <unordered_map>

#include "reloop/error.hpp"
#include "reloop/rng.hpp"

namespace reloop {

// ---------------------------------------------------------------------------
// Scoring

std::size_t worker_threads() {
  if (const char* env = std::getenv("RELOOP_THREADS"); env && *env) {
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), n);
    if (ec == std::errc() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> predict(const PredictorParams& params, const Dataset& data) {
  std::vector<double> out(data.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    ForwardTrace trace;
    for (std::size_t i = begin; i < end; ++i) out[i] = forward(params, data.rows[i], trace).y_hat;
  };
  const std::size_t threads = std::min(worker_threads(), std::max<std::size_t>(1, data.size() / 4096));
  if (threads <= 1) {
    work(0, data.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (data.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(data.size(), b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return out;
}

ScoreLog infer_scores(const PredictorParams& params, const Dataset& data) {
  if (params.schema_digest != data.schema.digest())
    throw CheckpointError(CheckpointError::Kind::kSchemaDigestMismatch,
                          "schema digest mismatch between model and dataset");
  const auto scores = predict(params, data);
  ScoreLog log(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) log[i] = {data.rows[i].row_id, clip_probability(scores[i])};
  return log;
}

void write_score_log(const std::filesystem::path& path, const ScoreLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write score log " + path.string());
  out << "row_id,y_last\n";
  char buf[64];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%llu,%.9f\n", static_cast<unsigned long long>(e.row_id), e.y_last);
    out << buf;
  }
}

ScoreLog read_score_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open score log " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("row_id,y_last", 0) != 0)
    throw DataError(path.string() + ": expected header 'row_id,y_last'");
  ScoreLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    ScoreEntry e;
    bool ok = comma != std::string::npos;
    if (ok) {
      auto r1 = std::from_chars(line.data(), line.data() + comma, e.row_id);
      auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), e.y_last);
      ok = r1.ec == std::errc() && r1.ptr == line.data() + comma && r2.ec == std::errc() &&
           r2.ptr == line.data() + line.size() && e.y_last >= 0.0 && e.y_last <= 1.0;
    }
    if (!ok) throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed score row '" + line + "'");
    log.push_back(e);
  }
  return log;
}

void attach_scores(Dataset& data, const ScoreLog& log) {
  std::unordered_map<std::uint64_t, double> by_id;
  by_id.reserve(log.size());
  for (const auto& e : log)
    if (!by_id.emplace(e.row_id, e.y_last).second)
      throw DataError("score log lists row_id " + std::to_string(e.row_id) + " more than once");
  for (auto& row : data.rows) {
    auto it = by_id.find(row.row_id);
    if (it == by_id.end()) throw DataError("score log has no entry for row_id " + std::to_string(row.row_id));
    row.y_last = clip_probability(it->second);
  }
}

MetricsReport evaluate_model(const PredictorParams& params, const Dataset& data) {
  const auto scores = predict(params, data);
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.rows[i].label;
  return evaluate(labels, scores);
}

// ---------------------------------------------------------------------------
// Loop driver

void LoopConfig::validate() const {
  train.validate();
  if (losses.empty()) throw UsageError("loop: at least one loss is required");
  for (const auto& l : losses) l.validate();
  if (!(prior_fraction > 0.0 && prior_fraction < 1.0)) throw UsageError("prior_fraction must lie in (0,1)");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw UsageError("holdout_fraction must lie in (0,1)");
}

std::string loss_tag(const LossConfig& loss) {
  std::string tag(to_string(loss.kind));
  if (loss.kind == LossKind::kReLoop) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_a%g", loss.alpha);
    tag += buf;
  }
  return tag;
}

namespace {

bool same_loss(const LossConfig& a, const LossConfig& b) { return a.kind == b.kind && a.alpha == b.alpha; }

// Reported alpha: only meaningful for the reloop blend.
double reported_alpha(const LossConfig& loss) { return loss.kind == LossKind::kReLoop ? loss.alpha : 0.0; }

std::size_t prefix_rows(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

void maybe_save(const LoopConfig& cfg, ModelVersion& v, const std::string& name) {
  if (cfg.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  v.checkpoint = cfg.checkpoint_dir / (name + ".ckpt");
  save_checkpoint(v.params, v.checkpoint);
}

void maybe_save_scores(const LoopConfig& cfg, const ScoreLog& log, const std::string& name) {
  if (cfg.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  write_score_log(cfg.checkpoint_dir / (name + ".csv"), log);
}

std::size_t count_y_last(const Dataset& d) {
  std::size_t n = 0;
  for (const auto& r : d.rows) n += r.y_last.has_value();
  return n;
}

TrainConfig with_loss(const TrainConfig& base, const LossConfig& loss, std::uint64_t seed) {
  TrainConfig t = base;
  t.loss = loss;
  t.seed = seed;
  return t;
}

}  // namespace

std::optional<MetricsReport> LoopState::summary(const LossConfig& loss) const {
  MetricsReport acc;
  std::size_t n = 0;
  for (const auto& row : report) {
    if (!same_loss(row.loss, loss)) continue;
    const bool static_current = row.phase == "current";
    const bool continual = (row.phase == "next_window" || row.phase == "holdout") && row.version && *row.version >= 2;
    if (!static_current && !continual) continue;
    acc.auc += row.metrics.auc;
    acc.logloss += row.metrics.logloss;
    acc.n += row.metrics.n;
    acc.n_pos += row.metrics.n_pos;
    acc.n_neg += row.metrics.n_neg;
    ++n;
  }
  if (n == 0) return std::nullopt;
  acc.auc /= static_cast<double>(n);
  acc.logloss /= static_cast<double>(n);
  return acc;
}

LoopState run_static_prior(const LoopConfig& cfg, const Dataset& train_in, const Dataset& valid,
                           const Dataset& test) {
  cfg.validate();
  if (train_in.empty() || valid.empty() || test.empty()) throw DataError("static prior: every split must be nonempty");
  if (!(train_in.schema == test.schema) || !(train_in.schema == valid.schema))
    throw DataError("static prior: splits use different schemas");
  const std::uint64_t seed = cfg.train.seed;
  ModelHyper hyper = cfg.hyper;
  hyper.seed = seed;
  LoopState state;

  // (1) Prior model: CE on the first prior_fraction of the training rows.
  const std::size_t n_prior = prefix_rows(cfg.prior_fraction, train_in.size());
  if (n_prior == 0) throw DataError("static prior: prior subset is empty");
  Dataset prior_data = train_in.slice(0, n_prior);
  for (auto& r : prior_data.rows) r.y_last.reset();
  ModelVersion prior;
  prior.version = 0;
  prior.phase = "prior";
  prior.train_begin = 0;
  prior.train_end = n_prior;
  prior.params = init_params(cfg.model, train_in.schema, hyper);
  train_epochs(prior.params, prior_data, with_loss(cfg.train, LossConfig{}, seed));
  maybe_save(cfg, prior, "prior");

  // (2) Prior scores the whole training set.
  Dataset train = train_in;
  ScoreLog log = infer_scores(prior.params, train);
  attach_scores(train, log);
  maybe_save_scores(cfg, log, "prior_scores");
  state.score_logs.push_back(std::move(log));
  state.report.push_back({0, 0, "prior", LossConfig{}, evaluate_model(prior.params, test)});
  state.versions.push_back(std::move(prior));

  auto train_current = [&](const std::string& phase, const LossConfig& loss) {
    ModelVersion v;
    v.version = 1;
    v.phase = phase;
    v.loss = loss;
    v.train_begin = 0;
    v.train_end = train.size();
    v.rows_with_y_last = count_y_last(train);
    v.y_last_from_version = 0;
    v.params = init_params(cfg.model, train.schema, hyper);
    train_epochs(v.params, train, with_loss(cfg.train, loss, seed));
    maybe_save(cfg, v, phase == "baseline" ? "baseline" : "current_" + loss_tag(loss));
    state.report.push_back({1, 0, phase, loss, evaluate_model(v.params, test)});
    state.versions.push_back(std::move(v));
  };

  // (3) CE baseline and the configured current models on the full set.
  train_current("baseline", LossConfig{});
  for (const auto& loss : cfg.losses) train_current("current", loss);
  return state;
}

LoopState run_continual(const LoopConfig& cfg, const std::vector<Dataset>& windows) {
  cfg.validate();
  if (windows.size() < 2) throw DataError("continual loop needs at least two windows");
  for (const auto& w : windows) {
    if (w.empty()) throw DataError("continual loop: empty window");
    if (!(w.schema == windows.front().schema)) throw DataError("continual loop: windows use different schemas");
  }
  const std::size_t T = windows.size();
  const std::uint64_t seed = cfg.train.seed;
  ModelHyper hyper = cfg.hyper;
  hyper.seed = seed;

  // Last window: head is trained on by the final version, tail is held out.
  const std::size_t last_n = windows.back().size();
  const std::size_t last_head = last_n - std::max<std::size_t>(1, prefix_rows(cfg.holdout_fraction, last_n));
  if (last_head == 0) throw DataError("continual loop: last window too small for a holdout split");
  const Dataset holdout = windows.back().slice(last_head, last_n);

  LoopState state;
  for (const auto& loss : cfg.losses) {
    const std::string tag = loss_tag(loss);
    std::vector<MetricsReport> reports;

    ModelVersion prev;
    prev.version = 1;
    prev.phase = "next_window";
    prev.loss = loss;
    prev.train_window = 0;
    prev.train_end = windows[0].size();
    prev.params = init_params(cfg.model, windows[0].schema, hyper);
    {
      Dataset w0 = windows[0];
      for (auto& r : w0.rows) r.y_last.reset();
      train_epochs(prev.params, w0, with_loss(cfg.train, LossConfig{}, derive_seed(seed, 1)));
    }
    maybe_save(cfg, prev, tag + "_v1");
    state.report.push_back({1, 1, "next_window", loss, evaluate_model(prev.params, windows[1])});

    for (std::size_t t = 1; t < T; ++t) {
      // Simulated online inference: version t scores window t before it is trained on.
      Dataset data = windows[t];
      ScoreLog log = infer_scores(prev.params, data);
      attach_scores(data, log);
      char name[64];
      std::snprintf(name, sizeof name, "%s_scores_w%03zu", tag.c_str(), t);
      maybe_save_scores(cfg, log, name);
      state.score_logs.push_back(std::move(log));
      const bool last = t + 1 == T;
      if (last) data = data.slice(0, last_head);

      ModelVersion next;
      next.version = static_cast<int>(t) + 1;
      next.loss = loss;
      next.train_window = static_cast<int>(t);
      next.train_end = data.size();
      next.rows_with_y_last = count_y_last(data);
      next.y_last_from_version = prev.version;
      next.y_last_from_window = prev.train_window;
      next.params = cfg.warm_start ? prev.params : init_params(cfg.model, data.schema, hyper);
      train_epochs(next.params, data, with_loss(cfg.train, loss, derive_seed(seed, t + 1)));
      std::snprintf(name, sizeof name, "%s_v%zu", tag.c_str(), t + 1);
      maybe_save(cfg, next, name);

      next.phase = last ? "holdout" : "next_window";
      const Dataset& eval = last ? holdout : windows[t + 1];
      state.report.push_back({next.version, static_cast<int>(last ? t : t + 1), next.phase, loss,
                              evaluate_model(next.params, eval)});
      state.versions.push_back(std::move(prev));
      prev = std::move(next);
    }
    state.versions.push_back(std::move(prev));
    if (auto s = state.summary(loss)) state.report.push_back({std::nullopt, std::nullopt, "mean", loss, *s});
  }
  return state;
}

void write_loop_report(const std::filesystem::path& path, const LoopState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "version,window,phase,loss_kind,alpha,auc,logloss\n";
  char buf[256];
  for (const auto& r : state.report) {
    std::string version = r.version ? std::to_string(*r.version) : "";
    std::string window = r.window ? std::to_string(*r.window) : "";
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%g,%.9f,%.9f\n", version.c_str(), window.c_str(), r.phase.c_str(),
                  std::string(to_string(r.loss.kind)).c_str(), reported_alpha(r.loss), r.metrics.auc,
                  r.metrics.logloss);
    out << buf;
  }
}

}  // namespace reloop
