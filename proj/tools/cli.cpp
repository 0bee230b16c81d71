// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "reloop/error.hpp"
#include "reloop/loop.hpp"

namespace reloop::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Option registry: every option is remembered so the resolved configuration
// can be written back out as a replayable manifest.

std::string to_text(const std::string& v) { return v; }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
template <typename T>
  requires std::is_integral_v<T>
std::string to_text(T v) {
  return std::to_string(v);
}

class Registry {
 public:
  explicit Registry(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& ref, const std::string& desc) {
    entries_.emplace_back(name, [&ref] { return to_text(ref); });
    return app_->add_option("--" + name, ref, desc);
  }

  std::string dump() const {
    std::string s;
    for (const auto& [k, f] : entries_) s += k + " = " + f() + "\n";
    return s;
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> entries_;
};

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ManifestInfo {
  std::string command;
  std::string config_digest = "none";
  std::string started_at;
};

// Volatile fields are written as comments.
void write_manifest(const fs::path& path, const ManifestInfo& info, const Registry& reg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "# reloop run manifest\n"
      << "# tool_version = " << kToolVersion << "\n"
      << "# config_digest = " << info.config_digest << "\n"
      << "# started_at = " << info.started_at << "\n"
      << "# finished_at = " << timestamp() << "\n"
      << "command = " << info.command << "\n"
      << reg.dump();
}

// ---------------------------------------------------------------------------
// key = value config files. Flags given on the command line win.

std::string strip(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path, std::string& digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  digest = buf;

  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const std::string t = strip(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    kv.emplace_back(strip(t.substr(0, eq)), strip(t.substr(eq + 1)));
  }
  return kv;
}

// Expands --config into explicit flags placed before the user's own flags.
std::vector<std::string> apply_config(const std::vector<std::string>& args, std::string& digest) {
  if (args.empty()) return args;
  std::vector<std::string> rest(args.begin() + 1, args.end());
  std::optional<std::string> config;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (rest[i] == "--config" && i + 1 < rest.size()) {
      config = rest[i + 1];
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i), rest.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (rest[i].rfind("--config=", 0) == 0) {
      config = rest[i].substr(9);
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config) return args;
  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(rest.begin(), rest.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> out{args.front()};
  for (const auto& [k, v] : read_config(*config, digest)) {
    if (k == "command") {
      if (v != args.front())
        throw UsageError("config file is for command '" + v + "', not '" + args.front() + "'");
      continue;
    }
    if (given(k)) continue;
    out.push_back("--" + k);
    out.push_back(v);
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!strip(cur).empty() || !out.empty()) out.push_back(strip(cur));
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": '" + s + "' is not a number");
  }
}

std::vector<std::uint32_t> parse_widths(const std::string& s) {
  std::vector<std::uint32_t> out;
  if (strip(s).empty()) return out;
  for (const auto& item : split_list(s)) {
    const double v = parse_number(item, "mlp-widths");
    if (v < 1 || v != std::floor(v)) throw UsageError("mlp-widths: entries must be positive integers");
    out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  const std::string name = p.filename().string();
  std::vector<fs::path> out;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && fnmatch(name.c_str(), entry.path().filename().c_str(), 0) == 0)
        out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw UsageError("no files match '" + pattern + "'");
  return out;
}

std::vector<std::string> csv_header_fields(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  auto cols = split_list(line);
  if (cols.empty() || cols.front() != "label") throw DataError(path.string() + ": header must start with 'label'");
  cols.erase(cols.begin());
  if (!cols.empty() && cols.back() == "y_last") cols.pop_back();
  return cols;
}

// Options shared by every command that trains models.
struct ModelOptions {
  std::string model = "deepfm";
  std::uint64_t seed = 0;
  std::uint32_t epochs = 5;
  std::uint32_t batch_size = 256;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::uint32_t embed_dim = 16;
  std::string mlp_widths = "64,32";
  std::uint32_t cross_layers = 2;
  std::string schema;
  std::uint32_t hash_buckets = 1000;

  void add_to(Registry& reg) {
    reg.add("model", model, "Backbone: lr|fm|mlp|deepfm|dcn");
    reg.add("seed", seed, "Seed for initialization and shuffling");
    reg.add("epochs", epochs, "Training epochs per model");
    reg.add("batch-size", batch_size, "Mini-batch size");
    reg.add("lr", lr, "Learning rate");
    reg.add("optimizer", optimizer, "sgd|adam");
    reg.add("embed-dim", embed_dim, "Embedding dimension");
    reg.add("mlp-widths", mlp_widths, "Comma-separated hidden widths");
    reg.add("cross-layers", cross_layers, "Cross layers (dcn)");
    reg.add("schema", schema, "Schema file (name,kind,buckets per line); default: header fields, categorical");
    reg.add("hash-buckets", hash_buckets, "Hash buckets per field when no schema file is given");
  }

  FeatureSchema resolve_schema(const fs::path& data) const {
    if (!schema.empty()) return FeatureSchema::load(schema);
    if (hash_buckets == 0) throw UsageError("hash-buckets must be positive");
    return FeatureSchema::uniform(csv_header_fields(data), hash_buckets);
  }

  ModelHyper hyper() const {
    ModelHyper h;
    h.embed_dim = embed_dim;
    h.mlp_widths = parse_widths(mlp_widths);
    h.n_cross_layers = cross_layers;
    h.seed = seed;
    return h;
  }

  TrainConfig train_config(const LossConfig& loss) const {
    TrainConfig t;
    t.batch_size = batch_size;
    t.epochs = epochs;
    t.seed = seed;
    t.loss = loss;
    t.optimizer.kind = parse_optimizer_kind(optimizer);
    t.optimizer.lr = lr;
    t.validate();
    return t;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_metrics_csv(const fs::path& path, const MetricsReport& m) {
  write_text(path, MetricsReport::csv_header() + "\n" + m.csv_line() + "\n");
}

bool needs_any_y_last(const Dataset& d) {
  return std::any_of(d.rows.begin(), d.rows.end(), [](const EncodedInstance& r) { return !r.y_last; });
}

// Splits a single file 8:1:1 by row order into train / valid / test.
struct Splits {
  Dataset train, valid, test;
};

Splits split_811(const Dataset& all) {
  const std::size_t n = all.size();
  const std::size_t a = n * 8 / 10, b = n * 9 / 10;
  if (a == 0 || b == a || b == n) throw DataError("dataset too small for an 8:1:1 split");
  return {all.slice(0, a), all.slice(a, b), all.slice(b, n)};
}

// ---------------------------------------------------------------------------
// Commands

struct GenData {
  std::string out;
  std::uint64_t rows = 50000;
  std::uint32_t fields = 8;
  std::uint32_t buckets = 100;
  std::uint32_t latent_dim = 4;
  std::uint32_t windows = 1;
  double drift = 0.0;
  std::uint64_t seed = 42;
  std::uint32_t hash_buckets = 1000;

  void add_to(Registry& reg) {
    reg.add("out", out, "Output directory")->required();
    reg.add("rows", rows, "Rows per window");
    reg.add("fields", fields, "Number of categorical fields");
    reg.add("buckets", buckets, "Distinct tokens per field");
    reg.add("latent-dim", latent_dim, "Latent dimension of the hidden ground truth");
    reg.add("windows", windows, "Number of windows");
    reg.add("drift", drift, "Fraction of ground-truth tokens re-drawn between windows");
    reg.add("seed", seed, "Generator seed");
    reg.add("hash-buckets", hash_buckets, "Hash buckets per field in the emitted schema.txt");
  }

  int run(std::ostream& out_stream) const {
    if (rows == 0) throw UsageError("--rows must be positive");
    if (fields == 0 || buckets == 0 || latent_dim == 0 || windows == 0 || hash_buckets == 0)
      throw UsageError("--fields, --buckets, --latent-dim, --windows and --hash-buckets must be positive");
    if (!(drift >= 0.0 && drift <= 1.0)) throw UsageError("--drift must lie in [0,1]");
    SyntheticSpec spec{fields, buckets, latent_dim, rows, seed, windows, drift};
    SyntheticWorld world(spec);
    std::vector<RawTable> tables;
    for (std::uint32_t w = 0; w < windows; ++w) tables.push_back(world.sample_window(w));
    const auto paths = write_windows(out, tables);
    FeatureSchema::uniform(world.field_names(), hash_buckets).save(fs::path(out) / "schema.txt");
    for (const auto& p : paths) out_stream << p.string() << "\n";
    return kExitOk;
  }
};

struct Train {
  std::string data, valid, prior_scores, out, loss = "ce";
  double alpha = 0.0;
  ModelOptions model;

  void add_to(Registry& reg) {
    reg.add("data", data, "Training CSV")->required();
    reg.add("valid", valid, "Validation CSV")->required();
    reg.add("loss", loss, "ce|reloop|kd");
    reg.add("alpha", alpha, "Self-correction weight for --loss reloop");
    reg.add("prior-scores", prior_scores, "Score log (row_id,y_last) from the previous model");
    reg.add("out", out, "Output directory")->required();
    model.add_to(reg);
  }

  int run(std::ostream& out_stream) const {
    LossConfig lc{parse_loss_kind(loss), alpha};
    lc.validate();
    const FeatureSchema schema = model.resolve_schema(data);
    Dataset train = ingest_csv(data, schema);
    if (!prior_scores.empty()) attach_scores(train, read_score_log(prior_scores));
    if (lc.needs_y_last() && needs_any_y_last(train))
      throw UsageError("--loss " + loss + " needs the previous model's scores: pass --prior-scores FILE or add a y_last column to --data");
    const Dataset valid_ds = ingest_csv(valid, schema);
    const TrainConfig tc = model.train_config(lc);

    PredictorParams params = init_params(parse_model_kind(model.model), schema, model.hyper());
    const TrainLog log = train_epochs(params, train, tc);
    fs::create_directories(out);
    save_checkpoint(params, fs::path(out) / "model.ckpt");
    const MetricsReport m = evaluate_model(params, valid_ds);
    write_metrics_csv(fs::path(out) / "metrics.csv", m);
    std::string tl = "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.9f\n", e, log.epoch_loss[e]);
      tl += buf;
    }
    write_text(fs::path(out) / "train_log.csv", tl);
    out_stream << m.pretty() << "\n";
    return kExitOk;
  }
};

struct Score {
  std::string data, checkpoint, out;
  std::string schema;
  std::uint32_t hash_buckets = 1000;

  void add_to(Registry& reg) {
    reg.add("data", data, "CSV to score")->required();
    reg.add("checkpoint", checkpoint, "Model checkpoint")->required();
    reg.add("out", out, "Score log to write (row_id,y_last)")->required();
    reg.add("schema", schema, "Schema file");
    reg.add("hash-buckets", hash_buckets, "Hash buckets per field when no schema file is given");
  }

  int run(std::ostream&) const {
    ModelOptions mo;
    mo.schema = schema;
    mo.hash_buckets = hash_buckets;
    const FeatureSchema s = mo.resolve_schema(data);
    const PredictorParams p = load_checkpoint(checkpoint, s);
    const fs::path target(out);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    write_score_log(target, infer_scores(p, ingest_csv(data, s)));
    return kExitOk;
  }
};

struct Eval {
  std::string scores, labels, data, checkpoint, schema;
  std::uint32_t hash_buckets = 1000;

  void add_to(Registry& reg) {
    reg.add("scores", scores, "Score log (row_id,y_last)");
    reg.add("labels", labels, "CSV whose label column pairs with --scores by row number");
    reg.add("data", data, "CSV to evaluate --checkpoint on");
    reg.add("checkpoint", checkpoint, "Model checkpoint");
    reg.add("schema", schema, "Schema file");
    reg.add("hash-buckets", hash_buckets, "Hash buckets per field when no schema file is given");
  }

  int run(std::ostream& out_stream) const {
    MetricsReport m;
    if (!scores.empty() || !labels.empty()) {
      if (scores.empty() || labels.empty()) throw UsageError("--scores and --labels go together");
      const RawTable t = read_csv_table(labels);
      const ScoreLog log = read_score_log(scores);
      std::vector<double> s(t.rows.size());
      std::vector<int> y(t.rows.size());
      std::vector<std::uint8_t> seen(t.rows.size(), 0);
      for (const auto& e : log) {
        if (e.row_id >= t.rows.size())
          throw DataError("score log row_id " + std::to_string(e.row_id) + " has no label row");
        s[e.row_id] = e.y_last;
        seen[e.row_id] = 1;
      }
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (!seen[i]) throw DataError("no score for label row " + std::to_string(i));
        y[i] = t.rows[i].label;
      }
      m = evaluate(y, s);
    } else if (!data.empty() && !checkpoint.empty()) {
      ModelOptions mo;
      mo.schema = schema;
      mo.hash_buckets = hash_buckets;
      const FeatureSchema sc = mo.resolve_schema(data);
      m = evaluate_model(load_checkpoint(checkpoint, sc), ingest_csv(data, sc));
    } else {
      throw UsageError("eval needs either --scores and --labels, or --data and --checkpoint");
    }
    out_stream << m.pretty() << "\n";
    return kExitOk;
  }
};

struct LossCurves {
  int y = 1;
  double y_last = 0.8;
  std::int64_t grid = 99;
  std::string out;

  void add_to(Registry& reg) {
    reg.add("y", y, "Label (0 or 1)")->required();
    reg.add("y-last", y_last, "Previous model's prediction")->required();
    reg.add("grid", grid, "Number of y_hat points strictly inside (0,1)");
    reg.add("out", out, "Output CSV")->required();
  }

  int run(std::ostream&) const {
    if (grid <= 0) throw UsageError("--grid must be positive");
    if (y != 0 && y != 1) throw UsageError("--y must be 0 or 1");
    if (!(y_last >= 0.0 && y_last <= 1.0)) throw UsageError("--y-last must lie in [0,1]");
    const fs::path target(out);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    write_text(target, loss_curves_csv(emit_loss_curves(y, y_last, static_cast<std::size_t>(grid))));
    return kExitOk;
  }
};

struct Loop {
  std::string mode = "static";
  std::string windows, data, out;
  double prior_fraction = 0.9;
  double holdout_fraction = 0.2;
  std::string loss = "ce";
  double alpha = 0.2;
  bool warm_start = false;
  ModelOptions model;

  void add_to(Registry& reg, bool with_loss) {
    reg.add("mode", mode, "static|continual");
    reg.add("windows", windows, "Glob of window CSVs (continual mode)");
    reg.add("data", data, "Single CSV split 8:1:1 (static mode)");
    reg.add("prior-fraction", prior_fraction, "Leading fraction of training rows for the prior model");
    reg.add("holdout-fraction", holdout_fraction, "Held-out tail of the last window (continual mode)");
    if (with_loss) {
      reg.add("loss", loss, "Comma-separated losses, e.g. ce,reloop,kd");
      reg.add("alpha", alpha, "Self-correction weight for reloop");
    }
    reg.add("warm-start", warm_start, "Initialize each version from its predecessor");
    reg.add("out", out, "Output directory")->required();
    model.add_to(reg);
  }

  LoopConfig config(const std::vector<LossConfig>& losses) const {
    LoopConfig cfg;
    if (mode == "static") {
      cfg.mode = LoopMode::kStaticPrior;
    } else if (mode == "continual") {
      cfg.mode = LoopMode::kContinual;
    } else {
      throw UsageError("--mode must be static or continual");
    }
    cfg.model = parse_model_kind(model.model);
    cfg.hyper = model.hyper();
    cfg.train = model.train_config(LossConfig{});
    cfg.losses = losses;
    cfg.warm_start = warm_start;
    cfg.prior_fraction = prior_fraction;
    cfg.holdout_fraction = holdout_fraction;
    cfg.checkpoint_dir = fs::path(out) / "checkpoints";
    cfg.validate();
    return cfg;
  }

  LoopState execute(const LoopConfig& cfg) const {
    if (cfg.mode == LoopMode::kStaticPrior) {
      if (data.empty()) throw UsageError("static mode needs --data");
      const FeatureSchema schema = model.resolve_schema(data);
      const Splits s = split_811(ingest_csv(data, schema));
      return run_static_prior(cfg, s.train, s.valid, s.test);
    }
    if (windows.empty()) throw UsageError("continual mode needs --windows");
    const auto paths = expand_glob(windows);
    const FeatureSchema schema = model.resolve_schema(paths.front());
    std::vector<Dataset> ws;
    for (const auto& p : paths) ws.push_back(ingest_csv(p, schema));
    return run_continual(cfg, ws);
  }

  int run(std::ostream& out_stream) const {
    std::vector<LossConfig> losses;
    for (const auto& name : split_list(loss)) losses.push_back({parse_loss_kind(name), alpha});
    const LoopConfig cfg = config(losses);
    const LoopState state = execute(cfg);
    write_loop_report(fs::path(out) / "loop_report.csv", state);
    for (const auto& l : losses)
      if (auto s = state.summary(l))
        out_stream << loss_tag(l) << ": auc=" << to_text(s->auc) << " logloss=" << to_text(s->logloss) << "\n";
    return kExitOk;
  }
};

struct SweepAlpha {
  std::string alphas = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  Loop loop;

  void add_to(Registry& reg) {
    reg.add("alphas", alphas, "Comma-separated alpha values in [0,1]");
    loop.add_to(reg, false);
  }

  int run(std::ostream& out_stream) const {
    std::vector<double> values;
    for (const auto& item : split_list(alphas)) {
      const double a = parse_number(item, "alphas");
      if (!(a >= 0.0 && a <= 1.0)) throw UsageError("--alphas: " + item + " is outside [0,1]");
      values.push_back(a);
    }
    if (values.empty()) throw UsageError("--alphas is empty");
    std::vector<LossConfig> losses;
    for (double a : values) losses.push_back({LossKind::kReLoop, a});
    // Continual mode needs an explicit CE chain as the baseline.
    const bool continual = loop.mode == "continual";
    if (continual) losses.insert(losses.begin(), LossConfig{});
    const LoopConfig cfg = loop.config(losses);
    const LoopState state = loop.execute(cfg);
    write_loop_report(fs::path(loop.out) / "loop_report.csv", state);

    std::optional<MetricsReport> baseline;
    if (continual) {
      baseline = state.summary(LossConfig{});
    } else {
      for (const auto& r : state.report)
        if (r.phase == "baseline") baseline = r.metrics;
    }
    std::string csv = "alpha,auc,logloss\n";
    char buf[128];
    for (double a : values) {
      const auto s = state.summary(LossConfig{LossKind::kReLoop, a});
      std::snprintf(buf, sizeof buf, "%g,%.9f,%.9f\n", a, s->auc, s->logloss);
      csv += buf;
    }
    write_text(fs::path(loop.out) / "alpha_sweep.csv", csv);
    std::snprintf(buf, sizeof buf, "auc,logloss\n%.9f,%.9f\n", baseline->auc, baseline->logloss);
    write_text(fs::path(loop.out) / "sweep_baseline.csv", buf);
    out_stream << csv;
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  ManifestInfo info;
  info.started_at = timestamp();
  std::vector<std::string> args;
  try {
    args = apply_config(raw_args, info.config_digest);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  CLI::App app{"ReLoop: self-correcting continual training for CTR models", "reloop"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenData gen;
  Train train;
  Score score;
  Eval eval;
  LossCurves curves;
  Loop loop;
  SweepAlpha sweep;

  auto* gen_cmd = app.add_subcommand("gen-data", "Generate synthetic click windows");
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  auto* score_cmd = app.add_subcommand("score", "Write a model's predictions as a score log");
  auto* eval_cmd = app.add_subcommand("eval", "Compute AUC and logloss");
  auto* curves_cmd = app.add_subcommand("loss-curves", "Tabulate CE, KD and self-correction losses");
  auto* loop_cmd = app.add_subcommand("loop", "Run the static-prior or continual training loop");
  auto* sweep_cmd = app.add_subcommand("sweep-alpha", "Run the loop for several alpha values");

  Registry gen_reg(gen_cmd), train_reg(train_cmd), score_reg(score_cmd), eval_reg(eval_cmd),
      curves_reg(curves_cmd), loop_reg(loop_cmd), sweep_reg(sweep_cmd);
  gen.add_to(gen_reg);
  train.add_to(train_reg);
  score.add_to(score_reg);
  eval.add_to(eval_reg);
  curves.add_to(curves_reg);
  loop.add_to(loop_reg, true);
  sweep.add_to(sweep_reg);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    auto with_manifest = [&](const char* name, const Registry& reg, const fs::path& manifest, auto&& body) {
      info.command = name;
      const int rc = body();
      if (rc == kExitOk) write_manifest(manifest, info, reg);
      return rc;
    };
    if (gen_cmd->parsed())
      return with_manifest("gen-data", gen_reg, fs::path(gen.out) / "run_manifest.txt", [&] { return gen.run(out); });
    if (train_cmd->parsed())
      return with_manifest("train", train_reg, fs::path(train.out) / "run_manifest.txt",
                           [&] { return train.run(out); });
    if (score_cmd->parsed())
      return with_manifest("score", score_reg, fs::path(score.out + ".manifest.txt"), [&] { return score.run(out); });
    if (eval_cmd->parsed()) return eval.run(out);
    if (curves_cmd->parsed())
      return with_manifest("loss-curves", curves_reg, fs::path(curves.out + ".manifest.txt"),
                           [&] { return curves.run(out); });
    if (loop_cmd->parsed())
      return with_manifest("loop", loop_reg, fs::path(loop.out) / "run_manifest.txt", [&] { return loop.run(out); });
    if (sweep_cmd->parsed())
      return with_manifest("sweep-alpha", sweep_reg, fs::path(sweep.loop.out) / "run_manifest.txt",
                           [&] { return sweep.run(out); });
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace reloop::cli
