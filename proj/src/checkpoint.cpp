// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "reloop/error.hpp"
#include "reloop/loop.hpp"

namespace reloop {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n)
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            "checkpoint truncated at byte " + std::to_string(in_.size()));
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool at_end() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

// Rebuilds the tensor shapes from the header fields alone.
PredictorParams shaped(ModelKind kind, std::uint32_t embed_dim, std::uint32_t n_fields, std::uint64_t n_features,
                       const std::vector<std::uint32_t>& widths, std::uint32_t n_cross) {
  PredictorParams p;
  p.kind = kind;
  p.hyper.embed_dim = embed_dim;
  p.hyper.mlp_widths = widths;
  p.hyper.n_cross_layers = n_cross;
  p.n_fields = n_fields;
  p.n_features = n_features;
  if (p.has_linear()) p.linear.resize(n_features);
  if (p.has_embeddings()) p.embeddings.resize(n_features * embed_dim);
  std::uint32_t width = p.concat_dim();
  if (p.has_mlp()) {
    for (auto out : widths) {
      DenseLayer l;
      l.in = width;
      l.out = out;
      l.weight.resize(std::size_t{out} * width);
      l.bias.resize(out);
      p.mlp.push_back(std::move(l));
      width = out;
    }
  }
  for (std::uint32_t c = 0; c < n_cross; ++c) p.cross.push_back({std::vector<double>(p.concat_dim()),
                                                                std::vector<double>(p.concat_dim())});
  if (kind == ModelKind::kMLP || kind == ModelKind::kDeepFM)
    p.head.resize(width);
  else if (kind == ModelKind::kDCN)
    p.head.resize(p.concat_dim() + (p.mlp.empty() ? 0 : width));
  return p;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const PredictorParams& params) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(params.kind));
  w.u64(params.schema_digest);
  w.u32(params.hyper.embed_dim);
  w.u32(params.n_fields);
  w.u64(params.n_features);
  w.u32(static_cast<std::uint32_t>(params.hyper.mlp_widths.size()));
  for (auto width : params.hyper.mlp_widths) w.u32(width);
  w.u32(params.hyper.n_cross_layers);
  w.u64(params.hyper.seed);
  for (auto block : params.blocks()) {
    w.u64(block.size());
    for (double v : block) w.f64(v);
  }
  return w.take();
}

PredictorParams deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw CheckpointError(CheckpointError::Kind::kBadMagic, "bad magic: not a ReLoop checkpoint");
  for (std::size_t i = 0; i < sizeof kCheckpointMagic; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::kVersionMismatch,
                          "checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(ModelKind::kDCN))
    throw CheckpointError(CheckpointError::Kind::kCorrupt, "unknown model kind " + std::to_string(kind));
  const std::uint64_t digest = r.u64();
  const std::uint32_t embed_dim = r.u32();
  const std::uint32_t n_fields = r.u32();
  const std::uint64_t n_features = r.u64();
  const std::uint32_t n_mlp = r.u32();
  if (n_mlp > 64) throw CheckpointError(CheckpointError::Kind::kCorrupt, "implausible MLP depth");
  std::vector<std::uint32_t> widths(n_mlp);
  for (auto& w : widths) w = r.u32();
  const std::uint32_t n_cross = r.u32();
  if (n_cross > 64) throw CheckpointError(CheckpointError::Kind::kCorrupt, "implausible cross depth");
  const std::uint64_t seed = r.u64();

  // Reject sizes the file cannot possibly hold before allocating.
  const std::uint64_t row_width = (kind == 0 ? 1 : 1 + std::uint64_t{embed_dim});
  if (n_features > r.remaining() / 8 / std::max<std::uint64_t>(1, row_width) + 1)
    throw CheckpointError(CheckpointError::Kind::kTruncated, "checkpoint truncated: parameter blobs missing");

  PredictorParams p = shaped(static_cast<ModelKind>(kind), embed_dim, n_fields, n_features, widths, n_cross);
  p.schema_digest = digest;
  p.hyper.seed = seed;
  for (auto block : p.blocks()) {
    const std::uint64_t count = r.u64();
    if (count != block.size())
      throw CheckpointError(CheckpointError::Kind::kCorrupt, "parameter block has " + std::to_string(count) +
                                                                 " values, header implies " +
                                                                 std::to_string(block.size()));
    r.need(count * 8);
    for (double& v : block) v = r.f64();
  }
  if (!r.at_end())
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          "checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  return p;
}

void save_checkpoint(const PredictorParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "short write to " + path.string());
}

PredictorParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

PredictorParams load_checkpoint(const std::filesystem::path& path, const FeatureSchema& schema) {
  PredictorParams p = load_checkpoint(path);
  if (p.schema_digest != schema.digest())
    throw CheckpointError(CheckpointError::Kind::kSchemaDigestMismatch,
                          "schema digest mismatch: checkpoint " + path.string() +
                              " was trained on a different feature schema");
  return p;
}

}  // namespace reloop
