// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#include "reloop/features.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "reloop/error.hpp"

namespace reloop {

namespace {

std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

const char* kind_name(FieldKind kind) {
  return kind == FieldKind::kNumerical ? "numerical" : "categorical";
}

}  // namespace

// ---------------------------------------------------------------------------

FeatureSchema::FeatureSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  std::set<std::string> seen;
  base_.reserve(fields_.size());
  for (const auto& f : fields_) {
    if (f.name.empty()) throw UsageError("schema: empty field name");
    if (f.name == "label" || f.name == "y_last")
      throw UsageError("schema: field name '" + f.name + "' is reserved");
    if (!seen.insert(f.name).second) throw UsageError("schema: duplicate field name '" + f.name + "'");
    if (f.buckets < 1) throw UsageError("schema: field '" + f.name + "' needs at least one bucket");
    base_.push_back(n_features_);
    n_features_ += f.buckets;
  }
}

FeatureSchema FeatureSchema::uniform(const std::vector<std::string>& names, std::uint32_t buckets) {
  std::vector<FieldSpec> fields;
  fields.reserve(names.size());
  for (const auto& n : names) fields.push_back({n, FieldKind::kCategorical, buckets});
  return FeatureSchema(std::move(fields));
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path.string());
  std::vector<FieldSpec> fields;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim_cr(line);
    if (view.empty() || view.front() == '#') continue;
    auto parts = split_commas(view);
    if (parts.size() != 3)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected name,kind,buckets");
    FieldSpec spec;
    spec.name = std::string(parts[0]);
    if (parts[1] == "categorical") {
      spec.kind = FieldKind::kCategorical;
    } else if (parts[1] == "numerical") {
      spec.kind = FieldKind::kNumerical;
    } else {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown field kind '" +
                      std::string(parts[1]) + "'");
    }
    std::uint32_t b = 0;
    auto [ptr, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), b);
    if (ec != std::errc() || ptr != parts[2].data() + parts[2].size() || b == 0)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad bucket count");
    spec.buckets = b;
    fields.push_back(std::move(spec));
  }
  return FeatureSchema(std::move(fields));
}

void FeatureSchema::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write schema file " + path.string());
  for (const auto& f : fields_) out << f.name << ',' << kind_name(f.kind) << ',' << f.buckets << '\n';
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i)
    if (fields_[i].name == name) return i;
  return std::nullopt;
}

std::string FeatureSchema::canonical() const {
  std::string s;
  for (const auto& f : fields_) {
    s += f.name;
    s += ':';
    s += kind_name(f.kind);
    s += ':';
    s += std::to_string(f.buckets);
    s += ';';
  }
  return s;
}

std::uint64_t FeatureSchema::digest() const { return fnv1a64(canonical()); }

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  Dataset out;
  out.schema = schema;
  out.rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                  rows.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001B3ULL;
  }
  return state;
}

std::uint64_t fnv1a64(std::string_view bytes) { return fnv1a64(bytes, 0xCBF29CE484222325ULL); }

NumericBucket transform_numerical(std::optional<double> v) {
  NumericBucket out;
  if (!v || std::isnan(*v) || *v < 0.0) return out;
  if (std::isinf(*v)) {
    out.bucket = 1024;
    return out;
  }
  out.bucket = std::ilogb(*v + 1.0);
  return out;
}

std::string canonical_token(const FieldSpec& field, const std::optional<std::string>& cell) {
  if (!cell || cell->empty()) return std::string(kMissingToken);
  if (field.kind == FieldKind::kCategorical) return *cell;
  auto v = parse_double(*cell);
  if (!v) throw DataError("field '" + field.name + "': non-numeric value '" + *cell + "'");
  return std::to_string(transform_numerical(*v).bucket);
}

std::uint64_t hash_feature(const FeatureSchema& schema, std::size_t field, std::string_view token) {
  const FieldSpec& spec = schema.field(field);
  std::uint64_t h = fnv1a64(spec.name);
  h = fnv1a64("=", h);
  h = fnv1a64(token, h);
  return schema.base(field) + h % spec.buckets;
}

double clip_probability(double p, double eps) {
  if (p < eps) return eps;
  if (p > 1.0 - eps) return 1.0 - eps;
  return p;
}

EncodedInstance encode_row(const FeatureSchema& schema, const RawRow& row, std::uint64_t row_id) {
  if (row.cells.size() != schema.size())
    throw DataError("row " + std::to_string(row_id) + ": expected " + std::to_string(schema.size()) +
                    " feature cells, got " + std::to_string(row.cells.size()));
  EncodedInstance inst;
  inst.label = row.label;
  inst.row_id = row_id;
  inst.indices.reserve(schema.size());
  inst.values.reserve(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    inst.indices.push_back(hash_feature(schema, f, canonical_token(schema.field(f), row.cells[f])));
    inst.values.push_back(1.0);
  }
  if (row.y_last) inst.y_last = clip_probability(*row.y_last);
  return inst;
}

Dataset encode(const FeatureSchema& schema, const RawTable& table) {
  if (table.field_names.size() != schema.size())
    throw DataError("table has " + std::to_string(table.field_names.size()) + " feature columns, schema has " +
                    std::to_string(schema.size()));
  for (std::size_t f = 0; f < schema.size(); ++f)
    if (table.field_names[f] != schema.field(f).name)
      throw DataError("column " + std::to_string(f + 1) + " is '" + table.field_names[f] + "', schema expects '" +
                      schema.field(f).name + "'");
  Dataset ds;
  ds.schema = schema;
  ds.rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) ds.rows.push_back(encode_row(schema, table.rows[r], r));
  return ds;
}

// ---------------------------------------------------------------------------

RawTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  RawTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  auto header = split_commas(trim_cr(line));
  if (header.empty() || header.front() != "label")
    throw DataError(path.string() + ": header must start with 'label'");
  table.has_y_last = header.size() > 1 && header.back() == "y_last";
  const std::size_t n_fields = header.size() - 1 - (table.has_y_last ? 1 : 0);
  for (std::size_t i = 1; i <= n_fields; ++i) table.field_names.emplace_back(header[i]);
  const std::size_t width = header.size();

  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    ++row_number;
    auto view = trim_cr(line);
    if (view.empty()) continue;
    auto cells = split_commas(view);
    const std::string where = path.string() + ": row " + std::to_string(row_number);
    if (cells.size() != width)
      throw DataError(where + ": expected " + std::to_string(width) + " columns, got " + std::to_string(cells.size()));
    RawRow row;
    if (cells[0] == "1") {
      row.label = 1;
    } else if (cells[0] == "0") {
      row.label = 0;
    } else {
      throw DataError(where + ": label must be 0 or 1, got '" + std::string(cells[0]) + "'");
    }
    row.cells.reserve(n_fields);
    for (std::size_t i = 1; i <= n_fields; ++i) {
      if (cells[i].empty())
        row.cells.emplace_back(std::nullopt);
      else
        row.cells.emplace_back(std::string(cells[i]));
    }
    if (table.has_y_last) {
      auto v = parse_double(cells.back());
      if (!v || !(*v >= 0.0 && *v <= 1.0))
        throw DataError(where + ": y_last must be a number in [0,1], got '" + std::string(cells.back()) + "'");
      row.y_last = *v;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_csv_table(const std::filesystem::path& path, const RawTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "label";
  for (const auto& n : table.field_names) out << ',' << n;
  if (table.has_y_last) out << ",y_last";
  out << '\n';
  char buf[32];
  for (const auto& row : table.rows) {
    out << row.label;
    for (const auto& c : row.cells) {
      out << ',';
      if (c) out << *c;
    }
    if (table.has_y_last) {
      std::snprintf(buf, sizeof buf, "%.9f", row.y_last.value_or(0.0));
      out << ',' << buf;
    }
    out << '\n';
  }
}

Dataset ingest_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  return encode(schema, read_csv_table(path));
}

}  // namespace reloop
