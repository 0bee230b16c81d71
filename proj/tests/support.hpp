// Copyright (c) 2026, ReLoop Lab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "reloop/features.hpp"
#include "reloop/rng.hpp"

namespace reloop::test {

// Fresh scratch directory under the system temp dir, removed on exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("reloop_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Small synthetic dataset encoded against a uniform schema.
inline Dataset synthetic_dataset(std::uint64_t rows, std::uint64_t seed, std::uint32_t fields = 4,
                                 std::uint32_t hash_buckets = 50) {
  SyntheticSpec spec;
  spec.n_fields = fields;
  spec.buckets_per_field = 20;
  spec.n_rows = rows;
  spec.seed = seed;
  SyntheticWorld world(spec);
  return encode(FeatureSchema::uniform(world.field_names(), hash_buckets), world.sample_window(0));
}

}  // namespace reloop::test
