#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "pzero/model.hpp"
#include "pzero/train.hpp"

namespace pzero {

// Flat key=value run configuration. Files hold one pair per line; '#' starts
// a comment. Flag overrides win over file values. The config hash covers the
// effective (merged) pairs and is embedded in every artifact.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig from_file(const std::string& path);
  void merge_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;

  // "seed" key, else the PZERO_SEED environment variable, else 1.
  uint64_t seed() const;

  ModelConfig model_config(int vocab_size) const;
  Schedule schedule(Schedule::Kind default_kind) const;
  TrainOptions train_options(Schedule::Kind default_kind) const;

  // FNV-1a over the sorted canonical key=value serialization.
  uint64_t hash() const;
  std::string hash_hex() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pzero
