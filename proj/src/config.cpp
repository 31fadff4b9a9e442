#include "pzero/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace pzero {

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  RunConfig config;
  config.merge_file(path);
  return config;
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.resize(comment);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      fail(path + " line " + std::to_string(line_no) + ": expected key=value");
    }
    values_[trim(trimmed.substr(0, eq))] = trim(trimmed.substr(eq + 1));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int64_t RunConfig::get_int(const std::string& key, int64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stoll(it->second);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stod(it->second);
}

uint64_t RunConfig::seed() const {
  if (has("seed")) return static_cast<uint64_t>(get_int("seed", 1));
  if (const char* env = std::getenv("PZERO_SEED")) {
    return static_cast<uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return 1;
}

ModelConfig RunConfig::model_config(int vocab_size) const {
  ModelConfig config;
  config.d_model = static_cast<int>(get_int("D", 64));
  config.t_max = static_cast<int>(get_int("T_max", 128));
  config.layers = static_cast<int>(get_int("layers", 2));
  config.heads = static_cast<int>(get_int("heads", 2));
  config.ff_dim = static_cast<int>(get_int("ff_dim", 4 * config.d_model));
  config.vocab_size = vocab_size;
  config.validate();
  return config;
}

Schedule RunConfig::schedule(Schedule::Kind default_kind) const {
  Schedule schedule;
  schedule.kind = default_kind;
  if (has("lr_schedule")) {
    const std::string kind = get("lr_schedule", "");
    if (kind == "inverse_sqrt") {
      schedule.kind = Schedule::Kind::InverseSqrt;
    } else if (kind == "finetune_default") {
      schedule.kind = Schedule::Kind::FinetuneDefault;
    } else {
      fail("unknown lr_schedule: " + kind);
    }
  }
  schedule.max_lr = get_double("max_lr", 1e-3);
  schedule.warmup_steps = static_cast<int>(get_int("warmup_steps", 100));
  return schedule;
}

TrainOptions RunConfig::train_options(Schedule::Kind default_kind) const {
  TrainOptions options;
  options.batch_size = static_cast<int>(get_int("batch", 32));
  options.updates = get_int("updates", 2000);
  options.epochs = static_cast<int>(get_int("epochs", 200));
  options.patience = static_cast<int>(get_int("patience", 20));
  options.eval_every = static_cast<int>(get_int("eval_every", 100));
  options.threads = static_cast<int>(get_int("threads", 2));
  options.seed = seed();
  options.schedule = schedule(default_kind);
  options.clip_norm = get_double("clip_norm", 1.0);
  options.mask_rate = get_double("mask_rate", 0.15);
  return options;
}

uint64_t RunConfig::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [key, value] : values_) {
    feed(key);
    feed("=");
    feed(value);
    feed("\n");
  }
  return h;
}

std::string RunConfig::hash_hex() const {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash()));
  return buffer;
}

}  // namespace pzero
