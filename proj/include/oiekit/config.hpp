#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oiekit/model.hpp"

namespace oiekit {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceSpec {
  std::string name;
  std::string file;
  bool has_confidence = true;
};

struct ScorerSpec {
  std::string kind = "rank";  // rank | model | external
  std::string checkpoint;
  std::string score_file;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string sentences;
  std::vector<SourceSpec> sources;  // listed order = source rank
  ScorerSpec scorer;
  ModelConfig model;
};

// Parses and validates a JSON config; all problems are reported together,
// field by field, before any work happens.
inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }

  PipelineConfig cfg;
  std::vector<std::string> errors;
  auto get_to = [&](const nlohmann::json& obj, const char* key, auto& out, bool required = false) {
    if (!obj.contains(key)) {
      if (required) errors.push_back(std::string("missing field: ") + key);
      return;
    }
    try {
      obj.at(key).get_to(out);
    } catch (const nlohmann::json::exception&) {
      errors.push_back(std::string("bad value for field: ") + key);
    }
  };

  get_to(j, "seed", cfg.seed);
  get_to(j, "jobs", cfg.jobs);
  get_to(j, "sentences", cfg.sentences);
  if (j.contains("sources")) {
    if (!j["sources"].is_array()) {
      errors.push_back("sources: must be an array");
    } else {
      for (std::size_t i = 0; i < j["sources"].size(); ++i) {
        const auto& s = j["sources"][i];
        SourceSpec spec;
        get_to(s, "name", spec.name, /*required=*/true);
        get_to(s, "file", spec.file, /*required=*/true);
        get_to(s, "has_confidence", spec.has_confidence);
        if (spec.name.empty()) errors.push_back("sources[" + std::to_string(i) + "]: empty name");
        cfg.sources.push_back(std::move(spec));
      }
    }
  }
  if (j.contains("scorer")) {
    const auto& s = j["scorer"];
    get_to(s, "kind", cfg.scorer.kind);
    get_to(s, "checkpoint", cfg.scorer.checkpoint);
    get_to(s, "score_file", cfg.scorer.score_file);
    if (cfg.scorer.kind != "rank" && cfg.scorer.kind != "model" && cfg.scorer.kind != "external") {
      errors.push_back("scorer.kind: must be rank, model, or external");
    }
  }
  if (j.contains("model")) {
    try {
      j.at("model").get_to(cfg.model);
    } catch (const nlohmann::json::exception&) {
      // Partial model sections are allowed; read known fields one by one.
      const auto& m = j["model"];
      get_to(m, "embed_dim", cfg.model.embed_dim);
      get_to(m, "hidden_dim", cfg.model.hidden_dim);
      get_to(m, "attn_dim", cfg.model.attn_dim);
      get_to(m, "learning_rate", cfg.model.learning_rate);
      get_to(m, "epochs", cfg.model.epochs);
      get_to(m, "clip_norm", cfg.model.clip_norm);
      get_to(m, "batch_size", cfg.model.batch_size);
      get_to(m, "seed", cfg.model.seed);
      get_to(m, "max_iters", cfg.model.max_iters);
      get_to(m, "max_len", cfg.model.max_len);
      get_to(m, "vocab_min_freq", cfg.model.vocab_min_freq);
      get_to(m, "max_input_len", cfg.model.max_input_len);
    }
  }

  if (cfg.model.embed_dim <= 0) errors.push_back("model.embed_dim: must be positive");
  if (cfg.model.hidden_dim <= 0) errors.push_back("model.hidden_dim: must be positive");
  if (cfg.model.attn_dim <= 0) errors.push_back("model.attn_dim: must be positive");
  if (cfg.model.epochs < 0) errors.push_back("model.epochs: must be non-negative");
  if (cfg.model.learning_rate <= 0) errors.push_back("model.learning_rate: must be positive");
  if (cfg.model.max_iters <= 0) errors.push_back("model.max_iters: must be positive");
  if (cfg.model.max_len <= 0) errors.push_back("model.max_len: must be positive");
  if (cfg.model.max_input_len < 2) errors.push_back("model.max_input_len: too small");
  if (cfg.jobs < 1) errors.push_back("jobs: must be at least 1");

  if (!errors.empty()) {
    std::string msg = path + ": config validation failed";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

// Existence check for the input files a command is about to read.
inline void require_files(const std::vector<std::string>& paths) {
  std::vector<std::string> missing;
  for (const auto& p : paths) {
    if (!p.empty() && !std::filesystem::exists(p)) missing.push_back(p);
  }
  if (!missing.empty()) {
    std::string msg = "missing input file(s):";
    for (const auto& p : missing) msg += ' ' + p;
    throw ConfigError(msg);
  }
}

}  // namespace oiekit
