#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolflood/attack.hpp"
#include "toolflood/embedding.hpp"
#include "toolflood/eval.hpp"
#include "toolflood/retrieval.hpp"

namespace toolflood {

struct ProviderSpec {
  std::string kind = "synthetic";  // synthetic | remote
  std::size_t dimension = 64;
  std::uint64_t seed = 0;          // synthetic only
  std::string model_id;            // remote only
  std::string base_url;
  std::string api_key_env = "TOOLFLOOD_API_KEY";
  std::size_t parallelism = 4;
  std::size_t max_retries = 3;
  std::size_t batch_size = 64;

  /// Wraps the provider in a CachingProvider when cache_path is non-empty.
  std::shared_ptr<EmbeddingProvider> create(
      const std::string& cache_path) const;
  std::string describe() const;  // "<provider>/<model>" id string
};

struct GeneratorSpec {
  std::string kind = "synthetic";  // synthetic | remote
  double coverage_prob = 0.5;
  double token_fraction = 0.8;
  std::string model_id;
  std::string base_url;
  std::string api_key_env = "TOOLFLOOD_API_KEY";
  double temperature = 1.0;
  std::size_t max_retries = 3;

  std::shared_ptr<ToolGenerator> create() const;
};

struct SelectorSpec {
  std::string kind = "argmax";  // argmax | remote
  std::string model_id;
  std::string base_url;
  std::string api_key_env = "TOOLFLOOD_API_KEY";
  std::size_t max_retries = 3;

  std::shared_ptr<Selector> create(
      std::shared_ptr<EmbeddingProvider> target_provider) const;
};

struct PathsSpec {
  std::string benign_catalog;
  std::string queries;
  std::string cache;  // empty = in-memory only
  std::string out_dir = "out";
};

struct CoveringSpec {
  std::optional<double> delta;   // fixed threshold; unset = calibrate
  double quantile_level = 0.05;
  std::size_t quota = 5;         // r
  bool allow_quota_above_k = false;
};

struct AttackSpec {
  std::string kind = "toolflood";  // toolflood | random-sybil | poisonedrag
  std::size_t iterations = 1000;
  std::size_t subset_size = 20;
  std::size_t tools_per_iteration = 10;
  std::size_t budget = 100;
  GeneratorSpec generator;
  double accept_delta = 0.3;       // poisonedrag acceptance (strict <)
  std::size_t max_attempts = 8;
};

struct EvalSpec {
  std::vector<SelectorSpec> selectors;
  std::vector<Defense> defenses = {Defense::kNone};
  double gen_fraction = 2.0 / 3.0;
  bool per_task = true;
  std::string classifier = "heuristic";  // pass-through | heuristic | remote
  std::string classifier_url;
  std::string classifier_api_key_env = "TOOLFLOOD_API_KEY";
};

struct TheorySpec {
  std::vector<std::size_t> iteration_sweep = {10, 100, 1000};
  std::size_t trials = 200;
  std::size_t quota = 2;
  std::size_t subset_size = 3;
  std::size_t tools_per_iteration = 4;
  std::size_t samples_per_query = 2000;
  double target_failure = 0.01;
  double slack = 0.05;
  std::size_t max_queries = 8;  // theory fixtures stay small
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  PathsSpec paths;
  ProviderSpec shadow;
  ProviderSpec target;
  RetrieverConfig retrieval;
  CoveringSpec covering;
  AttackSpec attack;
  EvalSpec eval;
  TheorySpec theory;

  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  /// Checks cross-field invariants and referenced paths; throws ConfigError.
  void validate(bool check_paths = true) const;

  std::shared_ptr<MetadataClassifier> create_classifier() const;
};

/// Parses either a plain config document or a manifest that embeds one
/// (object with "command" and "config" keys).
ExperimentConfig load_config_file(const std::string& path);

/// Compact provider override: "synthetic,dim=64,seed=3" or
/// "remote,model=...,url=http://...,dim=1536".
ProviderSpec parse_provider_override(const std::string& text,
                                     const ProviderSpec& base);

}  // namespace toolflood
