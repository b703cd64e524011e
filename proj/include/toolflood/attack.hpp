#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "toolflood/catalog.hpp"
#include "toolflood/covering.hpp"
#include "toolflood/embedding.hpp"
#include "toolflood/rng.hpp"

namespace toolflood {

/// A generated (name, description) pair before it becomes a catalog Tool.
struct ToolDraft {
  std::string name;
  std::string description;

  std::string metadata_text() const { return name + ": " + description; }
};

/// Conditional metadata generator contract: given a query subset, produce
/// exactly `count` drafts. Implementations draw randomness only from the
/// passed-in stream.
class ToolGenerator {
 public:
  virtual ~ToolGenerator() = default;
  virtual const std::string& generator_id() const = 0;
  virtual bool deterministic() const = 0;
  virtual std::vector<ToolDraft> generate(const std::vector<Query>& subset,
                                          std::size_t count, Rng& rng) = 0;
};

struct GenerationConfig {
  std::size_t iterations = 1000;         // I
  std::size_t subset_size = 20;          // n
  std::size_t tools_per_iteration = 10;  // g
  std::uint64_t seed = 0;
};

struct CandidateRecord {
  ToolDraft draft;
  std::size_t iteration = 0;
  std::vector<std::string> subset_ids;
};

/// Aggregated Phase-1 output. Duplicate metadata texts are retained (the
/// pool always holds iterations * tools_per_iteration records); the dedup
/// index exists so selection never picks the same string twice.
class CandidatePool {
 public:
  void add(CandidateRecord record);
  const std::vector<CandidateRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// Indices of first occurrences, in pool order.
  const std::vector<std::size_t>& unique_indices() const { return unique_; }

  std::vector<std::string> metadata_texts() const;

 private:
  std::vector<CandidateRecord> records_;
  std::map<std::string, std::size_t> first_by_text_;
  std::vector<std::size_t> unique_;
};

/// n distinct queries, uniform over n-subsets.
std::vector<Query> sample_subset(const std::vector<Query>& queries,
                                 std::size_t n, Rng& rng);

/// The candidate-generation prompt with {g} substituted and the subset
/// rendered one query per line, each prefixed "- ".
std::string render_generation_prompt(const std::vector<Query>& subset,
                                     std::size_t count);

/// Monte Carlo candidate generation: `iterations` rounds of subset sampling
/// and conditional generation, pooled. A generator failure is retried; after
/// bounded retries the iteration is re-sampled (logged) so the pool size
/// stays exact.
CandidatePool phase1_generate(const std::vector<Query>& gen_queries,
                              const GenerationConfig& config,
                              ToolGenerator& generator);

/// Offline generator: per draft, each subset query contributes (with
/// probability `coverage_prob`) a sampled fraction of its tokens to the
/// description; the name comes from the subset's most frequent tokens. Under
/// the bag-of-tokens embedder this makes per-appearance cover probability
/// positive and tunable.
class SyntheticGenerator : public ToolGenerator {
 public:
  explicit SyntheticGenerator(double coverage_prob,
                              double token_fraction = 0.8);

  const std::string& generator_id() const override { return id_; }
  bool deterministic() const override { return true; }
  std::vector<ToolDraft> generate(const std::vector<Query>& subset,
                                  std::size_t count, Rng& rng) override;

 private:
  double coverage_prob_;
  double token_fraction_;
  std::string id_ = "synthetic";
};

/// Parse an LLM reply formatted as a numbered or bulleted list of
/// "name — description" pairs ("-", ":" and en/em dashes accepted as the
/// separator). Unparseable lines are skipped; at most `max_records` are
/// returned.
std::vector<ToolDraft> parse_generation_reply(const std::string& content,
                                              std::size_t max_records);

struct RemoteGeneratorConfig {
  std::string base_url;  // chat-completion style endpoint
  std::string model_id;
  std::string api_key_env = "TOOLFLOOD_API_KEY";
  double temperature = 1.0;
  std::size_t max_retries = 3;
  int timeout_seconds = 120;
};

/// POST {model, messages, temperature} -> {choices: [{message: {content}}]}
/// with the generation prompt as the user message. Replies beyond `count`
/// records are truncated; shortfalls are re-requested.
class RemoteLlmGenerator : public ToolGenerator {
 public:
  explicit RemoteLlmGenerator(RemoteGeneratorConfig config);

  const std::string& generator_id() const override { return id_; }
  bool deterministic() const override { return false; }
  std::vector<ToolDraft> generate(const std::vector<Query>& subset,
                                  std::size_t count, Rng& rng) override;

 private:
  RemoteGeneratorConfig config_;
  std::string id_ = "remote-llm";
};

struct ToolFloodResult {
  Catalog adversarial;
  GreedyTrace trace;
};

/// Full two-phase attack: Phase-1 pool, then greedy multi-cover selection
/// over the deduplicated candidates at threshold `delta`. Selected drafts
/// become adversarial tools with source "toolflood".
ToolFloodResult run_toolflood(const std::vector<Query>& gen_queries,
                              const GenerationConfig& config,
                              ToolGenerator& generator, std::size_t quota,
                              std::size_t budget, EmbeddingProvider& provider,
                              double delta);

/// Untargeted flooding baseline: `budget` tools whose name/description are
/// token resamples of the style corpus, matching its empirical name-length
/// and description-length distributions. Source "random-sybil".
Catalog baseline_random_sybil(std::size_t budget, const Catalog& style_corpus,
                              Rng& rng);

/// Query-targeted poisoning baseline: one tool per target query whose
/// description is the literal query text followed by a generated sentence,
/// accepted only when d_cos(query, sentence) < accept_delta (strict).
/// Rejection-resampled up to max_attempts, then falls back to the query text
/// itself (logged). Source "poisonedrag".
Catalog baseline_poisonedrag(const std::vector<Query>& targets,
                             ToolGenerator& generator,
                             EmbeddingProvider& provider, double accept_delta,
                             std::size_t max_attempts, Rng& rng);

}  // namespace toolflood
