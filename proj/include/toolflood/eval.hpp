#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "toolflood/catalog.hpp"
#include "toolflood/covering.hpp"
#include "toolflood/embedding.hpp"
#include "toolflood/retrieval.hpp"

namespace toolflood {

/// Per-query retrieval-layer outcome: how many of the k retrieved tools are
/// adversarial, and whether the attacker holds all of them.
struct DominationRecord {
  std::string query_id;
  std::size_t count = 0;   // adversarial entries among the retrieved
  bool dominated = false;  // count == k
  std::vector<RetrievedEntry> retrieved;
};

/// Tool-selection contract: pick one candidate id or abstain (nullopt).
class Selector {
 public:
  virtual ~Selector() = default;
  virtual const std::string& selector_id() const = 0;
  virtual bool may_abstain() const = 0;
  virtual std::optional<std::string> select(
      const Query& query, const std::vector<RetrievedEntry>& candidates,
      const Catalog& catalog) = 0;
};

/// Deterministic stand-in for a temperature-0 LLM selector: the candidate
/// with maximum query-metadata similarity, ties to the lowest id. Never
/// abstains.
class ArgmaxSelector : public Selector {
 public:
  explicit ArgmaxSelector(std::shared_ptr<EmbeddingProvider> provider);
  const std::string& selector_id() const override { return id_; }
  bool may_abstain() const override { return false; }
  std::optional<std::string> select(
      const Query& query, const std::vector<RetrievedEntry>& candidates,
      const Catalog& catalog) override;

 private:
  std::shared_ptr<EmbeddingProvider> provider_;
  std::string id_ = "argmax";
};

struct RemoteSelectorConfig {
  std::string base_url;
  std::string model_id;
  std::string api_key_env = "TOOLFLOOD_API_KEY";
  std::size_t max_retries = 3;
  int timeout_seconds = 120;
};

/// Chat-completion selector: candidates are rendered as a numbered list of
/// name + description and the model must answer with exactly one name or
/// "none". An unparseable reply is retried once, then recorded as
/// abstention.
class RemoteLlmSelector : public Selector {
 public:
  explicit RemoteLlmSelector(RemoteSelectorConfig config);
  const std::string& selector_id() const override { return id_; }
  bool may_abstain() const override { return true; }
  std::optional<std::string> select(
      const Query& query, const std::vector<RetrievedEntry>& candidates,
      const Catalog& catalog) override;

 private:
  RemoteSelectorConfig config_;
  std::string id_ = "remote-llm";
};

std::string render_selection_prompt(const Query& query,
                                    const std::vector<RetrievedEntry>& entries,
                                    const Catalog& catalog);

/// Domination count with a plain (no-defense) retriever.
DominationRecord domination_count(const Query& query, const Catalog& deployed,
                                  EmbeddingProvider& provider, std::size_t k);

/// Domination count under the configured retriever; `prepared` must already
/// have the retriever's filter stage applied.
DominationRecord domination_record(const Query& query, const Catalog& prepared,
                                   const Retriever& retriever);

/// Fraction of queries whose top-k is entirely adversarial.
double tdr(const std::vector<Query>& test_queries, const Catalog& deployed,
           EmbeddingProvider& provider, std::size_t k);

/// Fraction of queries for which the selector picks an adversarial tool.
/// Abstention counts as failure; selector errors drop the query with a
/// warning.
double asr(const std::vector<Query>& test_queries, const Catalog& deployed,
           EmbeddingProvider& provider, std::size_t k, Selector& selector);

// --- experiment reports ------------------------------------------------------

struct SelectorOutcome {
  std::string selector_id;
  double asr = 0.0;
  std::size_t abstentions = 0;
  std::size_t errors = 0;
};

struct QueryDiagnostic {
  std::string task_id;
  DominationRecord domination;
  // selector_id -> selected tool id ("" = abstain/error) and success flag.
  std::map<std::string, std::pair<std::string, bool>> selections;
};

struct TaskEvalResult {
  std::string task_id;
  std::size_t budget_used = 0;
  double poisoning_rate = 0.0;
  double tdr = 0.0;
  std::vector<SelectorOutcome> selectors;
  std::vector<QueryDiagnostic> queries;
};

struct ConfigEcho {
  std::size_t k = 0;
  std::size_t quota = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string shadow_provider;
  std::string target_provider;
  double mmr_lambda = 0.0;
  std::size_t mmr_pool_multiplier = 0;
};

/// Metrics for one attack x defense arm; ASR is reported per selector.
/// Task-level values are averaged with equal task weight.
struct ExperimentReport {
  std::string attack;
  std::string defense;
  double avg_budget = 0.0;
  double avg_poisoning_rate = 0.0;
  double tdr = 0.0;
  std::vector<SelectorOutcome> selectors;  // averaged across tasks
  std::vector<TaskEvalResult> tasks;
  ConfigEcho echo;

  nlohmann::json to_json() const;
};

/// Evaluate one defense arm over per-task deployed catalogs, reusing the
/// same attack artifacts. ASR and TDR come from the same retrieval pass, so
/// ASR >= TDR holds per run for never-abstaining selectors.
ExperimentReport evaluate_arm(
    const std::string& attack_name, Defense defense,
    const std::map<std::string, Catalog>& deployed_by_task,
    const std::map<std::string, std::vector<Query>>& test_by_task,
    const Retriever& retriever,
    const std::vector<std::shared_ptr<Selector>>& selectors,
    const ConfigEcho& echo);

std::string report_csv_header();
std::string report_csv_rows(const ExperimentReport& report);
std::string diagnostics_jsonl(const ExperimentReport& report);

}  // namespace toolflood
