#pragma once

#include <memory>
#include <string>
#include <vector>

#include "toolflood/catalog.hpp"
#include "toolflood/embedding.hpp"

namespace toolflood {

struct RetrievedEntry {
  std::string tool_id;
  double similarity = 0.0;
  Provenance provenance = Provenance::kBenign;
};

/// Ranked candidates for one query. From retrieve_topk, entries are sorted
/// by similarity descending with ties broken by ascending tool id; from
/// rerank_mmr they are in pick order.
struct RetrievalResult {
  std::string query_id;
  std::vector<RetrievedEntry> entries;
};

enum class Defense { kNone, kMmr, kFilter, kMmrFilter };

Defense defense_from_name(std::string_view name);
std::string_view defense_name(Defense defense);

struct RetrieverConfig {
  std::size_t k = 5;
  Defense defense = Defense::kNone;
  double mmr_lambda = 0.5;
  std::size_t mmr_pool_multiplier = 4;
};

/// Pure top-k selection over (score, id) pairs: indices of the k best by
/// score descending, ties by ascending id. Bounded-heap selection; the
/// brute-force full-sort equivalent lives in the tests as its oracle.
std::vector<std::size_t> top_k_by_score(const std::vector<double>& scores,
                                        const std::vector<std::string>& ids,
                                        std::size_t k);

/// Exactly min(k, |catalog|) tools with the highest query-metadata cosine
/// similarity.
RetrievalResult retrieve_topk(const Query& query, const Catalog& catalog,
                              EmbeddingProvider& provider, std::size_t k);

/// Maximal Marginal Relevance reranking over a candidate pool (normally the
/// plain top-(k * pool_multiplier)). Iteratively picks
///   argmax_t  lambda * s(q,t) - (1-lambda) * max_{t' selected} s(t,t'),
/// ties by ascending tool id; the first pick is the plain top-1. A pool
/// smaller than k is returned as-is (logged).
RetrievalResult rerank_mmr(const Query& query, const RetrievalResult& pool,
                           const Catalog& catalog, EmbeddingProvider& provider,
                           std::size_t k, double lambda);

struct ClassifierDecision {
  bool flag = false;
  double score = 0.0;
};

/// Pre-selection metadata screening contract: one decision per metadata
/// string.
class MetadataClassifier {
 public:
  virtual ~MetadataClassifier() = default;
  virtual const std::string& classifier_id() const = 0;
  virtual ClassifierDecision classify(std::string_view metadata) = 0;
};

class PassThroughClassifier : public MetadataClassifier {
 public:
  const std::string& classifier_id() const override { return id_; }
  ClassifierDecision classify(std::string_view) override { return {}; }

 private:
  std::string id_ = "pass-through";
};

/// Flags instruction-like phrasing ("ignore previous instructions", ...).
/// Deliberately shallow; flood-style metadata carries no such payload.
class HeuristicClassifier : public MetadataClassifier {
 public:
  const std::string& classifier_id() const override { return id_; }
  ClassifierDecision classify(std::string_view metadata) override;

 private:
  std::string id_ = "heuristic";
};

/// POST {"text": ...} -> {"flag": bool, "score": number}.
class RemoteClassifier : public MetadataClassifier {
 public:
  RemoteClassifier(std::string url, std::string api_key_env,
                   std::size_t max_retries = 3);
  const std::string& classifier_id() const override { return id_; }
  ClassifierDecision classify(std::string_view metadata) override;

 private:
  std::string url_;
  std::string api_key_env_;
  std::size_t max_retries_;
  std::string id_ = "remote";
};

/// Catalog minus flagged tools. A classifier failure keeps the tool
/// (fail-open) and logs a warning.
Catalog filter_metadata(const Catalog& catalog,
                        MetadataClassifier& classifier);

/// Applies a RetrieverConfig: optional metadata filter before scoring,
/// optional MMR after. Immutable and shareable.
class Retriever {
 public:
  Retriever(RetrieverConfig config,
            std::shared_ptr<EmbeddingProvider> provider,
            std::shared_ptr<MetadataClassifier> classifier = nullptr);

  const RetrieverConfig& config() const { return config_; }

  /// Filter stage; returns the catalog unchanged unless the configured
  /// defense includes the metadata filter. Call once per catalog, then
  /// retrieve per query against the prepared catalog.
  Catalog prepare_catalog(const Catalog& catalog) const;

  RetrievalResult retrieve(const Query& query, const Catalog& prepared) const;

 private:
  RetrieverConfig config_;
  std::shared_ptr<EmbeddingProvider> provider_;
  std::shared_ptr<MetadataClassifier> classifier_;
};

}  // namespace toolflood
