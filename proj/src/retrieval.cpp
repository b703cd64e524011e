#include "toolflood/retrieval.hpp"

#include <algorithm>
#include <regex>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "toolflood/errors.hpp"
#include "toolflood/http.hpp"
#include "toolflood/log.hpp"

namespace toolflood {

Defense defense_from_name(std::string_view name) {
  if (name == "none") return Defense::kNone;
  if (name == "mmr") return Defense::kMmr;
  if (name == "filter") return Defense::kFilter;
  if (name == "mmr+filter") return Defense::kMmrFilter;
  throw ConfigError("unknown defense '" + std::string(name) + "'");
}

std::string_view defense_name(Defense defense) {
  switch (defense) {
    case Defense::kNone:
      return "none";
    case Defense::kMmr:
      return "mmr";
    case Defense::kFilter:
      return "filter";
    case Defense::kMmrFilter:
      return "mmr+filter";
  }
  return "unknown";
}

namespace {

// (score desc, id asc) ordering shared by all ranking paths.
bool ranks_before(double score_a, const std::string& id_a, double score_b,
                  const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

}  // namespace

std::vector<std::size_t> top_k_by_score(const std::vector<double>& scores,
                                        const std::vector<std::string>& ids,
                                        std::size_t k) {
  if (scores.size() != ids.size()) {
    throw std::invalid_argument("scores/ids size mismatch");
  }
  const std::size_t take = std::min(k, scores.size());
  if (take == 0) return {};

  // Heap of the current top `take`, ordered worst-first so the weakest entry
  // sits on top and is evicted by anything better.
  auto worse = [&](std::size_t a, std::size_t b) {
    return ranks_before(scores[a], ids[a], scores[b], ids[b]);
  };
  std::vector<std::size_t> heap;
  heap.reserve(take + 1);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (heap.size() < take) {
      heap.push_back(i);
      std::push_heap(heap.begin(), heap.end(), worse);
    } else if (ranks_before(scores[i], ids[i], scores[heap.front()],
                            ids[heap.front()])) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.back() = i;
      std::push_heap(heap.begin(), heap.end(), worse);
    }
  }
  std::sort(heap.begin(), heap.end(), worse);
  return heap;
}

RetrievalResult retrieve_topk(const Query& query, const Catalog& catalog,
                              EmbeddingProvider& provider, std::size_t k) {
  if (catalog.empty()) {
    throw std::invalid_argument("retrieve_topk on empty catalog");
  }
  if (k < 1) throw std::invalid_argument("k must be >= 1");

  const EmbeddingVector qv = provider.embed(query.text);
  std::vector<double> scores(catalog.size());
  std::vector<std::string> ids(catalog.size());
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const Tool& t = catalog.tools()[i];
    scores[i] = dot(qv, provider.embed(t.metadata_text()));
    ids[i] = t.id;
  }

  RetrievalResult result;
  result.query_id = query.id;
  for (std::size_t i : top_k_by_score(scores, ids, k)) {
    const Tool& t = catalog.tools()[i];
    result.entries.push_back({t.id, scores[i], t.provenance});
  }
  return result;
}

RetrievalResult rerank_mmr(const Query& query, const RetrievalResult& pool,
                           const Catalog& catalog, EmbeddingProvider& provider,
                           std::size_t k, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("mmr lambda must be in [0, 1]");
  }
  if (query.id != pool.query_id) {
    throw std::invalid_argument("mmr pool belongs to query '" +
                                pool.query_id + "', not '" + query.id + "'");
  }
  if (pool.entries.size() < k) {
    log_warn("mmr pool smaller than k (" +
             std::to_string(pool.entries.size()) + " < " + std::to_string(k) +
             "); returning the pool");
  }
  const std::size_t take = std::min(k, pool.entries.size());

  std::vector<EmbeddingVector> vecs;
  vecs.reserve(pool.entries.size());
  for (const RetrievedEntry& e : pool.entries) {
    const Tool* tool = catalog.find(e.tool_id);
    if (!tool) {
      throw std::invalid_argument("mmr pool tool '" + e.tool_id +
                                  "' not in catalog");
    }
    vecs.push_back(provider.embed(tool->metadata_text()));
  }

  std::vector<bool> picked(pool.entries.size(), false);
  std::vector<double> max_sim_to_selected(pool.entries.size(), 0.0);
  RetrievalResult result;
  result.query_id = pool.query_id;

  for (std::size_t step = 0; step < take; ++step) {
    std::size_t best = pool.entries.size();
    double best_value = 0.0;
    for (std::size_t i = 0; i < pool.entries.size(); ++i) {
      if (picked[i]) continue;
      // First pick has no redundancy term, so it is the plain top-1.
      const double value =
          step == 0 ? pool.entries[i].similarity
                    : lambda * pool.entries[i].similarity -
                          (1.0 - lambda) * max_sim_to_selected[i];
      if (best == pool.entries.size() ||
          ranks_before(value, pool.entries[i].tool_id, best_value,
                       pool.entries[best].tool_id)) {
        best = i;
        best_value = value;
      }
    }
    picked[best] = true;
    result.entries.push_back(pool.entries[best]);
    for (std::size_t i = 0; i < pool.entries.size(); ++i) {
      if (picked[i]) continue;
      max_sim_to_selected[i] =
          std::max(max_sim_to_selected[i], dot(vecs[i], vecs[best]));
    }
  }
  return result;
}

ClassifierDecision HeuristicClassifier::classify(std::string_view metadata) {
  static const std::regex pattern(
      "ignore (all |any )?(previous|prior|above) (instructions|prompts)|"
      "disregard (all |any )?(previous|prior|above)|"
      "system prompt|you are now|act as if|"
      "do not (follow|obey)|override (the )?(instructions|rules)",
      std::regex::icase);
  ClassifierDecision decision;
  if (std::regex_search(metadata.begin(), metadata.end(), pattern)) {
    decision.flag = true;
    decision.score = 1.0;
  }
  return decision;
}

RemoteClassifier::RemoteClassifier(std::string url, std::string api_key_env,
                                   std::size_t max_retries)
    : url_(std::move(url)),
      api_key_env_(std::move(api_key_env)),
      max_retries_(max_retries) {}

ClassifierDecision RemoteClassifier::classify(std::string_view metadata) {
  HttpRequestConfig http;
  http.url = url_;
  http.bearer_token = env_or_empty(api_key_env_);
  http.max_retries = max_retries_;
  nlohmann::json reply =
      http_post_json(http, {{"text", std::string(metadata)}});
  return {reply.at("flag").get<bool>(), reply.value("score", 0.0)};
}

Catalog filter_metadata(const Catalog& catalog,
                        MetadataClassifier& classifier) {
  std::vector<Tool> kept;
  kept.reserve(catalog.size());
  for (const Tool& t : catalog.tools()) {
    ClassifierDecision decision;
    try {
      decision = classifier.classify(t.metadata_text());
    } catch (const std::exception& e) {
      // Fail-open: a broken classifier must not silently drop tools.
      log_warn("classifier failed on tool '" + t.id + "' (" + e.what() +
               "); tool retained");
      kept.push_back(t);
      continue;
    }
    if (decision.flag) {
      log_info("filter: removed tool '" + t.id + "' (score " +
               std::to_string(decision.score) + ")");
    } else {
      kept.push_back(t);
    }
  }
  return Catalog(std::move(kept));
}

Retriever::Retriever(RetrieverConfig config,
                     std::shared_ptr<EmbeddingProvider> provider,
                     std::shared_ptr<MetadataClassifier> classifier)
    : config_(config),
      provider_(std::move(provider)),
      classifier_(std::move(classifier)) {
  if (config_.k < 1) throw ConfigError("retriever k must be >= 1");
  const bool needs_filter = config_.defense == Defense::kFilter ||
                            config_.defense == Defense::kMmrFilter;
  if (needs_filter && !classifier_) {
    throw ConfigError("filter defense configured without a classifier");
  }
}

Catalog Retriever::prepare_catalog(const Catalog& catalog) const {
  if (config_.defense == Defense::kFilter ||
      config_.defense == Defense::kMmrFilter) {
    return filter_metadata(catalog, *classifier_);
  }
  return catalog;
}

RetrievalResult Retriever::retrieve(const Query& query,
                                    const Catalog& prepared) const {
  const bool use_mmr = config_.defense == Defense::kMmr ||
                       config_.defense == Defense::kMmrFilter;
  if (!use_mmr) {
    return retrieve_topk(query, prepared, *provider_, config_.k);
  }
  const std::size_t pool_size =
      std::max<std::size_t>(config_.k,
                            config_.k * config_.mmr_pool_multiplier);
  RetrievalResult pool =
      retrieve_topk(query, prepared, *provider_, pool_size);
  return rerank_mmr(query, pool, prepared, *provider_, config_.k,
                    config_.mmr_lambda);
}

}  // namespace toolflood
