#include "toolflood/covering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace toolflood {

bool cover(const EmbeddingVector& query_vec,
           const EmbeddingVector& metadata_vec, double delta) {
  return cosine_distance(query_vec, metadata_vec) <= delta;
}

std::size_t coverage_count(const Query& query,
                           const std::vector<std::string>& metadata_set,
                           EmbeddingProvider& provider, double delta) {
  if (metadata_set.empty()) return 0;
  const EmbeddingVector qv = provider.embed(query.text);
  std::size_t n = 0;
  for (const std::string& m : metadata_set) {
    if (cover(qv, provider.embed(m), delta)) ++n;
  }
  return n;
}

double nearest_rank_quantile(std::vector<double> values, double level) {
  if (values.empty()) {
    throw std::invalid_argument("quantile of empty value set");
  }
  if (!(level > 0.0) || level > 1.0) {
    throw std::invalid_argument("quantile level must be in (0, 1]");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t rank =
      static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

double calibrate_delta(const std::vector<Query>& queries,
                       const Catalog& benign, EmbeddingProvider& provider,
                       double quantile_level) {
  if (queries.empty() || benign.empty()) {
    throw std::invalid_argument("calibrate_delta needs queries and tools");
  }
  std::vector<EmbeddingVector> tool_vecs;
  tool_vecs.reserve(benign.size());
  for (const Tool& t : benign.tools()) {
    tool_vecs.push_back(provider.embed(t.metadata_text()));
  }
  std::vector<double> distances;
  distances.reserve(queries.size() * benign.size());
  for (const Query& q : queries) {
    const EmbeddingVector qv = provider.embed(q.text);
    for (const EmbeddingVector& tv : tool_vecs) {
      distances.push_back(cosine_distance(qv, tv));
    }
  }
  return nearest_rank_quantile(std::move(distances), quantile_level);
}

std::string_view greedy_stop_name(GreedyStop reason) {
  switch (reason) {
    case GreedyStop::kResidualEmpty:
      return "residual_empty";
    case GreedyStop::kBudgetExhausted:
      return "budget_exhausted";
    case GreedyStop::kZeroGain:
      return "zero_gain";
  }
  return "unknown";
}

nlohmann::json GreedyTrace::to_json() const {
  nlohmann::json step_list = nlohmann::json::array();
  for (const GreedyStep& s : steps) {
    step_list.push_back({{"pool_index", s.pool_index},
                         {"gain", s.gain},
                         {"residual_after", s.residual_after}});
  }
  return {{"steps", step_list},
          {"termination", std::string(greedy_stop_name(reason))}};
}

CoverMatrix CoverMatrix::build(const std::vector<Query>& queries,
                               const std::vector<std::string>& pool,
                               EmbeddingProvider& provider, double delta) {
  CoverMatrix matrix;
  matrix.n_queries = queries.size();
  matrix.covered.resize(pool.size());

  std::vector<std::string> query_texts;
  query_texts.reserve(queries.size());
  for (const Query& q : queries) query_texts.push_back(q.text);
  const std::vector<EmbeddingVector> query_vecs =
      provider.embed_batch(query_texts);
  const std::vector<EmbeddingVector> pool_vecs = provider.embed_batch(pool);

  for (std::size_t c = 0; c < pool.size(); ++c) {
    for (std::uint32_t q = 0; q < queries.size(); ++q) {
      if (cover(query_vecs[q], pool_vecs[c], delta)) {
        matrix.covered[c].push_back(q);
      }
    }
  }
  return matrix;
}

GreedySelection greedy_multicover(const CoverMatrix& matrix, std::size_t quota,
                                  std::size_t budget) {
  if (quota < 1 || budget < 1) {
    throw std::invalid_argument("quota and budget must be >= 1");
  }
  const std::size_t n_candidates = matrix.covered.size();

  std::vector<std::size_t> counter(matrix.n_queries, 0);
  std::vector<bool> residual(matrix.n_queries, true);
  std::size_t residual_size = matrix.n_queries;
  std::vector<bool> taken(n_candidates, false);

  GreedySelection result;
  while (residual_size > 0 && result.selected.size() < budget) {
    // Marginal gain against the current residual, recomputed every step.
    std::size_t best = n_candidates;
    std::size_t best_gain = 0;
    for (std::size_t c = 0; c < n_candidates; ++c) {
      if (taken[c]) continue;
      std::size_t gain = 0;
      for (std::uint32_t q : matrix.covered[c]) {
        if (residual[q]) ++gain;
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    if (best_gain == 0) {
      result.trace.reason = GreedyStop::kZeroGain;
      return result;
    }

    taken[best] = true;
    for (std::uint32_t q : matrix.covered[best]) {
      if (!residual[q]) continue;
      if (++counter[q] >= quota) {
        residual[q] = false;
        --residual_size;
      }
    }
    result.selected.push_back(best);
    result.trace.steps.push_back({best, best_gain, residual_size});
  }

  result.trace.reason = residual_size == 0 ? GreedyStop::kResidualEmpty
                                           : GreedyStop::kBudgetExhausted;
  return result;
}

GreedySelection greedy_multicover(const std::vector<Query>& queries,
                                  const std::vector<std::string>& pool,
                                  std::size_t quota, std::size_t budget,
                                  EmbeddingProvider& provider, double delta) {
  return greedy_multicover(CoverMatrix::build(queries, pool, provider, delta),
                           quota, budget);
}

std::size_t multicover_objective(const CoverMatrix& matrix,
                                 const std::vector<std::size_t>& selected,
                                 std::size_t quota) {
  std::vector<std::size_t> counts(matrix.n_queries, 0);
  for (std::size_t c : selected) {
    for (std::uint32_t q : matrix.covered.at(c)) ++counts[q];
  }
  std::size_t objective = 0;
  for (std::size_t n : counts) objective += std::min(n, quota);
  return objective;
}

std::size_t multicover_objective(const std::vector<Query>& queries,
                                 const std::vector<std::string>& selected,
                                 std::size_t quota,
                                 EmbeddingProvider& provider, double delta) {
  std::size_t objective = 0;
  for (const Query& q : queries) {
    objective += std::min(coverage_count(q, selected, provider, delta), quota);
  }
  return objective;
}

}  // namespace toolflood
