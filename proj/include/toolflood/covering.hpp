#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "toolflood/catalog.hpp"
#include "toolflood/embedding.hpp"

namespace toolflood {

/// Semantic cover indicator: true iff d_cos(query, metadata) <= delta. The
/// boundary is inclusive.
bool cover(const EmbeddingVector& query_vec,
           const EmbeddingVector& metadata_vec, double delta);

/// Number of metadata strings in the set that cover the query at delta.
std::size_t coverage_count(const Query& query,
                           const std::vector<std::string>& metadata_set,
                           EmbeddingProvider& provider, double delta);

/// Nearest-rank quantile: the value at 1-based index ceil(level * n) of the
/// ascending sort. No interpolation; duplicates count individually. level in
/// (0, 1].
double nearest_rank_quantile(std::vector<double> values, double level);

/// The empirical `quantile_level` quantile of cosine distances between every
/// query and every benign tool's metadata. This is the attacker-side delta
/// calibration; pass generation-split queries only to avoid test leakage.
double calibrate_delta(const std::vector<Query>& queries,
                       const Catalog& benign, EmbeddingProvider& provider,
                       double quantile_level);

// --- greedy budgeted multi-cover --------------------------------------------

enum class GreedyStop { kResidualEmpty, kBudgetExhausted, kZeroGain };

std::string_view greedy_stop_name(GreedyStop reason);

struct GreedyStep {
  std::size_t pool_index;      // candidate picked at this step
  std::size_t gain;            // residual queries it covered when picked
  std::size_t residual_after;  // unsaturated queries remaining afterwards
};

struct GreedyTrace {
  std::vector<GreedyStep> steps;
  GreedyStop reason = GreedyStop::kZeroGain;

  nlohmann::json to_json() const;
};

struct GreedySelection {
  std::vector<std::size_t> selected;  // pool indices, in pick order
  GreedyTrace trace;
};

/// Precomputed |pool| x |queries| cover structure; embeddings are computed
/// once here so the greedy loop is pure integer arithmetic.
struct CoverMatrix {
  std::size_t n_queries = 0;
  // covered[c] = ascending query indices covered by pool candidate c.
  std::vector<std::vector<std::uint32_t>> covered;

  static CoverMatrix build(const std::vector<Query>& queries,
                           const std::vector<std::string>& pool,
                           EmbeddingProvider& provider, double delta);
};

/// Greedy selection on a prebuilt cover matrix. Faithful to the iterative
/// scheme: each step recomputes gain(m) = |{q in R : Cover(q, m)}| over the
/// current residual, picks the argmax (ties to the lowest pool index), stops
/// on empty residual, exhausted budget, or zero best gain. Saturated queries
/// (counter >= quota) leave the residual immediately. Candidates may repeat
/// textually; each list element is a distinct candidate.
GreedySelection greedy_multicover(const CoverMatrix& matrix, std::size_t quota,
                                  std::size_t budget);

GreedySelection greedy_multicover(const std::vector<Query>& queries,
                                  const std::vector<std::string>& pool,
                                  std::size_t quota, std::size_t budget,
                                  EmbeddingProvider& provider, double delta);

/// Objective of Eq-style budgeted multi-cover: sum over queries of
/// min(quota, cover count under `selected`).
std::size_t multicover_objective(const std::vector<Query>& queries,
                                 const std::vector<std::string>& selected,
                                 std::size_t quota,
                                 EmbeddingProvider& provider, double delta);

std::size_t multicover_objective(const CoverMatrix& matrix,
                                 const std::vector<std::size_t>& selected,
                                 std::size_t quota);

}  // namespace toolflood
