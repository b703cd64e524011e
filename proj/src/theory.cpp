#include "toolflood/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "toolflood/covering.hpp"

namespace toolflood {

double ConvergenceParams::alpha() const {
  if (target_count == 0) throw std::invalid_argument("target_count == 0");
  return static_cast<double>(subset_size) / static_cast<double>(target_count);
}

double ConvergenceParams::mu_q() const { return alpha() * cover_prob; }

double ConvergenceParams::expected_successes() const {
  return static_cast<double>(iterations) *
         static_cast<double>(tools_per_iteration) * mu_q();
}

BoundResult failure_bound(const ConvergenceParams& params) {
  if (params.subset_size == 0 || params.subset_size > params.target_count) {
    throw std::invalid_argument("subset_size must be in [1, target_count]");
  }
  if (!(params.cover_prob > 0.0) || params.cover_prob > 1.0) {
    throw std::invalid_argument("cover_prob must be in (0, 1]");
  }
  if (params.quota < 1 || params.tools_per_iteration < 1) {
    throw std::invalid_argument("quota and tools_per_iteration must be >= 1");
  }
  // mu = I * g * (n / N) * p, accumulated in extended precision.
  const long double mu = static_cast<long double>(params.iterations) *
                         static_cast<long double>(params.tools_per_iteration) *
                         static_cast<long double>(params.subset_size) *
                         static_cast<long double>(params.cover_prob) /
                         static_cast<long double>(params.target_count);
  const long double r = static_cast<long double>(params.quota);
  if (mu < r) return {1.0, false};
  const long double exponent = -(mu - r) * (mu - r) / (2.0L * mu);
  const long double bound = std::exp(exponent);
  return {static_cast<double>(std::clamp(bound, 0.0L, 1.0L)), true};
}

double union_failure_bound(const std::vector<double>& per_query_bounds) {
  double sum = 0.0;
  for (double b : per_query_bounds) {
    if (b < 0.0 || b > 1.0) {
      throw std::invalid_argument("per-query bound outside [0, 1]");
    }
    sum += b;
  }
  return std::min(1.0, sum);
}

std::size_t required_iterations(double target_failure,
                                const ConvergenceParams& base,
                                std::size_t n_queries) {
  if (!(target_failure > 0.0) || target_failure >= 1.0) {
    throw std::invalid_argument("target failure must be in (0, 1)");
  }
  if (n_queries == 0) throw std::invalid_argument("n_queries == 0");

  auto union_bound_at = [&](std::size_t iterations) {
    ConvergenceParams p = base;
    p.iterations = iterations;
    return std::min(1.0, static_cast<double>(n_queries) *
                             failure_bound(p).value);
  };

  // The bound is non-increasing in I and tends to 0, so doubling always
  // finds an upper bracket.
  std::size_t hi = 1;
  while (union_bound_at(hi) > target_failure) hi *= 2;
  std::size_t lo = hi / 2;  // bound(lo) > target (or lo == 0)
  while (lo + 1 < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (union_bound_at(mid) <= target_failure) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double binomial_cdf(std::size_t n, double p, std::size_t x) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("p outside [0, 1]");
  if (x >= n) return 1.0;
  if (p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;  // all mass at n > x
  const long double log_p = std::log(static_cast<long double>(p));
  const long double log_q = std::log(1.0L - static_cast<long double>(p));
  const long double log_fact_n =
      std::lgamma(static_cast<long double>(n) + 1.0L);
  long double cdf = 0.0L;
  for (std::size_t i = 0; i <= x; ++i) {
    const long double log_pmf =
        log_fact_n - std::lgamma(static_cast<long double>(i) + 1.0L) -
        std::lgamma(static_cast<long double>(n - i) + 1.0L) +
        static_cast<long double>(i) * log_p +
        static_cast<long double>(n - i) * log_q;
    cdf += std::exp(log_pmf);
  }
  return static_cast<double>(std::min(cdf, 1.0L));
}

std::vector<double> measure_cover_probabilities(
    const std::vector<Query>& queries, ToolGenerator& generator,
    EmbeddingProvider& provider, double delta, std::size_t subset_size,
    std::size_t samples_per_query, std::uint64_t seed) {
  if (subset_size < 1 || subset_size > queries.size()) {
    throw std::invalid_argument("subset size must be in [1, |queries|]");
  }
  std::vector<double> probs;
  probs.reserve(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    Rng rng = Rng::substream(seed, "measure-p", qi);
    const EmbeddingVector qv = provider.embed(queries[qi].text);
    // Pool of other queries to fill the subset around q.
    std::vector<Query> others;
    for (std::size_t j = 0; j < queries.size(); ++j) {
      if (j != qi) others.push_back(queries[j]);
    }
    std::size_t covers = 0;
    for (std::size_t s = 0; s < samples_per_query; ++s) {
      std::vector<Query> subset{queries[qi]};
      if (subset_size > 1) {
        for (const Query& other : sample_subset(others, subset_size - 1, rng))
          subset.push_back(other);
      }
      std::vector<ToolDraft> drafts = generator.generate(subset, 1, rng);
      if (cover(qv, provider.embed(drafts[0].metadata_text()), delta)) {
        ++covers;
      }
    }
    probs.push_back(static_cast<double>(covers) /
                    static_cast<double>(samples_per_query));
  }
  return probs;
}

double round_down_probability(double p, double granularity) {
  if (!(granularity > 0.0)) {
    throw std::invalid_argument("granularity must be positive");
  }
  return std::floor(p / granularity) * granularity;
}

namespace {

// Per-query coverage counts for one simulated Phase-1 pool.
std::vector<std::size_t> pool_coverage_counts(
    const std::vector<Query>& queries, const GenerationConfig& config,
    ToolGenerator& generator, EmbeddingProvider& provider, double delta) {
  const CandidatePool pool = phase1_generate(queries, config, generator);
  std::vector<std::size_t> counts(queries.size(), 0);
  std::vector<EmbeddingVector> query_vecs;
  query_vecs.reserve(queries.size());
  for (const Query& q : queries) query_vecs.push_back(provider.embed(q.text));
  for (const CandidateRecord& record : pool.records()) {
    const EmbeddingVector mv = provider.embed(record.draft.metadata_text());
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      if (cover(query_vecs[qi], mv, delta)) ++counts[qi];
    }
  }
  return counts;
}

}  // namespace

std::vector<std::size_t> simulate_coverage_counts(
    const std::vector<Query>& queries, const GenerationConfig& config,
    ToolGenerator& generator, EmbeddingProvider& provider, double delta,
    std::size_t query_index, std::size_t trials, std::uint64_t seed) {
  if (query_index >= queries.size()) {
    throw std::invalid_argument("query_index out of range");
  }
  std::vector<std::size_t> counts;
  counts.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    GenerationConfig trial_config = config;
    trial_config.seed = Rng::substream(seed, "trial", t).next_u64();
    counts.push_back(pool_coverage_counts(queries, trial_config, generator,
                                          provider, delta)[query_index]);
  }
  return counts;
}

EmpiricalConvergence empirical_convergence(
    const std::vector<Query>& queries, const GenerationConfig& config,
    ToolGenerator& generator, EmbeddingProvider& provider, double delta,
    std::size_t quota, const std::vector<double>& per_query_cover_probs,
    std::size_t trials, std::uint64_t seed) {
  if (per_query_cover_probs.size() != queries.size()) {
    throw std::invalid_argument("one cover probability per query required");
  }
  EmpiricalConvergence result;
  for (double p : per_query_cover_probs) {
    ConvergenceParams params;
    params.target_count = queries.size();
    params.subset_size = config.subset_size;
    params.tools_per_iteration = config.tools_per_iteration;
    params.cover_prob = p;
    params.quota = quota;
    params.iterations = config.iterations;
    result.per_query_bounds.push_back(failure_bound(params).value);
  }
  result.union_bound = union_failure_bound(result.per_query_bounds);
  result.certificate = 1.0 - result.union_bound;

  std::size_t successes = 0;
  // Zero iterations produce an empty pool; with quota >= 1 no trial can
  // succeed, and the loop below would reject the config.
  if (config.iterations == 0) {
    result.success_rate = 0.0;
    return result;
  }
  for (std::size_t t = 0; t < trials; ++t) {
    GenerationConfig trial_config = config;
    trial_config.seed = Rng::substream(seed, "trial", t).next_u64();
    const std::vector<std::size_t> counts = pool_coverage_counts(
        queries, trial_config, generator, provider, delta);
    const bool all_met =
        std::all_of(counts.begin(), counts.end(),
                    [&](std::size_t c) { return c >= quota; });
    if (all_met) ++successes;
  }
  result.success_rate =
      trials == 0 ? 0.0
                  : static_cast<double>(successes) /
                        static_cast<double>(trials);
  return result;
}

}  // namespace toolflood
