#pragma once

#include <cstdint>
#include <vector>

#include "toolflood/attack.hpp"
#include "toolflood/catalog.hpp"
#include "toolflood/embedding.hpp"

namespace toolflood {

/// Parameters of the candidate-generation concentration bound. With N target
/// queries and subsets of size n, a fixed query appears in a round with
/// probability alpha = n/N; a generated tool then covers it with probability
/// at least cover_prob, so each of the I*g generation slots succeeds with
/// probability at least mu_q = alpha * cover_prob.
struct ConvergenceParams {
  std::size_t target_count = 0;        // N
  std::size_t subset_size = 0;         // n
  std::size_t tools_per_iteration = 0; // g
  double cover_prob = 0.0;             // p_q, lower bound in (0, 1]
  std::size_t quota = 0;               // r
  std::size_t iterations = 0;          // I

  double alpha() const;
  double mu_q() const;             // alpha * cover_prob
  double expected_successes() const;  // I * g * mu_q
};

struct BoundResult {
  double value = 1.0;
  // False when expected successes < quota; the bound is then the trivial 1.
  bool valid = false;
};

/// Chernoff lower-tail bound on the probability that a query accumulates
/// fewer than `quota` covering candidates after `iterations` rounds:
/// exp(-(mu - r)^2 / (2 mu)) with mu = I * g * mu_q, valid for r <= mu.
/// Evaluated in extended precision, clamped to [0, 1].
BoundResult failure_bound(const ConvergenceParams& params);

/// Boole's inequality: min(1, sum of per-query failure bounds).
double union_failure_bound(const std::vector<double>& per_query_bounds);

/// Smallest iteration count whose uniform union bound (n_queries identical
/// per-query bounds) is <= target_failure. Doubling search then binary
/// search over the monotone bound.
std::size_t required_iterations(double target_failure,
                                const ConvergenceParams& base,
                                std::size_t n_queries);

/// P[X <= x] for X ~ Binomial(n, p), via log-gamma pmf accumulation.
double binomial_cdf(std::size_t n, double p, std::size_t x);

/// Empirical per-appearance cover probability for each query: frequency,
/// over `samples_per_query` generation slots whose subset contains the
/// query, that the generated metadata covers it at `delta`. Feed these to
/// the bound only after rounding down.
std::vector<double> measure_cover_probabilities(
    const std::vector<Query>& queries, ToolGenerator& generator,
    EmbeddingProvider& provider, double delta, std::size_t subset_size,
    std::size_t samples_per_query, std::uint64_t seed);

/// Round down to a grid of `granularity` (default 0.01), preserving the
/// lower-bound role of a measured probability.
double round_down_probability(double p, double granularity = 0.01);

/// Coverage counts N(q, pool) for one query over `trials` independent
/// Phase-1 simulations (trial t uses the substream (seed, "trial", t)).
std::vector<std::size_t> simulate_coverage_counts(
    const std::vector<Query>& queries, const GenerationConfig& config,
    ToolGenerator& generator, EmbeddingProvider& provider, double delta,
    std::size_t query_index, std::size_t trials, std::uint64_t seed);

struct EmpiricalConvergence {
  double success_rate = 0.0;  // empirical P[every query reaches the quota]
  double union_bound = 1.0;
  double certificate = 0.0;   // 1 - union_bound
  std::vector<double> per_query_bounds;
};

/// Runs `trials` independent Phase-1 simulations and measures the fraction
/// in which every query accumulates at least `quota` covering candidates,
/// next to the certificate implied by `per_query_cover_probs` (already
/// rounded down by the caller).
EmpiricalConvergence empirical_convergence(
    const std::vector<Query>& queries, const GenerationConfig& config,
    ToolGenerator& generator, EmbeddingProvider& provider, double delta,
    std::size_t quota, const std::vector<double>& per_query_cover_probs,
    std::size_t trials, std::uint64_t seed);

}  // namespace toolflood
