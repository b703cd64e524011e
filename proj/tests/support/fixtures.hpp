#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toolflood/attack.hpp"
#include "toolflood/catalog.hpp"
#include "toolflood/covering.hpp"
#include "toolflood/embedding.hpp"
#include "toolflood/rng.hpp"

namespace toolflood::testing {

Query make_query(std::string id, std::string text, std::string task = "t1");

/// Random lowercase word, 5-8 letters.
std::string random_word(Rng& rng);

/// Generator that emits exact query-text copies as descriptions, with a
/// unique name per record so the texts stay distinct through dedup. Slots
/// walk the subset round-robin, so with tools_per_iteration == subset size
/// every subset query gets exactly one copy per iteration.
class CopyGenerator : public ToolGenerator {
 public:
  const std::string& generator_id() const override { return id_; }
  bool deterministic() const override { return true; }
  std::vector<ToolDraft> generate(const std::vector<Query>& subset,
                                  std::size_t count, Rng& rng) override;

 private:
  std::size_t counter_ = 0;
  std::string id_ = "copy";
};

/// Generator that always throws; exercises retry/re-sample paths.
class FailingGenerator : public ToolGenerator {
 public:
  const std::string& generator_id() const override { return id_; }
  bool deterministic() const override { return true; }
  std::vector<ToolDraft> generate(const std::vector<Query>&, std::size_t,
                                  Rng&) override;

 private:
  std::string id_ = "failing";
};

/// Topically structured corpus: tasks own disjoint vocabularies (a core
/// shared by the whole task plus per-subtopic words); queries mix core,
/// subtopic and noise words; benign tools lean on a global vocabulary with a
/// light topical overlap. Under the bag-of-tokens embedder this produces a
/// query/benign distance distribution with a meaningful lower tail for
/// delta calibration, while same-task queries stay mutually close.
struct CorpusParams {
  std::size_t n_tasks = 10;
  std::size_t gen_per_task = 20;
  std::size_t test_per_task = 10;
  std::size_t n_benign = 500;
  std::size_t core_words = 6;
  std::size_t subtopics = 4;
  std::size_t subtopic_words = 6;
  std::size_t query_core_words = 3;
  std::size_t query_subtopic_words = 4;
  std::size_t benign_vocab = 400;
  std::size_t benign_topic_words = 3;
  std::size_t benign_generic_words = 6;
  std::uint64_t seed = 20260809;
};

struct SyntheticCorpus {
  Catalog benign;
  std::vector<Query> gen;
  std::vector<Query> test;
  std::vector<std::string> tasks;
};

SyntheticCorpus make_corpus(const CorpusParams& params);

/// Token-disjoint mini corpus for exact saturation runs: every query is its
/// own island, benign tools share no tokens with any query.
struct SaturationFixture {
  Catalog benign;
  std::vector<Query> queries;  // gen and test are the same set
};

SaturationFixture make_saturation_fixture(std::size_t n_tasks,
                                          std::size_t queries_per_task,
                                          std::size_t benign_tools,
                                          std::uint64_t seed);

/// Brute-force oracle: scores every tool, stable-sorts by (score desc,
/// id asc), takes k. Independent of the heap route in retrieve_topk.
std::vector<std::size_t> full_sort_topk(const std::vector<double>& scores,
                                        const std::vector<std::string>& ids,
                                        std::size_t k);

/// Exhaustive optimum of the budgeted multi-cover objective over all
/// candidate subsets of size <= budget.
std::size_t exhaustive_multicover_opt(const CoverMatrix& matrix,
                                      std::size_t quota, std::size_t budget);

}  // namespace toolflood::testing
