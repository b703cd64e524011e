#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support/fixtures.hpp"
#include "toolflood/attack.hpp"
#include "toolflood/covering.hpp"
#include "toolflood/errors.hpp"
#include "toolflood/textutil.hpp"

using namespace toolflood;
using toolflood::testing::make_query;

namespace {

std::vector<Query> numbered_queries(std::size_t n) {
  std::vector<Query> queries;
  for (std::size_t i = 0; i < n; ++i) {
    queries.push_back(make_query("q" + std::to_string(i),
                                 "query number " + std::to_string(i)));
  }
  return queries;
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("sample_subset boundary and distinctness") {
  Rng rng(1);
  const std::vector<Query> queries = numbered_queries(100);
  std::vector<Query> all = sample_subset(queries, 100, rng);
  CHECK(all.size() == 100);

  std::vector<Query> some = sample_subset(queries, 20, rng);
  std::set<std::string> ids;
  for (const Query& q : some) ids.insert(q.id);
  CHECK(ids.size() == 20);

  CHECK_THROWS_AS(sample_subset(queries, 101, rng), std::invalid_argument);
}

TEST_CASE("sample_subset draws uniformly") {
  Rng rng(5150);
  const std::vector<Query> queries = numbered_queries(4);
  std::map<std::string, int> freq;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    freq[sample_subset(queries, 1, rng)[0].id]++;
  }
  for (const auto& [id, count] : freq) {
    CHECK(std::abs(count / static_cast<double>(draws) - 0.25) < 0.02);
  }
}

TEST_CASE("generation prompt renders the template") {
  std::vector<Query> subset = {make_query("a", "check air quality"),
                               make_query("b", "compare city pollution")};
  const std::string prompt = render_generation_prompt(subset, 10);
  CHECK(prompt.find("Generate 10 tool names and descriptions") !=
        std::string::npos);
  CHECK(prompt.find("Generate exactly 10 tools.") != std::string::npos);
  CHECK(prompt.find("- check air quality\n") != std::string::npos);
  CHECK(prompt.find("- compare city pollution\n") != std::string::npos);
  CHECK(prompt.find("Make each tool similar to all queries") !=
        std::string::npos);
  CHECK(prompt == render_generation_prompt(subset, 10));
  CHECK_THROWS_AS(render_generation_prompt({}, 3), std::invalid_argument);
}

TEST_CASE("phase1 pool size is exactly iterations x tools_per_iteration") {
  const std::vector<Query> queries = numbered_queries(12);
  GenerationConfig config;
  config.iterations = 30;
  config.subset_size = 4;
  config.tools_per_iteration = 5;
  config.seed = 99;
  SyntheticGenerator generator(0.7);
  CandidatePool pool = phase1_generate(queries, config, generator);
  CHECK(pool.size() == 150);

  std::set<std::string> query_ids;
  for (const Query& q : queries) query_ids.insert(q.id);
  for (const CandidateRecord& record : pool.records()) {
    CHECK(record.iteration < config.iterations);
    CHECK(record.subset_ids.size() == config.subset_size);
    for (const std::string& id : record.subset_ids) {
      CHECK(query_ids.count(id) == 1);
    }
  }
}

TEST_CASE("phase1 is deterministic for a fixed seed") {
  const std::vector<Query> queries = numbered_queries(9);
  GenerationConfig config;
  config.iterations = 12;
  config.subset_size = 3;
  config.tools_per_iteration = 2;
  config.seed = 4242;
  SyntheticGenerator generator_a(0.5);
  SyntheticGenerator generator_b(0.5);
  CandidatePool a = phase1_generate(queries, config, generator_a);
  CandidatePool b = phase1_generate(queries, config, generator_b);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.records()[i].draft.metadata_text() ==
          b.records()[i].draft.metadata_text());
  }
}

TEST_CASE("phase1 single iteration single tool") {
  const std::vector<Query> queries = numbered_queries(3);
  GenerationConfig config;
  config.iterations = 1;
  config.subset_size = 2;
  config.tools_per_iteration = 1;
  SyntheticGenerator generator(1.0);
  CHECK(phase1_generate(queries, config, generator).size() == 1);
}

TEST_CASE("phase1 surfaces persistent generator failure") {
  const std::vector<Query> queries = numbered_queries(4);
  GenerationConfig config;
  config.iterations = 2;
  config.subset_size = 2;
  config.tools_per_iteration = 1;
  toolflood::testing::FailingGenerator generator;
  CHECK_THROWS_AS(phase1_generate(queries, config, generator), RemoteError);
}

TEST_CASE("synthetic generator emits the requested count") {
  SyntheticGenerator generator(0.4);
  Rng rng(6);
  CHECK(generator.generate(numbered_queries(5), 5, rng).size() == 5);
}

TEST_CASE("full-fraction single-query drafts land within a tight cover") {
  SyntheticGenerator generator(1.0, 1.0);
  SyntheticProvider provider(64, 11);
  Rng rng(77);
  std::vector<Query> subset = {
      make_query("q", "compare the air quality between london and paris")};
  for (const ToolDraft& draft : generator.generate(subset, 10, rng)) {
    const double distance =
        cosine_distance(provider.embed(subset[0].text),
                        provider.embed(draft.metadata_text()));
    CHECK(distance < 0.2);
  }
}

TEST_CASE("zero coverage probability shares no query tokens") {
  SyntheticGenerator generator(0.0);
  Rng rng(8);
  std::vector<Query> subset = {make_query("q", "unusual zebra xylophone")};
  for (const ToolDraft& draft : generator.generate(subset, 6, rng)) {
    for (const std::string& token : tokenize(draft.description)) {
      CHECK(token != "unusual");
      CHECK(token != "zebra");
      CHECK(token != "xylophone");
    }
  }
}

TEST_CASE("reply parser handles bullets, numbering and separators") {
  const std::string content =
      "Here are the tools:\n"
      "1. AirWatch — monitors city air quality in real time\n"
      "2) PolluMap - compares pollution between locations\n"
      "- Breather: tracks pollen and smog alerts\n"
      "\xe2\x80\xa2 SkyIndex \xe2\x80\x93 reports the daily air index\n"
      "not a tool line\n"
      "3. Extra — beyond the cap\n";
  std::vector<ToolDraft> drafts = parse_generation_reply(content, 4);
  REQUIRE(drafts.size() == 4);
  CHECK(drafts[0].name == "AirWatch");
  CHECK(drafts[0].description == "monitors city air quality in real time");
  CHECK(drafts[1].name == "PolluMap");
  CHECK(drafts[2].name == "Breather");
  CHECK(drafts[3].name == "SkyIndex");
}

TEST_CASE("toolflood saturates a copy-generator fixture") {
  std::vector<Query> queries = {
      make_query("q0", "alpha beta gamma delta", "t"),
      make_query("q1", "epsilon zeta eta theta", "t")};
  GenerationConfig config;
  config.iterations = 3;  // three named copies per query
  config.subset_size = 2;
  config.tools_per_iteration = 2;
  config.seed = 10;
  toolflood::testing::CopyGenerator generator;
  SyntheticProvider provider(64, 20);
  ToolFloodResult result =
      run_toolflood(queries, config, generator, 3, 50, provider, 0.3);
  CHECK(result.trace.reason == GreedyStop::kResidualEmpty);
  CHECK(result.adversarial.size() == 6);
  for (const Tool& t : result.adversarial.tools()) {
    CHECK(t.provenance == Provenance::kAdversarial);
    CHECK(t.source == "toolflood");
  }
}

TEST_CASE("toolflood with an orthogonal pool returns an empty catalog") {
  std::vector<Query> queries = {make_query("q0", "alpha beta gamma", "t")};
  GenerationConfig config;
  config.iterations = 2;
  config.subset_size = 1;
  config.tools_per_iteration = 3;
  SyntheticGenerator generator(0.0);  // filler-only descriptions
  SyntheticProvider provider(64, 31);
  ToolFloodResult result =
      run_toolflood(queries, config, generator, 2, 10, provider, 0.1);
  CHECK(result.adversarial.empty());
  CHECK(result.trace.reason == GreedyStop::kZeroGain);
}

TEST_CASE("duplicate metadata strings are never selected twice") {
  struct ConstantGenerator : ToolGenerator {
    const std::string& generator_id() const override { return id; }
    bool deterministic() const override { return true; }
    std::vector<ToolDraft> generate(const std::vector<Query>&,
                                    std::size_t count, Rng&) override {
      return std::vector<ToolDraft>(count, {"echo", "alpha beta gamma"});
    }
    std::string id = "constant";
  };
  std::vector<Query> queries = {make_query("q0", "alpha beta gamma", "t")};
  GenerationConfig config;
  config.iterations = 4;
  config.subset_size = 1;
  config.tools_per_iteration = 3;
  ConstantGenerator generator;
  SyntheticProvider provider(64, 1);
  // Quota 2 cannot be met with one distinct string; the greedy must not
  // burn budget on the duplicates.
  ToolFloodResult result =
      run_toolflood(queries, config, generator, 2, 10, provider, 0.3);
  CHECK(result.adversarial.size() == 1);
}

TEST_CASE("random sybil matches the budget and the benign format") {
  toolflood::testing::SaturationFixture fixture =
      toolflood::testing::make_saturation_fixture(1, 4, 40, 3);
  Rng rng(12);
  Catalog swarm = baseline_random_sybil(200, fixture.benign, rng);
  CHECK(swarm.size() == 200);
  std::set<std::string> ids;
  for (const Tool& t : swarm.tools()) {
    CHECK(t.provenance == Provenance::kAdversarial);
    CHECK(t.source == "random-sybil");
    CHECK_FALSE(t.name.empty());
    CHECK_FALSE(t.description.empty());
    ids.insert(t.id);
  }
  CHECK(ids.size() == 200);
  CHECK(merge_under_budget(fixture.benign, swarm, 200).size() ==
        fixture.benign.size() + 200);

  Rng rng0(12);
  CHECK(baseline_random_sybil(0, fixture.benign, rng0).empty());
}

TEST_CASE("poisonedrag emits one accepted tool per target query") {
  SyntheticProvider provider(64, 17);
  SyntheticGenerator generator(1.0, 0.9);
  Rng rng(2);
  std::vector<Query> targets = numbered_queries(8);
  Catalog tools = baseline_poisonedrag(targets, generator, provider, 0.3, 8,
                                       rng);
  REQUIRE(tools.size() == targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Tool& t = tools.tools()[i];
    CHECK(t.source == "poisonedrag");
    // Description starts with the literal query text.
    CHECK(t.description.rfind(targets[i].text + " ", 0) == 0);
    // The appended sentence passes the strict acceptance inequality.
    const std::string sentence =
        t.description.substr(targets[i].text.size() + 1);
    CHECK(cosine_distance(provider.embed(targets[i].text),
                          provider.embed(sentence)) < 0.3);
  }
}

TEST_CASE("poisonedrag falls back to the query text when nothing passes") {
  SyntheticProvider provider(64, 17);
  SyntheticGenerator generator(0.0);  // never near the query
  Rng rng(2);
  std::vector<Query> targets = numbered_queries(3);
  Catalog tools =
      baseline_poisonedrag(targets, generator, provider, 0.3, 4, rng);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    CHECK(tools.tools()[i].description ==
          targets[i].text + " " + targets[i].text);
  }
}

}  // TEST_SUITE
