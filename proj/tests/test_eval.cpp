#include <doctest.h>

#include <algorithm>

#include <nlohmann/json.hpp>

#include "support/fixtures.hpp"
#include "toolflood/eval.hpp"

using namespace toolflood;
using toolflood::testing::make_query;
using toolflood::testing::make_saturation_fixture;
using toolflood::testing::SaturationFixture;

namespace {

// Deployed catalog where the first `covered` queries each get `copies`
// adversarial near-duplicates of their text.
Catalog deploy_with_copies(const SaturationFixture& fixture,
                           std::size_t covered, std::size_t copies) {
  std::vector<Tool> adv;
  for (std::size_t q = 0; q < covered; ++q) {
    for (std::size_t c = 0; c < copies; ++c) {
      adv.push_back({"adv-" + std::to_string(q) + "-" + std::to_string(c),
                     "copy" + std::to_string(q * copies + c),
                     fixture.queries[q].text, Provenance::kAdversarial,
                     "test"});
    }
  }
  return merge_under_budget(fixture.benign, Catalog(std::move(adv)), 1000);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("domination count is zero without adversarial tools") {
  SaturationFixture fixture = make_saturation_fixture(1, 3, 20, 9);
  SyntheticProvider provider(64, 9);
  DominationRecord record =
      domination_count(fixture.queries[0], fixture.benign, provider, 5);
  CHECK(record.count == 0);
  CHECK_FALSE(record.dominated);
}

TEST_CASE("constructed nearest-copies give full domination") {
  SaturationFixture fixture = make_saturation_fixture(1, 3, 20, 10);
  SyntheticProvider provider(64, 10);
  Catalog deployed = deploy_with_copies(fixture, 3, 4);
  DominationRecord record =
      domination_count(fixture.queries[0], deployed, provider, 4);
  CHECK(record.count == 4);
  CHECK(record.dominated);
}

TEST_CASE("domination equals a provenance recount of the retrieval") {
  SaturationFixture fixture = make_saturation_fixture(1, 4, 30, 11);
  SyntheticProvider provider(64, 11);
  Catalog deployed = deploy_with_copies(fixture, 2, 2);
  for (const Query& q : fixture.queries) {
    DominationRecord record = domination_count(q, deployed, provider, 5);
    std::size_t recount = 0;
    for (const RetrievedEntry& e :
         retrieve_topk(q, deployed, provider, 5).entries) {
      if (e.provenance == Provenance::kAdversarial) ++recount;
    }
    CHECK(record.count == recount);
  }
}

TEST_CASE("tdr endpoints and the 3-of-5 fixture") {
  SaturationFixture fixture = make_saturation_fixture(1, 5, 25, 12);
  SyntheticProvider provider(64, 12);
  const std::size_t k = 3;

  CHECK(tdr(fixture.queries, fixture.benign, provider, k) == 0.0);

  Catalog all = deploy_with_copies(fixture, 5, k);
  CHECK(tdr(fixture.queries, all, provider, k) == 1.0);

  Catalog three = deploy_with_copies(fixture, 3, k);
  CHECK(tdr(fixture.queries, three, provider, k) == doctest::Approx(0.6));

  CHECK_THROWS_AS(tdr({}, all, provider, k), std::invalid_argument);
}

TEST_CASE("argmax selector picks the most similar candidate") {
  SaturationFixture fixture = make_saturation_fixture(1, 2, 10, 13);
  auto provider = std::make_shared<SyntheticProvider>(64, 13);
  Catalog deployed = deploy_with_copies(fixture, 1, 1);
  ArgmaxSelector selector(provider);

  RetrievalResult top =
      retrieve_topk(fixture.queries[0], deployed, *provider, 4);
  auto picked = selector.select(fixture.queries[0], top.entries, deployed);
  REQUIRE(picked.has_value());
  CHECK(*picked == "adv-0-0");  // the exact-text copy wins

  // Single candidate: that candidate.
  std::vector<RetrievedEntry> one = {top.entries[0]};
  CHECK(*selector.select(fixture.queries[0], one, deployed) ==
        top.entries[0].tool_id);

  CHECK_THROWS_AS(selector.select(fixture.queries[0], {}, deployed),
                  std::invalid_argument);
}

TEST_CASE("argmax equals a full-score oracle on random instances") {
  SaturationFixture fixture = make_saturation_fixture(1, 6, 40, 14);
  auto provider = std::make_shared<SyntheticProvider>(64, 14);
  ArgmaxSelector selector(provider);
  for (const Query& q : fixture.queries) {
    RetrievalResult top = retrieve_topk(q, fixture.benign, *provider, 7);
    auto picked = selector.select(q, top.entries, fixture.benign);

    const EmbeddingVector qv = provider->embed(q.text);
    std::string oracle;
    double best = -2.0;
    for (const RetrievedEntry& e : top.entries) {
      const double sim =
          dot(qv, provider->embed(
                      fixture.benign.find(e.tool_id)->metadata_text()));
      if (sim > best || (sim == best && e.tool_id < oracle)) {
        best = sim;
        oracle = e.tool_id;
      }
    }
    CHECK(*picked == oracle);
  }
}

TEST_CASE("asr endpoints and domination forcing") {
  SaturationFixture fixture = make_saturation_fixture(1, 4, 25, 15);
  auto provider = std::make_shared<SyntheticProvider>(64, 15);
  ArgmaxSelector selector(provider);
  const std::size_t k = 3;

  CHECK(asr(fixture.queries, fixture.benign, *provider, k, selector) == 0.0);

  Catalog all = deploy_with_copies(fixture, 4, k);
  CHECK(asr(fixture.queries, all, *provider, k, selector) == 1.0);

  // Partial domination: ASR is still bounded below by TDR.
  Catalog partial = deploy_with_copies(fixture, 2, k);
  const double asr_value =
      asr(fixture.queries, partial, *provider, k, selector);
  const double tdr_value = tdr(fixture.queries, partial, *provider, k);
  CHECK(asr_value >= tdr_value);
}

TEST_CASE("abstention counts as attack failure") {
  struct AbstainingSelector : Selector {
    const std::string& selector_id() const override { return id; }
    bool may_abstain() const override { return true; }
    std::optional<std::string> select(const Query&,
                                      const std::vector<RetrievedEntry>&,
                                      const Catalog&) override {
      return std::nullopt;
    }
    std::string id = "abstain";
  };
  SaturationFixture fixture = make_saturation_fixture(1, 3, 15, 16);
  SyntheticProvider provider(64, 16);
  Catalog deployed = deploy_with_copies(fixture, 3, 3);
  AbstainingSelector selector;
  CHECK(asr(fixture.queries, deployed, provider, 3, selector) == 0.0);
}

TEST_CASE("evaluate_arm aggregates per task and keeps ASR >= TDR") {
  SaturationFixture fixture = make_saturation_fixture(2, 3, 30, 17);
  auto provider = std::make_shared<SyntheticProvider>(64, 17);

  std::map<std::string, std::vector<Query>> test_by_task;
  for (const Query& q : fixture.queries) {
    test_by_task[q.task_id].push_back(q);
  }
  std::map<std::string, Catalog> deployed_by_task;
  std::size_t covered = 0;
  for (const auto& [task, queries] : test_by_task) {
    std::vector<Tool> adv;
    for (std::size_t i = 0; i < covered + 1 && i < queries.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        adv.push_back({"adv-" + task + "-" + std::to_string(i) + "-" +
                           std::to_string(c),
                       "copy" + std::to_string(c), queries[i].text,
                       Provenance::kAdversarial, "test"});
      }
    }
    deployed_by_task.emplace(
        task, merge_under_budget(fixture.benign, Catalog(std::move(adv)),
                                 1000));
    ++covered;
  }

  RetrieverConfig config;
  config.k = 3;
  Retriever retriever(config, provider);
  std::vector<std::shared_ptr<Selector>> selectors = {
      std::make_shared<ArgmaxSelector>(provider)};
  ExperimentReport report =
      evaluate_arm("test-attack", Defense::kNone, deployed_by_task,
                   test_by_task, retriever, selectors, {});

  CHECK(report.tasks.size() == 2);
  CHECK(report.attack == "test-attack");
  for (const TaskEvalResult& task : report.tasks) {
    CHECK(task.selectors[0].asr >= task.tdr);
    CHECK(task.poisoning_rate ==
          doctest::Approx(static_cast<double>(task.budget_used) /
                          static_cast<double>(fixture.benign.size())));
  }
  CHECK(report.selectors[0].asr >= report.tdr);

  // Catalog order must not matter: rebuild each deployment reversed.
  std::map<std::string, Catalog> reversed;
  for (const auto& [task, deployed] : deployed_by_task) {
    std::vector<Tool> tools = deployed.tools();
    std::reverse(tools.begin(), tools.end());
    reversed.emplace(task, Catalog(std::move(tools)));
  }
  ExperimentReport report2 =
      evaluate_arm("test-attack", Defense::kNone, reversed, test_by_task,
                   retriever, selectors, {});
  CHECK(report2.tdr == report.tdr);
  CHECK(report2.selectors[0].asr == report.selectors[0].asr);
}

TEST_CASE("report serialization carries the config echo and csv rows") {
  ExperimentReport report;
  report.attack = "toolflood";
  report.defense = "none";
  report.avg_budget = 12;
  report.avg_poisoning_rate = 0.4;
  report.tdr = 0.75;
  report.selectors.push_back({"argmax", 0.875, 0, 0});
  report.echo.k = 5;
  report.echo.quota = 5;
  report.echo.delta = 0.3;

  nlohmann::json doc = report.to_json();
  CHECK(doc["config"]["k"] == 5);
  CHECK(doc["tdr"] == 0.75);

  const std::string csv = report_csv_rows(report);
  CHECK(csv.find("toolflood,none,argmax,12,0.4,0.75,0.875") !=
        std::string::npos);
}

}  // TEST_SUITE
