#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace toolflood {

enum class Provenance { kBenign, kAdversarial };

std::string_view provenance_name(Provenance p);

/// One catalog entry. The text handed to the retriever for this tool is
/// always `name + ": " + description`; keeping a single canonical form keeps
/// embedding-cache keys stable.
struct Tool {
  std::string id;
  std::string name;
  std::string description;
  Provenance provenance = Provenance::kBenign;
  std::string source = "benchmark";

  std::string metadata_text() const { return name + ": " + description; }
};

/// Immutable, ordered tool collection. Construction validates id uniqueness
/// and non-empty name/description; instances are safe to share across
/// threads without coordination.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<Tool> tools);

  const std::vector<Tool>& tools() const { return tools_; }
  std::size_t size() const { return tools_.size(); }
  bool empty() const { return tools_.empty(); }
  std::size_t count(Provenance p) const;
  const Tool* find(std::string_view id) const;

  // |T_adv| / |T_ben|. Zero when there are no adversarial tools; throws
  // std::domain_error when adversarial tools exist but benign do not.
  double poisoning_rate() const;

 private:
  std::vector<Tool> tools_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct Query {
  std::string id;
  std::string text;
  std::string task_id;
  std::string ground_truth_tool;  // empty when absent
};

struct QuerySplit {
  std::vector<Query> gen;
  std::vector<Query> test;
};

// --- JSON file formats -----------------------------------------------------
// Tools:   [{"id"?: str, "name": str, "description": str}, ...]
// Queries: [{"id"?: str, "text": str, "task_id": str,
//            "ground_truth_tool"?: str}, ...]
// Missing ids are assigned deterministically from record order.

Catalog parse_catalog_json(const nlohmann::json& doc, Provenance provenance,
                           std::string_view source);
nlohmann::json catalog_to_json(const Catalog& catalog);

Catalog ingest_catalog(const std::string& path, Provenance provenance,
                       std::string_view source = "benchmark");
void write_catalog(const Catalog& catalog, const std::string& path);

std::vector<Query> parse_queries_json(const nlohmann::json& doc);
std::vector<Query> ingest_queries(const std::string& path);

/// All of `ben` plus the first min(|adv|, budget) adversarial tools. Benign
/// entries are never modified; truncation is silent but logged.
Catalog merge_under_budget(const Catalog& ben, const Catalog& adv,
                           std::size_t budget);

/// Deterministic per-seed partition, stratified by task_id. gen and test are
/// disjoint by id and together restore the input; within each side the
/// original input order is preserved. gen_fraction must be in (0, 1].
QuerySplit split_queries(const std::vector<Query>& queries,
                         double gen_fraction, std::uint64_t seed);

std::vector<std::string> task_ids(const std::vector<Query>& queries);
std::vector<Query> queries_for_task(const std::vector<Query>& queries,
                                    std::string_view task_id);

}  // namespace toolflood
