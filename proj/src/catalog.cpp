#include "toolflood/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "toolflood/log.hpp"
#include "toolflood/rng.hpp"
#include "toolflood/textutil.hpp"

namespace toolflood {

std::string_view provenance_name(Provenance p) {
  return p == Provenance::kBenign ? "benign" : "adversarial";
}

Catalog::Catalog(std::vector<Tool> tools) : tools_(std::move(tools)) {
  for (std::size_t i = 0; i < tools_.size(); ++i) {
    const Tool& t = tools_[i];
    if (t.id.empty()) {
      throw std::invalid_argument("tool at index " + std::to_string(i) +
                                  " has empty id");
    }
    if (t.name.empty() || t.description.empty()) {
      throw std::invalid_argument("tool '" + t.id +
                                  "' has empty name or description");
    }
    if (!index_.emplace(t.id, i).second) {
      throw std::invalid_argument("duplicate tool id '" + t.id + "'");
    }
  }
}

std::size_t Catalog::count(Provenance p) const {
  std::size_t n = 0;
  for (const Tool& t : tools_) {
    if (t.provenance == p) ++n;
  }
  return n;
}

const Tool* Catalog::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &tools_[it->second];
}

double Catalog::poisoning_rate() const {
  const std::size_t adv = count(Provenance::kAdversarial);
  const std::size_t ben = count(Provenance::kBenign);
  if (adv == 0) return 0.0;
  if (ben == 0) {
    throw std::domain_error("poisoning rate undefined: no benign tools");
  }
  return static_cast<double>(adv) / static_cast<double>(ben);
}

namespace {

std::string auto_id(std::string_view prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*s-%04zu", static_cast<int>(prefix.size()),
                prefix.data(), index);
  return buf;
}

std::string field_or_throw(const nlohmann::json& record, const char* key,
                           std::size_t index) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string() ||
      it->get<std::string>().empty()) {
    throw std::invalid_argument("record " + std::to_string(index) +
                                ": missing or empty '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

Catalog parse_catalog_json(const nlohmann::json& doc, Provenance provenance,
                           std::string_view source) {
  if (!doc.is_array()) {
    throw std::invalid_argument("catalog document must be a JSON array");
  }
  std::vector<Tool> tools;
  tools.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const nlohmann::json& record = doc[i];
    if (!record.is_object()) {
      throw std::invalid_argument("record " + std::to_string(i) +
                                  ": not an object");
    }
    Tool t;
    t.name = field_or_throw(record, "name", i);
    t.description = field_or_throw(record, "description", i);
    t.provenance = provenance;
    t.source = record.value("source", std::string(source));
    t.id = record.value("id", std::string());
    if (t.id.empty()) t.id = auto_id("tool", i);
    tools.push_back(std::move(t));
  }
  return Catalog(std::move(tools));
}

nlohmann::json catalog_to_json(const Catalog& catalog) {
  nlohmann::json doc = nlohmann::json::array();
  for (const Tool& t : catalog.tools()) {
    doc.push_back({{"id", t.id},
                   {"name", t.name},
                   {"description", t.description},
                   {"source", t.source}});
  }
  return doc;
}

Catalog ingest_catalog(const std::string& path, Provenance provenance,
                       std::string_view source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  try {
    return parse_catalog_json(doc, provenance, source);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_catalog(const Catalog& catalog, const std::string& path) {
  write_text_file(path, catalog_to_json(catalog).dump(2) + "\n");
}

std::vector<Query> parse_queries_json(const nlohmann::json& doc) {
  if (!doc.is_array()) {
    throw std::invalid_argument("query document must be a JSON array");
  }
  std::vector<Query> queries;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const nlohmann::json& record = doc[i];
    Query q;
    q.text = field_or_throw(record, "text", i);
    q.task_id = field_or_throw(record, "task_id", i);
    q.ground_truth_tool = record.value("ground_truth_tool", std::string());
    q.id = record.value("id", std::string());
    if (q.id.empty()) q.id = auto_id("q", i);
    if (!seen.insert(q.id).second) {
      throw std::invalid_argument("record " + std::to_string(i) +
                                  ": duplicate query id '" + q.id + "'");
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

std::vector<Query> ingest_queries(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  try {
    return parse_queries_json(doc);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

Catalog merge_under_budget(const Catalog& ben, const Catalog& adv,
                           std::size_t budget) {
  for (const Tool& t : adv.tools()) {
    if (t.provenance != Provenance::kAdversarial) {
      throw std::invalid_argument("merge_under_budget: tool '" + t.id +
                                  "' is not adversarial");
    }
  }
  std::vector<Tool> merged = ben.tools();
  const std::size_t take = std::min(adv.size(), budget);
  if (take < adv.size()) {
    log_warn("merge_under_budget: truncating " + std::to_string(adv.size()) +
             " adversarial tools to budget " + std::to_string(budget));
  }
  merged.insert(merged.end(), adv.tools().begin(),
                adv.tools().begin() + static_cast<std::ptrdiff_t>(take));
  return Catalog(std::move(merged));
}

QuerySplit split_queries(const std::vector<Query>& queries,
                         double gen_fraction, std::uint64_t seed) {
  if (!(gen_fraction > 0.0) || gen_fraction > 1.0) {
    throw std::invalid_argument("gen_fraction must be in (0, 1]");
  }
  // Group indices by task, preserving input order within each task.
  std::map<std::string, std::vector<std::size_t>> by_task;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    by_task[queries[i].task_id].push_back(i);
  }

  std::vector<bool> in_gen(queries.size(), false);
  for (const auto& [task, indices] : by_task) {
    const std::size_t n = indices.size();
    std::size_t n_gen;
    if (gen_fraction == 1.0) {
      n_gen = n;
    } else {
      if (n < 2) {
        throw std::invalid_argument("task '" + task +
                                    "' has fewer than 2 queries; cannot "
                                    "produce a non-empty gen/test split");
      }
      n_gen = static_cast<std::size_t>(
          std::llround(gen_fraction * static_cast<double>(n)));
      n_gen = std::clamp<std::size_t>(n_gen, 1, n - 1);
    }
    Rng rng = Rng::substream(seed, "split:" + task);
    for (std::size_t pick : rng.sample_indices(n, n_gen)) {
      in_gen[indices[pick]] = true;
    }
  }

  QuerySplit split;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    (in_gen[i] ? split.gen : split.test).push_back(queries[i]);
  }
  return split;
}

std::vector<std::string> task_ids(const std::vector<Query>& queries) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const Query& q : queries) {
    if (seen.insert(q.task_id).second) ids.push_back(q.task_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<Query> queries_for_task(const std::vector<Query>& queries,
                                    std::string_view task_id) {
  std::vector<Query> out;
  for (const Query& q : queries) {
    if (q.task_id == task_id) out.push_back(q);
  }
  return out;
}

}  // namespace toolflood
