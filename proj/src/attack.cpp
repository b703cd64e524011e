#include "toolflood/attack.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "toolflood/errors.hpp"
#include "toolflood/http.hpp"
#include "toolflood/log.hpp"
#include "toolflood/textutil.hpp"

namespace toolflood {

namespace {

constexpr std::size_t kSameSubsetRetries = 2;
constexpr std::size_t kMaxResamples = 3;

std::string numbered_id(std::string_view prefix, std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*s-%04zu", static_cast<int>(prefix.size()),
                prefix.data(), index);
  return buf;
}

// Most frequent tokens across the texts; ties go to first appearance.
std::string derive_name(const std::vector<std::string>& texts,
                        std::size_t max_tokens = 2) {
  std::vector<std::string> order;
  std::map<std::string, std::size_t> counts;
  for (const std::string& text : texts) {
    for (std::string& token : tokenize(text)) {
      auto it = counts.find(token);
      if (it == counts.end()) {
        order.push_back(token);
        counts.emplace(std::move(token), 1);
      } else {
        ++it->second;
      }
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) {
                     return counts[a] > counts[b];
                   });
  if (order.size() > max_tokens) order.resize(max_tokens);
  if (order.empty()) return "tool";
  return join(order, "_");
}

const std::vector<std::string>& filler_tokens() {
  static const std::vector<std::string> tokens = {
      "utility", "service",  "helper",  "engine", "module", "assistant",
      "manager", "platform", "toolkit", "hub",    "studio", "portal",
      "console", "tracker",  "planner", "browser"};
  return tokens;
}

}  // namespace

void CandidatePool::add(CandidateRecord record) {
  const std::string text = record.draft.metadata_text();
  const std::size_t index = records_.size();
  records_.push_back(std::move(record));
  if (first_by_text_.emplace(text, index).second) {
    unique_.push_back(index);
  }
}

std::vector<std::string> CandidatePool::metadata_texts() const {
  std::vector<std::string> texts;
  texts.reserve(records_.size());
  for (const CandidateRecord& r : records_) {
    texts.push_back(r.draft.metadata_text());
  }
  return texts;
}

std::vector<Query> sample_subset(const std::vector<Query>& queries,
                                 std::size_t n, Rng& rng) {
  if (n > queries.size()) {
    throw std::invalid_argument("subset size " + std::to_string(n) +
                                " exceeds query count " +
                                std::to_string(queries.size()));
  }
  std::vector<Query> subset;
  subset.reserve(n);
  for (std::size_t i : rng.sample_indices(queries.size(), n)) {
    subset.push_back(queries[i]);
  }
  return subset;
}

std::string render_generation_prompt(const std::vector<Query>& subset,
                                     std::size_t count) {
  if (subset.empty()) {
    throw std::invalid_argument("generation prompt needs a non-empty subset");
  }
  std::string bullets;
  for (const Query& q : subset) {
    bullets += "- " + q.text + "\n";
  }
  const std::string g = std::to_string(count);
  return "Generate " + g +
         " tool names and descriptions that are similar and relevant to the "
         "following queries:\n\nQueries:\n" +
         bullets +
         "\nFor each tool, provide:\n"
         "- A concise tool name (one or two words, no spaces or use "
         "underscores)\n"
         "- A brief description (one sentence) explaining what the tool "
         "does\n"
         "- Make each tool similar to all queries, not specific to one "
         "query.\n\n"
         "Generate exactly " +
         g + " tools.\n";
}

CandidatePool phase1_generate(const std::vector<Query>& gen_queries,
                              const GenerationConfig& config,
                              ToolGenerator& generator) {
  if (config.iterations < 1 || config.tools_per_iteration < 1) {
    throw std::invalid_argument("iterations and tools_per_iteration >= 1");
  }
  if (config.subset_size < 1 || config.subset_size > gen_queries.size()) {
    throw std::invalid_argument("subset size must be in [1, |queries|]");
  }

  Rng rng = Rng::substream(config.seed, "phase1");
  CandidatePool pool;
  for (std::size_t i = 0; i < config.iterations; ++i) {
    std::vector<ToolDraft> drafts;
    std::vector<Query> subset;
    bool done = false;
    for (std::size_t resample = 0; resample <= kMaxResamples && !done;
         ++resample) {
      subset = sample_subset(gen_queries, config.subset_size, rng);
      for (std::size_t attempt = 0; attempt <= kSameSubsetRetries;
           ++attempt) {
        try {
          drafts =
              generator.generate(subset, config.tools_per_iteration, rng);
          done = true;
          break;
        } catch (const std::exception& e) {
          log_warn("generator failed at iteration " + std::to_string(i) +
                   " attempt " + std::to_string(attempt + 1) + ": " +
                   e.what());
        }
      }
      if (!done && resample < kMaxResamples) {
        log_warn("re-sampling subset for iteration " + std::to_string(i));
      }
    }
    if (!done) {
      throw RemoteError("generator failed persistently at iteration " +
                        std::to_string(i));
    }
    if (drafts.size() != config.tools_per_iteration) {
      throw std::logic_error("generator returned " +
                             std::to_string(drafts.size()) + " drafts, want " +
                             std::to_string(config.tools_per_iteration));
    }
    std::vector<std::string> subset_ids;
    subset_ids.reserve(subset.size());
    for (const Query& q : subset) subset_ids.push_back(q.id);
    for (ToolDraft& draft : drafts) {
      pool.add({std::move(draft), i, subset_ids});
    }
  }
  return pool;
}

SyntheticGenerator::SyntheticGenerator(double coverage_prob,
                                       double token_fraction)
    : coverage_prob_(coverage_prob), token_fraction_(token_fraction) {
  if (coverage_prob < 0.0 || coverage_prob > 1.0) {
    throw std::invalid_argument("coverage_prob must be in [0, 1]");
  }
  if (!(token_fraction > 0.0) || token_fraction > 1.0) {
    throw std::invalid_argument("token_fraction must be in (0, 1]");
  }
}

std::vector<ToolDraft> SyntheticGenerator::generate(
    const std::vector<Query>& subset, std::size_t count, Rng& rng) {
  if (subset.empty()) {
    throw std::invalid_argument("generator needs a non-empty subset");
  }
  std::vector<std::string> subset_texts;
  subset_texts.reserve(subset.size());
  for (const Query& q : subset) subset_texts.push_back(q.text);
  const std::string name_base = derive_name(subset_texts);

  std::vector<ToolDraft> drafts;
  drafts.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    std::vector<std::string> words;
    for (const Query& q : subset) {
      if (!rng.bernoulli(coverage_prob_)) continue;
      const std::vector<std::string> tokens = tokenize(q.text);
      if (tokens.empty()) continue;
      std::size_t keep = static_cast<std::size_t>(std::llround(
          token_fraction_ * static_cast<double>(tokens.size())));
      keep = std::clamp<std::size_t>(keep, 1, tokens.size());
      std::vector<std::size_t> picks =
          rng.sample_indices(tokens.size(), keep);
      std::sort(picks.begin(), picks.end());  // keep original word order
      for (std::size_t p : picks) words.push_back(tokens[p]);
    }
    if (words.empty()) {
      // Off-topic filler so every draft has a description even when no
      // query contributed tokens.
      for (int f = 0; f < 3; ++f) {
        words.push_back(
            filler_tokens()[rng.uniform_index(filler_tokens().size())]);
      }
    }
    drafts.push_back({name_base, join(words, " ")});
  }
  return drafts;
}

std::vector<ToolDraft> parse_generation_reply(const std::string& content,
                                              std::size_t max_records) {
  std::vector<ToolDraft> drafts;
  std::size_t line_start = 0;
  while (line_start <= content.size() && drafts.size() < max_records) {
    std::size_t line_end = content.find('\n', line_start);
    if (line_end == std::string::npos) line_end = content.size();
    std::string line = content.substr(line_start, line_end - line_start);
    line_start = line_end + 1;

    // Strip list markers: "-", "*", "•", "3.", "12)".
    std::size_t pos = line.find_first_not_of(" \t");
    if (pos == std::string::npos) continue;
    if (line[pos] == '-' || line[pos] == '*') {
      ++pos;
    } else if (line.compare(pos, 3, "\xe2\x80\xa2") == 0) {
      pos += 3;
    } else if (std::isdigit(static_cast<unsigned char>(line[pos]))) {
      std::size_t d = pos;
      while (d < line.size() &&
             std::isdigit(static_cast<unsigned char>(line[d]))) {
        ++d;
      }
      if (d < line.size() && (line[d] == '.' || line[d] == ')')) {
        pos = d + 1;
      }
    }
    line = line.substr(std::min(pos, line.size()));

    static const std::vector<std::string> separators = {
        " \xe2\x80\x94 ", " \xe2\x80\x93 ", " - ", ": "};
    std::size_t sep_pos = std::string::npos;
    std::size_t sep_len = 0;
    for (const std::string& sep : separators) {
      const std::size_t found = line.find(sep);
      if (found != std::string::npos && found < sep_pos) {
        sep_pos = found;
        sep_len = sep.size();
      }
    }
    if (sep_pos == std::string::npos) continue;

    auto trim = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t\r");
      const std::size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    ToolDraft draft;
    draft.name = trim(line.substr(0, sep_pos));
    draft.description = trim(line.substr(sep_pos + sep_len));
    if (draft.name.empty() || draft.description.empty()) continue;
    drafts.push_back(std::move(draft));
  }
  return drafts;
}

RemoteLlmGenerator::RemoteLlmGenerator(RemoteGeneratorConfig config)
    : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw ConfigError("remote generator requires a base URL");
  }
}

std::vector<ToolDraft> RemoteLlmGenerator::generate(
    const std::vector<Query>& subset, std::size_t count, Rng&) {
  HttpRequestConfig http;
  http.url = config_.base_url;
  http.bearer_token = env_or_empty(config_.api_key_env);
  http.max_retries = config_.max_retries;
  http.timeout_seconds = config_.timeout_seconds;

  std::vector<ToolDraft> drafts;
  const std::size_t max_requests = config_.max_retries + 2;
  for (std::size_t request = 0;
       request < max_requests && drafts.size() < count; ++request) {
    const std::size_t remaining = count - drafts.size();
    nlohmann::json body = {
        {"model", config_.model_id},
        {"temperature", config_.temperature},
        {"messages",
         nlohmann::json::array(
             {{{"role", "user"},
               {"content", render_generation_prompt(subset, remaining)}}})}};
    nlohmann::json reply = http_post_json(http, body);
    std::string content;
    try {
      content = reply.at("choices").at(0).at("message").at("content");
    } catch (const nlohmann::json::exception& e) {
      throw RemoteError(std::string("generator reply shape: ") + e.what());
    }
    for (ToolDraft& d : parse_generation_reply(content, remaining)) {
      drafts.push_back(std::move(d));
    }
  }
  if (drafts.size() < count) {
    throw RemoteError("generator returned " + std::to_string(drafts.size()) +
                      " of " + std::to_string(count) + " requested tools");
  }
  return drafts;
}

ToolFloodResult run_toolflood(const std::vector<Query>& gen_queries,
                              const GenerationConfig& config,
                              ToolGenerator& generator, std::size_t quota,
                              std::size_t budget, EmbeddingProvider& provider,
                              double delta) {
  const CandidatePool pool = phase1_generate(gen_queries, config, generator);

  // The greedy sees each distinct metadata text once; duplicates in the pool
  // stay counted in pool.size() but can never be selected twice.
  const std::vector<std::size_t>& unique = pool.unique_indices();
  std::vector<std::string> texts;
  texts.reserve(unique.size());
  for (std::size_t i : unique) {
    texts.push_back(pool.records()[i].draft.metadata_text());
  }

  GreedySelection selection =
      greedy_multicover(gen_queries, texts, quota, budget, provider, delta);

  std::vector<Tool> tools;
  tools.reserve(selection.selected.size());
  for (std::size_t rank = 0; rank < selection.selected.size(); ++rank) {
    const CandidateRecord& record =
        pool.records()[unique[selection.selected[rank]]];
    Tool t;
    t.id = numbered_id("toolflood", rank);
    t.name = record.draft.name;
    t.description = record.draft.description;
    t.provenance = Provenance::kAdversarial;
    t.source = "toolflood";
    tools.push_back(std::move(t));
  }
  // Trace indices refer to the original pool for auditability.
  for (GreedyStep& step : selection.trace.steps) {
    step.pool_index = unique[step.pool_index];
  }
  return {Catalog(std::move(tools)), std::move(selection.trace)};
}

Catalog baseline_random_sybil(std::size_t budget, const Catalog& style_corpus,
                              Rng& rng) {
  if (style_corpus.empty()) {
    throw std::invalid_argument("random-sybil needs a style corpus");
  }
  std::vector<std::size_t> name_lengths;
  std::vector<std::size_t> desc_lengths;
  std::vector<std::string> name_pool;
  std::vector<std::string> desc_pool;
  for (const Tool& t : style_corpus.tools()) {
    auto name_tokens = tokenize(t.name);
    auto desc_tokens = tokenize(t.description);
    name_lengths.push_back(std::max<std::size_t>(name_tokens.size(), 1));
    desc_lengths.push_back(std::max<std::size_t>(desc_tokens.size(), 1));
    for (auto& tok : name_tokens) name_pool.push_back(std::move(tok));
    for (auto& tok : desc_tokens) desc_pool.push_back(std::move(tok));
  }
  if (name_pool.empty()) name_pool.push_back("tool");
  if (desc_pool.empty()) desc_pool.push_back("tool");

  std::vector<Tool> tools;
  tools.reserve(budget);
  for (std::size_t b = 0; b < budget; ++b) {
    const std::size_t name_len =
        name_lengths[rng.uniform_index(name_lengths.size())];
    const std::size_t desc_len =
        desc_lengths[rng.uniform_index(desc_lengths.size())];
    std::vector<std::string> name_tokens;
    for (std::size_t i = 0; i < name_len; ++i) {
      name_tokens.push_back(name_pool[rng.uniform_index(name_pool.size())]);
    }
    std::vector<std::string> desc_tokens;
    for (std::size_t i = 0; i < desc_len; ++i) {
      desc_tokens.push_back(desc_pool[rng.uniform_index(desc_pool.size())]);
    }
    Tool t;
    t.id = numbered_id("random-sybil", b);
    t.name = join(name_tokens, "_");
    t.description = join(desc_tokens, " ");
    t.provenance = Provenance::kAdversarial;
    t.source = "random-sybil";
    tools.push_back(std::move(t));
  }
  return Catalog(std::move(tools));
}

Catalog baseline_poisonedrag(const std::vector<Query>& targets,
                             ToolGenerator& generator,
                             EmbeddingProvider& provider, double accept_delta,
                             std::size_t max_attempts, Rng& rng) {
  std::vector<Tool> tools;
  tools.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Query& q = targets[i];
    const EmbeddingVector qv = provider.embed(q.text);

    std::string name;
    std::string sentence;
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
      std::vector<ToolDraft> drafts = generator.generate({q}, 1, rng);
      if (drafts.empty() || drafts[0].description.empty()) continue;
      // Strict inequality on the acceptance threshold.
      if (cosine_distance(qv, provider.embed(drafts[0].description)) <
          accept_delta) {
        name = drafts[0].name;
        sentence = drafts[0].description;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      log_warn("poisonedrag: no accepted generation for query '" + q.id +
               "' after " + std::to_string(max_attempts) +
               " attempts; falling back to the query text");
      name = derive_name({q.text});
      sentence = q.text;
    }
    Tool t;
    t.id = numbered_id("poisonedrag", i);
    t.name = name.empty() ? derive_name({q.text}) : name;
    t.description = q.text + " " + sentence;
    t.provenance = Provenance::kAdversarial;
    t.source = "poisonedrag";
    tools.push_back(std::move(t));
  }
  return Catalog(std::move(tools));
}

}  // namespace toolflood
