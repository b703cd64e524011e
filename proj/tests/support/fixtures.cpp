#include "support/fixtures.hpp"

#include <algorithm>
#include <stdexcept>

#include "toolflood/textutil.hpp"

namespace toolflood::testing {

Query make_query(std::string id, std::string text, std::string task) {
  Query q;
  q.id = std::move(id);
  q.text = std::move(text);
  q.task_id = std::move(task);
  return q;
}

std::string random_word(Rng& rng) {
  const std::size_t length = 5 + rng.uniform_index(4);
  std::string word;
  for (std::size_t i = 0; i < length; ++i) {
    word.push_back(static_cast<char>('a' + rng.uniform_index(26)));
  }
  return word;
}

std::vector<ToolDraft> CopyGenerator::generate(
    const std::vector<Query>& subset, std::size_t count, Rng&) {
  std::vector<ToolDraft> drafts;
  drafts.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const Query& q = subset[counter_ % subset.size()];
    drafts.push_back(
        {"copy" + std::to_string(counter_), q.text});
    ++counter_;
  }
  return drafts;
}

std::vector<ToolDraft> FailingGenerator::generate(const std::vector<Query>&,
                                                  std::size_t, Rng&) {
  throw std::runtime_error("generator down");
}

namespace {

std::vector<std::string> make_vocab(std::size_t n, Rng& rng) {
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) words.push_back(random_word(rng));
  return words;
}

std::vector<std::string> pick_words(const std::vector<std::string>& vocab,
                                    std::size_t n, Rng& rng) {
  std::vector<std::string> out;
  for (std::size_t i : rng.sample_indices(vocab.size(), n)) {
    out.push_back(vocab[i]);
  }
  return out;
}

}  // namespace

SyntheticCorpus make_corpus(const CorpusParams& params) {
  Rng rng(params.seed);
  SyntheticCorpus corpus;

  struct TaskVocab {
    std::vector<std::string> core;
    std::vector<std::vector<std::string>> subtopics;
    std::vector<std::string> all;
  };
  std::vector<TaskVocab> vocabs;
  for (std::size_t t = 0; t < params.n_tasks; ++t) {
    TaskVocab vocab;
    vocab.core = make_vocab(params.core_words, rng);
    for (std::size_t s = 0; s < params.subtopics; ++s) {
      vocab.subtopics.push_back(make_vocab(params.subtopic_words, rng));
      vocab.all.insert(vocab.all.end(), vocab.subtopics.back().begin(),
                       vocab.subtopics.back().end());
    }
    vocab.all.insert(vocab.all.end(), vocab.core.begin(), vocab.core.end());
    vocabs.push_back(std::move(vocab));
    corpus.tasks.push_back("task-" + std::to_string(t));
  }

  auto make_task_query = [&](std::size_t task, std::size_t index,
                             std::string_view kind) {
    const TaskVocab& vocab = vocabs[task];
    const std::size_t subtopic = index % params.subtopics;
    std::vector<std::string> words =
        pick_words(vocab.core, params.query_core_words, rng);
    for (const std::string& w : pick_words(vocab.subtopics[subtopic],
                                           params.query_subtopic_words, rng)) {
      words.push_back(w);
    }
    words.push_back(random_word(rng));  // per-query noise
    Query q;
    q.id = std::string(kind) + "-" + std::to_string(task) + "-" +
           std::to_string(index);
    q.task_id = corpus.tasks[task];
    q.text = join(words, " ");
    return q;
  };

  for (std::size_t t = 0; t < params.n_tasks; ++t) {
    for (std::size_t i = 0; i < params.gen_per_task; ++i) {
      corpus.gen.push_back(make_task_query(t, i, "gen"));
    }
    for (std::size_t i = 0; i < params.test_per_task; ++i) {
      corpus.test.push_back(make_task_query(t, i, "test"));
    }
  }

  const std::vector<std::string> generic = make_vocab(params.benign_vocab, rng);
  std::vector<Tool> benign;
  for (std::size_t b = 0; b < params.n_benign; ++b) {
    const TaskVocab& vocab = vocabs[rng.uniform_index(vocabs.size())];
    std::vector<std::string> words =
        pick_words(vocab.all, params.benign_topic_words, rng);
    for (const std::string& w :
         pick_words(generic, params.benign_generic_words, rng)) {
      words.push_back(w);
    }
    Tool t;
    t.id = "ben-" + std::to_string(b);
    t.name = join(pick_words(generic, 2, rng), "_");
    t.description = join(words, " ");
    t.provenance = Provenance::kBenign;
    benign.push_back(std::move(t));
  }
  corpus.benign = Catalog(std::move(benign));
  return corpus;
}

SaturationFixture make_saturation_fixture(std::size_t n_tasks,
                                          std::size_t queries_per_task,
                                          std::size_t benign_tools,
                                          std::uint64_t seed) {
  Rng rng(seed);
  SaturationFixture fixture;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    for (std::size_t i = 0; i < queries_per_task; ++i) {
      std::vector<std::string> words;
      for (int w = 0; w < 5; ++w) words.push_back(random_word(rng));
      Query q;
      q.id = "q-" + std::to_string(t) + "-" + std::to_string(i);
      q.task_id = "task-" + std::to_string(t);
      q.text = join(words, " ");
      fixture.queries.push_back(std::move(q));
    }
  }
  std::vector<Tool> benign;
  for (std::size_t b = 0; b < benign_tools; ++b) {
    std::vector<std::string> words;
    for (int w = 0; w < 6; ++w) words.push_back(random_word(rng));
    Tool t;
    t.id = "ben-" + std::to_string(b);
    t.name = random_word(rng);
    t.description = join(words, " ");
    benign.push_back(std::move(t));
  }
  fixture.benign = Catalog(std::move(benign));
  return fixture;
}

std::vector<std::size_t> full_sort_topk(const std::vector<double>& scores,
                                        const std::vector<std::string>& ids,
                                        std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (scores[a] != scores[b]) return scores[a] > scores[b];
                     return ids[a] < ids[b];
                   });
  order.resize(std::min(k, order.size()));
  return order;
}

std::size_t exhaustive_multicover_opt(const CoverMatrix& matrix,
                                      std::size_t quota, std::size_t budget) {
  const std::size_t n = matrix.covered.size();
  if (n > 20) throw std::invalid_argument("pool too large to enumerate");
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) > budget) continue;
    std::vector<std::size_t> subset;
    for (std::size_t c = 0; c < n; ++c) {
      if (mask & (1u << c)) subset.push_back(c);
    }
    best = std::max(best, multicover_objective(matrix, subset, quota));
  }
  return best;
}

}  // namespace toolflood::testing
