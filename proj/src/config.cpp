#include "toolflood/config.hpp"

#include <filesystem>

#include "toolflood/errors.hpp"
#include "toolflood/textutil.hpp"

namespace toolflood {

namespace {

template <typename T>
void read_if_present(const nlohmann::json& doc, const char* key, T& out) {
  auto it = doc.find(key);
  if (it != doc.end() && !it->is_null()) out = it->get<T>();
}

ProviderSpec provider_from_json(const nlohmann::json& doc,
                                ProviderSpec spec = {}) {
  read_if_present(doc, "kind", spec.kind);
  read_if_present(doc, "dimension", spec.dimension);
  read_if_present(doc, "seed", spec.seed);
  read_if_present(doc, "model", spec.model_id);
  read_if_present(doc, "base_url", spec.base_url);
  read_if_present(doc, "api_key_env", spec.api_key_env);
  read_if_present(doc, "parallelism", spec.parallelism);
  read_if_present(doc, "max_retries", spec.max_retries);
  read_if_present(doc, "batch_size", spec.batch_size);
  return spec;
}

nlohmann::json provider_to_json(const ProviderSpec& spec) {
  return {{"kind", spec.kind},         {"dimension", spec.dimension},
          {"seed", spec.seed},         {"model", spec.model_id},
          {"base_url", spec.base_url}, {"api_key_env", spec.api_key_env},
          {"parallelism", spec.parallelism},
          {"max_retries", spec.max_retries},
          {"batch_size", spec.batch_size}};
}

}  // namespace

std::shared_ptr<EmbeddingProvider> ProviderSpec::create(
    const std::string& cache_path) const {
  std::shared_ptr<EmbeddingProvider> inner;
  if (kind == "synthetic") {
    inner = std::make_shared<SyntheticProvider>(dimension, seed);
  } else if (kind == "remote") {
    RemoteProviderConfig remote;
    remote.base_url = base_url;
    remote.model_id = model_id;
    remote.dimension = dimension;
    remote.api_key_env = api_key_env;
    remote.parallelism = parallelism;
    remote.max_retries = max_retries;
    remote.batch_size = batch_size;
    inner = std::make_shared<RemoteEmbeddingProvider>(remote);
  } else {
    throw ConfigError("unknown provider kind '" + kind + "'");
  }
  if (cache_path.empty()) return inner;
  return std::make_shared<CachingProvider>(
      inner, std::make_shared<EmbeddingCache>(cache_path));
}

std::string ProviderSpec::describe() const {
  if (kind == "synthetic") {
    return "synthetic/" + synthetic_model_id(dimension, seed);
  }
  return kind + "/" + model_id;
}

std::shared_ptr<ToolGenerator> GeneratorSpec::create() const {
  if (kind == "synthetic") {
    return std::make_shared<SyntheticGenerator>(coverage_prob,
                                                token_fraction);
  }
  if (kind == "remote") {
    RemoteGeneratorConfig remote;
    remote.base_url = base_url;
    remote.model_id = model_id;
    remote.api_key_env = api_key_env;
    remote.temperature = temperature;
    remote.max_retries = max_retries;
    return std::make_shared<RemoteLlmGenerator>(remote);
  }
  throw ConfigError("unknown generator kind '" + kind + "'");
}

std::shared_ptr<Selector> SelectorSpec::create(
    std::shared_ptr<EmbeddingProvider> target_provider) const {
  if (kind == "argmax") {
    return std::make_shared<ArgmaxSelector>(std::move(target_provider));
  }
  if (kind == "remote") {
    RemoteSelectorConfig remote;
    remote.base_url = base_url;
    remote.model_id = model_id;
    remote.api_key_env = api_key_env;
    remote.max_retries = max_retries;
    return std::make_shared<RemoteLlmSelector>(remote);
  }
  throw ConfigError("unknown selector kind '" + kind + "'");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  ExperimentConfig config;
  read_if_present(doc, "seed", config.seed);

  if (auto it = doc.find("paths"); it != doc.end()) {
    read_if_present(*it, "benign_catalog", config.paths.benign_catalog);
    read_if_present(*it, "queries", config.paths.queries);
    read_if_present(*it, "cache", config.paths.cache);
    read_if_present(*it, "out_dir", config.paths.out_dir);
  }
  if (auto it = doc.find("providers"); it != doc.end()) {
    if (auto s = it->find("shadow"); s != it->end()) {
      config.shadow = provider_from_json(*s);
    }
    if (auto t = it->find("target"); t != it->end()) {
      config.target = provider_from_json(*t);
    }
  }
  if (auto it = doc.find("retrieval"); it != doc.end()) {
    read_if_present(*it, "k", config.retrieval.k);
    std::string defense = "none";
    read_if_present(*it, "defense", defense);
    config.retrieval.defense = defense_from_name(defense);
    read_if_present(*it, "mmr_lambda", config.retrieval.mmr_lambda);
    read_if_present(*it, "mmr_pool_multiplier",
                    config.retrieval.mmr_pool_multiplier);
  }
  if (auto it = doc.find("covering"); it != doc.end()) {
    if (auto d = it->find("delta"); d != it->end() && !d->is_null()) {
      config.covering.delta = d->get<double>();
    }
    read_if_present(*it, "quantile_level", config.covering.quantile_level);
    read_if_present(*it, "quota", config.covering.quota);
    read_if_present(*it, "allow_quota_above_k",
                    config.covering.allow_quota_above_k);
  }
  if (auto it = doc.find("attack"); it != doc.end()) {
    read_if_present(*it, "kind", config.attack.kind);
    read_if_present(*it, "iterations", config.attack.iterations);
    read_if_present(*it, "subset_size", config.attack.subset_size);
    read_if_present(*it, "tools_per_iteration",
                    config.attack.tools_per_iteration);
    read_if_present(*it, "budget", config.attack.budget);
    read_if_present(*it, "accept_delta", config.attack.accept_delta);
    read_if_present(*it, "max_attempts", config.attack.max_attempts);
    if (auto g = it->find("generator"); g != it->end()) {
      read_if_present(*g, "kind", config.attack.generator.kind);
      read_if_present(*g, "coverage_prob",
                      config.attack.generator.coverage_prob);
      read_if_present(*g, "token_fraction",
                      config.attack.generator.token_fraction);
      read_if_present(*g, "model", config.attack.generator.model_id);
      read_if_present(*g, "base_url", config.attack.generator.base_url);
      read_if_present(*g, "api_key_env", config.attack.generator.api_key_env);
      read_if_present(*g, "temperature", config.attack.generator.temperature);
      read_if_present(*g, "max_retries", config.attack.generator.max_retries);
    }
  }
  if (auto it = doc.find("eval"); it != doc.end()) {
    if (auto sel = it->find("selectors"); sel != it->end()) {
      for (const auto& entry : *sel) {
        SelectorSpec spec;
        read_if_present(entry, "kind", spec.kind);
        read_if_present(entry, "model", spec.model_id);
        read_if_present(entry, "base_url", spec.base_url);
        read_if_present(entry, "api_key_env", spec.api_key_env);
        read_if_present(entry, "max_retries", spec.max_retries);
        config.eval.selectors.push_back(std::move(spec));
      }
    }
    if (auto def = it->find("defenses"); def != it->end()) {
      config.eval.defenses.clear();
      for (const auto& entry : *def) {
        config.eval.defenses.push_back(
            defense_from_name(entry.get<std::string>()));
      }
    }
    read_if_present(*it, "gen_fraction", config.eval.gen_fraction);
    read_if_present(*it, "per_task", config.eval.per_task);
    read_if_present(*it, "classifier", config.eval.classifier);
    read_if_present(*it, "classifier_url", config.eval.classifier_url);
    read_if_present(*it, "classifier_api_key_env",
                    config.eval.classifier_api_key_env);
  }
  if (auto it = doc.find("theory"); it != doc.end()) {
    read_if_present(*it, "iteration_sweep", config.theory.iteration_sweep);
    read_if_present(*it, "trials", config.theory.trials);
    read_if_present(*it, "quota", config.theory.quota);
    read_if_present(*it, "subset_size", config.theory.subset_size);
    read_if_present(*it, "tools_per_iteration",
                    config.theory.tools_per_iteration);
    read_if_present(*it, "samples_per_query",
                    config.theory.samples_per_query);
    read_if_present(*it, "target_failure", config.theory.target_failure);
    read_if_present(*it, "slack", config.theory.slack);
    read_if_present(*it, "max_queries", config.theory.max_queries);
  }
  if (config.eval.selectors.empty()) {
    config.eval.selectors.push_back(SelectorSpec{});
  }
  return config;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json selectors = nlohmann::json::array();
  for (const SelectorSpec& spec : eval.selectors) {
    selectors.push_back({{"kind", spec.kind},
                         {"model", spec.model_id},
                         {"base_url", spec.base_url},
                         {"api_key_env", spec.api_key_env},
                         {"max_retries", spec.max_retries}});
  }
  nlohmann::json defenses = nlohmann::json::array();
  for (Defense d : eval.defenses) {
    defenses.push_back(std::string(defense_name(d)));
  }
  nlohmann::json covering_json = {
      {"quantile_level", covering.quantile_level},
      {"quota", covering.quota},
      {"allow_quota_above_k", covering.allow_quota_above_k}};
  if (covering.delta) covering_json["delta"] = *covering.delta;

  return {
      {"seed", seed},
      {"paths",
       {{"benign_catalog", paths.benign_catalog},
        {"queries", paths.queries},
        {"cache", paths.cache},
        {"out_dir", paths.out_dir}}},
      {"providers",
       {{"shadow", provider_to_json(shadow)},
        {"target", provider_to_json(target)}}},
      {"retrieval",
       {{"k", retrieval.k},
        {"defense", std::string(defense_name(retrieval.defense))},
        {"mmr_lambda", retrieval.mmr_lambda},
        {"mmr_pool_multiplier", retrieval.mmr_pool_multiplier}}},
      {"covering", covering_json},
      {"attack",
       {{"kind", attack.kind},
        {"iterations", attack.iterations},
        {"subset_size", attack.subset_size},
        {"tools_per_iteration", attack.tools_per_iteration},
        {"budget", attack.budget},
        {"accept_delta", attack.accept_delta},
        {"max_attempts", attack.max_attempts},
        {"generator",
         {{"kind", attack.generator.kind},
          {"coverage_prob", attack.generator.coverage_prob},
          {"token_fraction", attack.generator.token_fraction},
          {"model", attack.generator.model_id},
          {"base_url", attack.generator.base_url},
          {"api_key_env", attack.generator.api_key_env},
          {"temperature", attack.generator.temperature},
          {"max_retries", attack.generator.max_retries}}}}},
      {"eval",
       {{"selectors", selectors},
        {"defenses", defenses},
        {"gen_fraction", eval.gen_fraction},
        {"per_task", eval.per_task},
        {"classifier", eval.classifier},
        {"classifier_url", eval.classifier_url},
        {"classifier_api_key_env", eval.classifier_api_key_env}}},
      {"theory",
       {{"iteration_sweep", theory.iteration_sweep},
        {"trials", theory.trials},
        {"quota", theory.quota},
        {"subset_size", theory.subset_size},
        {"tools_per_iteration", theory.tools_per_iteration},
        {"samples_per_query", theory.samples_per_query},
        {"target_failure", theory.target_failure},
        {"slack", theory.slack},
        {"max_queries", theory.max_queries}}}};
}

void ExperimentConfig::validate(bool check_paths) const {
  if (retrieval.k < 1) throw ConfigError("retrieval.k must be >= 1");
  if (covering.quota < 1) throw ConfigError("covering.quota must be >= 1");
  if (covering.quota > retrieval.k && !covering.allow_quota_above_k) {
    throw ConfigError(
        "covering.quota exceeds retrieval.k; set allow_quota_above_k to "
        "override");
  }
  if (covering.delta && !(*covering.delta > 0.0)) {
    throw ConfigError("covering.delta must be positive");
  }
  if (!(covering.quantile_level > 0.0) || covering.quantile_level > 1.0) {
    throw ConfigError("covering.quantile_level must be in (0, 1]");
  }
  if (!(eval.gen_fraction > 0.0) || eval.gen_fraction > 1.0) {
    throw ConfigError("eval.gen_fraction must be in (0, 1]");
  }
  if (attack.kind != "toolflood" && attack.kind != "random-sybil" &&
      attack.kind != "poisonedrag") {
    throw ConfigError("unknown attack kind '" + attack.kind + "'");
  }
  if (attack.budget < 1) throw ConfigError("attack.budget must be >= 1");
  if (eval.defenses.empty()) {
    throw ConfigError("eval.defenses must not be empty");
  }
  if (check_paths) {
    for (const std::string& path :
         {paths.benign_catalog, paths.queries}) {
      if (path.empty()) {
        throw ConfigError("paths.benign_catalog and paths.queries required");
      }
      if (!std::filesystem::exists(path)) {
        throw ConfigError("path does not exist: " + path);
      }
    }
  }
}

std::shared_ptr<MetadataClassifier> ExperimentConfig::create_classifier()
    const {
  if (eval.classifier == "pass-through") {
    return std::make_shared<PassThroughClassifier>();
  }
  if (eval.classifier == "heuristic") {
    return std::make_shared<HeuristicClassifier>();
  }
  if (eval.classifier == "remote") {
    if (eval.classifier_url.empty()) {
      throw ConfigError("remote classifier requires classifier_url");
    }
    return std::make_shared<RemoteClassifier>(eval.classifier_url,
                                              eval.classifier_api_key_env);
  }
  throw ConfigError("unknown classifier '" + eval.classifier + "'");
}

ExperimentConfig load_config_file(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  // A manifest embeds the resolved config it was produced from.
  if (doc.is_object() && doc.contains("command") && doc.contains("config")) {
    doc = doc["config"];
  }
  try {
    return ExperimentConfig::from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ProviderSpec parse_provider_override(const std::string& text,
                                     const ProviderSpec& base) {
  ProviderSpec spec = base;
  std::size_t start = 0;
  bool first = true;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string part = text.substr(start, end - start);
    start = end + 1;
    if (part.empty()) continue;
    const std::size_t eq = part.find('=');
    if (first && eq == std::string::npos) {
      spec.kind = part;
      first = false;
      continue;
    }
    first = false;
    if (eq == std::string::npos) {
      throw ConfigError("provider override part '" + part +
                        "' is not key=value");
    }
    const std::string key = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    if (key == "kind") {
      spec.kind = value;
    } else if (key == "dim" || key == "dimension") {
      spec.dimension = std::stoul(value);
    } else if (key == "seed") {
      spec.seed = std::stoull(value);
    } else if (key == "model") {
      spec.model_id = value;
    } else if (key == "url" || key == "base_url") {
      spec.base_url = value;
    } else if (key == "api_key_env") {
      spec.api_key_env = value;
    } else {
      throw ConfigError("unknown provider override key '" + key + "'");
    }
  }
  return spec;
}

}  // namespace toolflood
