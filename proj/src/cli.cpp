#include "toolflood/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "toolflood/attack.hpp"
#include "toolflood/catalog.hpp"
#include "toolflood/config.hpp"
#include "toolflood/covering.hpp"
#include "toolflood/errors.hpp"
#include "toolflood/eval.hpp"
#include "toolflood/log.hpp"
#include "toolflood/textutil.hpp"
#include "toolflood/theory.hpp"

namespace toolflood {

namespace {

namespace fs = std::filesystem;

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string shadow_override;
  std::string target_override;
  std::string artifacts_path;
  bool dry_run = false;
  std::vector<std::string> report_files;
};

struct LoadedInputs {
  Catalog benign;
  std::vector<Query> queries;
  QuerySplit split;
};

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                    c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

ExperimentConfig resolve_config(const CliOptions& options) {
  if (options.config_path.empty()) {
    throw ConfigError("--config is required");
  }
  ExperimentConfig config = load_config_file(options.config_path);
  if (options.seed) config.seed = *options.seed;
  if (!options.out_dir.empty()) config.paths.out_dir = options.out_dir;
  if (!options.shadow_override.empty()) {
    config.shadow = parse_provider_override(options.shadow_override,
                                            config.shadow);
  }
  if (!options.target_override.empty()) {
    config.target = parse_provider_override(options.target_override,
                                            config.target);
  }
  return config;
}

LoadedInputs load_inputs(const ExperimentConfig& config) {
  LoadedInputs inputs;
  inputs.benign =
      ingest_catalog(config.paths.benign_catalog, Provenance::kBenign);
  inputs.queries = ingest_queries(config.paths.queries);
  if (inputs.queries.empty()) {
    throw ConfigError("query file is empty: " + config.paths.queries);
  }
  inputs.split = split_queries(inputs.queries, config.eval.gen_fraction,
                               Rng::substream(config.seed, "split").next_u64());
  return inputs;
}

struct ResolvedDelta {
  double value = 0.0;
  std::string mode;  // "fixed" | "quantile"
};

ResolvedDelta resolve_delta(const ExperimentConfig& config,
                            const std::vector<Query>& gen_queries,
                            const Catalog& benign,
                            EmbeddingProvider& shadow) {
  if (config.covering.delta) {
    return {*config.covering.delta, "fixed"};
  }
  return {calibrate_delta(gen_queries, benign, shadow,
                          config.covering.quantile_level),
          "quantile"};
}

// Task grouping honoring eval.per_task; pooled mode uses one "all" bucket.
std::map<std::string, std::vector<Query>> group_queries(
    const std::vector<Query>& queries, bool per_task) {
  std::map<std::string, std::vector<Query>> grouped;
  for (const Query& q : queries) {
    grouped[per_task ? q.task_id : "all"].push_back(q);
  }
  return grouped;
}

struct TaskAttack {
  Catalog adversarial;
  std::optional<GreedyTrace> trace;
};

TaskAttack build_task_attack(const ExperimentConfig& config,
                             const std::string& task,
                             const std::vector<Query>& gen_queries,
                             const Catalog& benign, EmbeddingProvider& shadow,
                             double delta) {
  const AttackSpec& attack = config.attack;
  if (attack.kind == "toolflood") {
    if (attack.subset_size > gen_queries.size()) {
      throw ConfigError("attack.subset_size " +
                        std::to_string(attack.subset_size) +
                        " exceeds generation queries (" +
                        std::to_string(gen_queries.size()) + ") for task '" +
                        task + "'");
    }
    GenerationConfig gen;
    gen.iterations = attack.iterations;
    gen.subset_size = attack.subset_size;
    gen.tools_per_iteration = attack.tools_per_iteration;
    gen.seed = Rng::substream(config.seed, "phase1:" + task).next_u64();
    auto generator = attack.generator.create();
    ToolFloodResult result =
        run_toolflood(gen_queries, gen, *generator, config.covering.quota,
                      attack.budget, shadow, delta);
    return {std::move(result.adversarial), std::move(result.trace)};
  }
  if (attack.kind == "random-sybil") {
    Rng rng = Rng::substream(config.seed, "sybil:" + task);
    return {baseline_random_sybil(attack.budget, benign, rng), std::nullopt};
  }
  if (attack.kind == "poisonedrag") {
    Rng rng = Rng::substream(config.seed, "poisonedrag:" + task);
    auto generator = attack.generator.create();
    return {baseline_poisonedrag(gen_queries, *generator, shadow,
                                 attack.accept_delta, attack.max_attempts,
                                 rng),
            std::nullopt};
  }
  throw ConfigError("unknown attack kind '" + attack.kind + "'");
}

void write_manifest(const ExperimentConfig& config, const std::string& command,
                    const nlohmann::json& resolved,
                    const std::vector<std::string>& artifact_files) {
  nlohmann::json artifacts = nlohmann::json::object();
  for (const std::string& file : artifact_files) {
    const fs::path path = fs::path(config.paths.out_dir) / file;
    artifacts[file] = sha256_hex(read_text_file(path.string()));
  }
  nlohmann::json manifest = {
      {"command", command},
      {"config", config.to_json()},
      {"resolved", resolved},
      {"providers",
       {{"shadow", config.shadow.describe()},
        {"target", config.target.describe()}}},
      {"artifacts", artifacts}};
  const fs::path path = fs::path(config.paths.out_dir) / "manifest.json";
  write_text_file(path.string(), manifest.dump(2) + "\n");
}

int cmd_calibrate(const CliOptions& options) {
  ExperimentConfig config = resolve_config(options);
  config.validate();
  if (options.dry_run) {
    log_info("calibrate: dry run, config ok");
    return kExitOk;
  }
  LoadedInputs inputs = load_inputs(config);
  auto shadow = config.shadow.create(config.paths.cache);
  const ResolvedDelta delta =
      resolve_delta(config, inputs.split.gen, inputs.benign, *shadow);

  fs::create_directories(config.paths.out_dir);
  nlohmann::json calibration = {
      {"delta", delta.value},
      {"mode", delta.mode},
      {"quantile_level", config.covering.quantile_level}};
  write_text_file(
      (fs::path(config.paths.out_dir) / "calibration.json").string(),
      calibration.dump(2) + "\n");
  write_manifest(config, "calibrate",
                 {{"delta", delta.value}, {"delta_mode", delta.mode}},
                 {"calibration.json"});
  std::printf("delta %s (%s)\n", format_double(delta.value).c_str(),
              delta.mode.c_str());
  return kExitOk;
}

int cmd_attack(const CliOptions& options) {
  ExperimentConfig config = resolve_config(options);
  config.validate();
  if (options.dry_run) {
    log_info("attack: dry run, config ok");
    return kExitOk;
  }
  LoadedInputs inputs = load_inputs(config);
  auto shadow = config.shadow.create(config.paths.cache);
  const ResolvedDelta delta =
      resolve_delta(config, inputs.split.gen, inputs.benign, *shadow);

  fs::create_directories(config.paths.out_dir);
  std::vector<std::string> artifact_files;
  nlohmann::json index_tasks = nlohmann::json::object();
  for (const auto& [task, gen_queries] :
       group_queries(inputs.split.gen, config.eval.per_task)) {
    TaskAttack attack = build_task_attack(config, task, gen_queries,
                                          inputs.benign, *shadow, delta.value);
    const std::string catalog_file =
        "adversarial_" + sanitize_filename(task) + ".json";
    write_catalog(attack.adversarial,
                  (fs::path(config.paths.out_dir) / catalog_file).string());
    artifact_files.push_back(catalog_file);
    nlohmann::json entry = {{"catalog", catalog_file}};
    if (attack.trace) {
      const std::string trace_file =
          "trace_" + sanitize_filename(task) + ".json";
      write_text_file((fs::path(config.paths.out_dir) / trace_file).string(),
                      attack.trace->to_json().dump(2) + "\n");
      artifact_files.push_back(trace_file);
      entry["trace"] = trace_file;
    }
    index_tasks[task] = entry;
    log_info("attack '" + config.attack.kind + "' task '" + task + "': " +
             std::to_string(attack.adversarial.size()) + " tools");
  }
  nlohmann::json index = {{"attack", config.attack.kind},
                          {"delta", delta.value},
                          {"tasks", index_tasks}};
  write_text_file(
      (fs::path(config.paths.out_dir) / "attack_index.json").string(),
      index.dump(2) + "\n");
  artifact_files.push_back("attack_index.json");
  write_manifest(config, "attack",
                 {{"delta", delta.value}, {"delta_mode", delta.mode}},
                 artifact_files);
  return kExitOk;
}

int cmd_eval(const CliOptions& options) {
  ExperimentConfig config = resolve_config(options);
  config.validate();
  if (options.dry_run) {
    log_info("eval: dry run, config ok");
    return kExitOk;
  }
  LoadedInputs inputs = load_inputs(config);
  if (inputs.split.test.empty()) {
    throw ConfigError("test split is empty; lower eval.gen_fraction");
  }

  const std::string artifacts_path =
      options.artifacts_path.empty()
          ? (fs::path(config.paths.out_dir) / "attack_index.json").string()
          : options.artifacts_path;
  if (!fs::exists(artifacts_path)) {
    throw ConfigError("attack artifacts missing: " + artifacts_path +
                      " (run the attack command first)");
  }
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_text_file(artifacts_path));
  } catch (const std::exception& e) {
    throw ConfigError(artifacts_path + ": " + e.what());
  }
  const fs::path artifacts_dir = fs::path(artifacts_path).parent_path();
  const std::string attack_name = index.value("attack", config.attack.kind);
  const double delta = index.value("delta", 0.0);

  auto test_by_task =
      group_queries(inputs.split.test, config.eval.per_task);
  std::map<std::string, Catalog> deployed_by_task;
  for (const auto& [task, entry] : index.at("tasks").items()) {
    if (test_by_task.find(task) == test_by_task.end()) {
      throw ConfigError("artifact task '" + task +
                        "' has no test queries under the configured split");
    }
    const Catalog adversarial = ingest_catalog(
        (artifacts_dir / entry.at("catalog").get<std::string>()).string(),
        Provenance::kAdversarial, attack_name);
    deployed_by_task.emplace(
        task,
        merge_under_budget(inputs.benign, adversarial, config.attack.budget));
  }
  for (const auto& [task, queries] : test_by_task) {
    if (deployed_by_task.find(task) == deployed_by_task.end()) {
      throw ConfigError("no attack artifact for task '" + task + "'");
    }
  }

  auto target = config.target.create(config.paths.cache);
  auto classifier = config.create_classifier();
  std::vector<std::shared_ptr<Selector>> selectors;
  for (const SelectorSpec& spec : config.eval.selectors) {
    selectors.push_back(spec.create(target));
  }

  ConfigEcho echo;
  echo.k = config.retrieval.k;
  echo.quota = config.covering.quota;
  echo.delta = delta;
  echo.seed = config.seed;
  echo.shadow_provider = config.shadow.describe();
  echo.target_provider = config.target.describe();
  echo.mmr_lambda = config.retrieval.mmr_lambda;
  echo.mmr_pool_multiplier = config.retrieval.mmr_pool_multiplier;

  fs::create_directories(config.paths.out_dir);
  nlohmann::json report_list = nlohmann::json::array();
  std::string csv = report_csv_header();
  std::string diagnostics;
  for (Defense defense : config.eval.defenses) {
    RetrieverConfig retriever_config = config.retrieval;
    retriever_config.defense = defense;
    Retriever retriever(retriever_config, target, classifier);
    ExperimentReport report =
        evaluate_arm(attack_name, defense, deployed_by_task, test_by_task,
                     retriever, selectors, echo);
    report_list.push_back(report.to_json());
    csv += report_csv_rows(report);
    diagnostics += diagnostics_jsonl(report);
    log_info("eval " + attack_name + " defense=" +
             std::string(defense_name(defense)) +
             ": TDR=" + format_double(report.tdr));
  }
  write_text_file((fs::path(config.paths.out_dir) / "report.json").string(),
                  report_list.dump(2) + "\n");
  write_text_file((fs::path(config.paths.out_dir) / "report.csv").string(),
                  csv);
  write_text_file(
      (fs::path(config.paths.out_dir) / "diagnostics.jsonl").string(),
      diagnostics);
  write_manifest(config, "eval", {{"delta", delta}},
                 {"report.json", "report.csv", "diagnostics.jsonl"});
  return kExitOk;
}

int cmd_theory(const CliOptions& options) {
  ExperimentConfig config = resolve_config(options);
  config.validate();
  if (options.dry_run) {
    log_info("theory: dry run, config ok");
    return kExitOk;
  }
  LoadedInputs inputs = load_inputs(config);
  auto shadow = config.shadow.create(config.paths.cache);
  const ResolvedDelta delta =
      resolve_delta(config, inputs.split.gen, inputs.benign, *shadow);

  std::vector<Query> queries = inputs.split.gen;
  if (queries.size() > config.theory.max_queries) {
    queries.resize(config.theory.max_queries);
  }
  if (config.theory.subset_size > queries.size()) {
    throw ConfigError("theory.subset_size exceeds the theory query set");
  }
  auto generator = config.attack.generator.create();

  std::vector<double> measured = measure_cover_probabilities(
      queries, *generator, *shadow, delta.value, config.theory.subset_size,
      config.theory.samples_per_query,
      Rng::substream(config.seed, "theory-measure").next_u64());
  std::vector<double> rounded;
  double min_p = 1.0;
  for (double p : measured) {
    const double down = round_down_probability(p);
    rounded.push_back(down);
    min_p = std::min(min_p, down);
  }
  if (min_p <= 0.0) {
    throw CertificateError(
        "measured cover probability rounds down to zero; the bound's "
        "assumptions do not hold on this fixture");
  }

  ConvergenceParams base;
  base.target_count = queries.size();
  base.subset_size = config.theory.subset_size;
  base.tools_per_iteration = config.theory.tools_per_iteration;
  base.cover_prob = min_p;
  base.quota = config.theory.quota;
  const std::size_t required = required_iterations(
      config.theory.target_failure, base, queries.size());

  std::string csv = "iterations,union_bound,certificate,empirical_rate,trials\n";
  bool violated = false;
  for (std::size_t iterations : config.theory.iteration_sweep) {
    GenerationConfig gen;
    gen.iterations = iterations;
    gen.subset_size = config.theory.subset_size;
    gen.tools_per_iteration = config.theory.tools_per_iteration;
    gen.seed = Rng::substream(config.seed, "theory-sweep", iterations)
                   .next_u64();
    EmpiricalConvergence result = empirical_convergence(
        queries, gen, *generator, *shadow, delta.value, config.theory.quota,
        rounded, config.theory.trials,
        Rng::substream(config.seed, "theory-trials", iterations).next_u64());
    csv += std::to_string(iterations) + "," +
           format_double(result.union_bound) + "," +
           format_double(result.certificate) + "," +
           format_double(result.success_rate) + "," +
           std::to_string(config.theory.trials) + "\n";
    if (result.success_rate < result.certificate - config.theory.slack) {
      violated = true;
      log_warn("certificate violated at I=" + std::to_string(iterations) +
               ": empirical " + format_double(result.success_rate) +
               " < certificate " + format_double(result.certificate) +
               " - slack");
    }
  }

  fs::create_directories(config.paths.out_dir);
  write_text_file((fs::path(config.paths.out_dir) / "theory.csv").string(),
                  csv);
  nlohmann::json resolved = {{"delta", delta.value},
                             {"delta_mode", delta.mode},
                             {"measured_cover_prob", measured},
                             {"rounded_cover_prob", rounded},
                             {"required_iterations", required},
                             {"target_failure", config.theory.target_failure}};
  write_manifest(config, "theory", resolved, {"theory.csv"});
  if (violated) {
    throw CertificateError("empirical rate fell below the union-bound "
                           "certificate minus slack; see theory.csv");
  }
  return kExitOk;
}

int cmd_report(const CliOptions& options) {
  std::vector<std::string> files = options.report_files;
  if (files.empty() && !options.config_path.empty()) {
    ExperimentConfig config = resolve_config(options);
    files.push_back(
        (fs::path(config.paths.out_dir) / "report.json").string());
  }
  if (files.empty()) {
    throw ConfigError("report: pass report files or --config");
  }
  std::string csv = report_csv_header();
  for (const std::string& file : files) {
    nlohmann::json reports;
    try {
      reports = nlohmann::json::parse(read_text_file(file));
    } catch (const std::exception& e) {
      throw ConfigError(file + ": " + e.what());
    }
    for (const auto& report : reports) {
      for (const auto& outcome : report.at("selectors")) {
        csv += report.at("attack").get<std::string>() + "," +
               report.at("defense").get<std::string>() + "," +
               outcome.at("selector").get<std::string>() + "," +
               format_double(report.at("avg_budget").get<double>()) + "," +
               format_double(report.at("avg_poisoning_rate").get<double>()) +
               "," + format_double(report.at("tdr").get<double>()) + "," +
               format_double(outcome.at("asr").get<double>()) + "\n";
      }
    }
  }
  std::fputs(csv.c_str(), stdout);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Retrieval-layer attack laboratory for tool-augmented agents"};
  app.require_subcommand(1);

  CliOptions options;
  auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* config_opt =
        cmd->add_option("--config", options.config_path, "JSON config file "
                        "(or a manifest.json from a previous run)");
    if (config_required) config_opt->required();
    cmd->add_option("--seed", options.seed, "override the root seed");
    cmd->add_option("--out", options.out_dir, "override the output directory");
    cmd->add_option("--shadow", options.shadow_override,
                    "override the shadow provider, e.g. synthetic,dim=64,seed=3");
    cmd->add_option("--target", options.target_override,
                    "override the target provider");
    cmd->add_flag("--dry-run", options.dry_run,
                  "validate the configuration and exit");
  };

  auto* calibrate = app.add_subcommand(
      "calibrate", "resolve the cover threshold from benign geometry");
  add_common(calibrate, true);
  auto* attack = app.add_subcommand(
      "attack", "generate and select adversarial tool metadata");
  add_common(attack, true);
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate TDR/ASR for attack artifacts");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--artifacts", options.artifacts_path,
                       "attack_index.json from the attack command");
  auto* theory = app.add_subcommand(
      "theory", "convergence bounds and Monte Carlo validation");
  add_common(theory, true);
  auto* report =
      app.add_subcommand("report", "print a CSV summary of report files");
  add_common(report, false);
  report->add_option("files", options.report_files, "report.json files");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (calibrate->parsed()) return cmd_calibrate(options);
    if (attack->parsed()) return cmd_attack(options);
    if (eval_cmd->parsed()) return cmd_eval(options);
    if (theory->parsed()) return cmd_theory(options);
    if (report->parsed()) return cmd_report(options);
    return kExitConfigError;
  } catch (const ConfigError& e) {
    log_warn(std::string("config error: ") + e.what());
    return kExitConfigError;
  } catch (const CertificateError& e) {
    log_warn(std::string("certificate failure: ") + e.what());
    return kExitCertificateError;
  } catch (const RemoteError& e) {
    log_warn(std::string("remote failure: ") + e.what());
    return kExitRemoteError;
  } catch (const std::exception& e) {
    log_warn(std::string("error: ") + e.what());
    return kExitFailure;
  }
}

}  // namespace toolflood
