#include "aclm/cli.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include <CLI11.hpp>

#include "aclm/config.hpp"
#include "aclm/errors.hpp"
#include "aclm/evaluation.hpp"
#include "aclm/pipeline.hpp"
#include "aclm/util.hpp"

namespace aclm::cli {

namespace {

using nlohmann::json;

// Collects inputs/outputs/stats while a command runs and lands next to the
// command's artifacts, so every run is auditable.
class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed)
      : start_(std::chrono::steady_clock::now()), command_(std::move(command)), seed_(seed) {}

  void add_input(const std::filesystem::path& path) {
    inputs_[path.string()] = file_digest(path);
  }
  void add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }
  void set_config(json config) { config_ = std::move(config); }
  json& stats() { return stats_; }

  void write(const std::filesystem::path& path) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json manifest = {{"command", command_}, {"version", kVersion},
                     {"inputs", inputs_},   {"outputs", outputs_},
                     {"seeds", json{{"run", seed_}}}, {"timing_seconds", elapsed}};
    if (!config_.is_null()) manifest["config"] = config_;
    if (!stats_.empty()) manifest["stats"] = stats_;
    write_file(path, manifest.dump(2) + "\n");
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::string command_;
  std::uint64_t seed_;
  json inputs_ = json::object();
  json config_;
  json stats_ = json::object();
  std::vector<std::string> outputs_;
};

struct CommonOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string strategy;
  std::size_t workers = 0;
  bool workers_set = false;
  std::string stopwords;
  bool space_separated = false;
  bool repair = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_strategy) {
  cmd->add_option("--config", opts.config_path, "pipeline config JSON");
  cmd->add_option("--seed", opts.seed, "run seed (overrides the config)")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  if (with_strategy) {
    cmd->add_option("--strategy", opts.strategy, "keyword strategy: attention|random|none")
        ->check(CLI::IsMember({"attention", "random", "none"}));
  }
  cmd->add_option("--workers", opts.workers, "worker threads (default: available cores)")
      ->each([&opts](const std::string&) { opts.workers_set = true; });
  cmd->add_option("--stopwords", opts.stopwords, "stopword list, one word per line");
  cmd->add_flag("--space", opts.space_separated, "read space-separated CoNLL columns");
  cmd->add_flag("--repair", opts.repair, "convert orphan I-X tags to B-X instead of failing");
}

PipelineConfig effective_config(const CommonOptions& opts) {
  PipelineConfig config;
  if (!opts.config_path.empty()) config = load_config(opts.config_path);
  if (opts.seed_set) config.seed = opts.seed;
  if (!opts.strategy.empty()) config.strategy = keyword_strategy_from_string(opts.strategy);
  if (opts.workers_set) config.workers = opts.workers;
  if (!opts.stopwords.empty()) config.stopwords_path = opts.stopwords;
  config.validate();
  return config;
}

ConllOptions conll_options(const CommonOptions& opts) {
  ConllOptions options;
  options.separator = opts.space_separated ? ' ' : '\t';
  options.repair = opts.repair;
  return options;
}

// --scorer-url accepts host:port or http://host:port.
void parse_host_port(std::string url, std::string& host, int& port) {
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) == 0) url = url.substr(kScheme.size());
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto colon = url.rfind(':');
  if (colon == std::string::npos) throw ArgumentError("expected host:port, got \"" + url + "\"");
  host = url.substr(0, colon);
  try {
    port = std::stoi(url.substr(colon + 1));
  } catch (const std::exception&) {
    throw ArgumentError("bad port in \"" + url + "\"");
  }
}

// ---------------------------------------------------------------------------
// split

struct SplitArgs {
  CommonOptions common;
  std::string input;
  std::string out_dir;
  std::vector<std::size_t> sizes;
  std::string dev;
  std::string dev_mode = "proportional";
  std::size_t dev_size = 0;
};

int run_split(const SplitArgs& args) {
  PipelineConfig config = effective_config(args.common);
  if (!args.sizes.empty()) config.split_sizes = args.sizes;

  Manifest manifest("split", config.seed);
  manifest.set_config(config_to_json(config));
  manifest.add_input(args.input);
  const auto corpus = load_conll_file(args.input, conll_options(args.common));

  std::vector<TaggedSentence> dev;
  if (!args.dev.empty()) {
    manifest.add_input(args.dev);
    dev = load_conll_file(args.dev, conll_options(args.common));
  }

  auto sizes = config.split_sizes;
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  for (std::size_t size : sizes) {
    if (size > corpus.size()) {
      throw ArgumentError("split size " + std::to_string(size) + " exceeds corpus size " +
                          std::to_string(corpus.size()));
    }
  }

  const std::filesystem::path out_dir(args.out_dir);
  std::filesystem::create_directories(out_dir);

  // nested: each smaller subset is drawn from the next larger one
  std::vector<TaggedSentence> pool = corpus;
  for (std::size_t size : sizes) {
    pool = stratified_sample(pool, size, derive_seed(config.seed, "train", size)).subset;
    const auto train_path = out_dir / ("train_" + std::to_string(size) + ".conll");
    write_conll_file(train_path, pool);
    manifest.add_output(train_path);
    manifest.stats()["train_" + std::to_string(size)] = pool.size();

    if (!dev.empty()) {
      std::size_t n_dev;
      if (args.dev_mode == "fixed") {
        if (args.dev_size == 0) throw ArgumentError("--dev-mode fixed requires --dev-size");
        n_dev = std::min(args.dev_size, dev.size());
      } else {
        const double ratio = static_cast<double>(size) / static_cast<double>(corpus.size());
        n_dev = std::min<std::size_t>(
            dev.size(),
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                         ratio * static_cast<double>(dev.size())))));
      }
      const auto dev_subset = stratified_sample(dev, n_dev, derive_seed(config.seed, "dev", size));
      const auto dev_path = out_dir / ("dev_" + std::to_string(size) + ".conll");
      write_conll_file(dev_path, dev_subset.subset);
      manifest.add_output(dev_path);
      manifest.stats()["dev_" + std::to_string(size)] = dev_subset.subset.size();
    }
  }
  manifest.write(out_dir / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// template

struct TemplateArgs {
  CommonOptions common;
  std::string input;
  std::string attn;
  std::string out;
};

int run_template(const TemplateArgs& args) {
  const PipelineConfig config = effective_config(args.common);
  Manifest manifest("template", config.seed);
  manifest.set_config(config_to_json(config));
  manifest.add_input(args.input);

  const auto corpus = load_conll_file(args.input, conll_options(args.common));
  std::unique_ptr<AttentionProvider> attention;
  if (!args.attn.empty()) {
    manifest.add_input(args.attn);
    attention = std::make_unique<FileAttentionProvider>(args.attn);
  }

  KeywordFilter filter;
  if (!config.stopwords_path.empty()) filter.stopwords = load_stopwords(config.stopwords_path);

  std::string dump;
  std::vector<std::string> skipped;
  for (const TaggedSentence& sentence : corpus) {
    const auto entities = extract_entities(sentence);
    if (entities.empty()) {
      skipped.push_back(sentence.id);
      continue;
    }
    Rng rng(derive_seed(config.seed, sentence.id, 0));
    KeywordSet keywords;
    switch (config.strategy) {
      case KeywordStrategy::attention: {
        if (!attention) throw DataError("--attn is required for the attention strategy");
        auto map = attention->fetch(sentence.id);
        if (!map) throw DataError("missing attention map for sentence \"" + sentence.id + "\"");
        keywords = select_keywords(sentence, aggregate(*map, config.attention_layers), config.p,
                                   filter);
        break;
      }
      case KeywordStrategy::random:
        keywords = select_keywords_random(sentence, config.p, filter, rng);
        break;
      case KeywordStrategy::none:
        break;
    }
    Template tmpl = dynamic_mask(linearize(selective_mask(sentence, keywords), entities),
                                 config.mask, rng);
    dump += template_to_json(tmpl).dump();
    dump += '\n';
  }
  write_file(args.out, dump);
  manifest.add_output(args.out);
  manifest.stats()["templates"] = corpus.size() - skipped.size();
  manifest.stats()["entity_free_ids"] = skipped;
  manifest.write(args.out + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// augment

struct AugmentArgs {
  CommonOptions common;
  std::string input;
  std::string attn;
  std::string embeddings;
  std::string backend = "lookup";
  std::string service_url;
  std::string out_dir;
};

int run_augment(const AugmentArgs& args) {
  const PipelineConfig config = effective_config(args.common);
  Manifest manifest("augment", config.seed);
  manifest.set_config(config_to_json(config));
  manifest.add_input(args.input);

  const auto corpus = load_conll_file(args.input, conll_options(args.common));

  std::unique_ptr<AttentionProvider> attention;
  if (!args.attn.empty()) {
    manifest.add_input(args.attn);
    attention = std::make_unique<FileAttentionProvider>(args.attn);
  } else if (config.strategy == KeywordStrategy::attention) {
    throw ArgumentError("--attn is required for the attention strategy");
  }

  EmbeddingIndex embeddings;
  const bool mix_enabled = !args.embeddings.empty();
  if (mix_enabled) {
    manifest.add_input(args.embeddings);
    embeddings = load_embeddings_jsonl(args.embeddings);
  }

  std::unique_ptr<Denoiser> denoiser;
  if (args.backend == "lookup") {
    denoiser = std::make_unique<LookupDenoiser>();
  } else if (args.backend == "service") {
    if (args.service_url.empty()) throw ArgumentError("--service-url is required with --backend service");
    std::string host;
    int port = 0;
    parse_host_port(args.service_url, host, port);
    denoiser = std::make_unique<ServiceDenoiser>(host, port);
  } else {
    throw ArgumentError("unknown backend \"" + args.backend + "\"");
  }

  KeywordFilter filter;
  if (!config.stopwords_path.empty()) filter.stopwords = load_stopwords(config.stopwords_path);
  const auto training = build_training_pairs(corpus, config.strategy, config.p,
                                             config.attention_layers, config.mask, attention.get(),
                                             filter, config.vocab,
                                             derive_seed(config.seed, "train", 0));
  denoiser->fine_tune(training.pairs, config.fine_tune);

  auto records = run_generation(corpus, *denoiser, attention.get(),
                                mix_enabled ? &embeddings : nullptr, config);
  const auto result = post_process(records, corpus);

  const std::filesystem::path out_dir(args.out_dir);
  std::filesystem::create_directories(out_dir);
  const auto corpus_path = out_dir / "augmented.conll";
  write_file(corpus_path, serialize_augmented_corpus(result));
  manifest.add_output(corpus_path);

  std::string report;
  for (const AugmentationRecord& record : records) {
    report += record_to_json(record).dump();
    report += '\n';
  }
  const auto records_path = out_dir / "records.jsonl";
  write_file(records_path, report);
  manifest.add_output(records_path);

  manifest.stats() = {{"gold", corpus.size()},
                      {"training_pairs", training.pairs.size()},
                      {"entity_free_ids", training.skipped_ids},
                      {"records", records.size()},
                      {"kept", result.kept},
                      {"duplicates", result.duplicates},
                      {"malformed", result.malformed},
                      {"failed", result.failed}};
  manifest.write(out_dir / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineArgs {
  CommonOptions common;
  std::string method = "lwtr";
  std::string input;
  std::size_t rounds = 0;
  std::string out;
};

int run_baseline(const BaselineArgs& args) {
  if (args.method != "lwtr") throw ArgumentError("unknown baseline \"" + args.method + "\"");
  PipelineConfig config = effective_config(args.common);
  if (args.rounds > 0) config.rounds = args.rounds;

  Manifest manifest("baseline", config.seed);
  manifest.set_config(config_to_json(config));
  manifest.add_input(args.input);
  const auto corpus = load_conll_file(args.input, conll_options(args.common));

  const auto augmented =
      baseline_lwtr(corpus, config.rounds, config.seed, config.lwtr_replace_prob);

  // merged output in the same shape as the augment command
  PostProcessResult merged;
  merged.corpus = corpus;
  merged.provenance.assign(corpus.size(), "");
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    const std::size_t round = i / corpus.size() + 1;
    merged.corpus.push_back(augmented[i]);
    merged.provenance.push_back("# source = " + corpus[i % corpus.size()].id +
                                " round = " + std::to_string(round) + " mixner = false");
  }
  write_file(args.out, serialize_augmented_corpus(merged));
  manifest.add_output(args.out);
  manifest.stats() = {{"gold", corpus.size()}, {"augmentations", augmented.size()}};
  manifest.write(args.out + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  CommonOptions common;
  std::string pred;
  std::string gold;
  std::string pairs;
  std::string scorer_url;
  std::string scorer_file;
  std::string out_dir;
};

int run_evaluate(const EvaluateArgs& args) {
  const PipelineConfig config = effective_config(args.common);
  Manifest manifest("evaluate", config.seed);

  json report = json::object();
  std::vector<TaggedSentence> gold;
  if (!args.gold.empty()) {
    manifest.add_input(args.gold);
    gold = load_conll_file(args.gold, conll_options(args.common));
  }

  F1Report f1;
  bool have_f1 = false;
  if (!args.pred.empty()) {
    if (gold.empty()) throw ArgumentError("--pred needs --gold");
    manifest.add_input(args.pred);
    const auto pred = load_conll_file(args.pred, conll_options(args.common));
    f1 = micro_f1(pred, gold);
    report["f1"] = f1_report_to_json(f1);
    have_f1 = true;
  }

  std::vector<TaggedSentence> augmented_side;
  if (!args.pairs.empty()) {
    if (gold.empty()) throw ArgumentError("--pairs needs --gold");
    manifest.add_input(args.pairs);
    std::map<std::string, const TaggedSentence*> by_id;
    for (const TaggedSentence& sentence : gold) by_id[sentence.id] = &sentence;

    std::vector<std::pair<TaggedSentence, TaggedSentence>> pairs;
    std::istringstream in(read_file(args.pairs));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json record;
      try {
        record = json::parse(line);
      } catch (const json::exception& e) {
        throw ParseError(std::string("bad record: ") + e.what(), line_no);
      }
      if (record.at("disposition").get<std::string>() != "kept") continue;
      const std::string source_id = record.at("source_id").get<std::string>();
      auto it = by_id.find(source_id);
      if (it == by_id.end()) {
        throw DataError("record source \"" + source_id + "\" not in the gold corpus");
      }
      TaggedSentence augmented;
      augmented.id = source_id + "#r" + std::to_string(record.at("round").get<std::size_t>());
      record.at("parsed").at("tokens").get_to(augmented.tokens);
      record.at("parsed").at("tags").get_to(augmented.tags);
      validate_sentence(augmented);
      pairs.emplace_back(*it->second, augmented);
      augmented_side.push_back(std::move(augmented));
    }
    if (pairs.empty()) throw EvaluationError("no kept records in " + args.pairs);
    report["diversity"] = diversity_to_json(diversity(pairs));
  }

  if (!args.scorer_url.empty() || !args.scorer_file.empty()) {
    const auto& subjects = !augmented_side.empty()
                               ? augmented_side
                               : (!args.pred.empty() ? load_conll_file(args.pred) : gold);
    std::unique_ptr<PerplexityScorer> scorer;
    if (!args.scorer_file.empty()) {
      manifest.add_input(args.scorer_file);
      scorer = std::make_unique<FileScorer>(args.scorer_file);
    } else {
      std::string host;
      int port = 0;
      parse_host_port(args.scorer_url, host, port);
      scorer = std::make_unique<HttpScorer>(host, port);
    }
    const auto ppl = perplexity(subjects, *scorer);
    report["perplexity"] = {{"mean", ppl.mean},
                            {"scored", ppl.scored},
                            {"skipped_ids", ppl.skipped_ids}};
  }

  if (report.empty()) {
    throw ArgumentError("nothing to evaluate: pass --pred/--gold, --pairs, or a scorer");
  }

  const std::filesystem::path out_dir(args.out_dir);
  std::filesystem::create_directories(out_dir);
  const auto json_path = out_dir / "evaluation.json";
  write_file(json_path, report.dump(2) + "\n");
  manifest.add_output(json_path);

  std::string text;
  if (have_f1) text += f1_report_text(f1);
  if (report.contains("diversity")) {
    char line[120];
    std::snprintf(line, sizeof(line),
                  "diversity    E %7.2f%%  N %7.2f%%  L %7.2f\n",
                  report["diversity"]["diversity_e"].get<double>(),
                  report["diversity"]["diversity_n"].get<double>(),
                  report["diversity"]["diversity_l"].get<double>());
    text += line;
  }
  if (report.contains("perplexity")) {
    char line[120];
    std::snprintf(line, sizeof(line), "perplexity   mean %10.3f over %zu sentences\n",
                  report["perplexity"]["mean"].get<double>(),
                  report["perplexity"]["scored"].get<std::size_t>());
    text += line;
  }
  const auto text_path = out_dir / "evaluation.txt";
  write_file(text_path, text);
  manifest.add_output(text_path);
  manifest.write(out_dir / "manifest.json");
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"data augmentation toolkit for low-resource sequence labeling"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "nested stratified low-resource subsets");
  split->add_option("--input", split_args.input, "gold CoNLL corpus")->required();
  split->add_option("--out-dir", split_args.out_dir, "output directory")->required();
  split->add_option("--sizes", split_args.sizes, "subset sizes")->delimiter(',');
  split->add_option("--dev", split_args.dev, "development corpus to downsample");
  split->add_option("--dev-mode", split_args.dev_mode, "proportional|fixed")
      ->check(CLI::IsMember({"proportional", "fixed"}));
  split->add_option("--dev-size", split_args.dev_size, "dev subset size for --dev-mode fixed");
  add_common(split, split_args.common, false);

  TemplateArgs template_args;
  auto* tmpl = app.add_subcommand("template", "dump the corruption templates per sentence");
  tmpl->add_option("--input", template_args.input, "gold CoNLL corpus")->required();
  tmpl->add_option("--attn", template_args.attn, "attention map file");
  tmpl->add_option("--out", template_args.out, "template JSONL output")->required();
  add_common(tmpl, template_args.common, true);

  AugmentArgs augment_args;
  auto* augment = app.add_subcommand("augment", "fine-tune, generate, post-process, merge");
  augment->add_option("--input", augment_args.input, "gold CoNLL corpus")->required();
  augment->add_option("--attn", augment_args.attn, "attention map file");
  augment->add_option("--embeddings", augment_args.embeddings, "sentence embedding JSONL");
  augment->add_option("--backend", augment_args.backend, "lookup|service");
  augment->add_option("--service-url", augment_args.service_url, "denoiser service host:port");
  augment->add_option("--out", augment_args.out_dir, "output directory")->required();
  add_common(augment, augment_args.common, true);

  BaselineArgs baseline_args;
  auto* baseline = app.add_subcommand("baseline", "augmentation baselines");
  baseline->add_option("--method", baseline_args.method, "baseline name (lwtr)");
  baseline->add_option("--input", baseline_args.input, "gold CoNLL corpus")->required();
  baseline->add_option("--rounds", baseline_args.rounds, "augmentation rounds");
  baseline->add_option("--out", baseline_args.out, "merged corpus output")->required();
  add_common(baseline, baseline_args.common, false);

  EvaluateArgs evaluate_args;
  auto* evaluate = app.add_subcommand("evaluate", "micro-F1, diversity, perplexity");
  evaluate->add_option("--pred", evaluate_args.pred, "predicted CoNLL corpus");
  evaluate->add_option("--gold", evaluate_args.gold, "gold CoNLL corpus");
  evaluate->add_option("--pairs", evaluate_args.pairs, "records JSONL from augment");
  evaluate->add_option("--scorer-url", evaluate_args.scorer_url, "perplexity scorer host:port");
  evaluate->add_option("--scorer-file", evaluate_args.scorer_file, "perplexity scorer JSONL");
  evaluate->add_option("--out", evaluate_args.out_dir, "output directory")->required();
  add_common(evaluate, evaluate_args.common, false);

  auto fail = [](int code, const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
    return code;
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::Success&) {  // --help
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(2, "argument", e.what());
  }

  try {
    if (split->parsed()) return run_split(split_args);
    if (tmpl->parsed()) return run_template(template_args);
    if (augment->parsed()) return run_augment(augment_args);
    if (baseline->parsed()) return run_baseline(baseline_args);
    if (evaluate->parsed()) return run_evaluate(evaluate_args);
    return fail(2, "argument", "no subcommand given");
  } catch (const ArgumentError& e) {
    return fail(2, "argument", e.what());
  } catch (const ParseError& e) {
    return fail(1, "parse", e.what());
  } catch (const ValidationError& e) {
    return fail(1, "validation", e.what());
  } catch (const DataError& e) {
    return fail(1, "data", e.what());
  } catch (const BackendError& e) {
    return fail(1, "backend", e.what());
  } catch (const EvaluationError& e) {
    return fail(1, "evaluation", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}

}  // namespace aclm::cli
