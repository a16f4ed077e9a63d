#include "aclm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "aclm/errors.hpp"
#include "aclm/util.hpp"

namespace aclm {

std::string to_string(Disposition disposition) {
  switch (disposition) {
    case Disposition::kept: return "kept";
    case Disposition::duplicate: return "duplicate";
    case Disposition::malformed: return "malformed";
    case Disposition::failed: return "failed";
  }
  throw ArgumentError("unknown disposition");
}

namespace {

// Runs fn(0..count-1) on up to `workers` threads. Results must be written to
// preallocated slots; the caller sees them in index order regardless of the
// completion order.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max<std::size_t>(std::thread::hardware_concurrency(), 1);
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct SentenceContext {
  const TaggedSentence* sentence;
  std::vector<EntitySpan> entities;
  Matrix attention;  // empty unless strategy == attention
};

Template build_corrupted(const SentenceContext& ctx, const PipelineConfig& config, Rng& rng,
                         const KeywordFilter& filter) {
  KeywordSet keywords;
  switch (config.strategy) {
    case KeywordStrategy::attention:
      keywords = select_keywords(*ctx.sentence, ctx.attention, config.p, filter);
      break;
    case KeywordStrategy::random:
      keywords = select_keywords_random(*ctx.sentence, config.p, filter, rng);
      break;
    case KeywordStrategy::none:
      break;
  }
  return linearize(selective_mask(*ctx.sentence, keywords), ctx.entities);
}

KeywordFilter make_filter(const PipelineConfig& config) {
  KeywordFilter filter;
  if (!config.stopwords_path.empty()) filter.stopwords = load_stopwords(config.stopwords_path);
  return filter;
}

}  // namespace

std::vector<AugmentationRecord> run_generation(const std::vector<TaggedSentence>& corpus,
                                               const Denoiser& denoiser,
                                               AttentionProvider* attention,
                                               const EmbeddingIndex* embeddings,
                                               const PipelineConfig& config) {
  config.validate();
  const KeywordFilter filter = make_filter(config);

  // single-writer phase: contexts, attention maps, retrieval pool
  std::vector<SentenceContext> contexts;
  std::map<std::string, std::size_t> by_id;
  for (const TaggedSentence& sentence : corpus) {
    auto entities = extract_entities(sentence);
    if (entities.empty()) continue;
    SentenceContext ctx;
    ctx.sentence = &sentence;
    ctx.entities = std::move(entities);
    if (config.strategy == KeywordStrategy::attention) {
      if (attention == nullptr) throw DataError("no attention provider configured");
      auto map = attention->fetch(sentence.id);
      if (!map) throw DataError("missing attention map for sentence \"" + sentence.id + "\"");
      ctx.attention = aggregate(*map, config.attention_layers);
    }
    by_id[sentence.id] = contexts.size();
    contexts.push_back(std::move(ctx));
  }

  std::unique_ptr<PartnerRetriever> retriever;
  if (embeddings != nullptr && contexts.size() >= 2) {
    // retrieval pool: entity-bearing sentences only (those are templated)
    EmbeddingIndex pool;
    for (const SentenceContext& ctx : contexts) {
      const std::vector<double>* vec = embeddings->find(ctx.sentence->id);
      if (vec == nullptr) {
        throw DataError("missing embedding for sentence \"" + ctx.sentence->id + "\"");
      }
      pool.add(ctx.sentence->id, *vec);
    }
    const char* cache_dir = std::getenv("ACLM_CACHE_DIR");
    if (cache_dir != nullptr && *cache_dir != '\0') {
      retriever = PartnerRetriever::cached(pool, config.mix.top_k, cache_dir);
    } else {
      retriever = std::make_unique<PartnerRetriever>(pool, config.mix.top_k);
    }
  }

  std::set<std::string> known_labels;
  for (const SentenceContext& ctx : contexts) {
    for (const EntitySpan& span : ctx.entities) known_labels.insert(span.label);
  }

  const std::size_t total = contexts.size() * config.rounds;
  std::vector<AugmentationRecord> records(total);
  parallel_for(total, config.workers, [&](std::size_t slot) {
    const SentenceContext& ctx = contexts[slot / config.rounds];
    const std::size_t round = slot % config.rounds + 1;

    AugmentationRecord record;
    record.source_id = ctx.sentence->id;
    record.round = round;
    Rng rng(derive_seed(config.seed, ctx.sentence->id, round));

    Template tmpl = build_corrupted(ctx, config, rng, filter);
    if (retriever) {
      const double gamma = draw_gate_rate(config.mix, rng);
      if (gate_decision(gamma, config.mix.beta)) {
        const std::string partner_id = retriever->sample(ctx.sentence->id, rng);
        const SentenceContext& partner = contexts[by_id.at(partner_id)];
        tmpl = mix(tmpl, build_corrupted(partner, config, rng, filter));
        record.used_mixner = true;
        record.partner_id = partner_id;
      }
    }
    tmpl = dynamic_mask(tmpl, config.mask, rng);
    record.tmpl = tmpl;

    GenerationRequest request;
    request.template_tokens = render(tmpl, config.vocab);
    request.top_k = config.generation.top_k;
    request.num_beams = config.generation.num_beams;
    request.max_length = static_cast<int>(std::ceil(
        config.generation.max_length_factor * static_cast<double>(request.template_tokens.size())));
    request.seed = derive_seed(config.seed, ctx.sentence->id + "#generate", round);

    try {
      record.raw_tokens = denoiser.generate(request);
    } catch (const BackendError& e) {
      record.parsed = Malformed{e.what(), 0};
      record.disposition = Disposition::failed;
      records[slot] = std::move(record);
      return;
    }
    record.parsed = delinearize(record.raw_tokens, known_labels, config.vocab);
    record.disposition = std::holds_alternative<TaggedSentence>(record.parsed)
                             ? Disposition::kept
                             : Disposition::malformed;
    records[slot] = std::move(record);
  });
  return records;
}

PostProcessResult post_process(std::vector<AugmentationRecord>& records,
                               const std::vector<TaggedSentence>& gold) {
  std::unordered_map<std::string, std::vector<std::string>> folded_tokens;
  for (const TaggedSentence& sentence : gold) {
    std::vector<std::string> folded;
    folded.reserve(sentence.tokens.size());
    for (const std::string& token : sentence.tokens) folded.push_back(fold_case(token));
    folded_tokens[sentence.id] = std::move(folded);
  }

  PostProcessResult result;
  result.corpus = gold;
  result.provenance.assign(gold.size(), "");

  for (AugmentationRecord& record : records) {
    if (record.disposition == Disposition::failed) {
      ++result.failed;
      continue;
    }
    if (record.disposition == Disposition::malformed) {
      ++result.malformed;
      continue;
    }
    const TaggedSentence& parsed = std::get<TaggedSentence>(record.parsed);
    std::vector<std::string> folded;
    folded.reserve(parsed.tokens.size());
    for (const std::string& token : parsed.tokens) folded.push_back(fold_case(token));

    auto equals_parent = [&](const std::string& id) {
      auto it = folded_tokens.find(id);
      return it != folded_tokens.end() && it->second == folded;
    };
    if (equals_parent(record.source_id) ||
        (record.used_mixner && equals_parent(record.partner_id))) {
      record.disposition = Disposition::duplicate;
      ++result.duplicates;
      continue;
    }
    ++result.kept;
    TaggedSentence survivor = parsed;
    survivor.id = record.source_id + "#r" + std::to_string(record.round);
    result.corpus.push_back(std::move(survivor));
    result.provenance.push_back("# source = " + record.source_id +
                                " round = " + std::to_string(record.round) +
                                " mixner = " + (record.used_mixner ? "true" : "false"));
  }
  return result;
}

std::string serialize_augmented_corpus(const PostProcessResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.corpus.size(); ++i) {
    validate_sentence(result.corpus[i]);
    if (!result.provenance[i].empty()) {
      out += result.provenance[i];
      out += '\n';
    }
    out += serialize_sentence(result.corpus[i]);
  }
  return out;
}

std::vector<TaggedSentence> baseline_lwtr(const std::vector<TaggedSentence>& corpus,
                                          std::size_t rounds, std::uint64_t seed,
                                          double replace_prob) {
  if (corpus.empty()) throw ArgumentError("LwTR needs a nonempty corpus");
  if (replace_prob < 0.0 || replace_prob > 1.0) {
    throw ArgumentError("replace probability outside [0,1]");
  }
  std::map<std::string, std::vector<std::string>> inventory;  // tag -> token occurrences
  for (const TaggedSentence& sentence : corpus) {
    validate_sentence(sentence);
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      inventory[sentence.tags[i]].push_back(sentence.tokens[i]);
    }
  }

  std::vector<TaggedSentence> augmented;
  augmented.reserve(corpus.size() * rounds);
  for (std::size_t round = 1; round <= rounds; ++round) {
    for (const TaggedSentence& sentence : corpus) {
      Rng rng(derive_seed(seed, sentence.id + "#lwtr", round));
      TaggedSentence replaced = sentence;
      replaced.id = sentence.id + "#lwtr" + std::to_string(round);
      for (std::size_t i = 0; i < replaced.tokens.size(); ++i) {
        if (rng.unit() >= replace_prob) continue;
        const auto& pool = inventory[replaced.tags[i]];
        replaced.tokens[i] = pool[rng.below(pool.size())];
      }
      augmented.push_back(std::move(replaced));
    }
  }
  return augmented;
}

nlohmann::json record_to_json(const AugmentationRecord& record) {
  nlohmann::json out = {
      {"source_id", record.source_id},
      {"round", record.round},
      {"used_mixner", record.used_mixner},
      {"template", template_to_json(record.tmpl)},
      {"raw_tokens", join(record.raw_tokens, " ")},
      {"disposition", to_string(record.disposition)},
  };
  if (record.used_mixner) out["partner_id"] = record.partner_id;
  if (const auto* sentence = std::get_if<TaggedSentence>(&record.parsed)) {
    out["parsed"] = {{"tokens", sentence->tokens}, {"tags", sentence->tags}};
  } else {
    const auto& error = std::get<Malformed>(record.parsed);
    out["parsed"] = {{"error", error.reason}, {"position", error.position}};
  }
  return out;
}

}  // namespace aclm
