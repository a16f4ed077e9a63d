#include "aclm/denoiser.hpp"

#include <algorithm>
#include <map>

#include "aclm/errors.hpp"

namespace aclm {

void LookupDenoiser::fine_tune(const std::vector<TrainingPair>& pairs,
                               const FineTuneOptions& options) {
  (void)options;  // memorization needs no epochs
  pairs_ = pairs;
}

std::vector<std::string> LookupDenoiser::generate(const GenerationRequest& request) const {
  if (request.top_k < 1 || request.num_beams < 1) {
    throw ArgumentError("top_k and num_beams must be >= 1");
  }
  if (pairs_.empty()) throw BackendError("lookup denoiser was not fine-tuned");

  std::map<std::string, std::size_t> request_counts;
  for (const std::string& token : request.template_tokens) ++request_counts[token];

  const TrainingPair* best = nullptr;
  std::size_t best_overlap = 0;
  for (const TrainingPair& pair : pairs_) {
    std::map<std::string, std::size_t> counts;
    for (const std::string& token : pair.input) ++counts[token];
    std::size_t overlap = 0;
    for (const auto& [token, n] : request_counts) {
      auto it = counts.find(token);
      if (it != counts.end()) overlap += std::min(n, it->second);
    }
    if (best == nullptr || overlap > best_overlap ||
        (overlap == best_overlap && pair.target < best->target)) {
      best = &pair;
      best_overlap = overlap;
    }
  }
  return best->target;
}

TrainingSetBuild build_training_pairs(const std::vector<TaggedSentence>& corpus,
                                      KeywordStrategy strategy, double p,
                                      std::size_t attention_layers,
                                      const DynamicMaskPolicy& policy,
                                      AttentionProvider* attention, const KeywordFilter& filter,
                                      const MarkerVocab& vocab, std::uint64_t seed) {
  TrainingSetBuild build;
  for (const TaggedSentence& sentence : corpus) {
    const auto entities = extract_entities(sentence);
    if (entities.empty()) {
      build.skipped_ids.push_back(sentence.id);
      continue;
    }
    Rng rng(derive_seed(seed, sentence.id, 0));

    KeywordSet keywords;
    switch (strategy) {
      case KeywordStrategy::attention: {
        if (attention == nullptr) throw DataError("no attention provider configured");
        auto map = attention->fetch(sentence.id);
        if (!map) throw DataError("missing attention map for sentence \"" + sentence.id + "\"");
        keywords = select_keywords(sentence, aggregate(*map, attention_layers), p, filter);
        break;
      }
      case KeywordStrategy::random:
        keywords = select_keywords_random(sentence, p, filter, rng);
        break;
      case KeywordStrategy::none:
        break;
    }

    Template tmpl = linearize(selective_mask(sentence, keywords), entities);
    tmpl = dynamic_mask(tmpl, policy, rng);

    TrainingPair pair;
    pair.input = render(tmpl, vocab);
    pair.target = render(linearize(identity_template(sentence), entities), vocab);
    build.pairs.push_back(std::move(pair));
  }
  return build;
}

}  // namespace aclm
