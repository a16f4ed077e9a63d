#pragma once

#include <string>
#include <vector>

#include "aclm/attention.hpp"
#include "aclm/corpus.hpp"
#include "aclm/rng.hpp"

namespace aclm::testing {

// Shorthand: sentence from parallel token/tag lists.
inline TaggedSentence sent(std::string id, std::vector<std::string> tokens,
                           std::vector<std::string> tags) {
  TaggedSentence s;
  s.id = std::move(id);
  s.tokens = std::move(tokens);
  s.tags = std::move(tags);
  return s;
}

struct SentenceSpec {
  std::size_t min_tokens = 1;
  std::size_t max_tokens = 12;
  std::vector<std::string> labels = {"PER", "LOC", "CW"};
  // chance that a fresh span starts at a given position
  double entity_start_prob = 0.35;
  double entity_continue_prob = 0.4;
};

// Seeded random sentence; always valid IOB2 and collision-free with the
// bare marker literals (tokens are lowercase, labels uppercase).
inline TaggedSentence random_sentence(Rng& rng, const std::string& id,
                                      const SentenceSpec& spec = {}) {
  TaggedSentence s;
  s.id = id;
  const std::size_t len = spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
  std::size_t i = 0;
  while (i < len) {
    if (rng.unit() < spec.entity_start_prob) {
      const std::string& label = spec.labels[rng.below(spec.labels.size())];
      s.tokens.push_back("ent" + std::to_string(rng.below(50)));
      s.tags.push_back("B-" + label);
      ++i;
      while (i < len && rng.unit() < spec.entity_continue_prob) {
        s.tokens.push_back("ent" + std::to_string(rng.below(50)));
        s.tags.push_back("I-" + label);
        ++i;
      }
    } else {
      s.tokens.push_back("w" + std::to_string(rng.below(80)));
      s.tags.push_back("O");
      ++i;
    }
  }
  return s;
}

inline std::vector<TaggedSentence> random_corpus(Rng& rng, std::size_t n,
                                                 const SentenceSpec& spec = {}) {
  std::vector<TaggedSentence> corpus;
  corpus.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    corpus.push_back(random_sentence(rng, std::to_string(i), spec));
  }
  return corpus;
}

// Deterministic corpus where every sentence carries exactly one entity with a
// sentence-unique surface token. Used where generations must be attributable
// to exactly one source.
inline std::vector<TaggedSentence> fixture_corpus(std::size_t n) {
  static const std::vector<std::string> kLabels = {"PER", "LOC", "CORP", "CW", "PROD", "GRP"};
  static const std::vector<std::string> kContext = {"visited", "built", "wrote", "sold",
                                                    "filmed", "sang",    "ran",   "made"};
  std::vector<TaggedSentence> corpus;
  corpus.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TaggedSentence s;
    s.id = "fx" + std::to_string(i);
    s.tokens = {"the", "unique" + std::to_string(i), kContext[i % kContext.size()],
                "near", "place" + std::to_string(i % 7)};
    s.tags = {"O", "B-" + kLabels[i % kLabels.size()], "O", "O", "O"};
    corpus.push_back(std::move(s));
  }
  return corpus;
}

// Attention map with seeded nonnegative scores.
inline AttentionMap random_attention(Rng& rng, const std::string& id, std::uint32_t layers,
                                     std::uint32_t heads, std::uint32_t tokens) {
  AttentionMap map;
  map.sentence_id = id;
  map.n_layers = layers;
  map.n_heads = heads;
  map.tokens = tokens;
  map.scores.resize(static_cast<std::size_t>(layers) * heads * tokens * tokens);
  for (float& v : map.scores) v = static_cast<float>(rng.unit());
  return map;
}

inline std::vector<AttentionMap> attention_for_corpus(const std::vector<TaggedSentence>& corpus,
                                                      std::uint64_t seed, std::uint32_t layers = 4,
                                                      std::uint32_t heads = 2) {
  std::vector<AttentionMap> maps;
  maps.reserve(corpus.size());
  for (const TaggedSentence& s : corpus) {
    Rng rng(derive_seed(seed, s.id, 7));
    maps.push_back(
        random_attention(rng, s.id, layers, heads, static_cast<std::uint32_t>(s.tokens.size())));
  }
  return maps;
}

}  // namespace aclm::testing
