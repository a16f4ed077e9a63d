#include "aclm/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aclm/errors.hpp"
#include "aclm/unicode_punct.hpp"
#include "aclm/util.hpp"

namespace aclm {

void validate_attention(const AttentionMap& map) {
  const std::size_t expected = static_cast<std::size_t>(map.n_layers) * map.n_heads *
                               map.tokens * map.tokens;
  if (map.scores.size() != expected) {
    throw ValidationError("attention map \"" + map.sentence_id + "\": " +
                          std::to_string(map.scores.size()) + " scores, expected " +
                          std::to_string(expected));
  }
  for (float s : map.scores) {
    if (!(s >= 0.0f)) {
      throw ValidationError("attention map \"" + map.sentence_id + "\": negative score");
    }
  }
}

AttentionMap collapse_subwords(const AttentionMap& raw,
                               const std::vector<std::vector<std::size_t>>& word_to_subwords) {
  // the alignment must list every subword exactly once, in order
  std::size_t expected_next = 0;
  for (const auto& subwords : word_to_subwords) {
    if (subwords.empty()) throw ArgumentError("subword alignment: empty word entry");
    for (std::size_t s : subwords) {
      if (s != expected_next) throw ArgumentError("subword alignment is not an ordered partition");
      ++expected_next;
    }
  }
  if (expected_next != raw.tokens) {
    throw ArgumentError("subword alignment covers " + std::to_string(expected_next) +
                        " subwords, map has " + std::to_string(raw.tokens));
  }

  AttentionMap out;
  out.sentence_id = raw.sentence_id;
  out.n_layers = raw.n_layers;
  out.n_heads = raw.n_heads;
  out.tokens = static_cast<std::uint32_t>(word_to_subwords.size());
  out.scores.assign(static_cast<std::size_t>(out.n_layers) * out.n_heads * out.tokens * out.tokens,
                    0.0f);
  for (std::size_t l = 0; l < raw.n_layers; ++l) {
    for (std::size_t h = 0; h < raw.n_heads; ++h) {
      for (std::size_t w1 = 0; w1 < word_to_subwords.size(); ++w1) {
        for (std::size_t w2 = 0; w2 < word_to_subwords.size(); ++w2) {
          float sum = 0.0f;
          for (std::size_t s1 : word_to_subwords[w1]) {
            for (std::size_t s2 : word_to_subwords[w2]) {
              sum += raw.at(l, h, s1, s2);
            }
          }
          out.at(l, h, w1, w2) = sum;
        }
      }
    }
  }
  return out;
}

Matrix aggregate(const AttentionMap& map, std::size_t last_layers) {
  if (last_layers < 1 || last_layers > map.n_layers) {
    throw ArgumentError("layer count " + std::to_string(last_layers) + " out of range [1, " +
                        std::to_string(map.n_layers) + "]");
  }
  Matrix m(map.tokens, map.tokens);
  const std::size_t first = map.n_layers - last_layers;
  for (std::size_t l = first; l < map.n_layers; ++l) {
    for (std::size_t h = 0; h < map.n_heads; ++h) {
      for (std::size_t i = 0; i < map.tokens; ++i) {
        for (std::size_t j = 0; j < map.tokens; ++j) {
          m.at(i, j) += map.at(l, h, i, j);
        }
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(last_layers);
  for (double& v : m.data) v *= scale;
  return m;
}

std::vector<double> entity_salience(const Matrix& m, const EntitySpan& span) {
  std::vector<double> salience(m.cols, 0.0);
  for (std::size_t i = span.start; i < span.end; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      salience[j] += m.at(i, j);
    }
  }
  return salience;
}

bool KeywordFilter::rejects(const std::string& token) const {
  if (drop_punctuation && is_punctuation_token(token)) return true;
  if (drop_stopwords && !stopwords.empty() && stopwords.count(fold_case(token)) > 0) return true;
  return false;
}

std::size_t keyword_quota(double p, std::size_t count) {
  if (p < 0.0 || p > 1.0) throw ArgumentError("keyword rate " + std::to_string(p) + " outside [0,1]");
  if (p == 0.0 || count == 0) return 0;
  const double raw = p * static_cast<double>(count);
  auto quota = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::max<std::size_t>(quota, 1);
}

namespace {

std::vector<std::size_t> non_entity_indices(const TaggedSentence& sentence) {
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < sentence.tags.size(); ++i) {
    if (sentence.tags[i] == "O") indices.push_back(i);
  }
  return indices;
}

void apply_filter_and_record(const TaggedSentence& sentence, const KeywordFilter& filter,
                             std::size_t entity_ordinal,
                             const std::vector<std::size_t>& chosen, KeywordSet& out) {
  auto& bucket = out.per_entity[entity_ordinal];
  for (std::size_t idx : chosen) {
    if (filter.rejects(sentence.tokens[idx])) continue;
    bucket.insert(idx);
    out.indices.insert(idx);
  }
}

}  // namespace

KeywordSet select_keywords(const TaggedSentence& sentence, const Matrix& m, double p,
                           const KeywordFilter& filter) {
  if (m.rows != sentence.tokens.size() || m.cols != sentence.tokens.size()) {
    throw ArgumentError("attention matrix is " + std::to_string(m.rows) + "x" +
                        std::to_string(m.cols) + ", sentence has " +
                        std::to_string(sentence.tokens.size()) + " tokens");
  }
  KeywordSet out;
  const auto entities = extract_entities(sentence);
  if (entities.empty()) return out;
  const auto candidates = non_entity_indices(sentence);
  const std::size_t quota = keyword_quota(p, candidates.size());
  for (std::size_t e = 0; e < entities.size(); ++e) {
    out.per_entity[e];  // entity contributes even when nothing survives
    if (quota == 0) continue;
    const auto salience = entity_salience(m, entities[e]);
    auto ranked = candidates;
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      if (salience[a] != salience[b]) return salience[a] > salience[b];
      return a < b;
    });
    ranked.resize(std::min(quota, ranked.size()));
    apply_filter_and_record(sentence, filter, e, ranked, out);
  }
  return out;
}

KeywordSet select_keywords_random(const TaggedSentence& sentence, double p,
                                  const KeywordFilter& filter, Rng& rng) {
  KeywordSet out;
  const auto entities = extract_entities(sentence);
  if (entities.empty()) return out;
  const auto candidates = non_entity_indices(sentence);
  const std::size_t quota = keyword_quota(p, candidates.size());
  for (std::size_t e = 0; e < entities.size(); ++e) {
    out.per_entity[e];
    if (quota == 0) continue;
    auto pool = candidates;
    rng.shuffle(pool);
    pool.resize(std::min(quota, pool.size()));
    apply_filter_and_record(sentence, filter, e, pool, out);
  }
  return out;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::unordered_set<std::string> words;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    words.insert(fold_case(line));
  }
  return words;
}

}  // namespace aclm
