#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "aclm/corpus.hpp"
#include "aclm/rng.hpp"

namespace aclm {

// Word-level attention scores for one sentence, [layer][head][from][to].
struct AttentionMap {
  std::string sentence_id;
  std::uint32_t n_layers = 0;
  std::uint32_t n_heads = 0;
  std::uint32_t tokens = 0;  // T; from/to dimensions
  std::vector<float> scores;  // row-major, n_layers * n_heads * T * T

  float at(std::size_t layer, std::size_t head, std::size_t from, std::size_t to) const {
    return scores[((layer * n_heads + head) * tokens + from) * tokens + to];
  }
  float& at(std::size_t layer, std::size_t head, std::size_t from, std::size_t to) {
    return scores[((layer * n_heads + head) * tokens + from) * tokens + to];
  }
};

/// Throws ValidationError on negative scores or a size mismatch.
void validate_attention(const AttentionMap& map);

// Dense row-major matrix, just big enough for this toolkit.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

/// Word-level map from a subword-level one: entry [w1][w2] sums the raw
/// scores over w1's subword rows and w2's subword columns, per layer/head.
/// word_to_subwords must partition the subword axis in order.
AttentionMap collapse_subwords(const AttentionMap& raw,
                               const std::vector<std::vector<std::size_t>>& word_to_subwords);

/// M[i][j] = mean over the last `last_layers` layers of the per-layer head sums.
Matrix aggregate(const AttentionMap& map, std::size_t last_layers);

/// v[j] = sum over the span's rows i of M[i][j]: attention the entity pays to j.
std::vector<double> entity_salience(const Matrix& m, const EntitySpan& span);

// Non-entity tokens retained in a template, with per-entity provenance.
struct KeywordSet {
  std::set<std::size_t> indices;
  std::map<std::size_t, std::set<std::size_t>> per_entity;  // entity ordinal -> indices
};

struct KeywordFilter {
  bool drop_punctuation = true;
  bool drop_stopwords = true;
  std::unordered_set<std::string> stopwords;  // matched case-folded

  bool rejects(const std::string& token) const;
};

/// Per entity: rank non-entity token indices by that entity's salience
/// (descending, ties to the lower index), keep the top ceil(p * |t_other|),
/// then drop punctuation/stopword hits. Union across entities.
KeywordSet select_keywords(const TaggedSentence& sentence, const Matrix& m, double p,
                           const KeywordFilter& filter);

/// Same cardinality rule and filtering, candidates drawn uniformly without
/// replacement instead of by salience.
KeywordSet select_keywords_random(const TaggedSentence& sentence, double p,
                                  const KeywordFilter& filter, Rng& rng);

/// One case-folded word per line; '#' lines and blanks ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

/// ceil(p * count) with a tolerance for binary-fraction noise; >= 1 when
/// p > 0 and count > 0.
std::size_t keyword_quota(double p, std::size_t count);

}  // namespace aclm
