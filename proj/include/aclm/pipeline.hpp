#pragma once

#include <string>
#include <variant>
#include <vector>

#include "aclm/config.hpp"
#include "aclm/denoiser.hpp"

namespace aclm {

enum class Disposition { kept, duplicate, malformed, failed };

std::string to_string(Disposition disposition);

// Full provenance for one generation attempt.
struct AugmentationRecord {
  std::string source_id;
  std::size_t round = 1;  // 1..R
  bool used_mixner = false;
  std::string partner_id;  // empty unless used_mixner
  Template tmpl;
  std::vector<std::string> raw_tokens;
  std::variant<TaggedSentence, Malformed> parsed;
  Disposition disposition = Disposition::malformed;
};

/// The generation loop: per entity-bearing sentence per round, build a fresh
/// template (re-randomized each round), optionally mix with a retrieved
/// partner, generate, and parse. Exactly one record per (sentence, round),
/// in that order. Backend errors become per-record `failed` dispositions;
/// provider gaps raise DataError before any generation starts.
/// `embeddings` may be null, which disables mixner.
std::vector<AugmentationRecord> run_generation(const std::vector<TaggedSentence>& corpus,
                                               const Denoiser& denoiser,
                                               AttentionProvider* attention,
                                               const EmbeddingIndex* embeddings,
                                               const PipelineConfig& config);

struct PostProcessResult {
  std::vector<TaggedSentence> corpus;    // gold then surviving augmentations
  std::vector<std::string> provenance;   // per sentence; empty string for gold
  std::size_t kept = 0;
  std::size_t duplicates = 0;
  std::size_t malformed = 0;
  std::size_t failed = 0;
};

/// Drops malformed/failed records, re-labels as duplicates the augmentations
/// whose case-folded token sequence equals their source's (or, when mixed,
/// either parent's), and appends the survivors to the gold corpus.
PostProcessResult post_process(std::vector<AugmentationRecord>& records,
                               const std::vector<TaggedSentence>& gold);

/// Serializes a post-processed corpus with
/// "# source = <id> round = <r> mixner = <bool>" comments on augmentations.
std::string serialize_augmented_corpus(const PostProcessResult& result);

/// Label-wise token replacement: per round and sentence, each token is
/// replaced with probability replace_prob by a uniform draw from the
/// corpus-wide inventory of tokens carrying the same tag. Tags and lengths
/// never change. Returns the rounds * |corpus| replacement sentences.
std::vector<TaggedSentence> baseline_lwtr(const std::vector<TaggedSentence>& corpus,
                                          std::size_t rounds, std::uint64_t seed,
                                          double replace_prob = 0.5);

nlohmann::json record_to_json(const AugmentationRecord& record);

}  // namespace aclm
