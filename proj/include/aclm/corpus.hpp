#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace aclm {

// A pre-tokenized sentence with aligned IOB2 tags. The unit of all corpus work.
struct TaggedSentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  bool operator==(const TaggedSentence& other) const {
    return tokens == other.tokens && tags == other.tags;
  }
};

// One maximal entity: tokens[start, end) share a class label.
struct EntitySpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string label;
  std::vector<std::string> surface;

  bool operator==(const EntitySpan& other) const {
    return start == other.start && end == other.end && label == other.label;
  }
};

struct BioViolation {
  std::size_t position = 0;
  std::string reason;
};

/// Empty result iff the tags form a valid IOB2 sequence.
std::vector<BioViolation> validate_bio(const std::vector<std::string>& tags);

/// Throws ValidationError when a TaggedSentence invariant is broken.
void validate_sentence(const TaggedSentence& sentence);

/// Disjoint spans, ordered by start, covering exactly the non-"O" tags.
/// The sentence must be valid.
std::vector<EntitySpan> extract_entities(const TaggedSentence& sentence);

/// Sorted, deduplicated entity class labels occurring in the sentence.
std::vector<std::string> entity_classes(const TaggedSentence& sentence);

struct ConllOptions {
  char separator = '\t';
  // Convert orphan "I-X" to "B-X" instead of rejecting it. Real corpora carry
  // IOB1 artifacts; strict is the default so data bugs surface.
  bool repair = false;
};

/// Parses token<SEP>tag lines, blank line between sentences, optional
/// "# id = <string>" comment before a sentence. Ids default to ordinals.
std::vector<TaggedSentence> parse_conll(std::string_view text, const ConllOptions& options = {});

std::string serialize_sentence(const TaggedSentence& sentence, char separator = '\t');

/// Inverse of parse_conll up to ids. All sentences are validated first.
std::string serialize_conll(const std::vector<TaggedSentence>& sentences, char separator = '\t');

std::vector<TaggedSentence> load_conll_file(const std::filesystem::path& path,
                                            const ConllOptions& options = {});

/// with_ids emits a "# id = <id>" comment before each sentence, so ids
/// survive a reload (needed when attention maps or embeddings key on them).
void write_conll_file(const std::filesystem::path& path,
                      const std::vector<TaggedSentence>& sentences, bool with_ids = false);

struct SplitResult {
  std::vector<TaggedSentence> subset;
  std::vector<TaggedSentence> remainder;
};

/// Iterative stratification over the entity classes of each sentence
/// (multi-label target). Picks the scarcest class first, sends a sentence
/// bearing it to the split most in need of that class, and breaks every tie
/// with the seeded generator. subset gets exactly n sentences.
SplitResult stratified_sample(const std::vector<TaggedSentence>& sentences, std::size_t n,
                              std::uint64_t seed);

}  // namespace aclm
