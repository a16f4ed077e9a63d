#include "aclm/corpus.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "aclm/errors.hpp"
#include "aclm/rng.hpp"
#include "aclm/util.hpp"

namespace aclm {

namespace {

bool is_entity_tag(std::string_view tag) { return tag != "O"; }

// Splits "B-PER" into prefix 'B' and class "PER". Returns false when the tag
// is not "O", "B-X", or "I-X" with nonempty X.
bool split_tag(std::string_view tag, char& prefix, std::string_view& label) {
  if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') return false;
  prefix = tag[0];
  label = tag.substr(2);
  return true;
}

}  // namespace

std::vector<BioViolation> validate_bio(const std::vector<std::string>& tags) {
  std::vector<BioViolation> violations;
  std::string_view prev_label;
  bool prev_in_entity = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O") {
      prev_in_entity = false;
      prev_label = {};
      continue;
    }
    char prefix;
    std::string_view label;
    if (!split_tag(tag, prefix, label)) {
      violations.push_back({i, "malformed tag \"" + tag + "\""});
      prev_in_entity = false;
      prev_label = {};
      continue;
    }
    if (prefix == 'I' && (!prev_in_entity || prev_label != label)) {
      violations.push_back({i, "\"" + tag + "\" does not continue a \"B-" + std::string(label) +
                                   "\" or \"I-" + std::string(label) + "\""});
    }
    prev_in_entity = true;
    prev_label = label;
  }
  return violations;
}

void validate_sentence(const TaggedSentence& sentence) {
  if (sentence.tokens.empty()) {
    throw ValidationError("sentence \"" + sentence.id + "\": no tokens");
  }
  if (sentence.tokens.size() != sentence.tags.size()) {
    throw ValidationError("sentence \"" + sentence.id + "\": " +
                          std::to_string(sentence.tokens.size()) + " tokens vs " +
                          std::to_string(sentence.tags.size()) + " tags");
  }
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if (sentence.tokens[i].empty()) {
      throw ValidationError("sentence \"" + sentence.id + "\": empty token at position " +
                            std::to_string(i));
    }
  }
  const auto violations = validate_bio(sentence.tags);
  if (!violations.empty()) {
    throw ValidationError("sentence \"" + sentence.id + "\": " + violations.front().reason +
                          " at position " + std::to_string(violations.front().position));
  }
}

std::vector<EntitySpan> extract_entities(const TaggedSentence& sentence) {
  std::vector<EntitySpan> spans;
  for (std::size_t i = 0; i < sentence.tags.size();) {
    char prefix;
    std::string_view label;
    if (!split_tag(sentence.tags[i], prefix, label)) {
      ++i;
      continue;
    }
    EntitySpan span;
    span.start = i;
    span.label = std::string(label);
    ++i;
    while (i < sentence.tags.size()) {
      char p;
      std::string_view l;
      if (!split_tag(sentence.tags[i], p, l) || p != 'I' || l != label) break;
      ++i;
    }
    span.end = i;
    span.surface.assign(sentence.tokens.begin() + static_cast<std::ptrdiff_t>(span.start),
                        sentence.tokens.begin() + static_cast<std::ptrdiff_t>(span.end));
    spans.push_back(std::move(span));
  }
  return spans;
}

std::vector<std::string> entity_classes(const TaggedSentence& sentence) {
  std::set<std::string> classes;
  for (const std::string& tag : sentence.tags) {
    char prefix;
    std::string_view label;
    if (split_tag(tag, prefix, label)) classes.insert(std::string(label));
  }
  return {classes.begin(), classes.end()};
}

std::vector<TaggedSentence> parse_conll(std::string_view text, const ConllOptions& options) {
  std::vector<TaggedSentence> sentences;
  TaggedSentence current;
  std::string pending_id;
  std::size_t line_no = 0;

  auto flush = [&]() {
    if (current.tokens.empty()) return;
    current.id = pending_id.empty() ? std::to_string(sentences.size()) : pending_id;
    pending_id.clear();
    if (options.repair) {
      std::string_view prev_label;
      bool prev_in_entity = false;
      for (std::string& tag : current.tags) {
        char prefix;
        std::string_view label;
        if (!split_tag(tag, prefix, label)) {
          prev_in_entity = false;
          prev_label = {};
          continue;
        }
        if (prefix == 'I' && (!prev_in_entity || prev_label != label)) tag[0] = 'B';
        prev_in_entity = true;
        prev_label = std::string_view(tag).substr(2);
      }
    }
    const auto violations = validate_bio(current.tags);
    if (!violations.empty()) {
      throw ValidationError("sentence \"" + current.id + "\": " + violations.front().reason +
                            " at position " + std::to_string(violations.front().position));
    }
    sentences.push_back(std::move(current));
    current = {};
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    const bool at_end = eol == std::string_view::npos;
    std::string_view line = text.substr(pos, at_end ? text.size() - pos : eol - pos);
    pos = at_end ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      flush();
      if (at_end) break;
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view kIdPrefix = "# id =";
      if (line.substr(0, kIdPrefix.size()) == kIdPrefix) {
        std::string_view rest = line.substr(kIdPrefix.size());
        while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
        pending_id = std::string(rest);
      }
      if (at_end) break;
      continue;
    }
    const auto columns = split(line, options.separator);
    if (columns.size() != 2) {
      throw ParseError("expected 2 columns, got " + std::to_string(columns.size()), line_no);
    }
    if (columns[0].empty()) throw ParseError("empty token", line_no);
    if (columns[1].empty()) throw ParseError("empty tag", line_no);
    current.tokens.push_back(columns[0]);
    current.tags.push_back(columns[1]);
    if (at_end) break;
  }
  flush();
  return sentences;
}

std::string serialize_sentence(const TaggedSentence& sentence, char separator) {
  std::string out;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    out += sentence.tokens[i];
    out += separator;
    out += sentence.tags[i];
    out += '\n';
  }
  out += '\n';
  return out;
}

std::string serialize_conll(const std::vector<TaggedSentence>& sentences, char separator) {
  std::string out;
  for (const TaggedSentence& sentence : sentences) {
    validate_sentence(sentence);
    out += serialize_sentence(sentence, separator);
  }
  return out;
}

std::vector<TaggedSentence> load_conll_file(const std::filesystem::path& path,
                                            const ConllOptions& options) {
  return parse_conll(read_file(path), options);
}

void write_conll_file(const std::filesystem::path& path,
                      const std::vector<TaggedSentence>& sentences, bool with_ids) {
  if (!with_ids) {
    write_file(path, serialize_conll(sentences));
    return;
  }
  std::string out;
  for (const TaggedSentence& sentence : sentences) {
    validate_sentence(sentence);
    out += "# id = " + sentence.id + "\n";
    out += serialize_sentence(sentence);
  }
  write_file(path, out);
}

SplitResult stratified_sample(const std::vector<TaggedSentence>& sentences, std::size_t n,
                              std::uint64_t seed) {
  if (n > sentences.size()) {
    throw ArgumentError("sample size " + std::to_string(n) + " exceeds corpus size " +
                        std::to_string(sentences.size()));
  }
  Rng rng(seed);
  const std::size_t total = sentences.size();
  const double ratio = total == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total);

  std::vector<std::vector<std::string>> classes_of(total);
  std::map<std::string, std::vector<std::size_t>> unassigned_by_class;
  std::vector<std::size_t> no_label;
  for (std::size_t i = 0; i < total; ++i) {
    classes_of[i] = entity_classes(sentences[i]);
    if (classes_of[i].empty()) {
      no_label.push_back(i);
    } else {
      for (const std::string& c : classes_of[i]) unassigned_by_class[c].push_back(i);
    }
  }

  // desired[c] = {slots wanted in subset, slots wanted in remainder}
  std::map<std::string, std::array<double, 2>> desired;
  for (const auto& [c, members] : unassigned_by_class) {
    const double count = static_cast<double>(members.size());
    desired[c] = {count * ratio, count * (1.0 - ratio)};
  }
  std::array<double, 2> capacity = {static_cast<double>(n), static_cast<double>(total - n)};

  std::vector<int> assignment(total, -1);
  auto assign = [&](std::size_t idx, int split) {
    assignment[idx] = split;
    capacity[split] -= 1.0;
    for (const std::string& c : classes_of[idx]) {
      desired[c][split] -= 1.0;
      auto& members = unassigned_by_class[c];
      members.erase(std::find(members.begin(), members.end(), idx));
      if (members.empty()) unassigned_by_class.erase(c);
    }
  };

  while (!unassigned_by_class.empty()) {
    // scarcest class: fewest remaining desired slots, ties seeded-uniform
    std::vector<const std::string*> scarcest;
    double best = 0.0;
    for (const auto& [c, members] : unassigned_by_class) {
      const double remaining = desired[c][0] + desired[c][1];
      if (scarcest.empty() || remaining < best) {
        scarcest = {&c};
        best = remaining;
      } else if (remaining == best) {
        scarcest.push_back(&c);
      }
    }
    const std::string& cls = *scarcest[rng.below(scarcest.size())];

    const auto& members = unassigned_by_class[cls];
    const std::size_t idx = members[rng.below(members.size())];

    int split;
    const auto& want = desired[cls];
    if (capacity[0] <= 0.0) {
      split = 1;
    } else if (capacity[1] <= 0.0) {
      split = 0;
    } else if (want[0] > want[1]) {
      split = 0;
    } else if (want[1] > want[0]) {
      split = 1;
    } else if (capacity[0] > capacity[1]) {
      split = 0;
    } else if (capacity[1] > capacity[0]) {
      split = 1;
    } else {
      split = static_cast<int>(rng.below(2));
    }
    assign(idx, split);
  }

  // entity-free sentences fill the remaining capacity
  rng.shuffle(no_label);
  for (std::size_t idx : no_label) {
    int split;
    if (capacity[0] <= 0.0) {
      split = 1;
    } else if (capacity[1] <= 0.0) {
      split = 0;
    } else if (capacity[0] > capacity[1]) {
      split = 0;
    } else if (capacity[1] > capacity[0]) {
      split = 1;
    } else {
      split = static_cast<int>(rng.below(2));
    }
    assignment[idx] = split;
    capacity[split] -= 1.0;
  }

  SplitResult result;
  for (std::size_t i = 0; i < total; ++i) {
    (assignment[i] == 0 ? result.subset : result.remainder).push_back(sentences[i]);
  }
  return result;
}

}  // namespace aclm
