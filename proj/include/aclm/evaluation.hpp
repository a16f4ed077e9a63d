#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aclm/corpus.hpp"

namespace aclm {

// Diversity of augmentations against their sources, averaged over pairs.
// E/N are percentages of new entity / non-entity words (case-folded sets,
// denominator on the augmented side); L is the mean absolute length gap.
struct DiversityReport {
  double diversity_e = 0.0;
  double diversity_n = 0.0;
  double diversity_l = 0.0;
};

DiversityReport diversity(
    const std::vector<std::pair<TaggedSentence, TaggedSentence>>& pairs);  // (original, augmented)

struct Prf {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Report {
  Prf micro;
  std::map<std::string, Prf> per_class;
  std::map<std::string, Prf> per_length_bucket;  // "len<5", "5<=len<10", "len>=10"
};

/// Span-level scoring: a predicted span is correct iff (start, end, label)
/// all match a gold span. Inputs must be aligned by id with equal token
/// counts per pair.
F1Report micro_f1(const std::vector<TaggedSentence>& predictions,
                  const std::vector<TaggedSentence>& gold);

/// Bucket name for a sentence's token count.
std::string length_bucket(std::size_t token_count);

class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;
  /// nullopt on a per-sentence scorer failure (the sentence is skipped).
  virtual std::optional<double> score(const std::string& text) = 0;
};

struct PerplexityReport {
  double mean = 0.0;
  std::size_t scored = 0;
  std::vector<std::string> skipped_ids;
};

/// Mean of the scorer's per-sentence perplexities (tokens joined by spaces).
/// Throws EvaluationError when every sentence was skipped.
PerplexityReport perplexity(const std::vector<TaggedSentence>& sentences,
                            PerplexityScorer& scorer);

/// POST <base>/score {"text": ...} -> {"perplexity": ...}.
class HttpScorer : public PerplexityScorer {
 public:
  HttpScorer(const std::string& host, int port, double timeout_seconds = 10.0);
  ~HttpScorer() override;
  std::optional<double> score(const std::string& text) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// JSON lines of {"text": ..., "perplexity": ...}; unknown text -> skip.
class FileScorer : public PerplexityScorer {
 public:
  explicit FileScorer(const std::filesystem::path& path);
  std::optional<double> score(const std::string& text) override;

 private:
  std::map<std::string, double> scores_;
};

nlohmann::json diversity_to_json(const DiversityReport& report);
nlohmann::json f1_report_to_json(const F1Report& report);

/// Aligned-column rendering of the F1 report for terminals.
std::string f1_report_text(const F1Report& report);

}  // namespace aclm
