#include "aclm/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <httplib.h>

#include "aclm/errors.hpp"
#include "aclm/util.hpp"

namespace aclm {

namespace {

std::set<std::string> folded_words(const TaggedSentence& sentence, bool entity_side) {
  std::set<std::string> words;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if ((sentence.tags[i] != "O") == entity_side) words.insert(fold_case(sentence.tokens[i]));
  }
  return words;
}

// 100 * |aug \ orig| / |aug|, 0 when aug is empty.
double new_word_percent(const std::set<std::string>& orig, const std::set<std::string>& aug) {
  if (aug.empty()) return 0.0;
  std::size_t fresh = 0;
  for (const std::string& word : aug) {
    if (orig.count(word) == 0) ++fresh;
  }
  return 100.0 * static_cast<double>(fresh) / static_cast<double>(aug.size());
}

void finalize(Prf& prf) {
  prf.precision = prf.tp + prf.fp == 0
                      ? 0.0
                      : static_cast<double>(prf.tp) / static_cast<double>(prf.tp + prf.fp);
  prf.recall = prf.tp + prf.fn == 0
                   ? 0.0
                   : static_cast<double>(prf.tp) / static_cast<double>(prf.tp + prf.fn);
  prf.f1 = prf.precision + prf.recall == 0.0
               ? 0.0
               : 2.0 * prf.precision * prf.recall / (prf.precision + prf.recall);
}

}  // namespace

DiversityReport diversity(const std::vector<std::pair<TaggedSentence, TaggedSentence>>& pairs) {
  if (pairs.empty()) throw ArgumentError("diversity needs at least one pair");
  DiversityReport report;
  for (const auto& [original, augmented] : pairs) {
    report.diversity_e +=
        new_word_percent(folded_words(original, true), folded_words(augmented, true));
    report.diversity_n +=
        new_word_percent(folded_words(original, false), folded_words(augmented, false));
    report.diversity_l += std::abs(static_cast<double>(augmented.tokens.size()) -
                                   static_cast<double>(original.tokens.size()));
  }
  const double n = static_cast<double>(pairs.size());
  report.diversity_e /= n;
  report.diversity_n /= n;
  report.diversity_l /= n;
  return report;
}

std::string length_bucket(std::size_t token_count) {
  if (token_count < 5) return "len<5";
  if (token_count < 10) return "5<=len<10";
  return "len>=10";
}

F1Report micro_f1(const std::vector<TaggedSentence>& predictions,
                  const std::vector<TaggedSentence>& gold) {
  if (predictions.size() != gold.size()) {
    throw ArgumentError("prediction/gold corpus sizes differ: " +
                        std::to_string(predictions.size()) + " vs " + std::to_string(gold.size()));
  }
  F1Report report;
  report.per_length_bucket["len<5"];
  report.per_length_bucket["5<=len<10"];
  report.per_length_bucket["len>=10"];
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const TaggedSentence& pred = predictions[s];
    const TaggedSentence& ref = gold[s];
    if (pred.id != ref.id) {
      throw ArgumentError("sentence id mismatch at position " + std::to_string(s) + ": \"" +
                          pred.id + "\" vs \"" + ref.id + "\"");
    }
    if (pred.tokens.size() != ref.tokens.size()) {
      throw ArgumentError("sentence \"" + ref.id + "\": token counts differ");
    }
    Prf& bucket = report.per_length_bucket[length_bucket(ref.tokens.size())];

    const auto pred_spans = extract_entities(pred);
    const auto gold_spans = extract_entities(ref);
    std::vector<bool> matched(gold_spans.size(), false);
    for (const EntitySpan& span : pred_spans) {
      bool hit = false;
      for (std::size_t g = 0; g < gold_spans.size(); ++g) {
        if (!matched[g] && gold_spans[g] == span) {
          matched[g] = true;
          hit = true;
          break;
        }
      }
      if (hit) {
        ++report.micro.tp;
        ++report.per_class[span.label].tp;
        ++bucket.tp;
      } else {
        ++report.micro.fp;
        ++report.per_class[span.label].fp;
        ++bucket.fp;
      }
    }
    for (std::size_t g = 0; g < gold_spans.size(); ++g) {
      if (!matched[g]) {
        ++report.micro.fn;
        ++report.per_class[gold_spans[g].label].fn;
        ++bucket.fn;
      }
    }
  }
  finalize(report.micro);
  for (auto& [label, prf] : report.per_class) finalize(prf);
  for (auto& [bucket, prf] : report.per_length_bucket) finalize(prf);
  return report;
}

PerplexityReport perplexity(const std::vector<TaggedSentence>& sentences,
                            PerplexityScorer& scorer) {
  PerplexityReport report;
  double sum = 0.0;
  for (const TaggedSentence& sentence : sentences) {
    const auto value = scorer.score(join(sentence.tokens, " "));
    if (!value) {
      report.skipped_ids.push_back(sentence.id);
      continue;
    }
    sum += *value;
    ++report.scored;
  }
  if (report.scored == 0) throw EvaluationError("scorer failed on every sentence");
  report.mean = sum / static_cast<double>(report.scored);
  return report;
}

struct HttpScorer::Impl {
  httplib::Client client;
  Impl(const std::string& host, int port, double timeout_seconds) : client(host, port) {
    const auto seconds = static_cast<time_t>(timeout_seconds);
    const auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, usec);
    client.set_read_timeout(seconds, usec);
  }
};

HttpScorer::HttpScorer(const std::string& host, int port, double timeout_seconds)
    : impl_(std::make_unique<Impl>(host, port, timeout_seconds)) {}

HttpScorer::~HttpScorer() = default;

std::optional<double> HttpScorer::score(const std::string& text) {
  const nlohmann::json request = {{"text", text}};
  auto res = impl_->client.Post("/score", request.dump(), "application/json");
  if (!res || res->status < 200 || res->status >= 300) return std::nullopt;
  try {
    return nlohmann::json::parse(res->body).at("perplexity").get<double>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

FileScorer::FileScorer(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad scorer record: ") + e.what(), line_no);
    }
    scores_[record.at("text").get<std::string>()] = record.at("perplexity").get<double>();
  }
}

std::optional<double> FileScorer::score(const std::string& text) {
  auto it = scores_.find(text);
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json diversity_to_json(const DiversityReport& report) {
  return {{"diversity_e", report.diversity_e},
          {"diversity_n", report.diversity_n},
          {"diversity_l", report.diversity_l}};
}

namespace {

nlohmann::json prf_to_json(const Prf& prf) {
  return {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1},
          {"tp", prf.tp},               {"fp", prf.fp},         {"fn", prf.fn}};
}

}  // namespace

nlohmann::json f1_report_to_json(const F1Report& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [label, prf] : report.per_class) per_class[label] = prf_to_json(prf);
  nlohmann::json buckets = nlohmann::json::object();
  for (const auto& [bucket, prf] : report.per_length_bucket) buckets[bucket] = prf_to_json(prf);
  return {{"micro", prf_to_json(report.micro)},
          {"per_class", std::move(per_class)},
          {"per_length_bucket", std::move(buckets)}};
}

std::string f1_report_text(const F1Report& report) {
  std::string out;
  char line[160];
  auto emit = [&](const std::string& name, const Prf& prf) {
    std::snprintf(line, sizeof(line), "%-12s %8.4f %8.4f %8.4f %6zu %6zu %6zu\n", name.c_str(),
                  prf.precision, prf.recall, prf.f1, prf.tp, prf.fp, prf.fn);
    out += line;
  };
  std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %6s %6s %6s\n", "slice", "P", "R", "F1",
                "TP", "FP", "FN");
  out += line;
  emit("micro", report.micro);
  for (const auto& [label, prf] : report.per_class) emit(label, prf);
  for (const auto& [bucket, prf] : report.per_length_bucket) emit(bucket, prf);
  return out;
}

}  // namespace aclm
