#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "aclm/attention_io.hpp"
#include "aclm/templating.hpp"

namespace aclm {

struct TrainingPair {
  std::vector<std::string> input;   // rendered template
  std::vector<std::string> target;  // rendered linearized original, no masks
};

struct GenerationRequest {
  std::vector<std::string> template_tokens;
  int top_k = 50;
  int num_beams = 4;
  int max_length = 0;
  std::uint64_t seed = 0;
};

// Paper defaults for the real seq2seq backend; forwarded to service backends.
struct FineTuneOptions {
  int epochs = 10;
  double learning_rate = 1e-5;
  int batch_size = 32;
};

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual void fine_tune(const std::vector<TrainingPair>& pairs, const FineTuneOptions& options) = 0;
  /// Stateless after fine_tune; safe to call concurrently.
  virtual std::vector<std::string> generate(const GenerationRequest& request) const = 0;
};

// Reference backend and test oracle: memorizes the fine-tuning pairs and
// answers with the target whose input shares the largest token-multiset
// overlap with the request (ties -> lexicographically smallest target).
class LookupDenoiser : public Denoiser {
 public:
  void fine_tune(const std::vector<TrainingPair>& pairs, const FineTuneOptions& options) override;
  std::vector<std::string> generate(const GenerationRequest& request) const override;

 private:
  std::vector<TrainingPair> pairs_;
};

// Wire backend:
//   POST /finetune {"pairs": [...], "hyperparameters": {...}} -> {"job_id": ...}
//   GET  /finetune/<job_id>                                   -> {"status": ...}
//   POST /generate {"template": [...], "top_k": ..., "num_beams": ...,
//                   "max_length": ..., "seed": ...}           -> {"tokens": [...]}
// Transient failures (no connection, 502/503/504) retry with exponential
// backoff; any other non-2xx raises BackendError carrying the body text.
class ServiceDenoiser : public Denoiser {
 public:
  struct Options {
    double timeout_seconds = 30.0;
    int max_attempts = 3;
    double backoff_seconds = 0.5;       // doubled per retry
    double poll_interval_seconds = 0.5;
    double poll_timeout_seconds = 600.0;
  };

  ServiceDenoiser(const std::string& host, int port) : ServiceDenoiser(host, port, Options()) {}
  ServiceDenoiser(const std::string& host, int port, Options options);
  ~ServiceDenoiser() override;

  void fine_tune(const std::vector<TrainingPair>& pairs, const FineTuneOptions& options) override;
  std::vector<std::string> generate(const GenerationRequest& request) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

enum class KeywordStrategy { attention, random, none };

struct TrainingSetBuild {
  std::vector<TrainingPair> pairs;
  std::vector<std::string> skipped_ids;  // entity-free sentences, not templated
};

/// One pair per entity-bearing sentence: input is the steps-1..4 template,
/// target the linearized original. Entity-free sentences land in skipped_ids.
/// Throws DataError when strategy is attention and a map is missing.
TrainingSetBuild build_training_pairs(const std::vector<TaggedSentence>& corpus,
                                      KeywordStrategy strategy, double p,
                                      std::size_t attention_layers,
                                      const DynamicMaskPolicy& policy,
                                      AttentionProvider* attention, const KeywordFilter& filter,
                                      const MarkerVocab& vocab, std::uint64_t seed);

}  // namespace aclm
