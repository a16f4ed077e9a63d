#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aclm/rng.hpp"
#include "aclm/templating.hpp"

namespace aclm {

// Sentence embeddings keyed by id. Immutable once built; read-shared after.
class EmbeddingIndex {
 public:
  /// Throws ArgumentError on a dimension mismatch, zero-norm vector, or
  /// duplicate id.
  void add(const std::string& id, std::vector<double> vector);

  const std::vector<double>* find(const std::string& id) const;
  const std::vector<std::string>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> ids_;  // insertion order, for deterministic scans
  std::map<std::string, std::vector<double>> vectors_;
};

struct MixPolicy {
  std::size_t top_k = 5;
  double mu = 0.5;
  double sigma = 0.2;
  double beta = 0.7;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Uniformly sampled member of the top_k ids most similar to `id`, self
/// excluded, similarity ties broken by id order.
std::string retrieve_partner(const std::string& id, const EmbeddingIndex& index,
                             std::size_t top_k, Rng& rng);

/// gamma ~ Normal(mu, sigma^2), clamped to [0,1].
double draw_gate_rate(const MixPolicy& policy, Rng& rng);

/// Strict threshold: gamma == beta does not mix.
inline bool gate_decision(double gamma, double beta) { return gamma > beta; }

bool gate(const MixPolicy& policy, Rng& rng);

/// Concatenates two linearized templates (a then b), collapsing a boundary
/// mask run. Entity and keyword provenance stay attached to their own side.
Template mix(const Template& a, const Template& b);

// Precomputed top-k candidate lists for every id in the index.
// O(N^2) once per corpus; fine at low-resource scales (N <= ~15k).
// TODO: approximate nearest neighbors if this ever has to scale past that.
class PartnerRetriever {
 public:
  PartnerRetriever(const EmbeddingIndex& index, std::size_t top_k);

  const std::vector<std::string>& candidates(const std::string& id) const;
  std::string sample(const std::string& id, Rng& rng) const;

  /// Cache the candidate lists under cache_dir, keyed by a digest of the
  /// index contents, and reuse them on the next construction.
  static std::unique_ptr<PartnerRetriever> cached(const EmbeddingIndex& index, std::size_t top_k,
                                                  const std::filesystem::path& cache_dir);

 private:
  PartnerRetriever() = default;
  std::map<std::string, std::vector<std::string>> candidates_;
};

/// JSON lines, one {"id": ..., "vector": [...]} per line.
EmbeddingIndex load_embeddings_jsonl(const std::filesystem::path& path);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

/// POST <base>/embed {"text": ...} -> {"vector": [...]}.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(const std::string& host, int port, double timeout_seconds = 10.0);
  ~HttpEmbedder() override;
  std::vector<double> embed(const std::string& text) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aclm
