#include "aclm/mixner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "aclm/errors.hpp"
#include "aclm/util.hpp"

namespace aclm {

void EmbeddingIndex::add(const std::string& id, std::vector<double> vector) {
  if (vector.empty()) throw ArgumentError("embedding \"" + id + "\": empty vector");
  if (dimension_ == 0) dimension_ = vector.size();
  if (vector.size() != dimension_) {
    throw ArgumentError("embedding \"" + id + "\": dimension " + std::to_string(vector.size()) +
                        " != " + std::to_string(dimension_));
  }
  double norm_sq = 0.0;
  for (double v : vector) norm_sq += v * v;
  if (norm_sq == 0.0) throw ArgumentError("embedding \"" + id + "\": zero norm");
  if (!vectors_.emplace(id, std::move(vector)).second) {
    throw ArgumentError("embedding \"" + id + "\": duplicate id");
  }
  ids_.push_back(id);
}

const std::vector<double>* EmbeddingIndex::find(const std::string& id) const {
  auto it = vectors_.find(id);
  return it == vectors_.end() ? nullptr : &it->second;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ArgumentError("cosine: dimensions " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
  if (a.empty()) throw ArgumentError("cosine: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ArgumentError("cosine: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<std::string> rank_candidates(const std::string& id, const EmbeddingIndex& index,
                                         std::size_t top_k) {
  const std::vector<double>* anchor = index.find(id);
  if (anchor == nullptr) throw RetrievalError("unknown sentence id \"" + id + "\"");
  if (index.size() < 2) throw RetrievalError("cannot retrieve a partner from a singleton index");

  std::vector<std::pair<double, const std::string*>> scored;
  scored.reserve(index.size() - 1);
  for (const std::string& other : index.ids()) {
    if (other == id) continue;
    scored.emplace_back(cosine_similarity(*anchor, *index.find(other)), &other);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  if (scored.size() > top_k) scored.resize(top_k);

  std::vector<std::string> ids;
  ids.reserve(scored.size());
  for (const auto& [sim, pid] : scored) ids.push_back(*pid);
  return ids;
}

}  // namespace

std::string retrieve_partner(const std::string& id, const EmbeddingIndex& index,
                             std::size_t top_k, Rng& rng) {
  if (top_k < 1) throw ArgumentError("top_k must be >= 1");
  const auto pool = rank_candidates(id, index, top_k);
  return pool[rng.below(pool.size())];
}

double draw_gate_rate(const MixPolicy& policy, Rng& rng) {
  return std::clamp(rng.gaussian(policy.mu, policy.sigma), 0.0, 1.0);
}

bool gate(const MixPolicy& policy, Rng& rng) {
  return gate_decision(draw_gate_rate(policy, rng), policy.beta);
}

Template mix(const Template& a, const Template& b) {
  Template out;
  out.source_id = a.source_id;
  out.partner_id = b.source_id;
  out.keyword_origins = a.keyword_origins;
  out.partner_keyword_origins = b.keyword_origins;
  out.elements = a.elements;
  for (TemplateElement e : b.elements) {
    e.side = 1;
    if (e.kind == ElementKind::Mask && !out.elements.empty() &&
        out.elements.back().kind == ElementKind::Mask) {
      continue;
    }
    out.elements.push_back(std::move(e));
  }
  return out;
}

PartnerRetriever::PartnerRetriever(const EmbeddingIndex& index, std::size_t top_k) {
  if (top_k < 1) throw ArgumentError("top_k must be >= 1");
  for (const std::string& id : index.ids()) {
    candidates_[id] = rank_candidates(id, index, top_k);
  }
}

const std::vector<std::string>& PartnerRetriever::candidates(const std::string& id) const {
  auto it = candidates_.find(id);
  if (it == candidates_.end()) throw RetrievalError("unknown sentence id \"" + id + "\"");
  return it->second;
}

std::string PartnerRetriever::sample(const std::string& id, Rng& rng) const {
  const auto& pool = candidates(id);
  return pool[rng.below(pool.size())];
}

std::unique_ptr<PartnerRetriever> PartnerRetriever::cached(const EmbeddingIndex& index,
                                                           std::size_t top_k,
                                                           const std::filesystem::path& cache_dir) {
  std::uint64_t digest = fnv1a64("partner-cache-v1");
  for (const std::string& id : index.ids()) {
    digest = fnv1a64(id, digest);
    const auto& vec = *index.find(id);
    digest = fnv1a64(std::string_view(reinterpret_cast<const char*>(vec.data()),
                                      vec.size() * sizeof(double)),
                     digest);
  }
  digest = fnv1a64(std::to_string(top_k), digest);
  char name[64];
  std::snprintf(name, sizeof(name), "similarity-%016llx.json",
                static_cast<unsigned long long>(digest));
  const auto cache_path = cache_dir / name;

  if (std::filesystem::exists(cache_path)) {
    auto cached_json = nlohmann::json::parse(read_file(cache_path));
    auto retriever = std::unique_ptr<PartnerRetriever>(new PartnerRetriever());
    for (auto it = cached_json.begin(); it != cached_json.end(); ++it) {
      retriever->candidates_[it.key()] = it.value().get<std::vector<std::string>>();
    }
    return retriever;
  }

  auto retriever = std::unique_ptr<PartnerRetriever>(new PartnerRetriever(index, top_k));
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [id, pool] : retriever->candidates_) out[id] = pool;
  write_file(cache_path, out.dump() + "\n");
  return retriever;
}

EmbeddingIndex load_embeddings_jsonl(const std::filesystem::path& path) {
  EmbeddingIndex index;
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
      throw ParseError(std::string("bad embedding record: ") + e.what(), line_no);
    }
    index.add(record.at("id").get<std::string>(),
              record.at("vector").get<std::vector<double>>());
  }
  return index;
}

struct HttpEmbedder::Impl {
  httplib::Client client;
  Impl(const std::string& host, int port, double timeout_seconds) : client(host, port) {
    const auto seconds = static_cast<time_t>(timeout_seconds);
    const auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, usec);
    client.set_read_timeout(seconds, usec);
  }
};

HttpEmbedder::HttpEmbedder(const std::string& host, int port, double timeout_seconds)
    : impl_(std::make_unique<Impl>(host, port, timeout_seconds)) {}

HttpEmbedder::~HttpEmbedder() = default;

std::vector<double> HttpEmbedder::embed(const std::string& text) {
  const nlohmann::json request = {{"text", text}};
  auto res = impl_->client.Post("/embed", request.dump(), "application/json");
  if (!res) throw BackendError("embedder unreachable");
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("embedder returned " + std::to_string(res->status) + ": " + res->body);
  }
  return nlohmann::json::parse(res->body).at("vector").get<std::vector<double>>();
}

}  // namespace aclm
