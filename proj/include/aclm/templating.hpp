#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aclm/attention.hpp"
#include "aclm/corpus.hpp"
#include "aclm/rng.hpp"

namespace aclm {

enum class ElementKind { Kept, Mask, LabelMarker };

struct TemplateElement {
  ElementKind kind = ElementKind::Mask;
  std::string text;                  // Kept: word; LabelMarker: entity class
  std::optional<std::size_t> origin; // source token index, when one exists
  bool entity = false;               // Kept token that belongs to an entity span
  bool marker_open = false;          // LabelMarker: opening side of the pair
  int side = 0;                      // 0 = primary parent, 1 = mix partner

  bool operator==(const TemplateElement& other) const {
    return kind == other.kind && text == other.text;
  }
};

// A corrupted sentence: kept entity/keyword tokens, mask placeholders, and
// label markers. Input to the denoiser in both training and generation.
struct Template {
  std::vector<TemplateElement> elements;
  std::string source_id;
  std::string partner_id;                          // mix() partner, empty otherwise
  std::set<std::size_t> keyword_origins;           // still-Kept keywords, primary side
  std::set<std::size_t> partner_keyword_origins;   // same for the partner side
};

// Step-4 policy: rate ~ Normal(mu, (1/K)^2) clamped to [0,1], K = keyword count.
struct DynamicMaskPolicy {
  double mu = 0.5;
  static constexpr const char* kSigmaRule = "reciprocal-K";
};

struct MarkerVocab {
  enum class Style {
    bare,    // the label string itself on both sides
    tagged,  // <LABEL> ... </LABEL>, for vocabularies that mangle bare labels
  };
  std::string mask_literal = "<mask>";
  Style style = Style::bare;
};

/// Keeps entity and keyword tokens in order, replaces the rest with masks,
/// and collapses mask runs.
Template selective_mask(const TaggedSentence& sentence, const KeywordSet& keywords);

/// All-Kept template of the sentence (every non-entity token treated as a
/// keyword); linearized, it renders to the denoiser training target.
Template identity_template(const TaggedSentence& sentence);

/// Flanks each entity run with its label marker on both sides.
/// The template's entity runs must match `entities` exactly.
Template linearize(const Template& tmpl, const std::vector<EntitySpan>& entities);

/// Override hook for the Gaussian rate draw; tests inject fixed rates.
using RateSampler = std::function<double(double mu, double sigma)>;

/// Masks floor(rate * K) uniformly-chosen keyword elements and re-collapses
/// masks. Entity tokens and markers are never touched; K = 0 is a no-op.
Template dynamic_mask(const Template& tmpl, const DynamicMaskPolicy& policy, Rng& rng,
                      const RateSampler& sampler = {});

/// Token strings for the denoiser. Masks render as the mask literal, markers
/// per the vocab style.
std::vector<std::string> render(const Template& tmpl, const MarkerVocab& vocab = {});

// Generated text that cannot be parsed back into a tagged sentence.
struct Malformed {
  std::string reason;
  std::size_t position = 0;
};

using DelinearizeResult = std::variant<TaggedSentence, Malformed>;

/// Parses generated tokens: identical-label markers pair left to right, the
/// tokens between a pair become B-X/I-X, everything else "O"; markers are
/// removed. Odd marker counts, empty spans, and nested pairs are Malformed.
DelinearizeResult delinearize(const std::vector<std::string>& tokens,
                              const std::set<std::string>& known_labels,
                              const MarkerVocab& vocab = {});

/// Debug/service dump: {"source_id":..., "elements":[{"kind":...,"text":...}]}.
nlohmann::json template_to_json(const Template& tmpl);

/// floor(x) robust to binary-fraction noise (floor_checked(0.7 * 10) == 7).
std::size_t floor_count(double x);

}  // namespace aclm
