#include "aclm/templating.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aclm/errors.hpp"

namespace aclm {

namespace {

void append_collapsing(std::vector<TemplateElement>& elements, TemplateElement element) {
  if (element.kind == ElementKind::Mask && !elements.empty() &&
      elements.back().kind == ElementKind::Mask) {
    return;
  }
  elements.push_back(std::move(element));
}

std::vector<TemplateElement> collapse_masks(const std::vector<TemplateElement>& elements) {
  std::vector<TemplateElement> out;
  out.reserve(elements.size());
  for (const TemplateElement& e : elements) append_collapsing(out, e);
  return out;
}

TemplateElement kept(std::string text, std::size_t origin, bool entity) {
  TemplateElement e;
  e.kind = ElementKind::Kept;
  e.text = std::move(text);
  e.origin = origin;
  e.entity = entity;
  return e;
}

TemplateElement mask() { return {}; }

TemplateElement marker(const std::string& label, bool open) {
  TemplateElement e;
  e.kind = ElementKind::LabelMarker;
  e.text = label;
  e.marker_open = open;
  return e;
}

}  // namespace

Template selective_mask(const TaggedSentence& sentence, const KeywordSet& keywords) {
  Template tmpl;
  tmpl.source_id = sentence.id;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if (sentence.tags[i] != "O") {
      tmpl.elements.push_back(kept(sentence.tokens[i], i, true));
    } else if (keywords.indices.count(i) > 0) {
      tmpl.elements.push_back(kept(sentence.tokens[i], i, false));
      tmpl.keyword_origins.insert(i);
    } else {
      append_collapsing(tmpl.elements, mask());
    }
  }
  tmpl.elements = collapse_masks(tmpl.elements);
  return tmpl;
}

Template identity_template(const TaggedSentence& sentence) {
  Template tmpl;
  tmpl.source_id = sentence.id;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const bool entity = sentence.tags[i] != "O";
    tmpl.elements.push_back(kept(sentence.tokens[i], i, entity));
    if (!entity) tmpl.keyword_origins.insert(i);
  }
  return tmpl;
}

Template linearize(const Template& tmpl, const std::vector<EntitySpan>& entities) {
  Template out;
  out.source_id = tmpl.source_id;
  out.partner_id = tmpl.partner_id;
  out.keyword_origins = tmpl.keyword_origins;
  out.partner_keyword_origins = tmpl.partner_keyword_origins;

  std::size_t next_entity = 0;
  std::size_t open_until = 0;  // exclusive token index of the span being copied
  std::size_t open_next = 0;   // origin the next entity element must carry
  bool open = false;
  std::string open_label;
  for (const TemplateElement& e : tmpl.elements) {
    if (e.kind == ElementKind::Kept && e.entity) {
      if (!e.origin) throw std::logic_error("entity element lacks a source index");
      if (!open) {
        if (next_entity >= entities.size() || entities[next_entity].start != *e.origin) {
          throw std::logic_error("template entity runs do not match the span list");
        }
        out.elements.push_back(marker(entities[next_entity].label, true));
        open = true;
        open_label = entities[next_entity].label;
        open_until = entities[next_entity].end;
        open_next = entities[next_entity].start;
        ++next_entity;
      }
      if (*e.origin != open_next++) {
        throw std::logic_error("template entity runs do not match the span list");
      }
      out.elements.push_back(e);
      if (*e.origin + 1 == open_until) {
        out.elements.push_back(marker(open_label, false));
        open = false;
      }
      continue;
    }
    if (open) throw std::logic_error("entity span interrupted in template");
    out.elements.push_back(e);
  }
  if (open || next_entity != entities.size()) {
    throw std::logic_error("template entity runs do not match the span list");
  }
  return out;
}

std::size_t floor_count(double x) {
  if (x <= 0.0) return 0;
  return static_cast<std::size_t>(std::floor(x + 1e-9));
}

Template dynamic_mask(const Template& tmpl, const DynamicMaskPolicy& policy, Rng& rng,
                      const RateSampler& sampler) {
  if (policy.mu < 0.0 || policy.mu > 1.0) {
    throw ArgumentError("masking mean " + std::to_string(policy.mu) + " outside [0,1]");
  }
  std::vector<std::size_t> keyword_positions;
  for (std::size_t i = 0; i < tmpl.elements.size(); ++i) {
    const TemplateElement& e = tmpl.elements[i];
    if (e.kind == ElementKind::Kept && !e.entity) keyword_positions.push_back(i);
  }
  const std::size_t k = keyword_positions.size();
  if (k == 0) return tmpl;

  const double sigma = 1.0 / static_cast<double>(k);
  double rate = sampler ? sampler(policy.mu, sigma) : rng.gaussian(policy.mu, sigma);
  rate = std::clamp(rate, 0.0, 1.0);
  const std::size_t to_mask = std::min(floor_count(rate * static_cast<double>(k)), k);

  Template out = tmpl;
  if (to_mask > 0) {
    // partial Fisher-Yates: first to_mask entries are a uniform subset
    for (std::size_t i = 0; i < to_mask; ++i) {
      std::swap(keyword_positions[i], keyword_positions[i + rng.below(k - i)]);
    }
    for (std::size_t i = 0; i < to_mask; ++i) {
      TemplateElement& victim = out.elements[keyword_positions[i]];
      if (victim.origin) {
        (victim.side == 0 ? out.keyword_origins : out.partner_keyword_origins).erase(*victim.origin);
      }
      victim = mask();
    }
  }
  out.elements = collapse_masks(out.elements);
  return out;
}

std::vector<std::string> render(const Template& tmpl, const MarkerVocab& vocab) {
  std::vector<std::string> tokens;
  tokens.reserve(tmpl.elements.size());
  for (const TemplateElement& e : tmpl.elements) {
    switch (e.kind) {
      case ElementKind::Kept:
        tokens.push_back(e.text);
        break;
      case ElementKind::Mask:
        tokens.push_back(vocab.mask_literal);
        break;
      case ElementKind::LabelMarker:
        if (vocab.style == MarkerVocab::Style::bare) {
          tokens.push_back(e.text);
        } else {
          tokens.push_back((e.marker_open ? "<" : "</") + e.text + ">");
        }
        break;
    }
  }
  return tokens;
}

namespace {

// Classifies a generated token under the given marker style.
// Returns true and fills label/open when the token is a marker.
bool classify_marker(const std::string& token, const std::set<std::string>& known_labels,
                     const MarkerVocab& vocab, std::string& label, bool& opens_or_closes) {
  if (vocab.style == MarkerVocab::Style::bare) {
    if (known_labels.count(token) == 0) return false;
    label = token;
    opens_or_closes = true;  // same literal both sides; caller decides by state
    return true;
  }
  if (token.size() >= 3 && token.front() == '<' && token.back() == '>') {
    const bool closing = token.size() >= 4 && token[1] == '/';
    const std::string inner = token.substr(closing ? 2 : 1, token.size() - (closing ? 3 : 2));
    if (known_labels.count(inner) == 0) return false;
    label = inner;
    opens_or_closes = !closing;
    return true;
  }
  return false;
}

}  // namespace

DelinearizeResult delinearize(const std::vector<std::string>& tokens,
                              const std::set<std::string>& known_labels,
                              const MarkerVocab& vocab) {
  TaggedSentence sentence;
  bool open = false;
  std::string open_label;
  std::size_t span_tokens = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string label;
    bool opens = false;
    if (classify_marker(tokens[i], known_labels, vocab, label, opens)) {
      if (vocab.style == MarkerVocab::Style::bare) {
        opens = !(open && open_label == label);
      }
      if (!open && !opens) {
        return Malformed{"closing marker \"" + tokens[i] + "\" without an open span", i};
      }
      if (open && opens) {
        return Malformed{"marker \"" + tokens[i] + "\" opened inside a \"" + open_label +
                             "\" span",
                         i};
      }
      if (open) {
        if (span_tokens == 0) {
          return Malformed{"empty span between \"" + open_label + "\" markers", i};
        }
        open = false;
      } else {
        open = true;
        open_label = label;
        span_tokens = 0;
      }
      continue;
    }
    sentence.tokens.push_back(tokens[i]);
    if (open) {
      sentence.tags.push_back((span_tokens == 0 ? "B-" : "I-") + open_label);
      ++span_tokens;
    } else {
      sentence.tags.push_back("O");
    }
  }
  if (open) {
    return Malformed{"unpaired \"" + open_label + "\" marker", tokens.size()};
  }
  if (sentence.tokens.empty()) {
    return Malformed{"no tokens left after removing markers", 0};
  }
  return sentence;
}

nlohmann::json template_to_json(const Template& tmpl) {
  nlohmann::json elements = nlohmann::json::array();
  for (const TemplateElement& e : tmpl.elements) {
    nlohmann::json entry;
    switch (e.kind) {
      case ElementKind::Kept:
        entry["kind"] = "Kept";
        entry["text"] = e.text;
        break;
      case ElementKind::Mask:
        entry["kind"] = "Mask";
        break;
      case ElementKind::LabelMarker:
        entry["kind"] = "LabelMarker";
        entry["text"] = e.text;
        break;
    }
    elements.push_back(std::move(entry));
  }
  return {{"source_id", tmpl.source_id}, {"elements", std::move(elements)}};
}

}  // namespace aclm
