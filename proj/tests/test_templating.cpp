#include <doctest.h>

#include <cmath>

#include "aclm/errors.hpp"
#include "aclm/templating.hpp"
#include "test_support.hpp"

using namespace aclm;
using testing::sent;

namespace {

KeywordSet keywords_at(std::initializer_list<std::size_t> indices) {
  KeywordSet set;
  set.indices = indices;
  set.per_entity[0] = set.indices;
  return set;
}

std::vector<std::string> kinds_of(const Template& tmpl) {
  std::vector<std::string> kinds;
  for (const auto& e : tmpl.elements) {
    switch (e.kind) {
      case ElementKind::Kept: kinds.push_back("K:" + e.text); break;
      case ElementKind::Mask: kinds.push_back("M"); break;
      case ElementKind::LabelMarker: kinds.push_back("L:" + e.text); break;
    }
  }
  return kinds;
}

bool no_consecutive_masks(const Template& tmpl) {
  for (std::size_t i = 1; i < tmpl.elements.size(); ++i) {
    if (tmpl.elements[i].kind == ElementKind::Mask &&
        tmpl.elements[i - 1].kind == ElementKind::Mask) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> entity_texts(const Template& tmpl) {
  std::vector<std::string> texts;
  for (const auto& e : tmpl.elements) {
    if (e.kind == ElementKind::Kept && e.entity) texts.push_back(e.text);
  }
  return texts;
}

bool markers_paired(const Template& tmpl) {
  bool open = false;
  std::string label;
  for (const auto& e : tmpl.elements) {
    if (e.kind != ElementKind::LabelMarker) {
      continue;
    }
    if (!open) {
      open = true;
      label = e.text;
    } else {
      if (e.text != label) return false;
      open = false;
    }
  }
  return !open;
}

}  // namespace

TEST_CASE("selective_mask: spec example") {
  const auto s = sent("s", {"a", "b", "E", "c", "d"}, {"O", "O", "B-CW", "O", "O"});
  const auto tmpl = selective_mask(s, keywords_at({3}));
  CHECK(kinds_of(tmpl) == std::vector<std::string>{"M", "K:E", "K:c", "M"});
  CHECK(tmpl.keyword_origins == std::set<std::size_t>{3});
}

TEST_CASE("selective_mask: all-entity sentence has no masks") {
  const auto s = sent("s", {"j", "k"}, {"B-PER", "I-PER"});
  const auto tmpl = selective_mask(s, {});
  CHECK(kinds_of(tmpl) == std::vector<std::string>{"K:j", "K:k"});
}

TEST_CASE("selective_mask: full keywords reproduce the sentence") {
  const auto s = sent("s", {"a", "E", "b"}, {"O", "B-CW", "O"});
  const auto tmpl = selective_mask(s, keywords_at({0, 2}));
  CHECK(kinds_of(tmpl) == std::vector<std::string>{"K:a", "K:E", "K:b"});
}

TEST_CASE("linearize: flanks an entity run") {
  const auto s = sent("s", {"john", "smith"}, {"B-PER", "I-PER"});
  const auto tmpl = linearize(selective_mask(s, {}), extract_entities(s));
  CHECK(kinds_of(tmpl) ==
        std::vector<std::string>{"L:PER", "K:john", "K:smith", "L:PER"});
  CHECK(tmpl.elements.front().marker_open);
  CHECK_FALSE(tmpl.elements.back().marker_open);
}

TEST_CASE("linearize: no entities leaves the template unchanged") {
  const auto s = sent("s", {"a", "b"}, {"O", "O"});
  const auto masked = selective_mask(s, keywords_at({0, 1}));
  const auto tmpl = linearize(masked, {});
  CHECK(kinds_of(tmpl) == kinds_of(masked));
}

TEST_CASE("linearize: adjacent entities get four markers, correctly paired") {
  const auto s = sent("s", {"paris", "john"}, {"B-LOC", "B-PER"});
  const auto tmpl = linearize(selective_mask(s, {}), extract_entities(s));
  CHECK(kinds_of(tmpl) ==
        std::vector<std::string>{"L:LOC", "K:paris", "L:LOC", "L:PER", "K:john", "L:PER"});
  CHECK(markers_paired(tmpl));
}

TEST_CASE("linearize: span mismatch is an internal error") {
  const auto s = sent("s", {"john"}, {"B-PER"});
  const auto masked = selective_mask(s, {});
  CHECK_THROWS_AS(linearize(masked, {}), std::logic_error);
  CHECK_THROWS_AS(linearize(masked, {EntitySpan{0, 2, "PER", {}}}), std::logic_error);
}

namespace {

Template linearized_fixture() {
  // markers around E, keywords a b c d
  const auto s = sent("s", {"a", "b", "E", "c", "d"}, {"O", "O", "B-CW", "O", "O"});
  return linearize(selective_mask(s, keywords_at({0, 1, 3, 4})), extract_entities(s));
}

}  // namespace

TEST_CASE("dynamic_mask: K = 0 is a no-op") {
  const auto s = sent("s", {"E"}, {"B-CW"});
  const auto tmpl = linearize(selective_mask(s, {}), extract_entities(s));
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto masked = dynamic_mask(tmpl, {}, rng);
    CHECK(kinds_of(masked) == kinds_of(tmpl));
  }
}

TEST_CASE("dynamic_mask: forced rate masks floor(rate * K) keywords") {
  const auto tmpl = linearized_fixture();  // K = 4
  Rng rng(2);
  const auto masked = dynamic_mask(tmpl, {}, rng, [](double, double) { return 0.5; });
  std::size_t kept_keywords = 0;
  for (const auto& e : masked.elements) {
    if (e.kind == ElementKind::Kept && !e.entity) ++kept_keywords;
  }
  CHECK(kept_keywords == 2);  // floor(0.5 * 4) = 2 masked, 2 left
  CHECK(no_consecutive_masks(masked));
  CHECK(masked.keyword_origins.size() == 2);
  // entity and markers untouched
  CHECK(entity_texts(masked) == std::vector<std::string>{"E"});
  CHECK(markers_paired(masked));
}

TEST_CASE("dynamic_mask: rate 1 degrades to the only-entity template") {
  const auto tmpl = linearized_fixture();
  Rng rng(3);
  const auto masked = dynamic_mask(tmpl, {}, rng, [](double, double) { return 1.0; });
  CHECK(kinds_of(masked) == std::vector<std::string>{"M", "L:CW", "K:E", "L:CW", "M"});
  CHECK(masked.keyword_origins.empty());
}

TEST_CASE("dynamic_mask: draw statistics match the stated normal") {
  // K = 10, mu = 0.5: mean drawn rate ~ 0.5; counts are exactly floor(rate*K)
  std::vector<std::string> tokens, tags;
  tokens.push_back("E");
  tags.push_back("B-CW");
  for (int i = 0; i < 10; ++i) {
    tokens.push_back("w" + std::to_string(i));
    tags.push_back("O");
  }
  const auto s = sent("s", tokens, tags);
  KeywordSet keywords;
  for (std::size_t i = 1; i <= 10; ++i) keywords.indices.insert(i);
  keywords.per_entity[0] = keywords.indices;
  const auto tmpl = linearize(selective_mask(s, keywords), extract_entities(s));

  Rng rng(4);
  DynamicMaskPolicy policy;  // mu = 0.5
  double rate_sum = 0.0;
  double count_sum = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    double drawn = -1.0;
    const auto masked = dynamic_mask(tmpl, policy, rng, [&](double mu, double sigma) {
      CHECK(sigma == doctest::Approx(0.1));
      drawn = std::clamp(rng.gaussian(mu, sigma), 0.0, 1.0);
      return drawn;
    });
    rate_sum += drawn;
    std::size_t kept = 0;
    for (const auto& e : masked.elements) {
      if (e.kind == ElementKind::Kept && !e.entity) ++kept;
    }
    CHECK(10 - kept == floor_count(drawn * 10));
    count_sum += static_cast<double>(10 - kept);
  }
  CHECK(rate_sum / draws == doctest::Approx(0.5).epsilon(0.04));
  // floor() biases the realized count down by ~1/(2K)
  CHECK(count_sum / draws / 10.0 == doctest::Approx(0.45).epsilon(0.05));
}

TEST_CASE("render: markers, masks, and the tagged style") {
  const auto s = sent("s", {"x"}, {"B-PER"});
  const auto tmpl = linearize(selective_mask(s, {}), extract_entities(s));
  CHECK(render(tmpl) == std::vector<std::string>{"PER", "x", "PER"});

  MarkerVocab tagged;
  tagged.style = MarkerVocab::Style::tagged;
  CHECK(render(tmpl, tagged) == std::vector<std::string>{"<PER>", "x", "</PER>"});

  CHECK(render(Template{}).empty());

  Template lone;
  lone.elements.push_back({});
  CHECK(render(lone) == std::vector<std::string>{"<mask>"});
}

TEST_CASE("delinearize: spec example") {
  const auto result = delinearize({"PER", "john", "smith", "PER", "visited", "LOC", "paris", "LOC"},
                                  {"PER", "LOC"});
  const auto* s = std::get_if<TaggedSentence>(&result);
  REQUIRE(s != nullptr);
  CHECK(s->tokens == std::vector<std::string>{"john", "smith", "visited", "paris"});
  CHECK(s->tags == std::vector<std::string>{"B-PER", "I-PER", "O", "B-LOC"});
}

TEST_CASE("delinearize: no markers means all O") {
  const auto result = delinearize({"just", "words"}, {"PER"});
  const auto* s = std::get_if<TaggedSentence>(&result);
  REQUIRE(s != nullptr);
  CHECK(s->tags == std::vector<std::string>{"O", "O"});
}

TEST_CASE("delinearize: malformed outputs") {
  CHECK(std::holds_alternative<Malformed>(delinearize({"PER", "john"}, {"PER"})));
  CHECK(std::holds_alternative<Malformed>(delinearize({"PER", "PER"}, {"PER"})));
  CHECK(std::holds_alternative<Malformed>(
      delinearize({"PER", "LOC", "x", "LOC", "PER"}, {"PER", "LOC"})));
  CHECK(std::holds_alternative<Malformed>(delinearize({"PER", "x", "PER"}, {"PER", "LOC"})) ==
        false);
  CHECK(std::holds_alternative<Malformed>(delinearize({}, {"PER"})));
}

TEST_CASE("delinearize: tagged style") {
  MarkerVocab tagged;
  tagged.style = MarkerVocab::Style::tagged;
  const auto result = delinearize({"<PER>", "john", "</PER>", "went"}, {"PER"}, tagged);
  const auto* s = std::get_if<TaggedSentence>(&result);
  REQUIRE(s != nullptr);
  CHECK(s->tags == std::vector<std::string>{"B-PER", "O"});
  CHECK(std::holds_alternative<Malformed>(delinearize({"</PER>", "x"}, {"PER"}, tagged)));
}

TEST_CASE("round trip: delinearize ∘ render ∘ linearize recovers the sentence") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = testing::random_sentence(rng, "t");
    const auto entities = extract_entities(s);
    std::set<std::string> labels;
    for (const auto& span : entities) labels.insert(span.label);
    labels.insert({"PER", "LOC", "CW"});

    const auto tokens = render(linearize(identity_template(s), entities));
    const auto result = delinearize(tokens, labels);
    const auto* back = std::get_if<TaggedSentence>(&result);
    REQUIRE(back != nullptr);
    CHECK(back->tokens == s.tokens);
    CHECK(back->tags == s.tags);
  }
}

TEST_CASE("templates: invariants under every operation") {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = testing::random_sentence(rng, "t");
    const auto entities = extract_entities(s);
    KeywordFilter no_filter;
    no_filter.drop_punctuation = false;
    auto keywords = select_keywords_random(s, 0.4, no_filter, rng);

    std::vector<std::string> expected_entities;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (s.tags[i] != "O") expected_entities.push_back(s.tokens[i]);
    }

    const auto masked = selective_mask(s, keywords);
    CHECK(no_consecutive_masks(masked));
    CHECK(entity_texts(masked) == expected_entities);

    const auto lin = linearize(masked, entities);
    CHECK(no_consecutive_masks(lin));
    CHECK(entity_texts(lin) == expected_entities);
    CHECK(markers_paired(lin));

    const auto dyn = dynamic_mask(lin, {}, rng);
    CHECK(no_consecutive_masks(dyn));
    CHECK(entity_texts(dyn) == expected_entities);
    CHECK(markers_paired(dyn));
  }
}

TEST_CASE("only-entity template: p = 0 renders markers, entities, masks") {
  const auto s = sent("s", {"a", "E", "b"}, {"O", "B-CW", "O"});
  const auto tokens = render(linearize(selective_mask(s, {}), extract_entities(s)));
  CHECK(tokens == std::vector<std::string>{"<mask>", "CW", "E", "CW", "<mask>"});
}

TEST_CASE("template_to_json: pinned dump shape") {
  const auto s = sent("id9", {"a", "E"}, {"O", "B-CW"});
  const auto tmpl = linearize(selective_mask(s, {}), extract_entities(s));
  const auto json = template_to_json(tmpl);
  CHECK(json.at("source_id") == "id9");
  REQUIRE(json.at("elements").size() == 4);
  CHECK(json["elements"][0] == nlohmann::json{{"kind", "Mask"}});
  CHECK(json["elements"][1] == nlohmann::json{{"kind", "LabelMarker"}, {"text", "CW"}});
  CHECK(json["elements"][2] == nlohmann::json{{"kind", "Kept"}, {"text", "E"}});
}

TEST_CASE("floor_count: binary noise does not change the answer") {
  CHECK(floor_count(0.7 * 10.0) == 7);
  CHECK(floor_count(0.5 * 4.0) == 2);
  CHECK(floor_count(0.0) == 0);
  CHECK(floor_count(-1.0) == 0);
  CHECK(floor_count(2.999999999) == 3);  // within the tolerance by design
}
