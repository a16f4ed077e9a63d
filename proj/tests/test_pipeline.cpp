#include <doctest.h>

#include <map>
#include <set>

#include "aclm/errors.hpp"
#include "aclm/pipeline.hpp"
#include "test_support.hpp"

using namespace aclm;
using testing::sent;

namespace {

// Shared setup: fixture corpus + in-memory attention + embeddings.
struct Fixture {
  std::vector<TaggedSentence> corpus;
  InMemoryAttentionProvider attention;
  EmbeddingIndex embeddings;

  explicit Fixture(std::size_t n, std::uint64_t seed = 21) : corpus(testing::fixture_corpus(n)) {
    for (auto& map : testing::attention_for_corpus(corpus, seed)) attention.add(std::move(map));
    Rng rng(seed);
    for (const auto& s : corpus) {
      std::vector<double> v(8);
      for (double& x : v) x = rng.unit() + 0.01;
      embeddings.add(s.id, v);
    }
  }
};

LookupDenoiser trained_lookup(const std::vector<TaggedSentence>& corpus,
                              const PipelineConfig& config, AttentionProvider* attention) {
  const auto build =
      build_training_pairs(corpus, config.strategy, config.p, config.attention_layers,
                           config.mask, attention, {}, config.vocab,
                           derive_seed(config.seed, "train", 0));
  LookupDenoiser denoiser;
  denoiser.fine_tune(build.pairs, config.fine_tune);
  return denoiser;
}

// Strategy none, mixing off, K = 0: generation templates equal the training
// inputs, so the lookup backend replays every source sentence verbatim.
PipelineConfig copy_oracle_config() {
  PipelineConfig config;
  config.strategy = KeywordStrategy::none;
  config.mix.beta = 1.0;
  config.workers = 1;
  return config;
}

}  // namespace

TEST_CASE("run_generation: one plain round") {
  Fixture fx(6);
  PipelineConfig config = copy_oracle_config();
  config.rounds = 1;
  const auto denoiser = trained_lookup(fx.corpus, config, nullptr);
  const auto records = run_generation(fx.corpus, denoiser, nullptr, &fx.embeddings, config);
  REQUIRE(records.size() == 6);
  for (const auto& record : records) {
    CHECK(record.round == 1);
    CHECK_FALSE(record.used_mixner);
    CHECK(record.partner_id.empty());
    CHECK(record.disposition == Disposition::kept);
  }
}

TEST_CASE("run_generation: forced gate mixes every record with a distinct partner") {
  Fixture fx(6);
  PipelineConfig config;
  config.strategy = KeywordStrategy::none;
  config.mix.mu = 1.0;
  config.mix.sigma = 0.0;
  config.mix.beta = 0.0;
  config.rounds = 2;
  config.workers = 2;
  const auto denoiser = trained_lookup(fx.corpus, config, nullptr);
  const auto records = run_generation(fx.corpus, denoiser, nullptr, &fx.embeddings, config);
  REQUIRE(records.size() == 12);
  for (const auto& record : records) {
    CHECK(record.used_mixner);
    CHECK(record.partner_id != record.source_id);
    CHECK_FALSE(record.partner_id.empty());
  }
}

TEST_CASE("run_generation: record order is (sentence, round) regardless of workers") {
  Fixture fx(5);
  PipelineConfig config = copy_oracle_config();
  config.rounds = 3;
  config.workers = 4;
  const auto denoiser = trained_lookup(fx.corpus, config, nullptr);
  const auto records = run_generation(fx.corpus, denoiser, nullptr, nullptr, config);
  REQUIRE(records.size() == 15);
  std::size_t slot = 0;
  for (const auto& s : fx.corpus) {
    for (std::size_t r = 1; r <= 3; ++r, ++slot) {
      CHECK(records[slot].source_id == s.id);
      CHECK(records[slot].round == r);
    }
  }
}

TEST_CASE("run_generation: entity-free sentences produce no records") {
  std::vector<TaggedSentence> corpus = testing::fixture_corpus(3);
  corpus.push_back(sent("plain", {"nothing", "here"}, {"O", "O"}));
  PipelineConfig config = copy_oracle_config();
  const auto denoiser = trained_lookup(corpus, config, nullptr);
  const auto records = run_generation(corpus, denoiser, nullptr, nullptr, config);
  CHECK(records.size() == 3 * config.rounds);
}

TEST_CASE("run_generation: missing providers fail before generating") {
  Fixture fx(4);
  PipelineConfig config;
  config.strategy = KeywordStrategy::attention;
  config.workers = 1;
  const auto denoiser = trained_lookup(fx.corpus, config, &fx.attention);
  CHECK_THROWS_AS(run_generation(fx.corpus, denoiser, nullptr, nullptr, config), DataError);

  InMemoryAttentionProvider partial;
  CHECK_THROWS_AS(run_generation(fx.corpus, denoiser, &partial, nullptr, config), DataError);

  EmbeddingIndex gappy;
  gappy.add(fx.corpus[0].id, {1.0, 0.5});
  gappy.add("unrelated", {0.5, 1.0});
  CHECK_THROWS_AS(run_generation(fx.corpus, denoiser, &fx.attention, &gappy, config), DataError);
}

namespace {

// Denoiser that fails on demand and otherwise emits a fixed token stream.
struct ScriptedDenoiser : Denoiser {
  std::vector<std::string> tokens;
  bool fail = false;

  void fine_tune(const std::vector<TrainingPair>&, const FineTuneOptions&) override {}
  std::vector<std::string> generate(const GenerationRequest&) const override {
    if (fail) throw BackendError("scripted failure");
    return tokens;
  }
};

}  // namespace

TEST_CASE("run_generation: backend errors become failed records, run continues") {
  Fixture fx(3);
  PipelineConfig config = copy_oracle_config();
  config.rounds = 1;
  ScriptedDenoiser denoiser;
  denoiser.fail = true;
  const auto records = run_generation(fx.corpus, denoiser, nullptr, nullptr, config);
  REQUIRE(records.size() == 3);
  for (const auto& record : records) {
    CHECK(record.disposition == Disposition::failed);
    CHECK(std::get<Malformed>(record.parsed).reason == "scripted failure");
  }
}

TEST_CASE("run_generation: unparseable output becomes a malformed record") {
  Fixture fx(2);
  PipelineConfig config = copy_oracle_config();
  config.rounds = 1;
  ScriptedDenoiser denoiser;
  denoiser.tokens = {"PER", "dangling"};
  const auto records = run_generation(fx.corpus, denoiser, nullptr, nullptr, config);
  for (const auto& record : records) CHECK(record.disposition == Disposition::malformed);
}

TEST_CASE("post_process: copy oracle removes every duplicate") {
  Fixture fx(8);
  PipelineConfig config = copy_oracle_config();
  const auto denoiser = trained_lookup(fx.corpus, config, nullptr);
  auto records = run_generation(fx.corpus, denoiser, nullptr, nullptr, config);
  const auto result = post_process(records, fx.corpus);
  CHECK(result.kept == 0);
  CHECK(result.duplicates == records.size());
  CHECK(result.corpus.size() == fx.corpus.size());
  for (const auto& record : records) CHECK(record.disposition == Disposition::duplicate);
}

TEST_CASE("post_process: distinct generations survive with recovered tags") {
  const std::vector<TaggedSentence> gold = {sent("g0", {"x", "E"}, {"O", "B-CW"})};
  std::vector<AugmentationRecord> records(1);
  records[0].source_id = "g0";
  records[0].round = 1;
  records[0].raw_tokens = {"CW", "brand", "new", "CW", "thing"};
  records[0].parsed = sent("", {"brand", "new", "thing"}, {"B-CW", "I-CW", "O"});
  records[0].disposition = Disposition::kept;

  const auto result = post_process(records, gold);
  CHECK(result.kept == 1);
  REQUIRE(result.corpus.size() == 2);
  CHECK(result.corpus[1].tags == std::vector<std::string>{"B-CW", "I-CW", "O"});
  CHECK(result.corpus[1].id == "g0#r1");
  CHECK(result.provenance[1] == "# source = g0 round = 1 mixner = false");
}

TEST_CASE("post_process: case-folded equality and mixed-parent duplicates") {
  const std::vector<TaggedSentence> gold = {
      sent("a", {"John", "Went"}, {"B-PER", "O"}),
      sent("b", {"paris", "fell"}, {"B-LOC", "O"}),
  };
  std::vector<AugmentationRecord> records(3);
  // case-only difference from source -> duplicate
  records[0].source_id = "a";
  records[0].round = 1;
  records[0].parsed = sent("", {"john", "went"}, {"B-PER", "O"});
  records[0].disposition = Disposition::kept;
  // equals the partner, not the source -> duplicate for mixed records
  records[1].source_id = "a";
  records[1].round = 2;
  records[1].used_mixner = true;
  records[1].partner_id = "b";
  records[1].parsed = sent("", {"PARIS", "FELL"}, {"B-LOC", "O"});
  records[1].disposition = Disposition::kept;
  // malformed stays excluded and counted
  records[2].source_id = "b";
  records[2].round = 1;
  records[2].parsed = Malformed{"bad", 0};
  records[2].disposition = Disposition::malformed;

  const auto result = post_process(records, gold);
  CHECK(result.kept == 0);
  CHECK(result.duplicates == 2);
  CHECK(result.malformed == 1);
  CHECK(result.corpus.size() == gold.size());
}

TEST_CASE("pipeline: determinism and the record bound") {
  Fixture fx(10);
  PipelineConfig config;
  config.strategy = KeywordStrategy::attention;
  config.rounds = 3;
  config.workers = 3;
  const auto denoiser = trained_lookup(fx.corpus, config, &fx.attention);

  auto first = run_generation(fx.corpus, denoiser, &fx.attention, &fx.embeddings, config);
  auto second = run_generation(fx.corpus, denoiser, &fx.attention, &fx.embeddings, config);
  REQUIRE(first.size() == second.size());
  CHECK(first.size() <= fx.corpus.size() * config.rounds);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].raw_tokens == second[i].raw_tokens);
    CHECK(first[i].used_mixner == second[i].used_mixner);
    CHECK(first[i].partner_id == second[i].partner_id);
    CHECK(record_to_json(first[i]) == record_to_json(second[i]));
  }
}

namespace {

// Honors the generate() echo contract: non-mask tokens come back as a
// subsequence, each mask expands to fresh filler words.
struct EchoDenoiser : Denoiser {
  void fine_tune(const std::vector<TrainingPair>&, const FineTuneOptions&) override {}
  std::vector<std::string> generate(const GenerationRequest& request) const override {
    std::vector<std::string> out;
    std::size_t fills = 0;
    for (const auto& token : request.template_tokens) {
      if (token == "<mask>") {
        out.push_back("fill" + std::to_string(request.seed % 97) + "x" + std::to_string(fills++));
      } else {
        out.push_back(token);
      }
    }
    return out;
  }
};

}  // namespace

TEST_CASE("pipeline: conservation of entity labels") {
  Fixture fx(12);
  PipelineConfig config;
  config.strategy = KeywordStrategy::random;
  config.rounds = 4;
  config.workers = 2;
  config.mix.mu = 0.7;  // mix often
  EchoDenoiser denoiser;
  auto records = run_generation(fx.corpus, denoiser, nullptr, &fx.embeddings, config);

  std::map<std::string, const TaggedSentence*> by_id;
  for (const auto& s : fx.corpus) by_id[s.id] = &s;

  for (const auto& record : records) {
    if (record.disposition != Disposition::kept) continue;
    std::multiset<std::string> parents;
    for (const auto& span : extract_entities(*by_id.at(record.source_id))) {
      parents.insert(span.label);
    }
    if (record.used_mixner) {
      for (const auto& span : extract_entities(*by_id.at(record.partner_id))) {
        parents.insert(span.label);
      }
    }
    std::multiset<std::string> produced;
    for (const auto& span : extract_entities(std::get<TaggedSentence>(record.parsed))) {
      produced.insert(span.label);
    }
    for (const auto& label : produced) {
      REQUIRE(parents.count(label) >= produced.count(label));
    }
  }
}

TEST_CASE("pipeline: strategy none matches p = 0 only-entity condition") {
  Fixture fx(5);
  PipelineConfig none = copy_oracle_config();
  PipelineConfig zero_p = copy_oracle_config();
  zero_p.strategy = KeywordStrategy::attention;
  zero_p.p = 0.0;
  const auto d1 = trained_lookup(fx.corpus, none, nullptr);
  const auto d2 = trained_lookup(fx.corpus, zero_p, &fx.attention);
  const auto r1 = run_generation(fx.corpus, d1, nullptr, nullptr, none);
  const auto r2 = run_generation(fx.corpus, d2, &fx.attention, nullptr, zero_p);
  REQUIRE(r1.size() == r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(render(r1[i].tmpl, none.vocab) == render(r2[i].tmpl, zero_p.vocab));
  }
}

TEST_CASE("baseline_lwtr: singleton inventories reproduce the corpus") {
  // every (token, tag) combination is unique per tag -> self-replacement only
  const std::vector<TaggedSentence> corpus = {
      sent("0", {"alpha", "beta"}, {"O", "B-PER"}),
  };
  const auto augmented = baseline_lwtr(corpus, 1, 5, 0.5);
  REQUIRE(augmented.size() == 1);
  CHECK(augmented[0].tokens == corpus[0].tokens);
  CHECK(augmented[0].tags == corpus[0].tags);
}

TEST_CASE("baseline_lwtr: tags and lengths unchanged, labels match the inventory") {
  Rng rng(9);
  const auto corpus = testing::random_corpus(rng, 12);
  std::map<std::string, std::set<std::string>> inventory;
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) inventory[s.tags[i]].insert(s.tokens[i]);
  }
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto augmented = baseline_lwtr(corpus, 2, seed, 0.5);
    REQUIRE(augmented.size() == corpus.size() * 2);
    for (std::size_t i = 0; i < augmented.size(); ++i) {
      const auto& original = corpus[i % corpus.size()];
      CHECK(augmented[i].tags == original.tags);
      CHECK(augmented[i].tokens.size() == original.tokens.size());
      for (std::size_t t = 0; t < augmented[i].tokens.size(); ++t) {
        CHECK(inventory.at(augmented[i].tags[t]).count(augmented[i].tokens[t]) == 1);
      }
    }
  }
  CHECK_THROWS_AS(baseline_lwtr({}, 1, 0, 0.5), ArgumentError);
}

TEST_CASE("serialize_augmented_corpus: provenance comments precede augmentations") {
  const std::vector<TaggedSentence> gold = {sent("g", {"x", "E"}, {"O", "B-CW"})};
  std::vector<AugmentationRecord> records(1);
  records[0].source_id = "g";
  records[0].round = 2;
  records[0].used_mixner = true;
  records[0].partner_id = "g2";
  records[0].parsed = sent("", {"fresh", "E"}, {"O", "B-CW"});
  records[0].disposition = Disposition::kept;
  const auto result = post_process(records, gold);
  const auto text = serialize_augmented_corpus(result);
  CHECK(text ==
        "x\tO\nE\tB-CW\n\n"
        "# source = g round = 2 mixner = true\n"
        "fresh\tO\nE\tB-CW\n\n");
  // round-trips through the parser (comments ignored)
  const auto reparsed = parse_conll(text);
  CHECK(reparsed.size() == 2);
}
