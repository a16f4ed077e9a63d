#include "aclm/config.hpp"

#include "aclm/errors.hpp"
#include "aclm/util.hpp"

namespace aclm {

void PipelineConfig::validate() const {
  if (p < 0.0 || p > 1.0) throw ArgumentError("p outside [0,1]");
  if (mask.mu < 0.0 || mask.mu > 1.0) throw ArgumentError("mask.mu outside [0,1]");
  if (rounds < 1) throw ArgumentError("rounds must be >= 1");
  if (mix.top_k < 1) throw ArgumentError("mix.top_k must be >= 1");
  if (mix.beta < 0.0 || mix.beta > 1.0) throw ArgumentError("mix.beta outside [0,1]");
  if (mix.sigma < 0.0) throw ArgumentError("mix.sigma must be >= 0");
  if (generation.top_k < 1) throw ArgumentError("generation.top_k must be >= 1");
  if (generation.num_beams < 1) throw ArgumentError("generation.num_beams must be >= 1");
  if (generation.max_length_factor <= 0.0) throw ArgumentError("max_length_factor must be > 0");
  if (lwtr_replace_prob < 0.0 || lwtr_replace_prob > 1.0) {
    throw ArgumentError("lwtr_replace_prob outside [0,1]");
  }
  if (attention_layers < 1) throw ArgumentError("attention_layers must be >= 1");
}

std::string to_string(KeywordStrategy strategy) {
  switch (strategy) {
    case KeywordStrategy::attention: return "attention";
    case KeywordStrategy::random: return "random";
    case KeywordStrategy::none: return "none";
  }
  throw ArgumentError("unknown keyword strategy");
}

KeywordStrategy keyword_strategy_from_string(const std::string& name) {
  if (name == "attention") return KeywordStrategy::attention;
  if (name == "random") return KeywordStrategy::random;
  if (name == "none") return KeywordStrategy::none;
  throw ArgumentError("unknown keyword strategy \"" + name + "\"");
}

nlohmann::json config_to_json(const PipelineConfig& config) {
  return {
      {"p", config.p},
      {"attention_layers", config.attention_layers},
      {"dynamic_mask", {{"mu", config.mask.mu}, {"sigma_rule", DynamicMaskPolicy::kSigmaRule}}},
      {"rounds", config.rounds},
      {"mix",
       {{"top_k", config.mix.top_k},
        {"mu", config.mix.mu},
        {"sigma", config.mix.sigma},
        {"beta", config.mix.beta}}},
      {"keyword_strategy", to_string(config.strategy)},
      {"generation",
       {{"top_k", config.generation.top_k},
        {"num_beams", config.generation.num_beams},
        {"max_length_factor", config.generation.max_length_factor}}},
      {"fine_tune",
       {{"epochs", config.fine_tune.epochs},
        {"learning_rate", config.fine_tune.learning_rate},
        {"batch_size", config.fine_tune.batch_size}}},
      {"lwtr_replace_prob", config.lwtr_replace_prob},
      {"vocab",
       {{"mask_literal", config.vocab.mask_literal},
        {"marker_style", config.vocab.style == MarkerVocab::Style::bare ? "bare" : "tagged"}}},
      {"seed", config.seed},
      {"split_sizes", config.split_sizes},
      {"workers", config.workers},
      {"stopwords", config.stopwords_path},
  };
}

PipelineConfig config_from_json(const nlohmann::json& json) {
  PipelineConfig config;
  auto read = [&json](const char* key, auto& out) {
    if (json.contains(key)) json.at(key).get_to(out);
  };
  read("p", config.p);
  read("attention_layers", config.attention_layers);
  if (json.contains("dynamic_mask")) {
    const auto& mask = json.at("dynamic_mask");
    if (mask.contains("mu")) mask.at("mu").get_to(config.mask.mu);
    if (mask.contains("sigma_rule") &&
        mask.at("sigma_rule").get<std::string>() != DynamicMaskPolicy::kSigmaRule) {
      throw ArgumentError("unsupported dynamic_mask.sigma_rule");
    }
  }
  read("rounds", config.rounds);
  if (json.contains("mix")) {
    const auto& mix = json.at("mix");
    if (mix.contains("top_k")) mix.at("top_k").get_to(config.mix.top_k);
    if (mix.contains("mu")) mix.at("mu").get_to(config.mix.mu);
    if (mix.contains("sigma")) mix.at("sigma").get_to(config.mix.sigma);
    if (mix.contains("beta")) mix.at("beta").get_to(config.mix.beta);
  }
  if (json.contains("keyword_strategy")) {
    config.strategy = keyword_strategy_from_string(json.at("keyword_strategy").get<std::string>());
  }
  if (json.contains("generation")) {
    const auto& gen = json.at("generation");
    if (gen.contains("top_k")) gen.at("top_k").get_to(config.generation.top_k);
    if (gen.contains("num_beams")) gen.at("num_beams").get_to(config.generation.num_beams);
    if (gen.contains("max_length_factor")) {
      gen.at("max_length_factor").get_to(config.generation.max_length_factor);
    }
  }
  if (json.contains("fine_tune")) {
    const auto& ft = json.at("fine_tune");
    if (ft.contains("epochs")) ft.at("epochs").get_to(config.fine_tune.epochs);
    if (ft.contains("learning_rate")) ft.at("learning_rate").get_to(config.fine_tune.learning_rate);
    if (ft.contains("batch_size")) ft.at("batch_size").get_to(config.fine_tune.batch_size);
  }
  read("lwtr_replace_prob", config.lwtr_replace_prob);
  if (json.contains("vocab")) {
    const auto& vocab = json.at("vocab");
    if (vocab.contains("mask_literal")) vocab.at("mask_literal").get_to(config.vocab.mask_literal);
    if (vocab.contains("marker_style")) {
      const auto style = vocab.at("marker_style").get<std::string>();
      if (style == "bare") {
        config.vocab.style = MarkerVocab::Style::bare;
      } else if (style == "tagged") {
        config.vocab.style = MarkerVocab::Style::tagged;
      } else {
        throw ArgumentError("unknown marker_style \"" + style + "\"");
      }
    }
  }
  read("seed", config.seed);
  read("split_sizes", config.split_sizes);
  read("workers", config.workers);
  read("stopwords", config.stopwords_path);
  config.validate();
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return config_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace aclm
