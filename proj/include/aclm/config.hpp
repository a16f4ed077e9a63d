#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aclm/denoiser.hpp"
#include "aclm/mixner.hpp"
#include "aclm/templating.hpp"

namespace aclm {

struct GenerationDefaults {
  int top_k = 50;
  int num_beams = 4;
  double max_length_factor = 2.5;  // times the template length
};

// Every tunable of the pipeline. Defaults follow the source method's
// grid-searched values; anything it leaves open is explicit here.
struct PipelineConfig {
  double p = 0.3;                     // keyword selection rate
  std::size_t attention_layers = 4;   // aggregate over the last a layers
  DynamicMaskPolicy mask;             // mu = 0.5, sigma = 1/K
  std::size_t rounds = 5;             // R
  MixPolicy mix;                      // top_k 5, mu 0.5, sigma 0.2, beta 0.7
  KeywordStrategy strategy = KeywordStrategy::attention;
  GenerationDefaults generation;
  FineTuneOptions fine_tune;
  double lwtr_replace_prob = 0.5;
  MarkerVocab vocab;
  std::uint64_t seed = 20230613;
  std::vector<std::size_t> split_sizes = {100, 200, 500, 1000};
  std::size_t workers = 0;            // 0 = hardware concurrency
  std::string stopwords_path;         // optional plain-text list

  void validate() const;  // throws ArgumentError
};

std::string to_string(KeywordStrategy strategy);
KeywordStrategy keyword_strategy_from_string(const std::string& name);

nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& json);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace aclm
