#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aclm/attention.hpp"

namespace aclm {

// Attention-map file: one record per sentence, concatenated.
// Record layout, all integers little-endian:
//   u32 id_length | id bytes (UTF-8) | u32 n_layers | u32 n_heads | u32 T |
//   f32[n_layers][n_heads][T][T] row-major
// A JSON manifest beside the data file maps sentence id -> record byte offset.

std::string encode_attention_record(const AttentionMap& map);
AttentionMap decode_attention_record(std::string_view bytes);

/// Writes <path> plus <path>.manifest.json.
void write_attention_file(const std::filesystem::path& path,
                          const std::vector<AttentionMap>& maps);

class AttentionProvider {
 public:
  virtual ~AttentionProvider() = default;
  /// nullopt when the provider has no map for the id.
  virtual std::optional<AttentionMap> fetch(const std::string& sentence_id) = 0;
};

class FileAttentionProvider : public AttentionProvider {
 public:
  /// data_path as written by write_attention_file; manifest expected at
  /// data_path + ".manifest.json".
  explicit FileAttentionProvider(const std::filesystem::path& data_path);
  std::optional<AttentionMap> fetch(const std::string& sentence_id) override;

 private:
  std::filesystem::path data_path_;
  std::map<std::string, std::uint64_t> offsets_;
};

class InMemoryAttentionProvider : public AttentionProvider {
 public:
  void add(AttentionMap map);
  std::optional<AttentionMap> fetch(const std::string& sentence_id) override;

 private:
  std::map<std::string, AttentionMap> maps_;
};

/// GET <base>/attention/<id> -> {"payload": "<base64 record>"}; 404 -> nullopt.
class HttpAttentionProvider : public AttentionProvider {
 public:
  HttpAttentionProvider(const std::string& host, int port, double timeout_seconds = 10.0);
  ~HttpAttentionProvider() override;
  std::optional<AttentionMap> fetch(const std::string& sentence_id) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aclm
