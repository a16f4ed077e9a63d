#include "aclm/attention_io.hpp"

#include <cstring>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "aclm/errors.hpp"
#include "aclm/util.hpp"

namespace aclm {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

std::uint32_t get_u32(std::string_view bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw ValidationError("attention record truncated");
  std::uint32_t v = 0;
  for (int shift = 0; shift < 32; shift += 8) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << shift;
  }
  return v;
}

}  // namespace

std::string encode_attention_record(const AttentionMap& map) {
  validate_attention(map);
  std::string out;
  out.reserve(16 + map.sentence_id.size() + map.scores.size() * 4);
  put_u32(out, static_cast<std::uint32_t>(map.sentence_id.size()));
  out += map.sentence_id;
  put_u32(out, map.n_layers);
  put_u32(out, map.n_heads);
  put_u32(out, map.tokens);
  for (float s : map.scores) {
    std::uint32_t bits;
    std::memcpy(&bits, &s, 4);
    put_u32(out, bits);
  }
  return out;
}

AttentionMap decode_attention_record(std::string_view bytes) {
  std::size_t pos = 0;
  const std::uint32_t id_len = get_u32(bytes, pos);
  if (pos + id_len > bytes.size()) throw ValidationError("attention record truncated");
  AttentionMap map;
  map.sentence_id.assign(bytes.substr(pos, id_len));
  pos += id_len;
  map.n_layers = get_u32(bytes, pos);
  map.n_heads = get_u32(bytes, pos);
  map.tokens = get_u32(bytes, pos);
  const std::size_t count =
      static_cast<std::size_t>(map.n_layers) * map.n_heads * map.tokens * map.tokens;
  map.scores.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(bytes, pos);
    std::memcpy(&map.scores[i], &bits, 4);
  }
  validate_attention(map);
  return map;
}

void write_attention_file(const std::filesystem::path& path,
                          const std::vector<AttentionMap>& maps) {
  std::string data;
  nlohmann::json manifest = nlohmann::json::object();
  for (const AttentionMap& map : maps) {
    manifest[map.sentence_id] = data.size();
    data += encode_attention_record(map);
  }
  write_file(path, data);
  write_file(path.string() + ".manifest.json", manifest.dump(2) + "\n");
}

FileAttentionProvider::FileAttentionProvider(const std::filesystem::path& data_path)
    : data_path_(data_path) {
  const auto manifest = nlohmann::json::parse(read_file(data_path.string() + ".manifest.json"));
  for (auto it = manifest.begin(); it != manifest.end(); ++it) {
    offsets_[it.key()] = it.value().get<std::uint64_t>();
  }
}

std::optional<AttentionMap> FileAttentionProvider::fetch(const std::string& sentence_id) {
  auto it = offsets_.find(sentence_id);
  if (it == offsets_.end()) return std::nullopt;
  std::ifstream in(data_path_, std::ios::binary);
  if (!in) throw DataError("cannot open attention file: " + data_path_.string());
  in.seekg(static_cast<std::streamoff>(it->second));

  // header first, then the exact payload size
  std::string header(4, '\0');
  in.read(header.data(), 4);
  std::size_t pos = 0;
  const std::uint32_t id_len = get_u32(header, pos);
  std::string rest(id_len + 12, '\0');
  in.read(rest.data(), static_cast<std::streamsize>(rest.size()));
  if (!in) throw ValidationError("attention record truncated: " + sentence_id);
  pos = id_len;
  const std::uint32_t n_layers = get_u32(rest, pos);
  const std::uint32_t n_heads = get_u32(rest, pos);
  const std::uint32_t tokens = get_u32(rest, pos);
  const std::size_t payload = static_cast<std::size_t>(n_layers) * n_heads * tokens * tokens * 4;
  std::string record = header + rest;
  record.resize(record.size() + payload);
  in.read(record.data() + 16 + id_len, static_cast<std::streamsize>(payload));
  if (!in) throw ValidationError("attention record truncated: " + sentence_id);
  return decode_attention_record(record);
}

void InMemoryAttentionProvider::add(AttentionMap map) {
  validate_attention(map);
  maps_[map.sentence_id] = std::move(map);
}

std::optional<AttentionMap> InMemoryAttentionProvider::fetch(const std::string& sentence_id) {
  auto it = maps_.find(sentence_id);
  if (it == maps_.end()) return std::nullopt;
  return it->second;
}

struct HttpAttentionProvider::Impl {
  httplib::Client client;
  Impl(const std::string& host, int port, double timeout_seconds) : client(host, port) {
    const auto seconds = static_cast<time_t>(timeout_seconds);
    const auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, usec);
    client.set_read_timeout(seconds, usec);
  }
};

HttpAttentionProvider::HttpAttentionProvider(const std::string& host, int port,
                                             double timeout_seconds)
    : impl_(std::make_unique<Impl>(host, port, timeout_seconds)) {}

HttpAttentionProvider::~HttpAttentionProvider() = default;

std::optional<AttentionMap> HttpAttentionProvider::fetch(const std::string& sentence_id) {
  auto res = impl_->client.Get("/attention/" + sentence_id);
  if (!res) throw BackendError("attention provider unreachable");
  if (res->status == 404) return std::nullopt;
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("attention provider returned " + std::to_string(res->status) + ": " +
                       res->body);
  }
  const auto body = nlohmann::json::parse(res->body);
  return decode_attention_record(base64_decode(body.at("payload").get<std::string>()));
}

}  // namespace aclm
