#include "aclm/unicode_punct.hpp"

namespace aclm {

namespace {

// Decodes one UTF-8 code point at position i, advancing i.
// Returns false on malformed input.
bool decode_utf8(std::string_view s, std::size_t& i, char32_t& cp) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  std::size_t len;
  if (b0 < 0x80) {
    cp = b0;
    len = 1;
  } else if ((b0 & 0xe0) == 0xc0) {
    cp = b0 & 0x1f;
    len = 2;
  } else if ((b0 & 0xf0) == 0xe0) {
    cp = b0 & 0x0f;
    len = 3;
  } else if ((b0 & 0xf8) == 0xf0) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    return false;
  }
  if (i + len > s.size()) return false;
  for (std::size_t j = 1; j < len; ++j) {
    const unsigned char b = static_cast<unsigned char>(s[i + j]);
    if ((b & 0xc0) != 0x80) return false;
    cp = (cp << 6) | (b & 0x3f);
  }
  // reject overlong encodings and surrogates
  if (len == 2 && cp < 0x80) return false;
  if (len == 3 && cp < 0x800) return false;
  if (len == 4 && cp < 0x10000) return false;
  if (cp >= 0xd800 && cp <= 0xdfff) return false;
  if (cp > 0x10ffff) return false;
  i += len;
  return true;
}

}  // namespace

bool is_punctuation_token(std::string_view token) {
  if (token.empty()) return false;
  std::size_t i = 0;
  while (i < token.size()) {
    char32_t cp = 0;
    if (!decode_utf8(token, i, cp)) return false;
    if (!is_punct_codepoint(cp)) return false;
  }
  return true;
}

}  // namespace aclm
