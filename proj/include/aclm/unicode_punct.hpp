#pragma once

#include <string_view>

namespace aclm {

/// True iff the code point has Unicode general category P*.
bool is_punct_codepoint(char32_t cp);

/// True iff the token is nonempty, valid UTF-8, and every code point is punctuation.
bool is_punctuation_token(std::string_view token);

}  // namespace aclm
