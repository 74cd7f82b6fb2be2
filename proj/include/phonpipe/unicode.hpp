#ifndef PHONPIPE_UNICODE_HPP
#define PHONPIPE_UNICODE_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace phonpipe::unicode {

// Decodes UTF-8 into codepoints. Throws Error on malformed sequences,
// reporting the byte offset.
std::vector<char32_t> decode_utf8(std::string_view s);

// Encodes a single codepoint as UTF-8 and appends it to out.
void append_utf8(std::string& out, char32_t cp);

std::string encode_utf8(const std::vector<char32_t>& cps);

// Decodes UTF-16 (explicit endianness) into a UTF-8 string. The input
// excludes the BOM. Length must be even.
std::string utf16_to_utf8(std::string_view bytes, bool big_endian);

// Formats a codepoint as U+XXXX for diagnostics.
std::string codepoint_name(char32_t cp);

}  // namespace phonpipe::unicode

#endif  // PHONPIPE_UNICODE_HPP
