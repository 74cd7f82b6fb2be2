#ifndef PHONPIPE_CSV_HPP
#define PHONPIPE_CSV_HPP

#include <string>
#include <string_view>
#include <vector>

namespace phonpipe::csv {

// RFC-4180 quoting: fields containing comma, quote, or newline are quoted,
// with embedded quotes doubled.
std::string escape(std::string_view field);

std::string join_row(const std::vector<std::string>& fields);

// Parses RFC-4180 CSV text (handles quoted fields and embedded newlines).
std::vector<std::vector<std::string>> parse(std::string_view text);

}  // namespace phonpipe::csv

#endif  // PHONPIPE_CSV_HPP
