#ifndef PHONPIPE_ERROR_HPP
#define PHONPIPE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace phonpipe {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; carries the 1-based line where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, long line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// Tokenizer rejection; carries the codepoint offset into the input string.
class TokenError : public Error {
 public:
  TokenError(const std::string& msg, long offset)
      : Error(msg + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  long offset() const { return offset_; }

 private:
  long offset_;
};

class VocabError : public Error {
 public:
  using Error::Error;
};

class WavError : public Error {
 public:
  using Error::Error;
};

class DspError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class MergeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace phonpipe

#endif  // PHONPIPE_ERROR_HPP
