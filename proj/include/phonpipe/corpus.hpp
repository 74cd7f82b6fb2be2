#ifndef PHONPIPE_CORPUS_HPP
#define PHONPIPE_CORPUS_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phonpipe/ipa_tok.hpp"

namespace phonpipe {

// Grapheme-to-phoneme conversion. The real backend is an external process;
// the table backend exists for hermetic tests.
class G2PBackend {
 public:
  virtual ~G2PBackend() = default;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  // Text in, IPA out. Throws BackendError on failure.
  virtual std::string phonemize(const std::string& text) = 0;
};

// Longest-match table lookup; spaces pass through. Characters absent from
// the table are dropped (mirrors backends that silently skip unknowns).
class TableG2P : public G2PBackend {
 public:
  explicit TableG2P(std::map<std::string, std::string> table,
                    std::string name = "table");
  std::string name() const override { return name_; }
  std::string version() const override { return "builtin"; }
  std::string phonemize(const std::string& text) override;

 private:
  std::map<std::string, std::string> table_;
  std::string name_;
  size_t max_key_len_;
};

// Runs `command` with the text on stdin and reads IPA from stdout. A
// nonzero exit status raises BackendError carrying the diagnostic output.
class ProcessG2P : public G2PBackend {
 public:
  ProcessG2P(std::string command, std::string name, std::string version);
  std::string name() const override { return name_; }
  std::string version() const override { return version_; }
  std::string phonemize(const std::string& text) override;

 private:
  std::string command_;
  std::string name_;
  std::string version_;
};

// Removes everything but letters, digits, whitespace and sentence
// punctuation (emoji and symbol blocks go away), collapses whitespace runs
// to single spaces, and trims. Total and idempotent.
std::string clean_text(std::string_view raw);

struct PhonemizeResult {
  std::string ipa;
  std::string backend_name;
  std::string backend_version;
};

PhonemizeResult phonemize(const std::string& cleaned_text, G2PBackend& backend);

struct DatasetSplit {
  std::vector<TokenId> train;
  std::vector<TokenId> dev;
  double ratio = 0.0;
};

// Cuts the sequence at the token boundary nearest the ratio; dev is the
// contiguous tail. Deterministic; the seed is recorded in provenance.
// Throws Error when either side would be empty.
DatasetSplit split_corpus(std::span<const TokenId> ids, double ratio,
                          uint64_t seed);

// Flat binary files of little-endian 16-bit token ids.
void write_dataset(const std::vector<TokenId>& ids, const std::string& path);
std::vector<TokenId> read_dataset(const std::string& path);

struct Provenance {
  std::string backend_name;
  std::string backend_version;
  uint64_t seed = 0;
  double ratio = 0.0;
  size_t n_documents = 0;
  size_t n_tokens = 0;
  size_t vocab_size = 0;
};

void write_provenance(const Provenance& p, const std::string& path);
Provenance read_provenance(const std::string& path);

}  // namespace phonpipe

#endif  // PHONPIPE_CORPUS_HPP
