#ifndef PHONPIPE_IPA_TOK_HPP
#define PHONPIPE_IPA_TOK_HPP

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace phonpipe {

// One IPA phoneme (base letter plus attached marks) or a single-space
// word separator.
struct PhonemeToken {
  std::string text;
  bool is_space() const { return text == " "; }
};

bool operator==(const PhonemeToken& a, const PhonemeToken& b);

// Splits an IPA string into phoneme tokens. A token starts at an IPA base
// letter; combining diacritics, modifier letters (length, aspiration,
// palatalization, ...) and a tie bar plus its following base attach to the
// current token. Stress marks attach to the following phoneme. Each space
// character becomes one space token. Concatenating the returned token texts
// reproduces the input exactly. Throws TokenError for codepoints that are
// neither IPA nor space, naming the codepoint and its offset.
std::vector<PhonemeToken> tokenize(std::string_view ipa);

// True for phonemes whose base letter is an IPA vowel.
bool is_vowel_token(std::string_view token_text);

using TokenId = uint16_t;

// Dense, 0-based token-text <-> id bijection. Ids are assigned in
// lexicographic codepoint order so rebuilding from the same corpus is
// reproducible.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<PhonemeToken>& corpus);

  // One token per line, line number = id, UTF-8.
  static Vocabulary load_file(const std::string& path);
  void save_file(const std::string& path) const;

  static Vocabulary from_tokens(std::vector<std::string> tokens_in_id_order);

  size_t size() const { return tokens_.size(); }
  bool contains(std::string_view text) const;
  TokenId id_of(std::string_view text) const;  // throws VocabError if absent
  const std::string& token_of(TokenId id) const;  // throws VocabError if OOR
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const std::vector<PhonemeToken>& toks) const;
  std::string decode(const std::vector<TokenId>& ids) const;

  // FNV-1a 64 over the serialized token list; binds checkpoints to the
  // vocabulary they were trained with.
  uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> ids_;
};

}  // namespace phonpipe

#endif  // PHONPIPE_IPA_TOK_HPP
