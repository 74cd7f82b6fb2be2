#include "phonpipe/ipa_tok.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "phonpipe/error.hpp"
#include "phonpipe/unicode.hpp"

namespace phonpipe {

namespace {

bool is_stress(char32_t cp) { return cp == 0x02C8 || cp == 0x02CC; }

bool is_tie(char32_t cp) { return cp == 0x0361 || cp == 0x035C; }

// IPA base letters: ASCII lowercase, the Latin-supplement and Latin-extended
// letters used by the IPA, the IPA Extensions block, clicks, and the Greek
// letters the IPA borrows.
bool is_base(char32_t cp) {
  if (cp >= 'a' && cp <= 'z') return true;
  if (cp >= 0x0250 && cp <= 0x02AF) return true;  // IPA Extensions
  switch (cp) {
    case 0x00E6:  // ae ligature
    case 0x00E7:  // c cedilla
    case 0x00F0:  // eth
    case 0x00F8:  // slashed o
    case 0x0127:  // h bar
    case 0x014B:  // eng
    case 0x0153:  // oe ligature
    case 0x01C0:  // clicks
    case 0x01C1:
    case 0x01C2:
    case 0x01C3:
    case 0x03B2:  // beta
    case 0x03B8:  // theta
    case 0x03C7:  // chi
      return true;
    default:
      return false;
  }
}

bool is_combining(char32_t cp) {
  return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0x1DC0 && cp <= 0x1DFF);
}

// Spacing modifier letters that attach to the phoneme they follow
// (aspiration, palatalization, length marks, rhotic hook, ...). Stress
// marks are handled separately.
bool is_modifier(char32_t cp) {
  return cp >= 0x02B0 && cp <= 0x02FF && !is_stress(cp);
}

bool is_vowel_base(char32_t cp) {
  switch (cp) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
    case 'y':
    case 0x00E6:  // ae
    case 0x00F8:  // slashed o
    case 0x0153:  // oe
    case 0x0250:  // turned a
    case 0x0251:  // script a
    case 0x0252:  // turned script a
    case 0x0254:  // open o
    case 0x0258:  // reversed e
    case 0x0259:  // schwa
    case 0x025A:  // schwa with hook
    case 0x025B:  // open e
    case 0x025C:  // reversed open e
    case 0x025D:  // reversed open e with hook
    case 0x025E:  // closed reversed open e
    case 0x0264:  // rams horn
    case 0x0268:  // barred i
    case 0x026A:  // small capital i
    case 0x026F:  // turned m
    case 0x0275:  // barred o
    case 0x0276:  // small capital oe
    case 0x0289:  // barred u
    case 0x028A:  // upsilon
    case 0x028C:  // turned v
    case 0x028F:  // small capital y
      return true;
    default:
      return false;
  }
}

}  // namespace

bool operator==(const PhonemeToken& a, const PhonemeToken& b) {
  return a.text == b.text;
}

std::vector<PhonemeToken> tokenize(std::string_view ipa) {
  const std::vector<char32_t> cps = unicode::decode_utf8(ipa);
  std::vector<PhonemeToken> tokens;
  std::string cur;
  std::string pending_stress;
  bool tie_pending = false;

  auto flush = [&]() {
    if (!cur.empty()) {
      tokens.push_back(PhonemeToken{cur});
      cur.clear();
    }
  };

  for (size_t i = 0; i < cps.size(); ++i) {
    const char32_t cp = cps[i];
    const long off = static_cast<long>(i);
    if (tie_pending) {
      if (!is_base(cp)) {
        throw TokenError("tie bar not followed by an IPA base letter", off);
      }
      unicode::append_utf8(cur, cp);
      tie_pending = false;
      continue;
    }
    if (cp == ' ') {
      if (!pending_stress.empty()) {
        throw TokenError("stress mark not followed by a phoneme", off);
      }
      flush();
      tokens.push_back(PhonemeToken{" "});
    } else if (is_stress(cp)) {
      flush();
      unicode::append_utf8(pending_stress, cp);
    } else if (is_base(cp)) {
      flush();
      cur = pending_stress;
      pending_stress.clear();
      unicode::append_utf8(cur, cp);
    } else if (is_tie(cp)) {
      if (cur.empty()) {
        throw TokenError("tie bar without a preceding phoneme", off);
      }
      unicode::append_utf8(cur, cp);
      tie_pending = true;
    } else if (is_combining(cp) || is_modifier(cp)) {
      if (cur.empty()) {
        throw TokenError("mark " + unicode::codepoint_name(cp) +
                             " without a preceding phoneme",
                         off);
      }
      unicode::append_utf8(cur, cp);
    } else {
      throw TokenError("codepoint " + unicode::codepoint_name(cp) +
                           " is neither IPA nor space",
                       off);
    }
  }
  if (tie_pending) {
    throw TokenError("dangling tie bar at end of input",
                     static_cast<long>(cps.size()));
  }
  if (!pending_stress.empty()) {
    throw TokenError("stress mark not followed by a phoneme",
                     static_cast<long>(cps.size()));
  }
  flush();
  return tokens;
}

bool is_vowel_token(std::string_view token_text) {
  if (token_text.empty() || token_text == " ") return false;
  std::vector<char32_t> cps;
  try {
    cps = unicode::decode_utf8(token_text);
  } catch (const Error&) {
    return false;
  }
  // The base letter is the first non-stress codepoint.
  for (char32_t cp : cps) {
    if (is_stress(cp)) continue;
    return is_vowel_base(cp);
  }
  return false;
}

Vocabulary Vocabulary::build(const std::vector<PhonemeToken>& corpus) {
  if (corpus.empty()) throw VocabError("cannot build vocabulary: empty corpus");
  std::set<std::string> distinct;
  for (const PhonemeToken& t : corpus) distinct.insert(t.text);
  std::vector<std::string> ordered(distinct.begin(), distinct.end());
  return from_tokens(std::move(ordered));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens_in_id_order) {
  if (tokens_in_id_order.size() > 65536) {
    throw VocabError("vocabulary exceeds 16-bit id space");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens_in_id_order);
  for (size_t i = 0; i < v.tokens_.size(); ++i) {
    if (v.tokens_[i].empty()) {
      throw VocabError("empty token at id " + std::to_string(i));
    }
    auto [it, inserted] =
        v.ids_.emplace(v.tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw VocabError("duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocabulary Vocabulary::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VocabError("cannot open vocabulary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  // A trailing newline produces no extra entry with getline; an empty final
  // line would, and is rejected by from_tokens.
  return from_tokens(std::move(tokens));
}

void Vocabulary::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VocabError("cannot write vocabulary file: " + path);
  for (const std::string& t : tokens_) out << t << '\n';
}

bool Vocabulary::contains(std::string_view text) const {
  return ids_.find(text) != ids_.end();
}

TokenId Vocabulary::id_of(std::string_view text) const {
  auto it = ids_.find(text);
  if (it == ids_.end()) {
    throw VocabError("token '" + std::string(text) + "' not in vocabulary");
  }
  return it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id >= tokens_.size()) {
    throw VocabError("token id " + std::to_string(id) +
                     " out of range (vocabulary size " +
                     std::to_string(tokens_.size()) + ")");
  }
  return tokens_[id];
}

std::vector<TokenId> Vocabulary::encode(
    const std::vector<PhonemeToken>& toks) const {
  std::vector<TokenId> ids;
  ids.reserve(toks.size());
  for (size_t i = 0; i < toks.size(); ++i) {
    auto it = ids_.find(toks[i].text);
    if (it == ids_.end()) {
      throw VocabError("token '" + toks[i].text +
                       "' not in vocabulary (position " + std::to_string(i) +
                       ")");
    }
    ids.push_back(it->second);
  }
  return ids;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) out += token_of(id);
  return out;
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&](unsigned char b) {
    h ^= b;
    h *= 1099511628211ULL;
  };
  for (const std::string& t : tokens_) {
    for (char ch : t) mix(static_cast<unsigned char>(ch));
    mix('\n');
  }
  return h;
}

}  // namespace phonpipe
