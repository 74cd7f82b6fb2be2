#include "phonpipe/corpus.hpp"

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phonpipe/error.hpp"
#include "phonpipe/unicode.hpp"

namespace phonpipe {

namespace {

bool is_letter(char32_t cp) {
  if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
  // Latin-1 supplement letters (excluding multiply/divide signs).
  if (cp >= 0x00C0 && cp <= 0x00FF && cp != 0x00D7 && cp != 0x00F7) return true;
  // Latin Extended-A and -B cover the Polish diacritics and most European
  // orthographies.
  if (cp >= 0x0100 && cp <= 0x024F) return true;
  return false;
}

bool is_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }

bool is_sentence_punct(char32_t cp) {
  switch (cp) {
    case '.':
    case ',':
    case ';':
    case ':':
    case '!':
    case '?':
    case '\'':
    case '"':
    case '(':
    case ')':
    case '-':
    case 0x2013:  // en dash
    case 0x2014:  // em dash
    case 0x2018:  // curly quotes
    case 0x2019:
    case 0x201A:
    case 0x201C:
    case 0x201D:
    case 0x201E:
    case 0x00AB:  // guillemets
    case 0x00BB:
    case 0x2026:  // ellipsis
      return true;
    default:
      return false;
  }
}

bool is_ws(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
         cp == '\v' || cp == 0x00A0 || cp == 0x2028 || cp == 0x2029;
}

}  // namespace

std::string clean_text(std::string_view raw) {
  const std::vector<char32_t> cps = unicode::decode_utf8(raw);
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (is_ws(cp)) {
      pending_space = true;
      continue;
    }
    if (!is_letter(cp) && !is_digit(cp) && !is_sentence_punct(cp)) {
      continue;  // emoji, symbols, control characters
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    unicode::append_utf8(out, cp);
  }
  return out;
}

TableG2P::TableG2P(std::map<std::string, std::string> table, std::string name)
    : table_(std::move(table)), name_(std::move(name)), max_key_len_(1) {
  for (const auto& [k, v] : table_) {
    max_key_len_ = std::max(max_key_len_, k.size());
  }
}

std::string TableG2P::phonemize(const std::string& text) {
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ' ') {
      out.push_back(' ');
      ++i;
      continue;
    }
    bool matched = false;
    const size_t max_len = std::min(max_key_len_, text.size() - i);
    for (size_t len = max_len; len >= 1; --len) {
      auto it = table_.find(text.substr(i, len));
      if (it != table_.end()) {
        out += it->second;
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      // Skip bytes of one UTF-8 sequence.
      ++i;
      while (i < text.size() &&
             (static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) {
        ++i;
      }
    }
  }
  return out;
}

ProcessG2P::ProcessG2P(std::string command, std::string name,
                       std::string version)
    : command_(std::move(command)),
      name_(std::move(name)),
      version_(std::move(version)) {}

std::string ProcessG2P::phonemize(const std::string& text) {
  // Temp file plumbing keeps the contract simple: text on stdin, IPA on
  // stdout, diagnostics on stderr.
  char tmpl_in[] = "/tmp/phonpipe_g2p_in_XXXXXX";
  char tmpl_out[] = "/tmp/phonpipe_g2p_out_XXXXXX";
  char tmpl_err[] = "/tmp/phonpipe_g2p_err_XXXXXX";
  const int fd_in = mkstemp(tmpl_in);
  const int fd_out = mkstemp(tmpl_out);
  const int fd_err = mkstemp(tmpl_err);
  if (fd_in < 0 || fd_out < 0 || fd_err < 0) {
    throw BackendError("cannot create temp files for G2P backend");
  }
  ::close(fd_in);
  ::close(fd_out);
  ::close(fd_err);
  {
    std::ofstream in(tmpl_in, std::ios::binary);
    in << text;
  }
  const std::string cmd = command_ + " < " + tmpl_in + " > " + tmpl_out +
                          " 2> " + tmpl_err;
  const int status = std::system(cmd.c_str());

  auto slurp = [](const char* path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const std::string out = slurp(tmpl_out);
  const std::string err = slurp(tmpl_err);
  std::remove(tmpl_in);
  std::remove(tmpl_out);
  std::remove(tmpl_err);

  if (status != 0) {
    throw BackendError("G2P backend '" + name_ + "' failed (status " +
                       std::to_string(status) + "): " + err);
  }
  return out;
}

PhonemizeResult phonemize(const std::string& cleaned_text,
                          G2PBackend& backend) {
  PhonemizeResult r;
  r.ipa = backend.phonemize(cleaned_text);
  r.backend_name = backend.name();
  r.backend_version = backend.version();
  return r;
}

DatasetSplit split_corpus(std::span<const TokenId> ids, double ratio,
                          uint64_t seed) {
  (void)seed;  // recorded in provenance; the cut itself is deterministic
  if (ids.empty()) throw Error("split_corpus: empty token sequence");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error("split_corpus: ratio must be in (0, 1)");
  }
  const size_t n = ids.size();
  long cut = std::lround(ratio * static_cast<double>(n));
  if (cut < 1 || static_cast<size_t>(cut) >= n) {
    throw Error("split_corpus: a split of " + std::to_string(n) +
                " tokens at ratio " + std::to_string(ratio) +
                " would leave an empty side");
  }
  DatasetSplit s;
  s.ratio = ratio;
  s.train.assign(ids.begin(), ids.begin() + cut);
  s.dev.assign(ids.begin() + cut, ids.end());
  return s;
}

void write_dataset(const std::vector<TokenId>& ids, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file: " + path);
  for (TokenId id : ids) {
    const unsigned char b[2] = {static_cast<unsigned char>(id & 0xFF),
                                static_cast<unsigned char>(id >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
}

std::vector<TokenId> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() % 2 != 0) {
    throw Error("dataset file has odd byte length: " + path);
  }
  std::vector<TokenId> ids(bytes.size() / 2);
  for (size_t i = 0; i < ids.size(); ++i) {
    ids[i] = static_cast<TokenId>(
        static_cast<unsigned char>(bytes[2 * i]) |
        (static_cast<unsigned char>(bytes[2 * i + 1]) << 8));
  }
  return ids;
}

void write_provenance(const Provenance& p, const std::string& path) {
  nlohmann::json j;
  j["backend"] = {{"name", p.backend_name}, {"version", p.backend_version}};
  j["seed"] = p.seed;
  j["ratio"] = p.ratio;
  j["n_documents"] = p.n_documents;
  j["n_tokens"] = p.n_tokens;
  j["vocab_size"] = p.vocab_size;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write provenance file: " + path);
  out << j.dump(2) << '\n';
}

Provenance read_provenance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open provenance file: " + path);
  nlohmann::json j;
  in >> j;
  Provenance p;
  p.backend_name = j.at("backend").at("name").get<std::string>();
  p.backend_version = j.at("backend").at("version").get<std::string>();
  p.seed = j.at("seed").get<uint64_t>();
  p.ratio = j.at("ratio").get<double>();
  p.n_documents = j.at("n_documents").get<size_t>();
  p.n_tokens = j.at("n_tokens").get<size_t>();
  p.vocab_size = j.at("vocab_size").get<size_t>();
  return p;
}

}  // namespace phonpipe
