#include "phonpipe/textgrid.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "phonpipe/error.hpp"
#include "phonpipe/unicode.hpp"

namespace phonpipe {

namespace {

constexpr double kTimeTol = 1e-9;

std::string strip(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return std::string(s.substr(b, e - b));
}

// Line-oriented cursor over the decoded file body.
struct Cursor {
  std::vector<std::string> lines;
  size_t pos = 0;

  long lineno() const { return static_cast<long>(pos) + 1; }

  bool eof() const { return pos >= lines.size(); }

  // Advances to the next non-empty line; returns false at end of input.
  bool skip_blank() {
    while (pos < lines.size() && strip(lines[pos]).empty()) ++pos;
    return pos < lines.size();
  }
};

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  lines.push_back(cur);
  return lines;
}

double parse_double(std::string_view s, long lineno) {
  const std::string t = strip(s);
  if (t.empty()) throw ParseError("expected a number, got empty text", lineno);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str()) {
    throw ParseError("expected a number, got '" + t + "'", lineno);
  }
  return v;
}

// Reads a quoted string starting at lines[c.pos][col]. Praat doubles literal
// quotes; labels may span lines. Leaves the cursor on the line after the
// closing quote.
std::string read_quoted(Cursor& c, size_t col) {
  std::string out;
  size_t i = col + 1;  // past the opening quote
  while (true) {
    const std::string& line = c.lines[c.pos];
    while (i < line.size()) {
      if (line[i] == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          out.push_back('"');
          i += 2;
        } else {
          ++c.pos;
          return out;
        }
      } else {
        out.push_back(line[i]);
        ++i;
      }
    }
    // Closing quote not on this line: the label embeds a newline.
    out.push_back('\n');
    ++c.pos;
    i = 0;
    if (c.eof()) throw ParseError("unterminated string", c.lineno());
  }
}

bool is_structural(const std::string& stripped) {
  return stripped.rfind("item", 0) == 0 || stripped.rfind("intervals [", 0) == 0 ||
         stripped.rfind("points [", 0) == 0;
}

// ------------------------- long form -------------------------

// Finds the next `key = value` line, skipping blank and structural lines.
std::string long_value(Cursor& c, std::string_view key) {
  while (true) {
    if (!c.skip_blank()) {
      throw ParseError(std::string("unexpected end of file, expected '") +
                           std::string(key) + "'",
                       c.lineno());
    }
    const std::string s = strip(c.lines[c.pos]);
    if (is_structural(s)) {
      ++c.pos;
      continue;
    }
    if (s.rfind(key, 0) != 0) {
      throw ParseError(std::string("expected '") + std::string(key) +
                           "', got '" + s + "'",
                       c.lineno());
    }
    const size_t eq = s.find('=', key.size());
    if (eq == std::string::npos) {
      throw ParseError(std::string("expected '=' after '") + std::string(key) +
                           "'",
                       c.lineno());
    }
    ++c.pos;
    return strip(s.substr(eq + 1));
  }
}

double long_number(Cursor& c, std::string_view key) {
  const long ln = c.lineno();
  return parse_double(long_value(c, key), ln);
}

std::string long_string(Cursor& c, std::string_view key) {
  while (true) {
    if (!c.skip_blank()) {
      throw ParseError(std::string("unexpected end of file, expected '") +
                           std::string(key) + "'",
                       c.lineno());
    }
    const std::string s = strip(c.lines[c.pos]);
    if (is_structural(s)) {
      ++c.pos;
      continue;
    }
    if (s.rfind(key, 0) != 0) {
      throw ParseError(std::string("expected '") + std::string(key) +
                           "', got '" + s + "'",
                       c.lineno());
    }
    const size_t q = c.lines[c.pos].find('"');
    if (q == std::string::npos) {
      throw ParseError(std::string("expected quoted string for '") +
                           std::string(key) + "'",
                       c.lineno());
    }
    return read_quoted(c, q);
  }
}

// ------------------------- short form -------------------------

double short_number(Cursor& c) {
  if (!c.skip_blank()) {
    throw ParseError("unexpected end of file, expected a number", c.lineno());
  }
  const long ln = c.lineno();
  const std::string s = strip(c.lines[c.pos]);
  ++c.pos;
  return parse_double(s, ln);
}

std::string short_string(Cursor& c) {
  if (!c.skip_blank()) {
    throw ParseError("unexpected end of file, expected a string", c.lineno());
  }
  const size_t q = c.lines[c.pos].find('"');
  if (q == std::string::npos) {
    throw ParseError("expected quoted string", c.lineno());
  }
  return read_quoted(c, q);
}

// ------------------------- shared -------------------------

struct TierData {
  bool is_interval = true;
  IntervalTier tier;
};

void validate_tier(const IntervalTier& tier, long lineno) {
  for (size_t i = 0; i < tier.intervals.size(); ++i) {
    const Interval& iv = tier.intervals[i];
    if (!(iv.xmin < iv.xmax)) {
      throw ParseError("interval " + std::to_string(i + 1) + " of tier '" +
                           tier.name + "' has xmin >= xmax",
                       lineno);
    }
    if (i > 0) {
      const double prev_end = tier.intervals[i - 1].xmax;
      if (iv.xmin < prev_end - kTimeTol) {
        throw ParseError("interval " + std::to_string(i + 1) + " of tier '" +
                             tier.name + "' starts before interval " +
                             std::to_string(i) + " ends",
                         lineno);
      }
      if (iv.xmin > prev_end + kTimeTol) {
        throw ParseError("gap before interval " + std::to_string(i + 1) +
                             " of tier '" + tier.name + "'",
                         lineno);
      }
    }
  }
  if (!tier.intervals.empty()) {
    if (std::fabs(tier.intervals.front().xmin - tier.xmin) > kTimeTol) {
      throw ParseError("first interval of tier '" + tier.name +
                           "' does not start at tier xmin",
                       lineno);
    }
    if (std::fabs(tier.intervals.back().xmax - tier.xmax) > kTimeTol) {
      throw ParseError("last interval of tier '" + tier.name +
                           "' does not end at tier xmax",
                       lineno);
    }
  }
}

void validate_grid(const TextGrid& tg, long lineno) {
  for (size_t i = 0; i < tg.tiers.size(); ++i) {
    const IntervalTier& t = tg.tiers[i];
    if (t.xmin < tg.xmin - kTimeTol || t.xmax > tg.xmax + kTimeTol) {
      throw ParseError("tier '" + t.name + "' extends beyond the TextGrid span",
                       lineno);
    }
    for (size_t j = i + 1; j < tg.tiers.size(); ++j) {
      if (tg.tiers[j].name == t.name) {
        throw ParseError("duplicate tier name '" + t.name + "'", lineno);
      }
    }
  }
}

TextGrid parse_long(Cursor& c) {
  TextGrid tg;
  tg.xmin = long_number(c, "xmin");
  tg.xmax = long_number(c, "xmax");
  // "tiers? <exists>" flag line
  if (!c.skip_blank()) throw ParseError("missing 'tiers?' flag", c.lineno());
  {
    const std::string s = strip(c.lines[c.pos]);
    if (s.rfind("tiers?", 0) != 0) {
      throw ParseError("expected 'tiers?' flag, got '" + s + "'", c.lineno());
    }
    ++c.pos;
    if (s.find("<exists>") == std::string::npos) return tg;  // no tiers
  }
  const long n_tiers = static_cast<long>(long_number(c, "size"));
  if (n_tiers < 0) throw ParseError("negative tier count", c.lineno());
  for (long k = 0; k < n_tiers; ++k) {
    const std::string cls = long_string(c, "class");
    const long tier_line = c.lineno();
    if (cls == "IntervalTier") {
      IntervalTier tier;
      tier.name = long_string(c, "name");
      tier.xmin = long_number(c, "xmin");
      tier.xmax = long_number(c, "xmax");
      const long n = static_cast<long>(long_number(c, "intervals: size"));
      tier.intervals.reserve(static_cast<size_t>(n > 0 ? n : 0));
      for (long i = 0; i < n; ++i) {
        Interval iv;
        iv.xmin = long_number(c, "xmin");
        iv.xmax = long_number(c, "xmax");
        iv.label = long_string(c, "text");
        tier.intervals.push_back(std::move(iv));
      }
      validate_tier(tier, c.lineno());
      tg.tiers.push_back(std::move(tier));
    } else if (cls == "TextTier") {
      const std::string name = long_string(c, "name");
      long_number(c, "xmin");
      long_number(c, "xmax");
      const long n = static_cast<long>(long_number(c, "points: size"));
      for (long i = 0; i < n; ++i) {
        long_number(c, "number");
        long_string(c, "mark");
      }
      tg.warnings.push_back("skipped point tier '" + name + "'");
    } else {
      throw ParseError("unsupported tier class '" + cls + "'", tier_line);
    }
  }
  return tg;
}

TextGrid parse_short(Cursor& c) {
  TextGrid tg;
  tg.xmin = short_number(c);
  tg.xmax = short_number(c);
  if (!c.skip_blank()) throw ParseError("missing 'tiers?' flag", c.lineno());
  {
    const std::string s = strip(c.lines[c.pos]);
    ++c.pos;
    if (s.find("<exists>") == std::string::npos) return tg;
  }
  const long n_tiers = static_cast<long>(short_number(c));
  if (n_tiers < 0) throw ParseError("negative tier count", c.lineno());
  for (long k = 0; k < n_tiers; ++k) {
    const long tier_line = c.lineno();
    const std::string cls = short_string(c);
    if (cls == "IntervalTier") {
      IntervalTier tier;
      tier.name = short_string(c);
      tier.xmin = short_number(c);
      tier.xmax = short_number(c);
      const long n = static_cast<long>(short_number(c));
      tier.intervals.reserve(static_cast<size_t>(n > 0 ? n : 0));
      for (long i = 0; i < n; ++i) {
        Interval iv;
        iv.xmin = short_number(c);
        iv.xmax = short_number(c);
        iv.label = short_string(c);
        tier.intervals.push_back(std::move(iv));
      }
      validate_tier(tier, c.lineno());
      tg.tiers.push_back(std::move(tier));
    } else if (cls == "TextTier") {
      const std::string name = short_string(c);
      short_number(c);
      short_number(c);
      const long n = static_cast<long>(short_number(c));
      for (long i = 0; i < n; ++i) {
        short_number(c);
        short_string(c);
      }
      tg.warnings.push_back("skipped point tier '" + name + "'");
    } else {
      throw ParseError("unsupported tier class '" + cls + "'", tier_line);
    }
  }
  return tg;
}

// Shortest fixed-notation representation that reparses to the same double,
// zero-padded to at least six decimals.
std::string fmt_time(double v) {
  char buf[400];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  std::string s(buf, res.ptr);
  const size_t dot = s.find('.');
  if (dot == std::string::npos) {
    s += ".000000";
  } else {
    const size_t frac = s.size() - dot - 1;
    if (frac < 6) s.append(6 - frac, '0');
  }
  return s;
}

std::string quote(const std::string& label) {
  std::string out = "\"";
  for (char ch : label) {
    out.push_back(ch);
    if (ch == '"') out.push_back('"');
  }
  out.push_back('"');
  return out;
}

}  // namespace

TextGrid parse_textgrid(std::string_view bytes) {
  std::string text;
  if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xFE) {
    text = unicode::utf16_to_utf8(bytes.substr(2), /*big_endian=*/false);
  } else if (bytes.size() >= 2 &&
             static_cast<unsigned char>(bytes[0]) == 0xFE &&
             static_cast<unsigned char>(bytes[1]) == 0xFF) {
    text = unicode::utf16_to_utf8(bytes.substr(2), /*big_endian=*/true);
  } else {
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xEF &&
        static_cast<unsigned char>(bytes[1]) == 0xBB &&
        static_cast<unsigned char>(bytes[2]) == 0xBF) {
      bytes = bytes.substr(3);
    }
    unicode::decode_utf8(bytes);  // encoding check only
    text.assign(bytes);
  }

  Cursor c;
  c.lines = split_lines(text);

  if (!c.skip_blank()) throw ParseError("empty file", 1);
  {
    const std::string s = strip(c.lines[c.pos]);
    if (s.find("ooTextFile") == std::string::npos) {
      throw ParseError("not an ooTextFile header", c.lineno());
    }
    ++c.pos;
  }
  if (!c.skip_blank()) throw ParseError("missing object class", c.lineno());
  {
    const std::string s = strip(c.lines[c.pos]);
    if (s.find("\"TextGrid\"") == std::string::npos) {
      throw ParseError("object class is not TextGrid", c.lineno());
    }
    ++c.pos;
  }
  if (!c.skip_blank()) throw ParseError("truncated file", c.lineno());

  const std::string first = strip(c.lines[c.pos]);
  TextGrid tg =
      first.rfind("xmin", 0) == 0 ? parse_long(c) : parse_short(c);
  validate_grid(tg, static_cast<long>(c.pos));
  return tg;
}

TextGrid parse_textgrid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open TextGrid file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_textgrid(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

std::string serialize_textgrid(const TextGrid& tg) {
  std::ostringstream o;
  o << "File type = \"ooTextFile\"\n";
  o << "Object class = \"TextGrid\"\n\n";
  o << "xmin = " << fmt_time(tg.xmin) << " \n";
  o << "xmax = " << fmt_time(tg.xmax) << " \n";
  o << "tiers? <exists> \n";
  o << "size = " << tg.tiers.size() << " \n";
  o << "item []: \n";
  for (size_t k = 0; k < tg.tiers.size(); ++k) {
    const IntervalTier& t = tg.tiers[k];
    o << "    item [" << (k + 1) << "]:\n";
    o << "        class = \"IntervalTier\" \n";
    o << "        name = " << quote(t.name) << " \n";
    o << "        xmin = " << fmt_time(t.xmin) << " \n";
    o << "        xmax = " << fmt_time(t.xmax) << " \n";
    o << "        intervals: size = " << t.intervals.size() << " \n";
    for (size_t i = 0; i < t.intervals.size(); ++i) {
      const Interval& iv = t.intervals[i];
      o << "        intervals [" << (i + 1) << "]:\n";
      o << "            xmin = " << fmt_time(iv.xmin) << " \n";
      o << "            xmax = " << fmt_time(iv.xmax) << " \n";
      o << "            text = " << quote(iv.label) << " \n";
    }
  }
  return o.str();
}

void write_textgrid_file(const TextGrid& tg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write TextGrid file: " + path);
  out << serialize_textgrid(tg);
}

const IntervalTier& find_tier(const TextGrid& tg, std::string_view name) {
  for (const IntervalTier& t : tg.tiers) {
    if (t.name == name) return t;
  }
  throw Error("tier '" + std::string(name) + "' not found");
}

bool has_tier(const TextGrid& tg, std::string_view name) {
  for (const IntervalTier& t : tg.tiers) {
    if (t.name == name) return true;
  }
  return false;
}

std::vector<Interval> intervals_overlapping(const IntervalTier& tier,
                                            double t0, double t1) {
  if (t0 > t1) throw Error("intervals_overlapping: t0 > t1");
  std::vector<Interval> out;
  for (const Interval& iv : tier.intervals) {
    const bool hit = (t0 == t1) ? (iv.xmin <= t0 && t0 < iv.xmax)
                                : (iv.xmax > t0 && iv.xmin < t1);
    if (hit) out.push_back(iv);
  }
  return out;
}

bool structurally_equal(const TextGrid& a, const TextGrid& b,
                        double time_tol) {
  auto close = [&](double x, double y) { return std::fabs(x - y) <= time_tol; };
  if (!close(a.xmin, b.xmin) || !close(a.xmax, b.xmax)) return false;
  if (a.tiers.size() != b.tiers.size()) return false;
  for (size_t k = 0; k < a.tiers.size(); ++k) {
    const IntervalTier& ta = a.tiers[k];
    const IntervalTier& tb = b.tiers[k];
    if (ta.name != tb.name || !close(ta.xmin, tb.xmin) ||
        !close(ta.xmax, tb.xmax) ||
        ta.intervals.size() != tb.intervals.size()) {
      return false;
    }
    for (size_t i = 0; i < ta.intervals.size(); ++i) {
      const Interval& ia = ta.intervals[i];
      const Interval& ib = tb.intervals[i];
      if (!close(ia.xmin, ib.xmin) || !close(ia.xmax, ib.xmax) ||
          ia.label != ib.label) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace phonpipe
