#ifndef PHONPIPE_TEXTGRID_HPP
#define PHONPIPE_TEXTGRID_HPP

#include <string>
#include <string_view>
#include <vector>

namespace phonpipe {

// One labeled time span. Empty labels mark silence/pauses.
struct Interval {
  double xmin = 0.0;
  double xmax = 0.0;
  std::string label;
};

// An ordered, contiguous, non-overlapping sequence of intervals covering
// [xmin, xmax].
struct IntervalTier {
  std::string name;
  double xmin = 0.0;
  double xmax = 0.0;
  std::vector<Interval> intervals;
};

struct TextGrid {
  double xmin = 0.0;
  double xmax = 0.0;
  std::vector<IntervalTier> tiers;
  // Non-fatal notes collected during parsing (e.g. skipped point tiers).
  std::vector<std::string> warnings;
};

// Parses Praat TextGrid text content, long or short form. Accepts UTF-8
// (with or without BOM) and UTF-16 (BOM required). Point tiers are skipped
// with a warning. Throws ParseError on malformed input, invalid interval
// ordering, gaps/overlaps beyond 1e-9 s, or duplicate tier names.
TextGrid parse_textgrid(std::string_view bytes);

TextGrid parse_textgrid_file(const std::string& path);

// Emits long-form text. Times are printed with full round-trip precision
// (at least six decimals); quotes inside labels are doubled per the format.
std::string serialize_textgrid(const TextGrid& tg);

void write_textgrid_file(const TextGrid& tg, const std::string& path);

// Case-sensitive lookup. Throws Error if the tier is absent.
const IntervalTier& find_tier(const TextGrid& tg, std::string_view name);

bool has_tier(const TextGrid& tg, std::string_view name);

// All intervals with nonzero overlap with [t0, t1], in order. A point query
// (t0 == t1) uses half-open membership [xmin, xmax). Throws Error if t0 > t1.
std::vector<Interval> intervals_overlapping(const IntervalTier& tier,
                                            double t0, double t1);

// Structural equality with a time tolerance (labels and tier names exact).
bool structurally_equal(const TextGrid& a, const TextGrid& b,
                        double time_tol = 1e-9);

}  // namespace phonpipe

#endif  // PHONPIPE_TEXTGRID_HPP
