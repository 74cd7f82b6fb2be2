#ifndef PHONPIPE_MERGE_HPP
#define PHONPIPE_MERGE_HPP

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "phonpipe/dsp.hpp"
#include "phonpipe/infomeasures.hpp"
#include "phonpipe/ipa_tok.hpp"
#include "phonpipe/textgrid.hpp"

namespace phonpipe::merge {

enum class Mode { kStrict, kLenient };

// Bridges aligner label text to vocabulary tokens. Loaded from a
// two-column tab-separated file; a target of "<pause>" marks the label as
// silence. Empty labels are always pauses.
struct LabelMap {
  std::map<std::string, std::string> entries;
  std::set<std::string> pause_labels;

  static LabelMap load_file(const std::string& path);
  void save_file(const std::string& path) const;

  // Every mapped target must exist in the vocabulary.
  void validate(const Vocabulary& v) const;

  bool is_pause(const std::string& label) const;
};

struct MappedInterval {
  Interval interval;
  std::optional<TokenId> token;  // nullopt for pauses
  std::string target_text;       // vocabulary token text, "" for pauses
  bool skipped = false;          // lenient-mode unmapped label
};

// Maps each interval of the tier. Unmapped labels abort in strict mode
// (naming label, tier, and interval index) and are flagged + skipped in
// lenient mode. Throws MergeError for an empty tier.
std::vector<MappedInterval> map_labels(const IntervalTier& tier,
                                       const LabelMap& map,
                                       const Vocabulary& v, Mode mode);

struct AlignedPair {
  size_t interval_index;  // into the mapped interval list
  size_t lm_position;     // into the LM token sequence
};

struct Alignment {
  std::vector<AlignedPair> pairs;
  size_t spaces_absorbed = 0;   // word boundaries without a pause interval
  size_t pauses_matched = 0;    // pause intervals that consumed a space
  size_t mismatches = 0;        // lenient-mode substitution skips
  std::optional<size_t> first_divergence;  // LM position of first mismatch
};

// Pairs phoneme intervals with LM positions by consuming lm_ids left to
// right. Space tokens match a pause interval or nothing; phoneme tokens
// must match an interval with an equal token-id. Divergences abort in
// strict mode with the first divergence position; lenient mode skips both
// sides and counts.
Alignment align_streams(const std::vector<MappedInterval>& mapped,
                        const std::vector<TokenId>& lm_ids, TokenId space_id,
                        Mode mode);

enum class FieldFlag { kOk, kMissing, kNotApplicable, kUndefined };

struct FieldValue {
  double value = 0.0;
  FieldFlag flag = FieldFlag::kMissing;

  static FieldValue ok(double v) { return {v, FieldFlag::kOk}; }
  static FieldValue missing() { return {0.0, FieldFlag::kMissing}; }
  static FieldValue na() { return {0.0, FieldFlag::kNotApplicable}; }
  static FieldValue undefined() { return {0.0, FieldFlag::kUndefined}; }
  bool is_ok() const { return flag == FieldFlag::kOk; }
};

const char* flag_name(FieldFlag f);

using Contour = std::array<FieldValue, 9>;

// One analysis-ready output row.
struct PhonemeRecord {
  std::string file_id;
  std::string speaker_id;
  int word_index = 0;
  std::string label;  // vocabulary token text
  TokenId token_id = 0;
  double start = 0.0;
  double end = 0.0;
  double duration = 0.0;
  FieldValue surprisal;
  FieldValue entropy;
  FieldValue informativity;
  Contour f0;
  Contour f1;
  Contour f2;
  Contour f3;
  FieldValue tilt;
  FieldValue centroid;
  bool is_vowel = false;
};

// Raw per-interval acoustic measurements, parallel to the mapped list.
struct IntervalFeatures {
  bool is_vowel = false;
  std::optional<dsp::ContourSample> f0;
  std::optional<dsp::ContourSample> f1;
  std::optional<dsp::ContourSample> f2;
  std::optional<dsp::ContourSample> f3;
  std::optional<double> tilt;
  std::optional<double> centroid;
};

struct RecordInputs {
  std::string file_id;
  std::string speaker_id;
  const std::vector<MappedInterval>* mapped = nullptr;
  const Alignment* alignment = nullptr;
  const info::SurprisalSeries* series = nullptr;
  const std::map<TokenId, double>* informativity = nullptr;
  const std::vector<IntervalFeatures>* features = nullptr;  // per interval
  const std::vector<int>* word_index_of_position = nullptr;  // per LM position
};

// One record per aligned phoneme interval, ordered by start time. Contour
// fields are not-applicable for consonants; the surprisal of LM position 0
// is flagged undefined.
std::vector<PhonemeRecord> build_records(const RecordInputs& in);

// Per-speaker normalization over a whole record collection: f0 contour
// slots are z-scored against all of the speaker's valid f0 values; formant
// slots per formant number likewise (Lobanov). Groups too small or with
// zero variance have their slots flagged missing; the count is returned.
size_t normalize_records(std::vector<PhonemeRecord>& records);

// CSV with the exact PhonemeRecord columns, contours expanded to f0_1..9,
// F1_1..9, ..., each value column paired with a companion flag column.
// Missing values are empty cells. UTF-8, RFC-4180 quoting, deterministic.
std::string write_table(const std::vector<PhonemeRecord>& records);

std::vector<std::string> table_header();

}  // namespace phonpipe::merge

#endif  // PHONPIPE_MERGE_HPP
