#include "phonpipe/merge.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "phonpipe/csv.hpp"
#include "phonpipe/error.hpp"

namespace phonpipe::merge {

LabelMap LabelMap::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MergeError("cannot open label map: " + path);
  LabelMap map;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("label map line is not tab-separated", lineno);
    }
    const std::string label = line.substr(0, tab);
    const std::string target = line.substr(tab + 1);
    if (target == "<pause>") {
      map.pause_labels.insert(label);
    } else if (target.empty()) {
      throw ParseError("label map entry has an empty target", lineno);
    } else {
      map.entries[label] = target;
    }
  }
  return map;
}

void LabelMap::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MergeError("cannot write label map: " + path);
  for (const auto& [label, target] : entries) {
    out << label << '\t' << target << '\n';
  }
  for (const std::string& label : pause_labels) {
    out << label << "\t<pause>\n";
  }
}

void LabelMap::validate(const Vocabulary& v) const {
  for (const auto& [label, target] : entries) {
    if (!v.contains(target)) {
      throw MergeError("label map target '" + target + "' (for label '" +
                       label + "') is not in the vocabulary");
    }
  }
}

bool LabelMap::is_pause(const std::string& label) const {
  return label.empty() || pause_labels.count(label) > 0;
}

std::vector<MappedInterval> map_labels(const IntervalTier& tier,
                                       const LabelMap& map,
                                       const Vocabulary& v, Mode mode) {
  if (tier.intervals.empty()) {
    throw MergeError("tier '" + tier.name + "' has no intervals");
  }
  std::vector<MappedInterval> out;
  out.reserve(tier.intervals.size());
  for (size_t i = 0; i < tier.intervals.size(); ++i) {
    const Interval& iv = tier.intervals[i];
    MappedInterval m;
    m.interval = iv;
    if (map.is_pause(iv.label)) {
      out.push_back(std::move(m));
      continue;
    }
    auto it = map.entries.find(iv.label);
    if (it == map.entries.end()) {
      // Labels already written as vocabulary tokens pass through.
      if (v.contains(iv.label)) {
        m.target_text = iv.label;
        m.token = v.id_of(iv.label);
        out.push_back(std::move(m));
        continue;
      }
      if (mode == Mode::kStrict) {
        throw MergeError("unmapped label '" + iv.label + "' (tier '" +
                         tier.name + "', interval " + std::to_string(i + 1) +
                         ")");
      }
      m.skipped = true;
      out.push_back(std::move(m));
      continue;
    }
    m.target_text = it->second;
    m.token = v.id_of(it->second);
    out.push_back(std::move(m));
  }
  return out;
}

Alignment align_streams(const std::vector<MappedInterval>& mapped,
                        const std::vector<TokenId>& lm_ids, TokenId space_id,
                        Mode mode) {
  Alignment a;
  size_t j = 0;
  for (size_t i = 0; i < mapped.size(); ++i) {
    const MappedInterval& m = mapped[i];
    if (m.skipped) continue;
    if (!m.token.has_value()) {
      // Pause: may consume one space token, or nothing.
      if (j < lm_ids.size() && lm_ids[j] == space_id) {
        ++j;
        ++a.pauses_matched;
      }
      continue;
    }
    // Word boundaries without a pause interval: absorb spaces silently.
    while (j < lm_ids.size() && lm_ids[j] == space_id) {
      ++j;
      ++a.spaces_absorbed;
    }
    if (j >= lm_ids.size()) {
      if (mode == Mode::kStrict) {
        throw MergeError(
            "alignment: LM token stream exhausted at interval " +
            std::to_string(i + 1) + " (" + m.target_text + ")");
      }
      ++a.mismatches;
      if (!a.first_divergence) a.first_divergence = j;
      continue;
    }
    if (lm_ids[j] == *m.token) {
      a.pairs.push_back({i, j});
      ++j;
      continue;
    }
    if (!a.first_divergence) a.first_divergence = j;
    if (mode == Mode::kStrict) {
      throw MergeError("alignment: divergence at LM position " +
                       std::to_string(j) + ": interval " +
                       std::to_string(i + 1) + " maps to '" + m.target_text +
                       "' but the LM stream holds a different token");
    }
    ++a.mismatches;
    ++j;  // substitution: skip both sides
  }
  // Trailing phoneme tokens in the LM stream are divergences too.
  while (j < lm_ids.size()) {
    if (lm_ids[j] != space_id) {
      if (!a.first_divergence) a.first_divergence = j;
      if (mode == Mode::kStrict) {
        throw MergeError("alignment: unconsumed LM token at position " +
                         std::to_string(j));
      }
      ++a.mismatches;
    } else {
      ++a.spaces_absorbed;
    }
    ++j;
  }
  return a;
}

const char* flag_name(FieldFlag f) {
  switch (f) {
    case FieldFlag::kOk: return "ok";
    case FieldFlag::kMissing: return "missing";
    case FieldFlag::kNotApplicable: return "na";
    case FieldFlag::kUndefined: return "undefined";
  }
  return "missing";
}

namespace {

Contour contour_from_sample(const std::optional<dsp::ContourSample>& s,
                            bool is_vowel) {
  Contour c;
  if (!is_vowel) {
    c.fill(FieldValue::na());
    return c;
  }
  if (!s.has_value()) {
    c.fill(FieldValue::missing());
    return c;
  }
  for (int k = 0; k < 9; ++k) {
    const auto& v = s->values[static_cast<size_t>(k)];
    c[static_cast<size_t>(k)] =
        v.has_value() ? FieldValue::ok(*v) : FieldValue::missing();
  }
  return c;
}

}  // namespace

std::vector<PhonemeRecord> build_records(const RecordInputs& in) {
  if (!in.mapped || !in.alignment || !in.series || !in.informativity ||
      !in.features) {
    throw MergeError("build_records: missing inputs");
  }
  if (in.features->size() != in.mapped->size()) {
    throw MergeError("build_records: features not keyed like intervals");
  }
  std::vector<PhonemeRecord> records;
  records.reserve(in.alignment->pairs.size());
  for (const AlignedPair& pair : in.alignment->pairs) {
    const MappedInterval& m = (*in.mapped)[pair.interval_index];
    const IntervalFeatures& f = (*in.features)[pair.interval_index];
    const info::SurprisalEntry& e = in.series->entries[pair.lm_position];

    PhonemeRecord r;
    r.file_id = in.file_id;
    r.speaker_id = in.speaker_id;
    r.word_index =
        in.word_index_of_position
            ? (*in.word_index_of_position)[pair.lm_position]
            : 0;
    r.label = m.target_text;
    r.token_id = *m.token;
    r.start = m.interval.xmin;
    r.end = m.interval.xmax;
    r.duration = r.end - r.start;
    r.is_vowel = f.is_vowel;

    r.surprisal = e.surprisal_bits.has_value()
                      ? FieldValue::ok(*e.surprisal_bits)
                      : FieldValue::undefined();
    r.entropy = e.entropy_bits.has_value() ? FieldValue::ok(*e.entropy_bits)
                                           : FieldValue::undefined();
    auto inf_it = in.informativity->find(r.token_id);
    r.informativity = inf_it != in.informativity->end()
                          ? FieldValue::ok(inf_it->second)
                          : FieldValue::missing();

    r.f0 = contour_from_sample(f.f0, f.is_vowel);
    r.f1 = contour_from_sample(f.f1, f.is_vowel);
    r.f2 = contour_from_sample(f.f2, f.is_vowel);
    r.f3 = contour_from_sample(f.f3, f.is_vowel);
    r.tilt = f.tilt.has_value() ? FieldValue::ok(*f.tilt)
                                : FieldValue::missing();
    r.centroid = f.centroid.has_value() ? FieldValue::ok(*f.centroid)
                                        : FieldValue::missing();
    records.push_back(std::move(r));
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const PhonemeRecord& a, const PhonemeRecord& b) {
                     if (a.file_id != b.file_id) return a.file_id < b.file_id;
                     return a.start < b.start;
                   });
  return records;
}

namespace {

// Gathers every valid slot of one contour kind across a speaker's records,
// z-scores the collection, and writes the values back. Returns the number
// of slots flagged missing because the group was degenerate.
size_t normalize_group(std::vector<PhonemeRecord*>& records,
                       Contour PhonemeRecord::*contour) {
  std::vector<double> values;
  for (PhonemeRecord* r : records) {
    for (const FieldValue& v : (*r).*contour) {
      if (v.is_ok()) values.push_back(v.value);
    }
  }
  if (values.empty()) return 0;
  std::vector<double> z;
  try {
    z = dsp::zscore(values);
  } catch (const DspError&) {
    size_t flagged = 0;
    for (PhonemeRecord* r : records) {
      for (FieldValue& v : (*r).*contour) {
        if (v.is_ok()) {
          v = FieldValue::missing();
          ++flagged;
        }
      }
    }
    return flagged;
  }
  size_t idx = 0;
  for (PhonemeRecord* r : records) {
    for (FieldValue& v : (*r).*contour) {
      if (v.is_ok()) v.value = z[idx++];
    }
  }
  return 0;
}

}  // namespace

size_t normalize_records(std::vector<PhonemeRecord>& records) {
  std::map<std::string, std::vector<PhonemeRecord*>> by_speaker;
  for (PhonemeRecord& r : records) {
    by_speaker[r.speaker_id].push_back(&r);
  }
  size_t flagged = 0;
  for (auto& [speaker, rs] : by_speaker) {
    flagged += normalize_group(rs, &PhonemeRecord::f0);
    flagged += normalize_group(rs, &PhonemeRecord::f1);
    flagged += normalize_group(rs, &PhonemeRecord::f2);
    flagged += normalize_group(rs, &PhonemeRecord::f3);
  }
  return flagged;
}

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void push_value(std::vector<std::string>& row, const FieldValue& v) {
  row.push_back(v.is_ok() ? fmt_num(v.value) : "");
  row.push_back(flag_name(v.flag));
}

}  // namespace

std::vector<std::string> table_header() {
  std::vector<std::string> h = {"file",     "speaker", "word_index",
                                "label",    "token_id", "start",
                                "end",      "duration"};
  auto add_flagged = [&](const std::string& name) {
    h.push_back(name);
    h.push_back(name + "_flag");
  };
  add_flagged("surprisal");
  add_flagged("entropy");
  add_flagged("informativity");
  for (const char* base : {"f0", "F1", "F2", "F3"}) {
    for (int k = 1; k <= 9; ++k) {
      add_flagged(std::string(base) + "_" + std::to_string(k));
    }
  }
  add_flagged("tilt");
  add_flagged("centroid");
  return h;
}

std::string write_table(const std::vector<PhonemeRecord>& records) {
  std::string out = csv::join_row(table_header());
  for (const PhonemeRecord& r : records) {
    std::vector<std::string> row;
    row.push_back(r.file_id);
    row.push_back(r.speaker_id);
    row.push_back(std::to_string(r.word_index));
    row.push_back(r.label);
    row.push_back(std::to_string(r.token_id));
    row.push_back(fmt_num(r.start));
    row.push_back(fmt_num(r.end));
    row.push_back(fmt_num(r.duration));
    push_value(row, r.surprisal);
    push_value(row, r.entropy);
    push_value(row, r.informativity);
    for (const Contour* c : {&r.f0, &r.f1, &r.f2, &r.f3}) {
      for (const FieldValue& v : *c) push_value(row, v);
    }
    push_value(row, r.tilt);
    push_value(row, r.centroid);
    out += csv::join_row(row);
  }
  return out;
}

}  // namespace phonpipe::merge
