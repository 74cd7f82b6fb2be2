#include <doctest.h>

#include <cstdio>
#include <cstdlib>

#include "phonpipe/csv.hpp"
#include "phonpipe/error.hpp"
#include "phonpipe/ipa_tok.hpp"
#include "phonpipe/merge.hpp"
#include "test_util.hpp"

using namespace phonpipe;
using namespace phonpipe::merge;

namespace {

Vocabulary test_vocab() {
  // ids: 0 " ", 1 "a", 2 "d", 3 "m", 4 "ɔ", 5 "t͡ʂ"
  return Vocabulary::from_tokens(
      {" ", "a", "d", "m", "\xC9\x94", "t\xCD\xA1\xCA\x82"});
}

LabelMap test_label_map() {
  LabelMap map;
  map.entries = {{"a", "a"},
                 {"d", "d"},
                 {"m", "m"},
                 {"o", "\xC9\x94"},
                 {"tS", "t\xCD\xA1\xCA\x82"}};
  map.pause_labels = {"<p:>", "sil"};
  return map;
}

IntervalTier dom_tier() {
  IntervalTier tier;
  tier.name = "MAU";
  tier.xmin = 0.0;
  tier.xmax = 1.0;
  tier.intervals = {{0.0, 0.2, "<p:>"},
                    {0.2, 0.4, "d"},
                    {0.4, 0.6, "o"},
                    {0.6, 0.8, "m"},
                    {0.8, 1.0, ""}};
  return tier;
}

}  // namespace

TEST_CASE("label map: load, pause rules, validation") {
  const std::string path = "/tmp/phonpipe_test_labelmap.tsv";
  {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    std::fputs("# comment\ntS\tt\xCD\xA1\xCA\x82\no\t\xC9\x94\nsil\t<pause>\n",
               fp);
    std::fclose(fp);
  }
  const LabelMap map = LabelMap::load_file(path);
  CHECK(map.entries.at("tS") == "t\xCD\xA1\xCA\x82");
  CHECK(map.is_pause("sil"));
  CHECK(map.is_pause(""));
  CHECK(!map.is_pause("tS"));
  map.validate(test_vocab());

  LabelMap bad = map;
  bad.entries["q"] = "zz";
  CHECK_THROWS_WITH_AS(bad.validate(test_vocab()),
                       doctest::Contains("not in the vocabulary"), MergeError);
  std::remove(path.c_str());
}

TEST_CASE("map_labels: aligner labels to token ids") {
  const Vocabulary v = test_vocab();
  const LabelMap map = test_label_map();
  const auto mapped = map_labels(dom_tier(), map, v, Mode::kStrict);
  REQUIRE(mapped.size() == 5);
  CHECK(!mapped[0].token.has_value());  // pause label
  CHECK(*mapped[1].token == 2);         // d
  CHECK(*mapped[2].token == 4);         // o -> ɔ
  CHECK(mapped[2].target_text == "\xC9\x94");
  CHECK(!mapped[4].token.has_value());  // empty label pause
}

TEST_CASE("map_labels: aligner label 'tS' maps to the affricate token") {
  const Vocabulary v = test_vocab();
  const LabelMap map = test_label_map();
  IntervalTier tier = dom_tier();
  tier.intervals[1].label = "tS";
  const auto mapped = map_labels(tier, map, v, Mode::kStrict);
  CHECK(*mapped[1].token == v.id_of("t\xCD\xA1\xCA\x82"));
}

TEST_CASE("map_labels: unmapped label aborts in strict, flags in lenient") {
  const Vocabulary v = test_vocab();
  const LabelMap map = test_label_map();
  IntervalTier tier = dom_tier();
  tier.intervals[3].label = "xx";
  CHECK_THROWS_WITH_AS(map_labels(tier, map, v, Mode::kStrict),
                       doctest::Contains("'xx'"), MergeError);
  const auto mapped = map_labels(tier, map, v, Mode::kLenient);
  CHECK(mapped[3].skipped);
}

TEST_CASE("map_labels: empty tier rejected") {
  IntervalTier tier;
  tier.name = "MAU";
  CHECK_THROWS_AS(map_labels(tier, test_label_map(), test_vocab(), Mode::kStrict),
                  MergeError);
}

TEST_CASE("align_streams: identical sequences pair fully") {
  const Vocabulary v = test_vocab();
  const auto mapped =
      map_labels(dom_tier(), test_label_map(), v, Mode::kStrict);
  // lm stream: d ɔ m
  const std::vector<TokenId> lm_ids = {2, 4, 3};
  const Alignment a = align_streams(mapped, lm_ids, 0, Mode::kStrict);
  REQUIRE(a.pairs.size() == 3);
  CHECK(a.pairs[0].interval_index == 1);
  CHECK(a.pairs[0].lm_position == 0);
  CHECK(a.pairs[2].lm_position == 2);
  CHECK(a.mismatches == 0);
  CHECK(!a.first_divergence.has_value());
}

TEST_CASE("align_streams: pause intervals match space tokens") {
  const Vocabulary v = test_vocab();
  IntervalTier tier = dom_tier();
  // d o <sil> m a : pause inside, surrounded by phonemes
  tier.intervals = {{0.0, 0.2, "d"},
                    {0.2, 0.4, "o"},
                    {0.4, 0.6, "sil"},
                    {0.6, 0.8, "m"},
                    {0.8, 1.0, "a"}};
  const auto mapped = map_labels(tier, test_label_map(), v, Mode::kStrict);
  const std::vector<TokenId> lm_ids = {2, 4, 0, 3, 1};  // d ɔ _ m a
  const Alignment a = align_streams(mapped, lm_ids, 0, Mode::kStrict);
  CHECK(a.pairs.size() == 4);
  CHECK(a.pauses_matched == 1);
  CHECK(a.spaces_absorbed == 0);
}

TEST_CASE("align_streams: word-boundary space without pause is absorbed") {
  const Vocabulary v = test_vocab();
  IntervalTier tier;
  tier.name = "MAU";
  tier.xmin = 0;
  tier.xmax = 0.4;
  tier.intervals = {{0.0, 0.2, "m"}, {0.2, 0.4, "a"}};
  const auto mapped = map_labels(tier, test_label_map(), v, Mode::kStrict);
  const std::vector<TokenId> lm_ids = {3, 0, 1};  // m _ a
  const Alignment a = align_streams(mapped, lm_ids, 0, Mode::kStrict);
  CHECK(a.pairs.size() == 2);
  CHECK(a.spaces_absorbed == 1);
}

TEST_CASE("align_streams: substitution reports the divergence position") {
  const Vocabulary v = test_vocab();
  const auto mapped =
      map_labels(dom_tier(), test_label_map(), v, Mode::kStrict);
  const std::vector<TokenId> lm_ids = {2, 1, 3};  // d a m (a != ɔ)
  CHECK_THROWS_WITH_AS(align_streams(mapped, lm_ids, 0, Mode::kStrict),
                       doctest::Contains("position 1"), MergeError);
  const Alignment a = align_streams(mapped, lm_ids, 0, Mode::kLenient);
  CHECK(a.mismatches == 1);
  REQUIRE(a.first_divergence.has_value());
  CHECK(*a.first_divergence == 1);
  CHECK(a.pairs.size() == 2);  // d and m still pair
}

TEST_CASE("align_streams: exhausted stream is a divergence") {
  const Vocabulary v = test_vocab();
  const auto mapped =
      map_labels(dom_tier(), test_label_map(), v, Mode::kStrict);
  const std::vector<TokenId> lm_ids = {2, 4};  // missing final m
  CHECK_THROWS_AS(align_streams(mapped, lm_ids, 0, Mode::kStrict), MergeError);
  const Alignment a = align_streams(mapped, lm_ids, 0, Mode::kLenient);
  CHECK(a.mismatches == 1);
}

namespace {

// Assembles minimal RecordInputs around the dom tier.
struct RecordFixture {
  std::vector<MappedInterval> mapped;
  Alignment alignment;
  info::SurprisalSeries series;
  std::map<TokenId, double> inf;
  std::vector<IntervalFeatures> features;
  std::vector<int> word_index;

  RecordFixture() {
    const Vocabulary v = test_vocab();
    mapped = map_labels(dom_tier(), test_label_map(), v, Mode::kStrict);
    const std::vector<TokenId> lm_ids = {2, 4, 3};
    alignment = align_streams(mapped, lm_ids, 0, Mode::kStrict);
    series.window = 10;
    for (size_t i = 0; i < lm_ids.size(); ++i) {
      info::SurprisalEntry e;
      e.token = lm_ids[i];
      e.context_length = static_cast<int>(i);
      if (i > 0) {
        e.surprisal_bits = 2.0 + static_cast<double>(i);
        e.entropy_bits = 1.5;
      }
      series.entries.push_back(e);
    }
    inf = {{2, 2.5}, {3, 3.5}, {4, 3.0}};
    features.resize(mapped.size());
    // Vowel features on interval 2 ("o").
    features[2].is_vowel = true;
    dsp::ContourSample f0;
    for (int k = 0; k < 9; ++k) {
      f0.values[static_cast<size_t>(k)] = 150.0 + k;
    }
    features[2].f0 = f0;
    features[2].f1 = f0;
    features[2].f2 = f0;
    features[2].f3 = f0;
    features[2].tilt = 0.8;
    features[2].centroid = 900.0;
    features[1].tilt = 0.1;
    features[1].centroid = 2500.0;
    features[3].tilt = 0.2;
    features[3].centroid = 1200.0;
    word_index = {0, 0, 0};
  }

  RecordInputs inputs() const {
    RecordInputs in;
    in.file_id = "utt";
    in.speaker_id = "spk";
    in.mapped = &mapped;
    in.alignment = &alignment;
    in.series = &series;
    in.informativity = &inf;
    in.features = &features;
    in.word_index_of_position = &word_index;
    return in;
  }
};

}  // namespace

TEST_CASE("build_records: one record per aligned phoneme, flags correct") {
  const RecordFixture fx;
  const auto records = build_records(fx.inputs());
  REQUIRE(records.size() == 3);

  // Conservation: records == mapped non-pause intervals (none skipped).
  size_t non_pause = 0;
  for (const auto& m : fx.mapped) {
    if (m.token.has_value()) ++non_pause;
  }
  CHECK(records.size() == non_pause);

  const PhonemeRecord& d = records[0];
  CHECK(d.label == "d");
  CHECK(d.duration == doctest::Approx(0.2));
  CHECK(d.surprisal.flag == FieldFlag::kUndefined);  // LM position 0
  CHECK(d.f0[0].flag == FieldFlag::kNotApplicable);  // consonant
  CHECK(d.tilt.is_ok());

  const PhonemeRecord& o = records[1];
  CHECK(o.label == "\xC9\x94");
  CHECK(o.surprisal.is_ok());
  CHECK(o.surprisal.value == doctest::Approx(3.0));  // position 1 fixture
  CHECK(o.f0[0].is_ok());
  CHECK(o.informativity.value == doctest::Approx(3.0));

  // Deterministic row order by start time.
  CHECK(records[0].start < records[1].start);
  CHECK(records[1].start < records[2].start);
}

TEST_CASE("build_records: every token id decodes to the mapped target") {
  const RecordFixture fx;
  const Vocabulary v = test_vocab();
  for (const auto& r : build_records(fx.inputs())) {
    CHECK(v.token_of(r.token_id) == r.label);
  }
}

TEST_CASE("normalize_records: per-speaker contour z-scoring") {
  RecordFixture fx;
  auto records = build_records(fx.inputs());
  const size_t flagged = normalize_records(records);
  CHECK(flagged == 0);
  // The nine f0 slots of the vowel were 150..158; after z-scoring their
  // mean is 0 and their n-1 sd is 1.
  double mean = 0.0;
  int n = 0;
  for (const auto& rec : records) {
    for (const auto& v : rec.f0) {
      if (v.is_ok()) {
        mean += v.value;
        ++n;
      }
    }
  }
  REQUIRE(n == 9);
  CHECK(std::fabs(mean / n) < 1e-12);
}

TEST_CASE("normalize_records: degenerate groups get flagged missing") {
  RecordFixture fx;
  auto records = build_records(fx.inputs());
  // Make all f1 slots identical: zero variance.
  for (auto& rec : records) {
    for (auto& v : rec.f1) {
      if (v.is_ok()) v.value = 500.0;
    }
  }
  const size_t flagged = normalize_records(records);
  CHECK(flagged == 9);
  for (const auto& rec : records) {
    for (const auto& v : rec.f1) {
      CHECK(!v.is_ok());
    }
  }
}

TEST_CASE("write_table: zero records give a header-only file") {
  const std::string text = write_table({});
  const auto rows = csv::parse(text);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].size() == table_header().size());
  CHECK(rows[0][0] == "file");
  // contour columns expanded
  bool found_f0_9 = false, found_f3_1 = false;
  for (const auto& h : rows[0]) {
    if (h == "f0_9") found_f0_9 = true;
    if (h == "F3_1") found_f3_1 = true;
  }
  CHECK(found_f0_9);
  CHECK(found_f3_1);
}

TEST_CASE("write_table: quoting and determinism") {
  RecordFixture fx;
  auto records = build_records(fx.inputs());
  records[0].label = "a,b";  // force quoting
  const std::string t1 = write_table(records);
  const std::string t2 = write_table(records);
  CHECK(t1 == t2);
  CHECK(t1.find("\"a,b\"") != std::string::npos);
}

TEST_CASE("write_table: parsing recovers numeric fields within 1e-9") {
  RecordFixture fx;
  auto records = build_records(fx.inputs());
  const std::string text = write_table(records);
  const auto rows = csv::parse(text);
  REQUIRE(rows.size() == records.size() + 1);
  const auto& header = rows[0];
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    FAIL(("missing column " + name).c_str());
    return size_t(0);
  };
  const size_t c_start = col("start");
  const size_t c_surprisal = col("surprisal");
  const size_t c_flag = col("surprisal_flag");
  for (size_t r = 0; r < records.size(); ++r) {
    const auto& row = rows[r + 1];
    CHECK(std::fabs(std::strtod(row[c_start].c_str(), nullptr) -
                    records[r].start) < 1e-9);
    if (records[r].surprisal.is_ok()) {
      CHECK(std::fabs(std::strtod(row[c_surprisal].c_str(), nullptr) -
                      records[r].surprisal.value) < 1e-9);
      CHECK(row[c_flag] == "ok");
    } else {
      CHECK(row[c_surprisal].empty());
      CHECK(row[c_flag] == "undefined");
    }
  }
}

TEST_CASE("shipped label map parses and marks aligner pauses") {
  const LabelMap map =
      LabelMap::load_file(std::string(PHONPIPE_DATA_DIR) + "/labelmap_pl.tsv");
  CHECK(map.entries.at("tS") == "t\xCD\xA1\xCA\x82");
  CHECK(map.entries.at("o") == "\xC9\x94");
  CHECK(map.entries.at("e~") == "\xC9\x9B\xCC\x83");
  CHECK(map.is_pause("<p:>"));
  CHECK(map.is_pause("sil"));
  // Every target tokenizes to exactly one phoneme token.
  for (const auto& [label, target] : map.entries) {
    const auto toks = tokenize(target);
    REQUIRE(toks.size() == 1);
    CHECK(toks[0].text == target);
  }
}

TEST_CASE("csv: escape and parse round-trip") {
  testutil::Rng rng(5);
  const std::string samples[] = {"plain", "with,comma", "with\"quote",
                                 "multi\nline", "", "  spaced  "};
  std::vector<std::string> row(samples, samples + 6);
  const std::string text = csv::join_row(row);
  const auto rows = csv::parse(text);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == row);
}
