#include <doctest.h>

#include <algorithm>

#include "phonpipe/error.hpp"
#include "phonpipe/textgrid.hpp"
#include "phonpipe/unicode.hpp"
#include "test_util.hpp"

using namespace phonpipe;

namespace {

const char* kMinimalLong =
    "File type = \"ooTextFile\"\n"
    "Object class = \"TextGrid\"\n"
    "\n"
    "xmin = 0 \n"
    "xmax = 1.5 \n"
    "tiers? <exists> \n"
    "size = 1 \n"
    "item []: \n"
    "    item [1]:\n"
    "        class = \"IntervalTier\" \n"
    "        name = \"phones\" \n"
    "        xmin = 0 \n"
    "        xmax = 1.5 \n"
    "        intervals: size = 1 \n"
    "        intervals [1]:\n"
    "            xmin = 0 \n"
    "            xmax = 1.5 \n"
    "            text = \"a\" \n";

const char* kMinimalShort =
    "File type = \"ooTextFile\"\n"
    "Object class = \"TextGrid\"\n"
    "\n"
    "0\n"
    "2\n"
    "<exists>\n"
    "1\n"
    "\"IntervalTier\"\n"
    "\"MAU\"\n"
    "0\n"
    "2\n"
    "2\n"
    "0\n"
    "0.75\n"
    "\"d\xC9\x94m\"\n"
    "0.75\n"
    "2\n"
    "\"\"\n";

TextGrid two_tier_grid() {
  TextGrid tg;
  tg.xmin = 0.0;
  tg.xmax = 2.0;
  IntervalTier mau;
  mau.name = "MAU";
  mau.xmin = 0.0;
  mau.xmax = 2.0;
  mau.intervals = {{0.0, 0.5, "d"}, {0.5, 1.25, "\xC9\x94"}, {1.25, 2.0, "m"}};
  IntervalTier ort;
  ort.name = "ORT";
  ort.xmin = 0.0;
  ort.xmax = 2.0;
  ort.intervals = {{0.0, 2.0, "dom"}};
  tg.tiers = {mau, ort};
  return tg;
}

}  // namespace

TEST_CASE("parse minimal long-form file") {
  const TextGrid tg = parse_textgrid(kMinimalLong);
  CHECK(tg.xmin == 0.0);
  CHECK(tg.xmax == 1.5);
  REQUIRE(tg.tiers.size() == 1);
  CHECK(tg.tiers[0].name == "phones");
  REQUIRE(tg.tiers[0].intervals.size() == 1);
  CHECK(tg.tiers[0].intervals[0].xmin == 0.0);
  CHECK(tg.tiers[0].intervals[0].xmax == 1.5);
  CHECK(tg.tiers[0].intervals[0].label == "a");
}

TEST_CASE("parse short form") {
  const TextGrid tg = parse_textgrid(kMinimalShort);
  REQUIRE(tg.tiers.size() == 1);
  CHECK(tg.tiers[0].name == "MAU");
  REQUIRE(tg.tiers[0].intervals.size() == 2);
  CHECK(tg.tiers[0].intervals[0].label == "d\xC9\x94m");
  CHECK(tg.tiers[0].intervals[1].label == "");
}

TEST_CASE("UTF-16 input detected by BOM") {
  // Re-encode the minimal file as UTF-16 LE and BE.
  const std::string utf8 = kMinimalLong;
  for (bool big_endian : {false, true}) {
    std::string bytes;
    bytes.push_back(big_endian ? '\xFE' : '\xFF');
    bytes.push_back(big_endian ? '\xFF' : '\xFE');
    for (char32_t cp : unicode::decode_utf8(utf8)) {
      CHECK(cp < 0x10000);  // fixture stays in the BMP
      const char hi = static_cast<char>((cp >> 8) & 0xFF);
      const char lo = static_cast<char>(cp & 0xFF);
      if (big_endian) {
        bytes.push_back(hi);
        bytes.push_back(lo);
      } else {
        bytes.push_back(lo);
        bytes.push_back(hi);
      }
    }
    const TextGrid tg = parse_textgrid(bytes);
    CHECK(tg.xmax == 1.5);
    REQUIRE(tg.tiers.size() == 1);
    CHECK(tg.tiers[0].intervals[0].label == "a");
  }
}

TEST_CASE("UTF-8 BOM is tolerated") {
  std::string bytes = "\xEF\xBB\xBF";
  bytes += kMinimalLong;
  CHECK(parse_textgrid(bytes).xmax == 1.5);
}

TEST_CASE("overlapping intervals rejected with tier and index") {
  std::string bad = kMinimalLong;
  // Turn the single interval into two overlapping ones.
  const std::string needle = "        intervals: size = 1 \n";
  bad.replace(bad.find(needle), needle.size(),
              "        intervals: size = 2 \n");
  bad +=
      "        intervals [2]:\n"
      "            xmin = 1.0 \n"
      "            xmax = 1.5 \n"
      "            text = \"b\" \n";
  // Interval 2 starts at 1.0 but interval 1 ends at 1.5.
  CHECK_THROWS_WITH_AS(parse_textgrid(bad),
                       doctest::Contains("interval 2 of tier 'phones'"),
                       ParseError);
}

TEST_CASE("gap between intervals rejected") {
  TextGrid tg = two_tier_grid();
  tg.tiers[0].intervals[1].xmin = 0.6;  // leaves [0.5, 0.6] uncovered
  const std::string text = serialize_textgrid(tg);
  CHECK_THROWS_WITH_AS(parse_textgrid(text), doctest::Contains("gap"),
                       ParseError);
}

TEST_CASE("duplicate tier names rejected") {
  TextGrid tg = two_tier_grid();
  tg.tiers[1].name = "MAU";
  CHECK_THROWS_WITH_AS(parse_textgrid(serialize_textgrid(tg)),
                       doctest::Contains("duplicate tier name"), ParseError);
}

TEST_CASE("malformed header reports line") {
  CHECK_THROWS_AS(parse_textgrid("not a textgrid\n"), ParseError);
  try {
    parse_textgrid("File type = \"ooTextFile\"\nObject class = \"Pitch\"\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("point tiers are skipped with a warning") {
  std::string text =
      "File type = \"ooTextFile\"\n"
      "Object class = \"TextGrid\"\n"
      "\n"
      "xmin = 0 \n"
      "xmax = 1 \n"
      "tiers? <exists> \n"
      "size = 2 \n"
      "item []: \n"
      "    item [1]:\n"
      "        class = \"TextTier\" \n"
      "        name = \"events\" \n"
      "        xmin = 0 \n"
      "        xmax = 1 \n"
      "        points: size = 1 \n"
      "        points [1]:\n"
      "            number = 0.5 \n"
      "            mark = \"click\" \n"
      "    item [2]:\n"
      "        class = \"IntervalTier\" \n"
      "        name = \"phones\" \n"
      "        xmin = 0 \n"
      "        xmax = 1 \n"
      "        intervals: size = 1 \n"
      "        intervals [1]:\n"
      "            xmin = 0 \n"
      "            xmax = 1 \n"
      "            text = \"x\" \n";
  const TextGrid tg = parse_textgrid(text);
  REQUIRE(tg.tiers.size() == 1);
  CHECK(tg.tiers[0].name == "phones");
  REQUIRE(tg.warnings.size() == 1);
  CHECK(tg.warnings[0].find("events") != std::string::npos);
}

TEST_CASE("serialize: empty label and quote doubling") {
  TextGrid tg = two_tier_grid();
  tg.tiers[0].intervals[0].label = "";
  tg.tiers[0].intervals[1].label = "sa\"id";
  const std::string text = serialize_textgrid(tg);
  CHECK(text.find("text = \"\" ") != std::string::npos);
  CHECK(text.find("text = \"sa\"\"id\" ") != std::string::npos);
  const TextGrid back = parse_textgrid(text);
  CHECK(back.tiers[0].intervals[0].label == "");
  CHECK(back.tiers[0].intervals[1].label == "sa\"id");
}

TEST_CASE("serialize prints times with at least six decimals") {
  const TextGrid tg = parse_textgrid(kMinimalLong);
  const std::string text = serialize_textgrid(tg);
  CHECK(text.find("xmax = 1.500000 ") != std::string::npos);
}

TEST_CASE("round-trip: parse(serialize(tg)) equals tg") {
  const TextGrid tg = two_tier_grid();
  const TextGrid back = parse_textgrid(serialize_textgrid(tg));
  CHECK(structurally_equal(tg, back));
}

TEST_CASE("round-trip holds on 100 random TextGrids") {
  testutil::Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    const TextGrid tg = testutil::random_textgrid(rng);
    const TextGrid back = parse_textgrid(serialize_textgrid(tg));
    REQUIRE(structurally_equal(tg, back, 1e-9));
  }
}

TEST_CASE("contiguity: interval durations sum to tier duration") {
  testutil::Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const TextGrid tg =
        parse_textgrid(serialize_textgrid(testutil::random_textgrid(rng)));
    for (const IntervalTier& tier : tg.tiers) {
      double sum = 0.0;
      for (const Interval& iv : tier.intervals) sum += iv.xmax - iv.xmin;
      REQUIRE(sum == doctest::Approx(tier.xmax - tier.xmin).epsilon(1e-6));
    }
  }
}

TEST_CASE("find_tier") {
  const TextGrid tg = two_tier_grid();
  CHECK(find_tier(tg, "MAU").intervals.size() == 3);
  CHECK_THROWS_WITH_AS(find_tier(tg, "absent"), doctest::Contains("not found"),
                       Error);
  CHECK_THROWS_AS(find_tier(tg, "mau"), Error);  // case-sensitive
}

TEST_CASE("intervals_overlapping") {
  const TextGrid tg = two_tier_grid();
  const IntervalTier& tier = tg.tiers[0];

  SUBCASE("query exactly one interval's span") {
    const auto hits = intervals_overlapping(tier, 0.5, 1.25);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].label == "\xC9\x94");
  }
  SUBCASE("boundary point belongs to the interval starting there") {
    const auto hits = intervals_overlapping(tier, 0.5, 0.5);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].label == "\xC9\x94");
  }
  SUBCASE("query beyond tier xmax is empty") {
    CHECK(intervals_overlapping(tier, 3.0, 4.0).empty());
  }
  SUBCASE("t0 > t1 is an error") {
    CHECK_THROWS_AS(intervals_overlapping(tier, 1.0, 0.5), Error);
  }
  SUBCASE("partition at interval boundaries returns each interval once") {
    std::vector<Interval> seen;
    for (const Interval& iv : tier.intervals) {
      const auto hits = intervals_overlapping(tier, iv.xmin, iv.xmax);
      REQUIRE(hits.size() == 1);
      seen.push_back(hits[0]);
    }
    CHECK(seen.size() == tier.intervals.size());
  }
}
