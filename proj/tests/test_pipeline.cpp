#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "phonpipe/corpus.hpp"
#include "phonpipe/csv.hpp"
#include "phonpipe/error.hpp"
#include "phonpipe/lm.hpp"
#include "phonpipe/pipeline.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using namespace phonpipe;
using namespace phonpipe::pipeline;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config: parsing, overrides, and errors") {
  const std::string path = "/tmp/phonpipe_test_config.cfg";
  testutil::write_file(path,
                       "# comment\n"
                       "paths.out_dir = /tmp/x\n"
                       "dsp.pitch_floor = 75\n"
                       "run.jobs=2\n"
                       "flag.on = true\n");
  Config cfg = Config::load_file(path);
  CHECK(cfg.get_string("paths.out_dir", "") == "/tmp/x");
  CHECK(cfg.get_double("dsp.pitch_floor", 0) == 75.0);
  CHECK(cfg.get_int("run.jobs", 0) == 2);
  CHECK(cfg.get_bool("flag.on", false));
  CHECK(cfg.get_bool("flag.off", false) == false);
  CHECK(cfg.get_string("absent", "dflt") == "dflt");
  CHECK_THROWS_AS(cfg.require_string("absent"), ConfigError);
  cfg.set("dsp.pitch_floor", "80");
  CHECK(cfg.get_double("dsp.pitch_floor", 0) == 80.0);

  testutil::write_file(path, "not a key value line\n");
  CHECK_THROWS_AS(Config::load_file(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("pipeline: full ingest -> train -> extract -> merge on the fixture") {
  const testutil::E2EFixture fx =
      testutil::make_e2e_fixture("/tmp/phonpipe_e2e");
  const Config cfg = Config::load_file(fx.config_path);
  std::ostringstream log;

  SUBCASE("dry run validates without writing") {
    REQUIRE(cmd_pipeline(cfg, /*dry_run=*/true, log) == 0);
    CHECK(!fs::exists(fs::path(fx.out_dir) / "vocab.txt"));
  }

  SUBCASE("full run") {
    REQUIRE(cmd_ingest(cfg, false, log) == 0);
    const fs::path out(fx.out_dir);
    REQUIRE(fs::exists(out / "train.bin"));
    REQUIRE(fs::exists(out / "dev.bin"));
    REQUIRE(fs::exists(out / "vocab.txt"));
    const Provenance prov =
        read_provenance((out / "provenance.json").string());
    CHECK(prov.n_documents == 2);
    CHECK(prov.ratio == 0.9);
    CHECK(prov.backend_name == "g2p");

    // The fixture inventory: space, a, d, l, m, ɔ.
    const Vocabulary vocab =
        Vocabulary::load_file((out / "vocab.txt").string());
    CHECK(vocab.size() == 6);
    CHECK(vocab.contains(" "));
    CHECK(vocab.contains("\xC9\x94"));

    // Rerunning ingest with the same seed writes identical datasets.
    const std::string before = slurp((out / "train.bin").string());
    REQUIRE(cmd_ingest(cfg, false, log) == 0);
    CHECK(slurp((out / "train.bin").string()) == before);

    REQUIRE(cmd_train(cfg, false, log) == 0);
    REQUIRE(fs::exists(out / "model.ckpt"));
    REQUIRE(fs::exists(out / "train_log.jsonl"));
    const lm::Checkpoint ckpt =
        lm::load_checkpoint((out / "model.ckpt").string(), vocab.hash());
    CHECK(ckpt.config.vocab_size == 6);
    CHECK(ckpt.dev_loss < 2.0);  // repetitive corpus trains fast

    REQUIRE(cmd_extract(cfg, false, log) == 0);
    REQUIRE(fs::exists(out / "tracks" / "utt1.pitch.txt"));
    REQUIRE(fs::exists(out / "tracks" / "utt1.formants.txt"));
    REQUIRE(fs::exists(out / "tracks" / "utt1.phones.tsv"));
    REQUIRE(fs::exists(out / "extract_report.json"));

    // Extract is deterministic: re-running produces byte-identical tracks.
    const std::string pitch_before =
        slurp((out / "tracks" / "utt1.pitch.txt").string());
    REQUIRE(cmd_extract(cfg, false, log) == 0);
    CHECK(slurp((out / "tracks" / "utt1.pitch.txt").string()) == pitch_before);

    REQUIRE(cmd_merge(cfg, false, log) == 0);
    REQUIRE(fs::exists(out / "phonemes.csv"));
    REQUIRE(fs::exists(out / "merge_report.json"));

    const auto rows = csv::parse(slurp((out / "phonemes.csv").string()));
    REQUIRE(static_cast<int>(rows.size()) == fx.n_phoneme_intervals + 1);
    const auto& header = rows[0];
    auto col = [&](const std::string& name) {
      for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
      }
      FAIL(("missing column " + name).c_str());
      return size_t(0);
    };
    // First phoneme 'd' sits at LM position 0: surprisal undefined.
    CHECK(rows[1][col("label")] == "d");
    CHECK(rows[1][col("surprisal")].empty());
    CHECK(rows[1][col("surprisal_flag")] == "undefined");
    // Later phonemes carry defined surprisal.
    CHECK(rows[2][col("surprisal_flag")] == "ok");
    CHECK(!rows[2][col("surprisal")].empty());
    // The vowel rows carry contour values; consonants are not-applicable.
    CHECK(rows[2][col("f0_5_flag")] == "ok");
    CHECK(rows[1][col("f0_5_flag")] == "na");
    // Word indices: "dom" = 0, "dam" = 1.
    CHECK(rows[1][col("word_index")] == "0");
    CHECK(rows[6][col("word_index")] == "1");
    // Speaker mapping applied.
    CHECK(rows[1][col("speaker")] == "spk1");

    // Re-running merge is byte-identical.
    const std::string csv_before = slurp((out / "phonemes.csv").string());
    REQUIRE(cmd_merge(cfg, false, log) == 0);
    CHECK(slurp((out / "phonemes.csv").string()) == csv_before);
  }
}

TEST_CASE("pipeline: surprisal command writes the per-token table") {
  const testutil::E2EFixture fx =
      testutil::make_e2e_fixture("/tmp/phonpipe_e2e_surp");
  Config cfg = Config::load_file(fx.config_path);
  std::ostringstream log;
  REQUIRE(cmd_ingest(cfg, false, log) == 0);
  REQUIRE(cmd_train(cfg, false, log) == 0);

  const std::string out_csv = fx.out_dir + "/surp_test.csv";
  REQUIRE(cmd_surprisal(cfg, fx.ipa_path, false, out_csv, false, log) == 0);
  const auto rows = csv::parse(slurp(out_csv));
  // "dɔm dam" = 7 tokens + header
  REQUIRE(rows.size() == 8);
  CHECK(rows[0][0] == "position");
  CHECK(rows[1][3].empty());   // position 0: no surprisal
  CHECK(!rows[2][3].empty());  // position 1: defined
  // context_length column: min(i, window)
  CHECK(rows[1][2] == "0");
  CHECK(rows[2][2] == "1");

  // Derived per-word table: two words of three phonemes each.
  const auto wrows = csv::parse(slurp(fx.out_dir + "/surp_test_words.csv"));
  REQUIRE(wrows.size() == 3);
  CHECK(wrows[1][2] == "3");
  CHECK(wrows[1][3] == "0");  // first word misses position 0's surprisal
  CHECK(wrows[2][2] == "3");
  CHECK(wrows[2][3] == "1");

  SUBCASE("window flag changes only long-context rows") {
    const std::string narrow_csv = fx.out_dir + "/surp_narrow.csv";
    Config narrow = cfg;
    narrow.set("surprisal.window", "2");
    REQUIRE(cmd_surprisal(narrow, fx.ipa_path, false, narrow_csv, false,
                          log) == 0);
    const auto nrows = csv::parse(slurp(narrow_csv));
    for (size_t r = 1; r < nrows.size(); ++r) {
      const int expect = std::min<int>(static_cast<int>(r - 1), 2);
      CHECK(nrows[r][2] == std::to_string(expect));
    }
    // Positions with context <= 2 agree with the window-10 run.
    CHECK(nrows[1][3] == rows[1][3]);
    CHECK(nrows[2][3] == rows[2][3]);
    CHECK(nrows[3][3] == rows[3][3]);
  }
}

TEST_CASE("pipeline: strict divergence fails, lenient counts and passes") {
  const testutil::E2EFixture fx =
      testutil::make_e2e_fixture("/tmp/phonpipe_e2e_div");
  Config cfg = Config::load_file(fx.config_path);
  std::ostringstream log;
  REQUIRE(cmd_ingest(cfg, false, log) == 0);
  REQUIRE(cmd_train(cfg, false, log) == 0);
  REQUIRE(cmd_extract(cfg, false, log) == 0);

  // Corrupt the transcript: substitute the second word's vowel.
  testutil::write_file(fx.ipa_path, "d\xC9\x94m d\xC9\x94m");

  CHECK(cmd_merge(cfg, false, log) == 1);  // strict is the default

  Config lenient = cfg;
  lenient.set("run.mode", "lenient");
  CHECK(cmd_merge(lenient, false, log) == 0);
  const std::string report =
      slurp(fx.out_dir + "/merge_report.json");
  CHECK(report.find("\"mismatches\": 1") != std::string::npos);
}

TEST_CASE("pipeline: missing wav is a per-file error, batch continues") {
  const testutil::E2EFixture fx =
      testutil::make_e2e_fixture("/tmp/phonpipe_e2e_miss");
  Config cfg = Config::load_file(fx.config_path);
  std::ostringstream log;
  // A second TextGrid without audio.
  fs::copy_file(fx.textgrid_path,
                fs::path(fx.root) / "grids" / "utt2.TextGrid");
  REQUIRE(cmd_ingest(cfg, false, log) == 0);

  Config lenient = cfg;
  lenient.set("run.mode", "lenient");
  CHECK(cmd_extract(lenient, false, log) == 0);  // continues, reports
  CHECK(fs::exists(fs::path(fx.out_dir) / "tracks" / "utt1.phones.tsv"));
  const std::string report = slurp(fx.out_dir + "/extract_report.json");
  CHECK(report.find("missing wav") != std::string::npos);

  CHECK(cmd_extract(cfg, false, log) == 1);  // strict mode: nonzero exit
}

TEST_CASE("pipeline: ingest rejects an empty manifest") {
  const testutil::E2EFixture fx =
      testutil::make_e2e_fixture("/tmp/phonpipe_e2e_empty");
  testutil::write_file(fx.root + "/manifest.txt", "\n");
  const Config cfg = Config::load_file(fx.config_path);
  std::ostringstream log;
  CHECK_THROWS_WITH_AS(cmd_ingest(cfg, false, log),
                       doctest::Contains("empty manifest"), Error);
}

TEST_CASE("pipeline: parallel extract is byte-identical to serial") {
  const testutil::E2EFixture fx =
      testutil::make_e2e_fixture("/tmp/phonpipe_e2e_jobs");
  // A second utterance so two workers actually run.
  fs::copy_file(fx.wav_path, fs::path(fx.root) / "audio" / "utt2.wav");
  fs::copy_file(fx.textgrid_path,
                fs::path(fx.root) / "grids" / "utt2.TextGrid");
  Config cfg = Config::load_file(fx.config_path);
  std::ostringstream log;

  REQUIRE(cmd_extract(cfg, false, log) == 0);  // run.jobs = 1 in the fixture
  const std::string serial1 =
      slurp(fx.out_dir + "/tracks/utt1.phones.tsv");
  const std::string serial2 =
      slurp(fx.out_dir + "/tracks/utt2.phones.tsv");

  Config parallel = cfg;
  parallel.set("run.jobs", "2");
  REQUIRE(cmd_extract(parallel, false, log) == 0);
  CHECK(slurp(fx.out_dir + "/tracks/utt1.phones.tsv") == serial1);
  CHECK(slurp(fx.out_dir + "/tracks/utt2.phones.tsv") == serial2);
}

TEST_CASE("pipeline: exhausted patience is recorded in the training log") {
  const testutil::E2EFixture fx =
      testutil::make_e2e_fixture("/tmp/phonpipe_e2e_early");
  Config cfg = Config::load_file(fx.config_path);
  cfg.set("train.lr_max", "0");  // frozen: dev loss can never improve
  cfg.set("train.lr_min", "0");
  cfg.set("train.eval_interval", "20");
  cfg.set("train.eval_patience", "1");
  std::ostringstream log;
  REQUIRE(cmd_ingest(cfg, false, log) == 0);
  REQUIRE(cmd_train(cfg, false, log) == 0);
  const std::string tl = slurp(fx.out_dir + "/train_log.jsonl");
  CHECK(tl.find("\"event\":\"early_stop\"") != std::string::npos);
}

TEST_CASE("pipeline: train resume continues the iteration count") {
  const testutil::E2EFixture fx =
      testutil::make_e2e_fixture("/tmp/phonpipe_e2e_resume");
  Config cfg = Config::load_file(fx.config_path);
  std::ostringstream log;
  REQUIRE(cmd_ingest(cfg, false, log) == 0);
  REQUIRE(cmd_train(cfg, false, log) == 0);
  const lm::Checkpoint first =
      lm::load_checkpoint(fx.out_dir + "/model.ckpt");

  Config resume = cfg;
  resume.set("train.resume", "true");
  resume.set("train.max_iters", "400");  // beyond the first run's 300
  REQUIRE(cmd_train(resume, false, log) == 0);
  const lm::Checkpoint second =
      lm::load_checkpoint(fx.out_dir + "/model.ckpt");
  CHECK(second.iteration >= first.iteration);
}
