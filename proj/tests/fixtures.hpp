#ifndef PHONPIPE_TEST_FIXTURES_HPP
#define PHONPIPE_TEST_FIXTURES_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include "phonpipe/textgrid.hpp"
#include "phonpipe/wav.hpp"
#include "test_util.hpp"

namespace testutil {

// A complete tiny end-to-end corpus: two-word synthetic utterance with a
// hand-written TextGrid and IPA transcript, a text corpus for ingest, a
// grapheme table, a label map, and a pipeline config pointing at it all.
struct E2EFixture {
  std::string root;
  std::string config_path;
  std::string out_dir;
  std::string wav_path;
  std::string textgrid_path;
  std::string ipa_path;
  // The utterance "dom dam": six phoneme intervals around pauses.
  int n_phoneme_intervals = 6;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline E2EFixture make_e2e_fixture(const std::string& root) {
  namespace fs = std::filesystem;
  E2EFixture f;
  f.root = root;
  fs::remove_all(root);
  fs::create_directories(root);
  for (const char* sub : {"corpus", "audio", "grids", "ipa", "out"}) {
    fs::create_directories(fs::path(root) / sub);
  }
  f.out_dir = (fs::path(root) / "out").string();

  // ---- ingest corpus: repetitive text over a small inventory
  std::string doc1, doc2;
  for (int i = 0; i < 30; ++i) doc1 += "dom dam mama ";
  for (int i = 0; i < 30; ++i) doc2 += "dala ma dom lala ";
  write_file((fs::path(root) / "corpus" / "doc1.txt").string(), doc1);
  write_file((fs::path(root) / "corpus" / "doc2.txt").string(), doc2);
  write_file((fs::path(root) / "manifest.txt").string(),
             (fs::path(root) / "corpus" / "doc1.txt").string() + "\n" +
                 (fs::path(root) / "corpus" / "doc2.txt").string() + "\n");

  // ---- minimal grapheme table (subset of the shipped Polish one)
  write_file((fs::path(root) / "g2p.tsv").string(),
             "a\ta\nd\td\nl\tl\nm\tm\no\t\xC9\x94\n");

  // ---- label map: aligner labels for the fixture grid
  write_file((fs::path(root) / "labelmap.tsv").string(),
             "a\ta\nd\td\nm\tm\no\t\xC9\x94\n<p:>\t<pause>\n");

  // ---- synthetic utterance "dom dam"
  const double fs_audio = 16000.0;
  const double total = 1.2;
  phonpipe::AudioBuffer audio;
  audio.sample_rate = fs_audio;
  audio.samples.assign(static_cast<size_t>(total * fs_audio), 0.0);
  Rng noise_rng(404);
  auto put_noise = [&](double t0, double t1) {
    for (size_t i = static_cast<size_t>(t0 * fs_audio);
         i < static_cast<size_t>(t1 * fs_audio); ++i) {
      audio.samples[i] = 0.05 * noise_rng.gauss();
    }
  };
  auto put_vowel = [&](double t0, double t1, double f0, double f1, double f2) {
    const phonpipe::AudioBuffer v =
        synth_vowel(f0, {{f1, 60.0}, {f2, 90.0}}, t1 - t0, fs_audio);
    const size_t off = static_cast<size_t>(t0 * fs_audio);
    for (size_t i = 0; i < v.samples.size() && off + i < audio.samples.size();
         ++i) {
      audio.samples[off + i] = v.samples[i];
    }
  };
  put_noise(0.10, 0.25);                          // d
  put_vowel(0.25, 0.45, 150.0, 500.0, 1500.0);    // o
  put_noise(0.45, 0.60);                          // m
  put_noise(0.60, 0.75);                          // d
  put_vowel(0.75, 0.95, 200.0, 700.0, 1300.0);    // a
  put_noise(0.95, 1.10);                          // m
  f.wav_path = (fs::path(root) / "audio" / "utt1.wav").string();
  phonpipe::write_wav(audio, f.wav_path);

  phonpipe::TextGrid tg;
  tg.xmin = 0.0;
  tg.xmax = total;
  phonpipe::IntervalTier tier;
  tier.name = "MAU";
  tier.xmin = 0.0;
  tier.xmax = total;
  tier.intervals = {{0.00, 0.10, "<p:>"}, {0.10, 0.25, "d"},
                    {0.25, 0.45, "o"},    {0.45, 0.60, "m"},
                    {0.60, 0.75, "d"},    {0.75, 0.95, "a"},
                    {0.95, 1.10, "m"},    {1.10, total, ""}};
  tg.tiers.push_back(tier);
  f.textgrid_path = (fs::path(root) / "grids" / "utt1.TextGrid").string();
  phonpipe::write_textgrid_file(tg, f.textgrid_path);

  f.ipa_path = (fs::path(root) / "ipa" / "utt1.ipa").string();
  write_file(f.ipa_path, "d\xC9\x94m dam");

  write_file((fs::path(root) / "speakers.tsv").string(), "utt1\tspk1\n");

  // ---- pipeline configuration
  std::string cfg;
  cfg += "paths.manifest = " + (fs::path(root) / "manifest.txt").string() + "\n";
  cfg += "paths.out_dir = " + f.out_dir + "\n";
  cfg += "paths.audio_dir = " + (fs::path(root) / "audio").string() + "\n";
  cfg += "paths.textgrid_dir = " + (fs::path(root) / "grids").string() + "\n";
  cfg += "paths.ipa_dir = " + (fs::path(root) / "ipa").string() + "\n";
  cfg += "paths.label_map = " + (fs::path(root) / "labelmap.tsv").string() + "\n";
  cfg += "paths.speakers = " + (fs::path(root) / "speakers.tsv").string() + "\n";
  cfg += "ingest.g2p = table\n";
  cfg += "ingest.table = " + (fs::path(root) / "g2p.tsv").string() + "\n";
  cfg += "ingest.ratio = 0.9\n";
  cfg += "model.n_layers = 2\n";
  cfg += "model.n_heads = 2\n";
  cfg += "model.d_embed = 16\n";
  cfg += "model.block_size = 16\n";
  cfg += "train.batch_size = 8\n";
  cfg += "train.lr_max = 0.003\n";
  cfg += "train.lr_min = 0.0003\n";
  cfg += "train.max_iters = 300\n";
  cfg += "train.eval_interval = 100\n";
  cfg += "train.eval_patience = 10\n";
  cfg += "run.seed = 11\n";
  cfg += "run.jobs = 1\n";
  f.config_path = (fs::path(root) / "pipeline.cfg").string();
  write_file(f.config_path, cfg);
  return f;
}

}  // namespace testutil

#endif  // PHONPIPE_TEST_FIXTURES_HPP
