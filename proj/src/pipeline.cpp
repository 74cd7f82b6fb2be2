#include "phonpipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "phonpipe/corpus.hpp"
#include "phonpipe/csv.hpp"
#include "phonpipe/dsp.hpp"
#include "phonpipe/error.hpp"
#include "phonpipe/infomeasures.hpp"
#include "phonpipe/ipa_tok.hpp"
#include "phonpipe/lm.hpp"
#include "phonpipe/merge.hpp"
#include "phonpipe/textgrid.hpp"
#include "phonpipe/wav.hpp"

namespace fs = std::filesystem;

namespace phonpipe::pipeline {

// ------------------------- Config -------------------------

namespace {

std::string strip(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Config cfg;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = strip(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not 'key = value': " + t);
    }
    const std::string key = strip(t.substr(0, eq));
    const std::string value = strip(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " has an empty key");
    }
    cfg.kv_[key] = value;
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  auto it = kv_.find(key);
  return it != kv_.end() ? it->second : fallback;
}

std::string Config::require_string(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end() || it->second.empty()) {
    throw ConfigError("missing required config key: " + key);
  }
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str()) {
    throw ConfigError("config key " + key + " is not a number: " + it->second);
  }
  return v;
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    return std::stoll(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key " + key +
                      " is not an integer: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key " + key + " is not a boolean: " + v);
}

// ------------------------- shared helpers -------------------------

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  out << content;
}

std::vector<std::string> sorted_stems(const std::string& dir,
                                      const std::string& extension) {
  if (!fs::is_directory(dir)) {
    throw ConfigError("not a directory: " + dir);
  }
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

std::string collapse_spaces(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      pending = true;
      continue;
    }
    if (pending && !out.empty()) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::unique_ptr<G2PBackend> make_backend(const Config& cfg) {
  const std::string kind = cfg.get_string("ingest.g2p", "table");
  if (kind == "command") {
    return std::make_unique<ProcessG2P>(
        cfg.require_string("ingest.g2p_command"),
        cfg.get_string("ingest.g2p_name", "external"),
        cfg.get_string("ingest.g2p_version", "unversioned"));
  }
  if (kind == "table") {
    const std::string table_path = cfg.require_string("ingest.table");
    std::map<std::string, std::string> table;
    std::ifstream in(table_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open G2P table: " + table_path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const size_t tab = line.find('\t');
      if (tab == std::string::npos) {
        throw ParseError("G2P table line is not tab-separated", lineno);
      }
      table[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return std::make_unique<TableG2P>(std::move(table),
                                      fs::path(table_path).stem().string());
  }
  throw ConfigError("ingest.g2p must be 'table' or 'command', got: " + kind);
}

dsp::PitchParams pitch_params(const Config& cfg) {
  dsp::PitchParams p;
  p.time_step = cfg.get_double("dsp.time_step", 0.01);
  p.floor_hz = cfg.get_double("dsp.pitch_floor", 75.0);
  p.ceiling_hz = cfg.get_double("dsp.pitch_ceiling", 300.0);
  return p;
}

dsp::FormantParams formant_params(const Config& cfg) {
  dsp::FormantParams p;
  p.time_step = cfg.get_double("dsp.time_step", 0.01);
  p.window = cfg.get_double("dsp.formant_window", 0.025);
  p.max_formants = static_cast<int>(cfg.get_int("dsp.max_formants", 5));
  p.ceiling_hz = cfg.get_double("dsp.formant_ceiling", 5000.0);
  p.preemphasis_from = cfg.get_double("dsp.preemphasis_from", 50.0);
  p.max_bandwidth = cfg.get_double("dsp.max_bandwidth", 700.0);
  return p;
}

merge::Mode run_mode(const Config& cfg) {
  const std::string mode = cfg.get_string("run.mode", "strict");
  if (mode == "strict") return merge::Mode::kStrict;
  if (mode == "lenient") return merge::Mode::kLenient;
  throw ConfigError("run.mode must be 'strict' or 'lenient', got: " + mode);
}

int jobs_from(const Config& cfg) {
  const int64_t jobs = cfg.get_int("run.jobs", 0);
  if (jobs > 0) return static_cast<int>(jobs);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Dry runs validate external inputs strictly but tolerate missing artifacts
// that earlier pipeline stages will produce under out_dir.
void check_input(const std::string& path, const std::string& what,
                 bool dry_run, const std::string& out_dir, std::ostream& log) {
  if (fs::is_regular_file(path)) return;
  if (dry_run &&
      path.rfind(fs::path(out_dir).string(), 0) == 0) {
    log << what << " dry-run: " << path
        << " not present yet (produced by an earlier stage)\n";
    return;
  }
  throw ConfigError(what + ": missing input: " + path);
}

std::map<std::string, std::string> load_speakers(const Config& cfg) {
  std::map<std::string, std::string> speakers;
  const std::string path = cfg.get_string("paths.speakers", "");
  if (path.empty()) return speakers;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open speakers file: " + path);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("speakers file line is not tab-separated", lineno);
    }
    speakers[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return speakers;
}

// Interval-level feature rows written by extract and read back by merge.
// One row per tier interval (pauses included), tab-separated; "NA" marks a
// missing value, "-" a not-applicable one.
struct PhoneRow {
  double start = 0.0;
  double end = 0.0;
  std::string label;
  merge::IntervalFeatures features;
};

std::string cell(const std::optional<double>& v, bool applicable) {
  if (!applicable) return "-";
  if (!v.has_value()) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", *v);
  return buf;
}

void write_phone_rows(const std::vector<PhoneRow>& rows,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write phone feature file: " + path);
  out << "start\tend\tlabel\tvowel\ttilt\tcentroid";
  for (const char* base : {"f0", "F1", "F2", "F3"}) {
    for (int k = 1; k <= 9; ++k) out << '\t' << base << '_' << k;
  }
  out << '\n';
  for (const PhoneRow& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g\t%.9g", r.start, r.end);
    out << buf << '\t' << r.label << '\t' << (r.features.is_vowel ? 1 : 0)
        << '\t' << cell(r.features.tilt, true) << '\t'
        << cell(r.features.centroid, true);
    for (const auto* c :
         {&r.features.f0, &r.features.f1, &r.features.f2, &r.features.f3}) {
      for (int k = 0; k < 9; ++k) {
        if (!r.features.is_vowel || !c->has_value()) {
          out << "\t-";
        } else {
          out << '\t' << cell((*c)->values[static_cast<size_t>(k)], true);
        }
      }
    }
    out << '\n';
  }
}

std::vector<PhoneRow> read_phone_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open phone feature file: " + path);
  std::vector<PhoneRow> rows;
  std::string line;
  long lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string col;
    while (std::getline(ls, col, '\t')) cols.push_back(col);
    if (cols.size() != 6 + 36) {
      throw ParseError("phone feature row has wrong column count", lineno);
    }
    PhoneRow r;
    r.start = std::strtod(cols[0].c_str(), nullptr);
    r.end = std::strtod(cols[1].c_str(), nullptr);
    r.label = cols[2];
    r.features.is_vowel = cols[3] == "1";
    auto parse_cell = [](const std::string& s) -> std::optional<double> {
      if (s == "NA" || s == "-") return std::nullopt;
      return std::strtod(s.c_str(), nullptr);
    };
    r.features.tilt = parse_cell(cols[4]);
    r.features.centroid = parse_cell(cols[5]);
    if (r.features.is_vowel) {
      dsp::ContourSample f0, f1, f2, f3;
      dsp::ContourSample* contours[4] = {&f0, &f1, &f2, &f3};
      for (int c = 0; c < 4; ++c) {
        for (int k = 0; k < 9; ++k) {
          contours[c]->values[static_cast<size_t>(k)] =
              parse_cell(cols[static_cast<size_t>(6 + c * 9 + k)]);
        }
      }
      r.features.f0 = f0;
      r.features.f1 = f1;
      r.features.f2 = f2;
      r.features.f3 = f3;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

lm::ModelConfig model_config_from(const Config& cfg, int vocab_size) {
  lm::ModelConfig c;
  c.n_layers = static_cast<int>(cfg.get_int("model.n_layers", 12));
  c.n_heads = static_cast<int>(cfg.get_int("model.n_heads", 12));
  c.d_embed = static_cast<int>(cfg.get_int("model.d_embed", 768));
  c.block_size = static_cast<int>(cfg.get_int("model.block_size", 256));
  c.vocab_size =
      static_cast<int>(cfg.get_int("model.vocab_size", vocab_size));
  c.dropout = cfg.get_double("model.dropout", 0.0);
  return c;
}

lm::TrainConfig train_config_from(const Config& cfg) {
  lm::TrainConfig t;
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 64));
  t.lr_max = cfg.get_double("train.lr_max", 1e-4);
  t.lr_min = cfg.get_double("train.lr_min", 1e-5);
  t.max_iters = cfg.get_int("train.max_iters", 60000);
  t.eval_interval = cfg.get_int("train.eval_interval", 250);
  t.eval_patience = static_cast<int>(cfg.get_int("train.eval_patience", 5));
  t.grad_clip = cfg.get_double("train.grad_clip", 1.0);
  t.eval_batches = static_cast<int>(cfg.get_int("train.eval_batches", 8));
  t.warmup_frac = cfg.get_double("train.warmup_frac", 0.02);
  t.weight_decay = cfg.get_double("train.weight_decay", 0.1);
  t.beta1 = cfg.get_double("train.beta1", 0.9);
  t.beta2 = cfg.get_double("train.beta2", 0.95);
  t.seed = static_cast<uint64_t>(cfg.get_int("run.seed", 0));
  return t;
}

}  // namespace

// ------------------------- ingest -------------------------

int cmd_ingest(const Config& cfg, bool dry_run, std::ostream& log) {
  const std::string manifest = cfg.require_string("paths.manifest");
  const std::string out_dir = cfg.require_string("paths.out_dir");
  const double ratio = cfg.get_double("ingest.ratio", 0.9);
  const uint64_t seed = static_cast<uint64_t>(cfg.get_int("run.seed", 0));

  std::vector<std::string> doc_paths;
  {
    std::ifstream in(manifest, std::ios::binary);
    if (!in) throw ConfigError("cannot open manifest: " + manifest);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string t = strip(line);
      if (!t.empty() && t[0] != '#') doc_paths.push_back(t);
    }
  }
  if (doc_paths.empty()) throw Error("ingest: empty manifest");
  for (const std::string& p : doc_paths) {
    if (!fs::is_regular_file(p)) throw Error("ingest: missing document: " + p);
  }
  std::unique_ptr<G2PBackend> backend = make_backend(cfg);
  if (dry_run) {
    log << "ingest dry-run: " << doc_paths.size() << " documents, backend "
        << backend->name() << ", ratio " << ratio << "\n";
    return 0;
  }
  fs::create_directories(out_dir);

  std::string joined_ipa;
  for (const std::string& p : doc_paths) {
    const std::string cleaned = clean_text(read_text_file(p));
    const PhonemizeResult r = phonemize(cleaned, *backend);
    const std::string ipa = collapse_spaces(r.ipa);
    if (ipa.empty()) continue;
    if (!joined_ipa.empty()) joined_ipa += " ";
    joined_ipa += ipa;
  }
  if (joined_ipa.empty()) throw Error("ingest: corpus is empty after G2P");

  const std::vector<PhonemeToken> tokens = tokenize(joined_ipa);
  const Vocabulary vocab = Vocabulary::build(tokens);
  const std::vector<TokenId> ids = vocab.encode(tokens);
  const DatasetSplit split = split_corpus(ids, ratio, seed);

  const fs::path out(out_dir);
  write_dataset(split.train, (out / "train.bin").string());
  write_dataset(split.dev, (out / "dev.bin").string());
  vocab.save_file((out / "vocab.txt").string());

  Provenance prov;
  prov.backend_name = backend->name();
  prov.backend_version = backend->version();
  prov.seed = seed;
  prov.ratio = ratio;
  prov.n_documents = doc_paths.size();
  prov.n_tokens = ids.size();
  prov.vocab_size = vocab.size();
  write_provenance(prov, (out / "provenance.json").string());

  log << "ingest: " << doc_paths.size() << " documents, " << ids.size()
      << " tokens, vocabulary " << vocab.size() << ", train "
      << split.train.size() << " / dev " << split.dev.size() << "\n";
  return 0;
}

// ------------------------- train -------------------------

int cmd_train(const Config& cfg, bool dry_run, std::ostream& log) {
  const std::string out_dir = cfg.require_string("paths.out_dir");
  const fs::path out(out_dir);
  const std::string vocab_path =
      cfg.get_string("paths.vocab", (out / "vocab.txt").string());
  const std::string train_path =
      cfg.get_string("paths.train_bin", (out / "train.bin").string());
  const std::string dev_path =
      cfg.get_string("paths.dev_bin", (out / "dev.bin").string());
  const std::string ckpt_path =
      cfg.get_string("paths.checkpoint", (out / "model.ckpt").string());

  for (const std::string& p : {vocab_path, train_path, dev_path}) {
    check_input(p, "train", dry_run, out_dir, log);
  }
  lm::TrainConfig t = train_config_from(cfg);
  if (dry_run) {
    log << "train dry-run: max_iters " << t.max_iters << ", batch "
        << t.batch_size << "\n";
    return 0;
  }
  const Vocabulary vocab = Vocabulary::load_file(vocab_path);
  DatasetSplit data;
  data.train = read_dataset(train_path);
  data.dev = read_dataset(dev_path);
  const lm::ModelConfig mc =
      model_config_from(cfg, static_cast<int>(vocab.size()));
  fs::create_directories(out_dir);

  std::optional<lm::Gpt> model;
  if (cfg.get_bool("train.resume", false)) {
    const lm::Checkpoint prev = lm::load_checkpoint(ckpt_path, vocab.hash());
    t.start_iter = prev.iteration;
    model.emplace(prev);
    log << "train: resuming from iteration " << prev.iteration << "\n";
  } else {
    model.emplace(mc, t.seed);
  }

  std::vector<lm::EvalRecord> records;
  const lm::Checkpoint best =
      lm::train(*model, data, t, vocab.hash(), &records);
  lm::save_checkpoint(best, ckpt_path);

  // Append-only evaluation log, one JSON record per evaluation.
  std::ofstream tl((out / "train_log.jsonl").string(),
                   std::ios::binary | std::ios::app);
  for (const lm::EvalRecord& r : records) {
    nlohmann::json j = {{"iteration", r.iteration},
                        {"train_loss", r.train_loss},
                        {"dev_loss", r.dev_loss},
                        {"lr", r.lr}};
    tl << j.dump() << "\n";
  }
  const bool early =
      !records.empty() && records.back().iteration < t.max_iters;
  if (early) {
    nlohmann::json j = {{"event", "early_stop"},
                        {"iteration", records.back().iteration}};
    tl << j.dump() << "\n";
  }

  log << "train: best dev loss " << best.dev_loss << " at iteration "
      << best.iteration << (early ? " (early stop)" : "") << ", checkpoint "
      << ckpt_path << "\n";
  return 0;
}

// ------------------------- surprisal -------------------------

int cmd_surprisal(const Config& cfg, const std::string& input_path,
                  bool input_is_ids, const std::string& out_path,
                  bool dry_run, std::ostream& log) {
  const std::string out_dir = cfg.require_string("paths.out_dir");
  const fs::path out(out_dir);
  const std::string vocab_path =
      cfg.get_string("paths.vocab", (out / "vocab.txt").string());
  const std::string ckpt_path =
      cfg.get_string("paths.checkpoint", (out / "model.ckpt").string());
  const int window = static_cast<int>(cfg.get_int("surprisal.window", 10));

  if (!fs::is_regular_file(input_path)) {
    throw ConfigError("surprisal: missing input: " + input_path);
  }
  check_input(vocab_path, "surprisal", dry_run, out_dir, log);
  check_input(ckpt_path, "surprisal", dry_run, out_dir, log);
  if (dry_run) {
    log << "surprisal dry-run: input " << input_path << ", window " << window
        << "\n";
    return 0;
  }
  const Vocabulary vocab = Vocabulary::load_file(vocab_path);
  const lm::Checkpoint ckpt = lm::load_checkpoint(ckpt_path, vocab.hash());
  lm::Gpt model(ckpt);

  std::vector<TokenId> ids;
  if (input_is_ids) {
    ids = read_dataset(input_path);
  } else {
    const std::string ipa = collapse_spaces(read_text_file(input_path));
    ids = vocab.encode(tokenize(ipa));
  }
  const info::SurprisalSeries series =
      info::sequence_surprisals(model, ids, window);

  std::string csv_text =
      csv::join_row({"position", "token", "context_length", "surprisal",
                     "entropy"});
  for (size_t i = 0; i < series.entries.size(); ++i) {
    const info::SurprisalEntry& e = series.entries[i];
    auto num = [](const std::optional<double>& v) {
      if (!v) return std::string();
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.9g", *v);
      return std::string(buf);
    };
    csv_text += csv::join_row({std::to_string(i), vocab.token_of(e.token),
                               std::to_string(e.context_length),
                               num(e.surprisal_bits), num(e.entropy_bits)});
  }
  const std::string dest =
      out_path.empty() ? (out / "surprisal.csv").string() : out_path;
  if (!fs::path(dest).parent_path().empty()) {
    fs::create_directories(fs::path(dest).parent_path());
  }
  write_text_file(dest, csv_text);

  // Derived convenience table: per-word sums of phoneme surprisals.
  if (vocab.contains(" ")) {
    const auto words = info::word_surprisals(series, vocab.id_of(" "));
    std::string wtext = csv::join_row(
        {"word_index", "surprisal", "n_phonemes", "complete"});
    for (const auto& w : words) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.9g", w.surprisal_bits);
      wtext += csv::join_row({std::to_string(w.word_index), buf,
                              std::to_string(w.n_phonemes),
                              w.complete ? "1" : "0"});
    }
    const fs::path wdest =
        fs::path(dest).parent_path() /
        (fs::path(dest).stem().string() + "_words.csv");
    write_text_file(wdest.string(), wtext);
  }

  log << "surprisal: " << series.entries.size() << " positions -> " << dest
      << (series.floored ? (" (" + std::to_string(series.floored) +
                            " probabilities floored)")
                         : "")
      << "\n";
  return 0;
}

// ------------------------- extract -------------------------

namespace {

struct ExtractReport {
  std::string file_id;
  bool ok = false;
  std::string error;
  size_t n_intervals = 0;
  size_t n_vowels = 0;
  double ceiling_used = 0.0;
};

std::optional<double> interval_tilt(const AudioBuffer& audio, double mid,
                                    double window) {
  const size_t wlen = static_cast<size_t>(window * audio.sample_rate);
  if (wlen < 2) return std::nullopt;
  const long start =
      std::lround(mid * audio.sample_rate - static_cast<double>(wlen) / 2.0);
  if (start < 0 ||
      start + static_cast<long>(wlen) > static_cast<long>(audio.samples.size())) {
    return std::nullopt;
  }
  std::vector<double> frame(audio.samples.begin() + start,
                            audio.samples.begin() + start +
                                static_cast<long>(wlen));
  try {
    return dsp::spectral_tilt(frame);
  } catch (const DspError&) {
    return std::nullopt;
  }
}

std::optional<double> interval_centroid(const AudioBuffer& audio, double mid,
                                        double window,
                                        dsp::CentroidMode mode) {
  const size_t wlen = static_cast<size_t>(window * audio.sample_rate);
  if (wlen < 2) return std::nullopt;
  const long start =
      std::lround(mid * audio.sample_rate - static_cast<double>(wlen) / 2.0);
  if (start < 0 ||
      start + static_cast<long>(wlen) > static_cast<long>(audio.samples.size())) {
    return std::nullopt;
  }
  std::vector<double> frame(audio.samples.begin() + start,
                            audio.samples.begin() + start +
                                static_cast<long>(wlen));
  try {
    return dsp::spectral_centroid(frame, audio.sample_rate, mode);
  } catch (const DspError&) {
    return std::nullopt;
  }
}

ExtractReport extract_one(const Config& cfg, const std::string& stem,
                          const merge::LabelMap* label_map) {
  ExtractReport rep;
  rep.file_id = stem;
  const fs::path audio_dir(cfg.require_string("paths.audio_dir"));
  const fs::path tg_dir(cfg.require_string("paths.textgrid_dir"));
  const fs::path out(cfg.require_string("paths.out_dir"));
  const std::string tier_name = cfg.get_string("merge.phoneme_tier", "MAU");
  const dsp::CentroidMode centroid_mode =
      cfg.get_bool("dsp.centroid_literal", false)
          ? dsp::CentroidMode::kFrequencyWeighted
          : dsp::CentroidMode::kMagnitudeWeighted;

  const fs::path wav_path = audio_dir / (stem + ".wav");
  const fs::path tg_path = tg_dir / (stem + ".TextGrid");
  if (!fs::is_regular_file(wav_path)) {
    rep.error = "missing wav: " + wav_path.string();
    return rep;
  }
  const TextGrid tg = parse_textgrid_file(tg_path.string());
  const IntervalTier& tier = find_tier(tg, tier_name);
  const AudioBuffer audio = read_wav(wav_path.string());

  const dsp::PitchParams pp = pitch_params(cfg);
  dsp::FormantParams fp = formant_params(cfg);
  const dsp::PitchTrack pitch = dsp::extract_pitch(audio, pp);

  auto vowel_label = [&](const std::string& label) {
    if (label.empty()) return false;
    if (label_map) {
      if (label_map->is_pause(label)) return false;
      auto it = label_map->entries.find(label);
      if (it != label_map->entries.end()) return is_vowel_token(it->second);
    }
    return is_vowel_token(label);
  };

  std::vector<dsp::VowelInterval> vowels;
  for (const Interval& iv : tier.intervals) {
    if (vowel_label(iv.label)) {
      vowels.push_back({iv.xmin, iv.xmax, iv.label});
    }
  }
  rep.n_vowels = vowels.size();

  if (cfg.get_bool("dsp.optimize_ceiling", false) && !vowels.empty()) {
    std::vector<double> grid;
    const double lo = cfg.get_double("dsp.ceiling_min", 4500.0);
    const double hi = cfg.get_double("dsp.ceiling_max", 6500.0);
    const double step = cfg.get_double("dsp.ceiling_step", 50.0);
    for (double c = lo; c <= hi + 1e-9; c += step) grid.push_back(c);
    fp.ceiling_hz = dsp::optimize_ceiling(audio, vowels, grid, fp.ceiling_hz, fp);
  }
  rep.ceiling_used = fp.ceiling_hz;
  const dsp::FormantTrack formants = dsp::extract_formants(audio, fp);

  const fs::path tracks = out / "tracks";
  fs::create_directories(tracks);
  dsp::write_pitch_track(pitch, (tracks / (stem + ".pitch.txt")).string());
  dsp::write_formant_track(formants,
                           (tracks / (stem + ".formants.txt")).string());

  std::vector<PhoneRow> rows;
  rows.reserve(tier.intervals.size());
  for (const Interval& iv : tier.intervals) {
    PhoneRow row;
    row.start = iv.xmin;
    row.end = iv.xmax;
    row.label = iv.label;
    const bool pause =
        iv.label.empty() || (label_map && label_map->is_pause(iv.label));
    if (!pause) {
      const double mid = 0.5 * (iv.xmin + iv.xmax);
      row.features.tilt = interval_tilt(audio, mid, fp.window);
      row.features.centroid =
          interval_centroid(audio, mid, fp.window, centroid_mode);
      row.features.is_vowel = vowel_label(iv.label);
      if (row.features.is_vowel && iv.xmax - iv.xmin > 0) {
        row.features.f0 = dsp::sample_contour_nine(pitch, iv.xmin, iv.xmax);
        row.features.f1 =
            dsp::sample_contour_nine(formants, 1, iv.xmin, iv.xmax);
        row.features.f2 =
            dsp::sample_contour_nine(formants, 2, iv.xmin, iv.xmax);
        row.features.f3 =
            dsp::sample_contour_nine(formants, 3, iv.xmin, iv.xmax);
      }
    }
    rows.push_back(std::move(row));
  }
  write_phone_rows(rows, (tracks / (stem + ".phones.tsv")).string());
  rep.n_intervals = rows.size();
  rep.ok = true;
  return rep;
}

}  // namespace

int cmd_extract(const Config& cfg, bool dry_run, std::ostream& log) {
  const std::string tg_dir = cfg.require_string("paths.textgrid_dir");
  cfg.require_string("paths.audio_dir");
  const std::string out_dir = cfg.require_string("paths.out_dir");
  const std::vector<std::string> stems = sorted_stems(tg_dir, ".TextGrid");
  if (stems.empty()) {
    throw Error("extract: no TextGrid files in " + tg_dir);
  }
  std::optional<merge::LabelMap> label_map;
  if (cfg.has("paths.label_map")) {
    label_map = merge::LabelMap::load_file(cfg.require_string("paths.label_map"));
  }
  if (dry_run) {
    log << "extract dry-run: " << stems.size() << " files\n";
    return 0;
  }
  fs::create_directories(out_dir);

  const int jobs = std::max(1, std::min<int>(jobs_from(cfg),
                                             static_cast<int>(stems.size())));
  std::vector<ExtractReport> reports(stems.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= stems.size()) break;
      try {
        reports[i] =
            extract_one(cfg, stems[i], label_map ? &*label_map : nullptr);
      } catch (const std::exception& e) {
        reports[i].file_id = stems[i];
        reports[i].error = e.what();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  nlohmann::json files = nlohmann::json::array();
  size_t failures = 0;
  for (const ExtractReport& r : reports) {
    nlohmann::json j = {{"file", r.file_id},
                        {"ok", r.ok},
                        {"intervals", r.n_intervals},
                        {"vowels", r.n_vowels},
                        {"formant_ceiling", r.ceiling_used}};
    if (!r.ok) {
      j["error"] = r.error;
      ++failures;
      log << "extract: " << r.file_id << " failed: " << r.error << "\n";
    }
    files.push_back(j);
  }
  nlohmann::json report = {{"files", files}, {"failures", failures}};
  write_text_file((fs::path(out_dir) / "extract_report.json").string(),
                  report.dump(2) + "\n");
  log << "extract: " << (stems.size() - failures) << "/" << stems.size()
      << " files done\n";
  const bool strict = run_mode(cfg) == merge::Mode::kStrict;
  return (failures > 0 && strict) ? 1 : 0;
}

// ------------------------- merge -------------------------

namespace {

struct FilePrep {
  std::string stem;
  std::string speaker;
  std::vector<merge::MappedInterval> mapped;
  merge::Alignment alignment;
  info::SurprisalSeries series;
  std::vector<int> word_index_of_position;
  std::vector<merge::IntervalFeatures> features;
  size_t skipped = 0;
  std::string error;
};

}  // namespace

int cmd_merge(const Config& cfg, bool dry_run, std::ostream& log) {
  const std::string tg_dir = cfg.require_string("paths.textgrid_dir");
  const std::string ipa_dir = cfg.require_string("paths.ipa_dir");
  const std::string out_dir = cfg.require_string("paths.out_dir");
  const fs::path out(out_dir);
  const std::string vocab_path =
      cfg.get_string("paths.vocab", (out / "vocab.txt").string());
  const std::string ckpt_path =
      cfg.get_string("paths.checkpoint", (out / "model.ckpt").string());
  const std::string label_map_path = cfg.require_string("paths.label_map");
  const std::string tier_name = cfg.get_string("merge.phoneme_tier", "MAU");
  const int window = static_cast<int>(cfg.get_int("surprisal.window", 10));
  const merge::Mode mode = run_mode(cfg);

  if (!fs::is_regular_file(label_map_path)) {
    throw ConfigError("merge: missing input: " + label_map_path);
  }
  check_input(vocab_path, "merge", dry_run, out_dir, log);
  check_input(ckpt_path, "merge", dry_run, out_dir, log);
  const std::vector<std::string> stems = sorted_stems(tg_dir, ".TextGrid");
  if (stems.empty()) throw Error("merge: no TextGrid files in " + tg_dir);
  if (dry_run) {
    log << "merge dry-run: " << stems.size() << " files, tier '" << tier_name
        << "'\n";
    return 0;
  }

  const Vocabulary vocab = Vocabulary::load_file(vocab_path);
  const merge::LabelMap label_map = merge::LabelMap::load_file(label_map_path);
  label_map.validate(vocab);
  const lm::Checkpoint ckpt = lm::load_checkpoint(ckpt_path, vocab.hash());
  lm::Gpt model(ckpt);
  const std::map<std::string, std::string> speakers = load_speakers(cfg);
  const std::optional<TokenId> space_id =
      vocab.contains(" ") ? std::optional<TokenId>(vocab.id_of(" "))
                          : std::nullopt;

  std::vector<FilePrep> preps;
  size_t failures = 0;
  for (const std::string& stem : stems) {
    FilePrep prep;
    prep.stem = stem;
    auto spk = speakers.find(stem);
    prep.speaker = spk != speakers.end() ? spk->second : stem;
    try {
      const TextGrid tg =
          parse_textgrid_file((fs::path(tg_dir) / (stem + ".TextGrid")).string());
      const IntervalTier& tier = find_tier(tg, tier_name);
      prep.mapped = merge::map_labels(tier, label_map, vocab, mode);
      for (const auto& m : prep.mapped) {
        if (m.skipped) ++prep.skipped;
      }

      fs::path ipa_path = fs::path(ipa_dir) / (stem + ".ipa");
      if (!fs::is_regular_file(ipa_path)) {
        ipa_path = fs::path(ipa_dir) / (stem + ".txt");
      }
      if (!fs::is_regular_file(ipa_path)) {
        throw Error("missing IPA transcript for " + stem);
      }
      const std::string ipa = collapse_spaces(read_text_file(ipa_path.string()));
      const std::vector<TokenId> lm_ids = vocab.encode(tokenize(ipa));
      prep.alignment = merge::align_streams(
          prep.mapped, lm_ids, space_id.value_or(TokenId(0xFFFF)), mode);
      prep.series = info::sequence_surprisals(model, lm_ids, window);
      prep.word_index_of_position.resize(lm_ids.size());
      int word = 0;
      for (size_t i = 0; i < lm_ids.size(); ++i) {
        if (space_id && lm_ids[i] == *space_id) ++word;
        prep.word_index_of_position[i] = word;
      }

      const fs::path phones =
          out / "tracks" / (stem + ".phones.tsv");
      if (!fs::is_regular_file(phones)) {
        throw Error("missing extract output for " + stem +
                    " (run extract first): " + phones.string());
      }
      const std::vector<PhoneRow> rows = read_phone_rows(phones.string());
      if (rows.size() != prep.mapped.size()) {
        throw Error("phone feature rows do not match tier intervals for " +
                    stem);
      }
      prep.features.reserve(rows.size());
      for (const PhoneRow& r : rows) prep.features.push_back(r.features);
    } catch (const std::exception& e) {
      prep.error = e.what();
      ++failures;
      if (mode == merge::Mode::kStrict) {
        log << "merge: " << stem << " failed: " << e.what() << "\n";
      }
    }
    preps.push_back(std::move(prep));
  }

  // Informativity aggregates over every defined occurrence in the run.
  std::vector<std::pair<TokenId, double>> occurrences;
  for (const FilePrep& p : preps) {
    if (!p.error.empty()) continue;
    for (const auto& e : p.series.entries) {
      if (e.surprisal_bits) occurrences.push_back({e.token, *e.surprisal_bits});
    }
  }
  const std::map<TokenId, double> inf = info::informativity(occurrences);

  std::vector<merge::PhonemeRecord> records;
  for (const FilePrep& p : preps) {
    if (!p.error.empty()) continue;
    merge::RecordInputs in;
    in.file_id = p.stem;
    in.speaker_id = p.speaker;
    in.mapped = &p.mapped;
    in.alignment = &p.alignment;
    in.series = &p.series;
    in.informativity = &inf;
    in.features = &p.features;
    in.word_index_of_position = &p.word_index_of_position;
    const std::vector<merge::PhonemeRecord> rs = merge::build_records(in);
    records.insert(records.end(), rs.begin(), rs.end());
  }
  const size_t degenerate_slots = merge::normalize_records(records);

  fs::create_directories(out_dir);
  write_text_file((out / "phonemes.csv").string(),
                  merge::write_table(records));

  nlohmann::json files = nlohmann::json::array();
  size_t total_mismatches = 0;
  for (const FilePrep& p : preps) {
    nlohmann::json j = {{"file", p.stem}, {"speaker", p.speaker}};
    if (!p.error.empty()) {
      j["error"] = p.error;
    } else {
      j["intervals"] = p.mapped.size();
      j["records"] = p.alignment.pairs.size();
      j["skipped_labels"] = p.skipped;
      j["mismatches"] = p.alignment.mismatches;
      j["spaces_absorbed"] = p.alignment.spaces_absorbed;
      j["pauses_matched"] = p.alignment.pauses_matched;
      if (p.alignment.first_divergence) {
        j["first_divergence"] = *p.alignment.first_divergence;
      }
      total_mismatches += p.alignment.mismatches;
    }
    files.push_back(j);
  }
  nlohmann::json report = {{"files", files},
                           {"records", records.size()},
                           {"failures", failures},
                           {"mismatches", total_mismatches},
                           {"normalization_flagged_slots", degenerate_slots}};
  write_text_file((out / "merge_report.json").string(), report.dump(2) + "\n");

  log << "merge: " << records.size() << " records -> "
      << (out / "phonemes.csv").string() << "\n";
  const bool strict = mode == merge::Mode::kStrict;
  return (failures > 0 && strict) ? 1 : 0;
}

// ------------------------- pipeline -------------------------

int cmd_pipeline(const Config& cfg, bool dry_run, std::ostream& log) {
  int rc = cmd_ingest(cfg, dry_run, log);
  if (rc != 0) return rc;
  rc = cmd_train(cfg, dry_run, log);
  if (rc != 0) return rc;
  rc = cmd_extract(cfg, dry_run, log);
  if (rc != 0) return rc;
  return cmd_merge(cfg, dry_run, log);
}

}  // namespace phonpipe::pipeline
