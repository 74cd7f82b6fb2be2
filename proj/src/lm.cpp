#include "phonpipe/lm.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace phonpipe::lm {

void ModelConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || d_embed < 1 || block_size < 1 ||
      vocab_size < 1) {
    throw ModelError("model config: all dimensions must be >= 1");
  }
  if (d_embed % n_heads != 0) {
    throw ModelError("model config: d_embed must be divisible by n_heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ModelError("model config: dropout must be in [0, 1)");
  }
}

int64_t count_parameters(const ModelConfig& c) {
  c.validate();
  const int64_t d = c.d_embed;
  return static_cast<int64_t>(c.vocab_size) * d +
         static_cast<int64_t>(c.block_size) * d +
         static_cast<int64_t>(c.n_layers) * (12 * d * d + 13 * d) + 2 * d;
}

std::vector<TensorSpec> tensor_layout(const ModelConfig& c) {
  std::vector<TensorSpec> specs;
  int64_t off = 0;
  auto add = [&](const std::string& name, int64_t size, bool matrix) {
    specs.push_back({name, off, size, matrix});
    off += size;
  };
  const int64_t C = c.d_embed;
  add("tok_emb", static_cast<int64_t>(c.vocab_size) * C, true);
  add("pos_emb", static_cast<int64_t>(c.block_size) * C, true);
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "ln1_w", C, false);
    add(p + "ln1_b", C, false);
    add(p + "qkv_w", 3 * C * C, true);
    add(p + "qkv_b", 3 * C, false);
    add(p + "attn_proj_w", C * C, true);
    add(p + "attn_proj_b", C, false);
    add(p + "ln2_w", C, false);
    add(p + "ln2_b", C, false);
    add(p + "fc_w", 4 * C * C, true);
    add(p + "fc_b", 4 * C, false);
    add(p + "fcproj_w", 4 * C * C, true);
    add(p + "fcproj_b", C, false);
  }
  add("lnf_w", C, false);
  add("lnf_b", C, false);
  return specs;
}

double lr_at(int64_t iter, const TrainConfig& t) {
  const int64_t warmup = std::max<int64_t>(
      1, static_cast<int64_t>(t.warmup_frac * static_cast<double>(t.max_iters)));
  if (iter < warmup) {
    return t.lr_max * static_cast<double>(iter + 1) /
           static_cast<double>(warmup);
  }
  if (iter >= t.max_iters) return t.lr_min;
  const double progress = static_cast<double>(iter - warmup) /
                          static_cast<double>(t.max_iters - warmup);
  return t.lr_min +
         0.5 * (t.lr_max - t.lr_min) * (1.0 + std::cos(M_PI * progress));
}

void AdamW::step(std::vector<float>& params, const std::vector<float>& grads,
                 const std::vector<TensorSpec>& specs, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const TensorSpec& s : specs) {
    const double wd = s.is_matrix ? cfg_.weight_decay : 0.0;
    for (int64_t i = s.offset; i < s.offset + s.size; ++i) {
      const double gr = static_cast<double>(grads[static_cast<size_t>(i)]);
      double m = static_cast<double>(m_[static_cast<size_t>(i)]);
      double v = static_cast<double>(v_[static_cast<size_t>(i)]);
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gr;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gr * gr;
      m_[static_cast<size_t>(i)] = static_cast<float>(m);
      v_[static_cast<size_t>(i)] = static_cast<float>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      const double w = static_cast<double>(params[static_cast<size_t>(i)]);
      params[static_cast<size_t>(i)] = static_cast<float>(
          w - lr * (mhat / (std::sqrt(vhat) + 1e-8) + wd * w));
    }
  }
}

namespace {

void fill_batch(std::span<const TokenId> data, Rng& rng, int B, int T,
                std::vector<TokenId>& inputs, std::vector<TokenId>& targets) {
  inputs.resize(static_cast<size_t>(B) * T);
  targets.resize(static_cast<size_t>(B) * T);
  const uint64_t span = data.size() - static_cast<size_t>(T);
  for (int b = 0; b < B; ++b) {
    const size_t off = static_cast<size_t>(rng.below(span));
    for (int t = 0; t < T; ++t) {
      inputs[static_cast<size_t>(b) * T + t] = data[off + t];
      targets[static_cast<size_t>(b) * T + t] = data[off + t + 1];
    }
  }
}

}  // namespace

double evaluate(Gpt& model, std::span<const TokenId> dev,
                const TrainConfig& t) {
  const int T = model.config().block_size;
  if (dev.size() < static_cast<size_t>(T) + 1) {
    throw ModelError("dev set smaller than one evaluation window");
  }
  // The evaluation batch set is fixed by the seed, independent of training
  // progress, so dev losses across evaluations are comparable.
  Rng rng(t.seed ^ 0xE7A1u);
  std::vector<TokenId> inputs, targets;
  double total = 0.0;
  const int B = std::min(t.batch_size, 16);
  for (int e = 0; e < t.eval_batches; ++e) {
    fill_batch(dev, rng, B, T, inputs, targets);
    total += static_cast<double>(
        model.forward_loss(inputs, targets, B, T, /*training=*/false));
  }
  return total / static_cast<double>(t.eval_batches);
}

Checkpoint train(Gpt& model, const DatasetSplit& data, const TrainConfig& t,
                 uint64_t vocab_hash, std::vector<EvalRecord>* log) {
  const int T = model.config().block_size;
  const int B = t.batch_size;
  if (data.train.size() < static_cast<size_t>(T) + 1) {
    throw ModelError("train set smaller than one window (need block_size+1 "
                     "tokens)");
  }
  if (data.dev.empty()) throw ModelError("dev set is empty");
  if (t.lr_min > t.lr_max) throw ModelError("lr_min must be <= lr_max");

  Rng batch_rng(t.seed);
  AdamW opt(model.params().size(), t);
  std::vector<TokenId> inputs, targets;

  Checkpoint best;
  best.config = model.config();
  best.vocab_hash = vocab_hash;
  double best_dev = std::numeric_limits<double>::infinity();
  int bad_evals = 0;
  double last_train_loss = 0.0;
  int64_t iter = t.start_iter;
  bool stopped_early = false;

  auto run_eval = [&](int64_t at_iter) -> bool {
    const double dev_loss = evaluate(model, data.dev, t);
    if (log) {
      log->push_back({at_iter, last_train_loss, dev_loss, lr_at(at_iter, t)});
    }
    if (dev_loss < best_dev) {
      best_dev = dev_loss;
      best.weights.assign(model.params().begin(), model.params().end());
      best.iteration = at_iter;
      best.dev_loss = dev_loss;
      bad_evals = 0;
    } else {
      ++bad_evals;
      if (bad_evals >= t.eval_patience) return false;  // stop
    }
    return true;
  };

  for (; iter < t.max_iters; ++iter) {
    if (iter > t.start_iter && (iter - t.start_iter) % t.eval_interval == 0) {
      if (!run_eval(iter)) {
        stopped_early = true;
        break;
      }
    }
    fill_batch(data.train, batch_rng, B, T, inputs, targets);
    model.zero_grads();
    last_train_loss = static_cast<double>(
        model.forward_loss(inputs, targets, B, T, /*training=*/true));
    model.backward();
    if (t.grad_clip > 0.0) {
      double norm2 = 0.0;
      for (float gr : model.grads()) {
        norm2 += static_cast<double>(gr) * static_cast<double>(gr);
      }
      const double norm = std::sqrt(norm2);
      if (norm > t.grad_clip) {
        const float scale = static_cast<float>(t.grad_clip / norm);
        for (float& gr : model.grads()) gr *= scale;
      }
    }
    opt.step(model.params(), model.grads(), model.tensors(), lr_at(iter, t));
  }
  if (!stopped_early) {
    run_eval(iter);
  }
  if (best.weights.empty()) {
    // No evaluation improved on infinity only if dev produced NaN.
    throw ModelError("training produced no usable checkpoint");
  }
  return best;
}

// ------------------------- checkpoint I/O -------------------------

namespace {

constexpr char kMagic[4] = {'P', 'P', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& o, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  o.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    throw CheckpointError(std::string("corrupt checkpoint: truncated ") +
                          what);
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

uint64_t hash_from_hex(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::vector<TensorSpec> specs = tensor_layout(ckpt.config);
  const int64_t expected = count_parameters(ckpt.config);
  if (static_cast<int64_t>(ckpt.weights.size()) != expected) {
    throw CheckpointError("checkpoint weight count does not match config");
  }
  nlohmann::json j;
  j["config"] = {{"n_layers", ckpt.config.n_layers},
                 {"n_heads", ckpt.config.n_heads},
                 {"d_embed", ckpt.config.d_embed},
                 {"block_size", ckpt.config.block_size},
                 {"vocab_size", ckpt.config.vocab_size},
                 {"dropout", ckpt.config.dropout}};
  j["iteration"] = ckpt.iteration;
  j["dev_loss"] = ckpt.dev_loss;
  j["vocab_hash"] = hash_hex(ckpt.vocab_hash);
  nlohmann::json tensors = nlohmann::json::array();
  for (const TensorSpec& s : specs) {
    tensors.push_back({{"name", s.name}, {"size", s.size}});
  }
  j["tensors"] = tensors;
  const std::string header = j.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (float w : ckpt.weights) {
    const uint32_t bits = std::bit_cast<uint32_t>(w);
    write_u32(out, bits);
  }
  if (!out) throw CheckpointError("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("corrupt checkpoint: bad magic");
  }
  const uint32_t version = read_u32(in, "header");
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  const uint32_t header_len = read_u32(in, "header");
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw CheckpointError("corrupt checkpoint: truncated header");

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("corrupt checkpoint: malformed header");
  }
  Checkpoint ckpt;
  try {
    const auto& c = j.at("config");
    ckpt.config.n_layers = c.at("n_layers").get<int>();
    ckpt.config.n_heads = c.at("n_heads").get<int>();
    ckpt.config.d_embed = c.at("d_embed").get<int>();
    ckpt.config.block_size = c.at("block_size").get<int>();
    ckpt.config.vocab_size = c.at("vocab_size").get<int>();
    ckpt.config.dropout = c.at("dropout").get<double>();
    ckpt.iteration = j.at("iteration").get<int64_t>();
    ckpt.dev_loss = j.at("dev_loss").get<double>();
    ckpt.vocab_hash = hash_from_hex(j.at("vocab_hash").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("corrupt checkpoint: missing header field");
  }
  ckpt.config.validate();
  const int64_t n = count_parameters(ckpt.config);
  ckpt.weights.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const uint32_t bits = read_u32(in, "weights");
    ckpt.weights[static_cast<size_t>(i)] = std::bit_cast<float>(bits);
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path,
                           uint64_t expected_vocab_hash) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.vocab_hash != expected_vocab_hash) {
    throw CheckpointError(
        "vocabulary hash mismatch: checkpoint was trained with a different "
        "vocabulary (" +
        hash_hex(ckpt.vocab_hash) + " vs " + hash_hex(expected_vocab_hash) +
        ")");
  }
  return ckpt;
}

}  // namespace phonpipe::lm
