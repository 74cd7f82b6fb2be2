#ifndef PHONPIPE_LM_HPP
#define PHONPIPE_LM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "phonpipe/corpus.hpp"
#include "phonpipe/error.hpp"
#include "phonpipe/ipa_tok.hpp"
#include "phonpipe/rng.hpp"

namespace phonpipe::lm {

struct ModelConfig {
  int n_layers = 12;
  int n_heads = 12;
  int d_embed = 768;
  int block_size = 256;
  int vocab_size = 66;
  double dropout = 0.0;

  void validate() const;
};

// Trainable parameters, tied output projection counted once:
// vocab*d + block*d + n_layers*(12 d^2 + 13 d) + 2 d.
int64_t count_parameters(const ModelConfig& c);

struct TrainConfig {
  int batch_size = 64;
  double lr_max = 1e-4;
  double lr_min = 1e-5;
  int64_t max_iters = 60000;
  int64_t eval_interval = 250;
  int eval_patience = 5;
  double grad_clip = 1.0;
  uint64_t seed = 0;
  // Reconstruction defaults for knobs the training regime leaves open.
  int eval_batches = 8;
  double warmup_frac = 0.02;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int64_t start_iter = 0;  // nonzero when resuming from a checkpoint
};

struct EvalRecord {
  int64_t iteration = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double lr = 0.0;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<float> weights;
  int64_t iteration = 0;
  double dev_loss = 0.0;
  uint64_t vocab_hash = 0;
};

// Single-file container: JSON header + raw little-endian float32 tensors.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
// Refuses to load when the stored hash differs from expected_vocab_hash.
Checkpoint load_checkpoint(const std::string& path,
                           uint64_t expected_vocab_hash);

struct TensorSpec {
  std::string name;
  int64_t offset = 0;
  int64_t size = 0;
  bool is_matrix = false;  // weight decay applies to these only
};

std::vector<TensorSpec> tensor_layout(const ModelConfig& c);

namespace detail {

inline double gelu_fwd(double x) {
  const double k = 0.7978845608028654;  // sqrt(2/pi)
  const double u = k * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_bwd(double x) {
  const double k = 0.7978845608028654;
  const double u = k * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  const double sech2 = 1.0 - th * th;
  return 0.5 * (1.0 + th) + 0.5 * x * sech2 * k * (1.0 + 3.0 * 0.044715 * x * x);
}

}  // namespace detail

// Decoder-only transformer: learned token + position embeddings, pre-norm
// blocks (causal multi-head self-attention, 4x GELU feed-forward, residual
// connections), final layer-norm, output projection tied to the token
// embedding. Templated on the scalar so tests can run the same arithmetic
// in double for finite-difference gradient checks; the product path uses
// float.
template <typename F>
class GptT {
 public:
  GptT(const ModelConfig& c, uint64_t seed) : cfg_(c) {
    cfg_.validate();
    specs_ = tensor_layout(cfg_);
    n_params_ = count_parameters(cfg_);
    params_.assign(static_cast<size_t>(n_params_), F(0));
    grads_.assign(static_cast<size_t>(n_params_), F(0));
    init_weights(seed);
    dropout_rng_ = Rng(seed ^ 0xD5A61C0DULL);
  }

  explicit GptT(const Checkpoint& ckpt) : cfg_(ckpt.config) {
    cfg_.validate();
    specs_ = tensor_layout(cfg_);
    n_params_ = count_parameters(cfg_);
    if (static_cast<int64_t>(ckpt.weights.size()) != n_params_) {
      throw CheckpointError("checkpoint weight count does not match config");
    }
    params_.resize(static_cast<size_t>(n_params_));
    for (size_t i = 0; i < params_.size(); ++i) {
      params_[i] = static_cast<F>(ckpt.weights[i]);
    }
    grads_.assign(static_cast<size_t>(n_params_), F(0));
    dropout_rng_ = Rng(0xD5A61C0DULL);
  }

  const ModelConfig& config() const { return cfg_; }
  int64_t parameter_count() const { return n_params_; }
  std::vector<F>& params() { return params_; }
  const std::vector<F>& params() const { return params_; }
  std::vector<F>& grads() { return grads_; }
  const std::vector<TensorSpec>& tensors() const { return specs_; }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), F(0)); }

  // Inference on one sequence: logits, row-major T x vocab_size. Row t
  // depends only on ids[0..t].
  std::vector<F> forward(std::span<const TokenId> ids) {
    const int T = static_cast<int>(ids.size());
    if (T < 1 || T > cfg_.block_size) {
      throw ModelError("sequence length " + std::to_string(T) +
                       " outside [1, block_size=" +
                       std::to_string(cfg_.block_size) + "]");
    }
    run_forward(ids, 1, T, /*training=*/false);
    return std::vector<F>(act_.logits.begin(), act_.logits.end());
  }

  // Probability vector over the vocabulary for the next token.
  std::vector<F> next_distribution(std::span<const TokenId> context) {
    if (context.empty()) {
      throw ModelError("next_distribution: empty context");
    }
    const int T = static_cast<int>(context.size());
    run_forward(context, 1, T, /*training=*/false);
    const int V = cfg_.vocab_size;
    std::vector<F> probs(static_cast<size_t>(V));
    softmax_row(&act_.logits[static_cast<size_t>((T - 1)) * V], probs.data(),
                V);
    return probs;
  }

  // Mean cross-entropy (nats/token) of targets under the model, for a batch
  // of B sequences of length T (flattened row-major). Keeps activations for
  // backward() when requested.
  F forward_loss(std::span<const TokenId> inputs,
                 std::span<const TokenId> targets, int B, int T,
                 bool training) {
    if (static_cast<int>(inputs.size()) != B * T ||
        static_cast<int>(targets.size()) != B * T) {
      throw ModelError("forward_loss: shape mismatch");
    }
    if (T < 1 || T > cfg_.block_size) {
      throw ModelError("forward_loss: sequence length outside block");
    }
    run_forward(inputs, B, T, training);
    const int V = cfg_.vocab_size;
    act_.probs.resize(act_.logits.size());
    double loss = 0.0;
    for (int i = 0; i < B * T; ++i) {
      const TokenId tgt = targets[static_cast<size_t>(i)];
      if (tgt >= V) throw ModelError("forward_loss: target id out of range");
      softmax_row(&act_.logits[static_cast<size_t>(i) * V],
                  &act_.probs[static_cast<size_t>(i) * V], V);
      const double p =
          static_cast<double>(act_.probs[static_cast<size_t>(i) * V + tgt]);
      loss -= std::log(std::max(p, 1e-300));
    }
    act_.targets.assign(targets.begin(), targets.end());
    return static_cast<F>(loss / static_cast<double>(B * T));
  }

  // Accumulates parameter gradients for the last forward_loss call.
  void backward() {
    const int B = act_.B;
    const int T = act_.T;
    const int C = cfg_.d_embed;
    const int V = cfg_.vocab_size;
    const int L = cfg_.n_layers;
    const int H = cfg_.n_heads;
    const int hs = C / H;
    const int N = B * T;
    if (N == 0 || act_.targets.empty()) {
      throw ModelError("backward: no forward_loss activations");
    }

    // d(loss)/d(logits) = (softmax - onehot) / N
    std::vector<F> dlogits(act_.logits.size());
    for (int i = 0; i < N; ++i) {
      for (int v = 0; v < V; ++v) {
        F d = act_.probs[static_cast<size_t>(i) * V + v];
        if (v == act_.targets[static_cast<size_t>(i)]) d -= F(1);
        dlogits[static_cast<size_t>(i) * V + v] = d / static_cast<F>(N);
      }
    }

    // Tied head: logits = lnf_out @ tok_emb^T.
    std::vector<F> dx(static_cast<size_t>(N) * C, F(0));
    {
      const F* wte = p(kTokEmb);
      F* dwte = g(kTokEmb);
      for (int i = 0; i < N; ++i) {
        const F* dl = &dlogits[static_cast<size_t>(i) * V];
        const F* x = &act_.lnf_out[static_cast<size_t>(i) * C];
        F* dxi = &dx[static_cast<size_t>(i) * C];
        for (int v = 0; v < V; ++v) {
          const F d = dl[v];
          if (d == F(0)) continue;
          const F* wrow = wte + static_cast<size_t>(v) * C;
          F* gwrow = dwte + static_cast<size_t>(v) * C;
          for (int c = 0; c < C; ++c) {
            dxi[c] += d * wrow[c];
            gwrow[c] += d * x[c];
          }
        }
      }
    }

    // Final layer-norm.
    std::vector<F> dres(static_cast<size_t>(N) * C, F(0));
    layernorm_backward(dres.data(), dx.data(), act_.x_final.data(),
                       act_.lnf_mean.data(), act_.lnf_rstd.data(), p(kLnfW),
                       g(kLnfW), g(kLnfB), N, C);

    std::vector<F> buf1(static_cast<size_t>(N) * C);
    std::vector<F> buf4(static_cast<size_t>(N) * 4 * C);
    std::vector<F> dqkv(static_cast<size_t>(N) * 3 * C);

    for (int l = L - 1; l >= 0; --l) {
      const LayerActs& A = act_.layers[static_cast<size_t>(l)];

      // ---- MLP block: out = mid + dropout(fcproj(gelu(fc(ln2(mid)))))
      if (cfg_.dropout > 0 && act_.training) {
        apply_mask_backward(dres.data(), A.drop_mlp, static_cast<size_t>(N) * C);
      }
      // fcproj backward: dres -> dgelu (buf4), grads of fcproj
      std::fill(buf4.begin(), buf4.end(), F(0));
      matmul_backward(buf4.data(), dres.data(), A.gelu_out.data(),
                      p(layer_tensor(l, kFcProjW)), g(layer_tensor(l, kFcProjW)),
                      g(layer_tensor(l, kFcProjB)), N, 4 * C, C);
      // gelu backward (in place on buf4 using pre-activation)
      for (size_t i = 0; i < buf4.size(); ++i) {
        buf4[i] *= static_cast<F>(
            detail::gelu_bwd(static_cast<double>(A.fc_out[i])));
      }
      // fc backward: buf4 -> dln2(buf1), grads of fc
      std::fill(buf1.begin(), buf1.end(), F(0));
      matmul_backward(buf1.data(), buf4.data(), A.ln2_out.data(),
                      p(layer_tensor(l, kFcW)), g(layer_tensor(l, kFcW)),
                      g(layer_tensor(l, kFcB)), N, C, 4 * C);
      // ln2 backward adds into dres (residual path already there)
      layernorm_backward(dres.data(), buf1.data(), A.mid.data(),
                         A.ln2_mean.data(), A.ln2_rstd.data(),
                         p(layer_tensor(l, kLn2W)), g(layer_tensor(l, kLn2W)),
                         g(layer_tensor(l, kLn2B)), N, C);

      // ---- attention block: mid = in + dropout(proj(attn(ln1(in))))
      if (cfg_.dropout > 0 && act_.training) {
        apply_mask_backward(dres.data(), A.drop_attn,
                            static_cast<size_t>(N) * C);
      }
      // proj backward: dres -> datt_out (buf1)
      std::fill(buf1.begin(), buf1.end(), F(0));
      matmul_backward(buf1.data(), dres.data(), A.att_out.data(),
                      p(layer_tensor(l, kAttnProjW)),
                      g(layer_tensor(l, kAttnProjW)),
                      g(layer_tensor(l, kAttnProjB)), N, C, C);
      // attention backward: buf1 (datt_out) -> dqkv
      std::fill(dqkv.begin(), dqkv.end(), F(0));
      attention_backward(dqkv.data(), buf1.data(), A, B, T, C, H, hs);
      // qkv backward: dqkv -> dln1 (buf1)
      std::fill(buf1.begin(), buf1.end(), F(0));
      matmul_backward(buf1.data(), dqkv.data(), A.ln1_out.data(),
                      p(layer_tensor(l, kQkvW)), g(layer_tensor(l, kQkvW)),
                      g(layer_tensor(l, kQkvB)), N, C, 3 * C);
      // ln1 backward adds into dres
      layernorm_backward(dres.data(), buf1.data(), A.in.data(),
                         A.ln1_mean.data(), A.ln1_rstd.data(),
                         p(layer_tensor(l, kLn1W)), g(layer_tensor(l, kLn1W)),
                         g(layer_tensor(l, kLn1B)), N, C);
    }

    if (cfg_.dropout > 0 && act_.training) {
      apply_mask_backward(dres.data(), act_.drop_emb,
                          static_cast<size_t>(N) * C);
    }
    // Embedding backward.
    {
      F* dwte = g(kTokEmb);
      F* dwpe = g(kPosEmb);
      for (int b = 0; b < B; ++b) {
        for (int t = 0; t < T; ++t) {
          const int i = b * T + t;
          const TokenId id = act_.inputs[static_cast<size_t>(i)];
          const F* d = &dres[static_cast<size_t>(i) * C];
          F* gw = dwte + static_cast<size_t>(id) * C;
          F* gp = dwpe + static_cast<size_t>(t) * C;
          for (int c = 0; c < C; ++c) {
            gw[c] += d[c];
            gp[c] += d[c];
          }
        }
      }
    }
  }

 private:
  enum NamedTensor {
    kTokEmb,
    kPosEmb,
    kLnfW,
    kLnfB,
    kLn1W,
    kLn1B,
    kQkvW,
    kQkvB,
    kAttnProjW,
    kAttnProjB,
    kLn2W,
    kLn2B,
    kFcW,
    kFcB,
    kFcProjW,
    kFcProjB,
  };

  // Index into specs_ for global tensors and per-layer tensors.
  size_t tensor_index(NamedTensor t) const {
    switch (t) {
      case kTokEmb: return 0;
      case kPosEmb: return 1;
      case kLnfW: return specs_.size() - 2;
      case kLnfB: return specs_.size() - 1;
      default: throw ModelError("tensor_index: per-layer tensor needs layer");
    }
  }

  size_t layer_tensor(int layer, NamedTensor t) const {
    const size_t base = 2 + static_cast<size_t>(layer) * 12;
    switch (t) {
      case kLn1W: return base + 0;
      case kLn1B: return base + 1;
      case kQkvW: return base + 2;
      case kQkvB: return base + 3;
      case kAttnProjW: return base + 4;
      case kAttnProjB: return base + 5;
      case kLn2W: return base + 6;
      case kLn2B: return base + 7;
      case kFcW: return base + 8;
      case kFcB: return base + 9;
      case kFcProjW: return base + 10;
      case kFcProjB: return base + 11;
      default: throw ModelError("layer_tensor: not a per-layer tensor");
    }
  }

  F* p(NamedTensor t) { return params_.data() + specs_[tensor_index(t)].offset; }
  const F* p(NamedTensor t) const {
    return params_.data() + specs_[tensor_index(t)].offset;
  }
  F* p(size_t spec_idx) { return params_.data() + specs_[spec_idx].offset; }
  const F* p(size_t spec_idx) const {
    return params_.data() + specs_[spec_idx].offset;
  }
  F* g(NamedTensor t) { return grads_.data() + specs_[tensor_index(t)].offset; }
  F* g(size_t spec_idx) { return grads_.data() + specs_[spec_idx].offset; }

  struct LayerActs {
    std::vector<F> in;        // residual stream entering the layer (N*C)
    std::vector<F> ln1_out;   // N*C
    std::vector<F> ln1_mean;  // N
    std::vector<F> ln1_rstd;  // N
    std::vector<F> qkv;       // N*3C
    std::vector<F> att;       // B*H*T*T softmax weights
    std::vector<F> att_out;   // N*C (heads concatenated, pre-projection)
    std::vector<F> mid;       // N*C after attention residual
    std::vector<F> ln2_out;   // N*C
    std::vector<F> ln2_mean;  // N
    std::vector<F> ln2_rstd;  // N
    std::vector<F> fc_out;    // N*4C pre-GELU
    std::vector<F> gelu_out;  // N*4C
    std::vector<uint8_t> drop_attn;  // N*C masks, used when dropout > 0
    std::vector<uint8_t> drop_mlp;
  };

  struct Activations {
    int B = 0;
    int T = 0;
    bool training = false;
    std::vector<TokenId> inputs;
    std::vector<TokenId> targets;
    std::vector<uint8_t> drop_emb;
    std::vector<LayerActs> layers;
    std::vector<F> x_final;   // N*C, input to final layer-norm
    std::vector<F> lnf_out;   // N*C
    std::vector<F> lnf_mean;  // N
    std::vector<F> lnf_rstd;  // N
    std::vector<F> logits;    // N*V
    std::vector<F> probs;     // N*V
  };

  void softmax_row(const F* logits, F* out, int n) const {
    F maxv = logits[0];
    for (int i = 1; i < n; ++i) maxv = std::max(maxv, logits[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = std::exp(static_cast<double>(logits[i] - maxv));
      out[i] = static_cast<F>(e);
      sum += e;
    }
    const F inv = static_cast<F>(1.0 / sum);
    for (int i = 0; i < n; ++i) out[i] *= inv;
  }

  static void matmul_forward(F* out, const F* in, const F* w, const F* bias,
                             int n_rows, int c_in, int c_out) {
    for (int t = 0; t < n_rows; ++t) {
      const F* x = in + static_cast<size_t>(t) * c_in;
      F* y = out + static_cast<size_t>(t) * c_out;
      for (int o = 0; o < c_out; ++o) {
        const F* wrow = w + static_cast<size_t>(o) * c_in;
        F acc = bias ? bias[o] : F(0);
        for (int i = 0; i < c_in; ++i) acc += x[i] * wrow[i];
        y[o] = acc;
      }
    }
  }

  static void matmul_backward(F* din, const F* dout, const F* in, const F* w,
                              F* dw, F* db, int n_rows, int c_in, int c_out) {
    for (int t = 0; t < n_rows; ++t) {
      const F* d = dout + static_cast<size_t>(t) * c_out;
      const F* x = in + static_cast<size_t>(t) * c_in;
      F* dx = din + static_cast<size_t>(t) * c_in;
      for (int o = 0; o < c_out; ++o) {
        const F dv = d[o];
        if (db) db[o] += dv;
        const F* wrow = w + static_cast<size_t>(o) * c_in;
        F* dwrow = dw + static_cast<size_t>(o) * c_in;
        for (int i = 0; i < c_in; ++i) {
          dx[i] += dv * wrow[i];
          dwrow[i] += dv * x[i];
        }
      }
    }
  }

  static void layernorm_forward(F* out, F* mean, F* rstd, const F* in,
                                const F* w, const F* b, int n_rows, int c) {
    for (int t = 0; t < n_rows; ++t) {
      const F* x = in + static_cast<size_t>(t) * c;
      double m = 0.0;
      for (int i = 0; i < c; ++i) m += static_cast<double>(x[i]);
      m /= c;
      double v = 0.0;
      for (int i = 0; i < c; ++i) {
        const double d = static_cast<double>(x[i]) - m;
        v += d * d;
      }
      v /= c;
      const double rs = 1.0 / std::sqrt(v + 1e-5);
      mean[t] = static_cast<F>(m);
      rstd[t] = static_cast<F>(rs);
      F* y = out + static_cast<size_t>(t) * c;
      for (int i = 0; i < c; ++i) {
        y[i] = static_cast<F>((static_cast<double>(x[i]) - m) * rs) * w[i] +
               b[i];
      }
    }
  }

  static void layernorm_backward(F* din, const F* dout, const F* in,
                                 const F* mean, const F* rstd, const F* w,
                                 F* dw, F* db, int n_rows, int c) {
    for (int t = 0; t < n_rows; ++t) {
      const F* x = in + static_cast<size_t>(t) * c;
      const F* d = dout + static_cast<size_t>(t) * c;
      F* dx = din + static_cast<size_t>(t) * c;
      const double m = static_cast<double>(mean[t]);
      const double rs = static_cast<double>(rstd[t]);
      double dnorm_mean = 0.0;
      double dnorm_norm_mean = 0.0;
      for (int i = 0; i < c; ++i) {
        const double norm = (static_cast<double>(x[i]) - m) * rs;
        const double dnorm = static_cast<double>(d[i] * w[i]);
        dnorm_mean += dnorm;
        dnorm_norm_mean += dnorm * norm;
      }
      dnorm_mean /= c;
      dnorm_norm_mean /= c;
      for (int i = 0; i < c; ++i) {
        const double norm = (static_cast<double>(x[i]) - m) * rs;
        const double dnorm = static_cast<double>(d[i] * w[i]);
        dx[i] += static_cast<F>((dnorm - dnorm_mean - norm * dnorm_norm_mean) *
                                rs);
        dw[i] += static_cast<F>(static_cast<double>(d[i]) * norm);
        db[i] += d[i];
      }
    }
  }

  void attention_forward(LayerActs& A, int B, int T, int C, int H, int hs) {
    const F scale = static_cast<F>(1.0 / std::sqrt(static_cast<double>(hs)));
    A.att.assign(static_cast<size_t>(B) * H * T * T, F(0));
    A.att_out.assign(static_cast<size_t>(B) * T * C, F(0));
    for (int b = 0; b < B; ++b) {
      for (int h = 0; h < H; ++h) {
        for (int t = 0; t < T; ++t) {
          const F* q =
              &A.qkv[(static_cast<size_t>(b) * T + t) * 3 * C + h * hs];
          F* att_row = &A.att[((static_cast<size_t>(b) * H + h) * T + t) * T];
          F maxv = std::numeric_limits<F>::lowest();
          for (int t2 = 0; t2 <= t; ++t2) {
            const F* k = &A.qkv[(static_cast<size_t>(b) * T + t2) * 3 * C + C +
                                h * hs];
            F acc = F(0);
            for (int i = 0; i < hs; ++i) acc += q[i] * k[i];
            acc *= scale;
            att_row[t2] = acc;
            maxv = std::max(maxv, acc);
          }
          double sum = 0.0;
          for (int t2 = 0; t2 <= t; ++t2) {
            const double e =
                std::exp(static_cast<double>(att_row[t2] - maxv));
            att_row[t2] = static_cast<F>(e);
            sum += e;
          }
          const F inv = static_cast<F>(1.0 / sum);
          for (int t2 = 0; t2 <= t; ++t2) att_row[t2] *= inv;
          // Attention dropout would go here; the paper configuration runs
          // with dropout 0 and the residual-path masks cover the rest.
          F* y = &A.att_out[(static_cast<size_t>(b) * T + t) * C + h * hs];
          for (int t2 = 0; t2 <= t; ++t2) {
            const F* v = &A.qkv[(static_cast<size_t>(b) * T + t2) * 3 * C +
                                2 * C + h * hs];
            const F a = att_row[t2];
            for (int i = 0; i < hs; ++i) y[i] += a * v[i];
          }
        }
      }
    }
  }

  void attention_backward(F* dqkv, const F* datt_out, const LayerActs& A,
                          int B, int T, int C, int H, int hs) {
    const F scale = static_cast<F>(1.0 / std::sqrt(static_cast<double>(hs)));
    std::vector<F> datt(static_cast<size_t>(T), F(0));
    for (int b = 0; b < B; ++b) {
      for (int h = 0; h < H; ++h) {
        for (int t = 0; t < T; ++t) {
          const F* att_row =
              &A.att[((static_cast<size_t>(b) * H + h) * T + t) * T];
          const F* dy =
              datt_out + (static_cast<size_t>(b) * T + t) * C + h * hs;
          // datt and dv
          double dot = 0.0;
          for (int t2 = 0; t2 <= t; ++t2) {
            const F* v = &A.qkv[(static_cast<size_t>(b) * T + t2) * 3 * C +
                                2 * C + h * hs];
            F acc = F(0);
            for (int i = 0; i < hs; ++i) acc += dy[i] * v[i];
            datt[static_cast<size_t>(t2)] = acc;
            dot += static_cast<double>(att_row[t2]) * static_cast<double>(acc);
            F* dv = dqkv + (static_cast<size_t>(b) * T + t2) * 3 * C + 2 * C +
                    h * hs;
            const F a = att_row[t2];
            for (int i = 0; i < hs; ++i) dv[i] += a * dy[i];
          }
          // dscore -> dq, dk
          const F* q =
              &A.qkv[(static_cast<size_t>(b) * T + t) * 3 * C + h * hs];
          F* dq = dqkv + (static_cast<size_t>(b) * T + t) * 3 * C + h * hs;
          for (int t2 = 0; t2 <= t; ++t2) {
            const F dscore =
                att_row[t2] *
                (datt[static_cast<size_t>(t2)] - static_cast<F>(dot));
            const F* k = &A.qkv[(static_cast<size_t>(b) * T + t2) * 3 * C + C +
                                h * hs];
            F* dk = dqkv + (static_cast<size_t>(b) * T + t2) * 3 * C + C +
                    h * hs;
            const F ds = dscore * scale;
            for (int i = 0; i < hs; ++i) {
              dq[i] += ds * k[i];
              dk[i] += ds * q[i];
            }
          }
        }
      }
    }
  }

  void apply_mask_forward(F* x, std::vector<uint8_t>& mask, size_t n) {
    mask.resize(n);
    const F inv_keep = static_cast<F>(1.0 / (1.0 - cfg_.dropout));
    for (size_t i = 0; i < n; ++i) {
      const bool keep = dropout_rng_.uniform() >= cfg_.dropout;
      mask[i] = keep ? 1 : 0;
      x[i] = keep ? x[i] * inv_keep : F(0);
    }
  }

  void apply_mask_backward(F* dx, const std::vector<uint8_t>& mask,
                           size_t n) const {
    const F inv_keep = static_cast<F>(1.0 / (1.0 - cfg_.dropout));
    for (size_t i = 0; i < n; ++i) {
      dx[i] = mask[i] ? dx[i] * inv_keep : F(0);
    }
  }

  void run_forward(std::span<const TokenId> inputs, int B, int T,
                   bool training) {
    const int C = cfg_.d_embed;
    const int V = cfg_.vocab_size;
    const int L = cfg_.n_layers;
    const int H = cfg_.n_heads;
    const int hs = C / H;
    const int N = B * T;

    act_.B = B;
    act_.T = T;
    act_.training = training;
    act_.inputs.assign(inputs.begin(), inputs.end());
    act_.targets.clear();
    act_.layers.resize(static_cast<size_t>(L));

    std::vector<F> x(static_cast<size_t>(N) * C);
    const F* wte = p(kTokEmb);
    const F* wpe = p(kPosEmb);
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < T; ++t) {
        const int i = b * T + t;
        const TokenId id = inputs[static_cast<size_t>(i)];
        if (id >= V) {
          throw ModelError("token id " + std::to_string(id) +
                           " out of range (vocab " + std::to_string(V) + ")");
        }
        const F* te = wte + static_cast<size_t>(id) * C;
        const F* pe = wpe + static_cast<size_t>(t) * C;
        F* xi = &x[static_cast<size_t>(i) * C];
        for (int c = 0; c < C; ++c) xi[c] = te[c] + pe[c];
      }
    }
    if (cfg_.dropout > 0 && training) {
      apply_mask_forward(x.data(), act_.drop_emb, x.size());
    }

    for (int l = 0; l < L; ++l) {
      LayerActs& A = act_.layers[static_cast<size_t>(l)];
      A.in = x;
      A.ln1_out.resize(static_cast<size_t>(N) * C);
      A.ln1_mean.resize(static_cast<size_t>(N));
      A.ln1_rstd.resize(static_cast<size_t>(N));
      layernorm_forward(A.ln1_out.data(), A.ln1_mean.data(),
                        A.ln1_rstd.data(), A.in.data(),
                        p(layer_tensor(l, kLn1W)), p(layer_tensor(l, kLn1B)),
                        N, C);
      A.qkv.resize(static_cast<size_t>(N) * 3 * C);
      matmul_forward(A.qkv.data(), A.ln1_out.data(), p(layer_tensor(l, kQkvW)),
                     p(layer_tensor(l, kQkvB)), N, C, 3 * C);
      attention_forward(A, B, T, C, H, hs);
      std::vector<F> proj(static_cast<size_t>(N) * C);
      matmul_forward(proj.data(), A.att_out.data(),
                     p(layer_tensor(l, kAttnProjW)),
                     p(layer_tensor(l, kAttnProjB)), N, C, C);
      if (cfg_.dropout > 0 && training) {
        apply_mask_forward(proj.data(), A.drop_attn, proj.size());
      }
      A.mid.resize(static_cast<size_t>(N) * C);
      for (size_t i = 0; i < A.mid.size(); ++i) A.mid[i] = A.in[i] + proj[i];

      A.ln2_out.resize(static_cast<size_t>(N) * C);
      A.ln2_mean.resize(static_cast<size_t>(N));
      A.ln2_rstd.resize(static_cast<size_t>(N));
      layernorm_forward(A.ln2_out.data(), A.ln2_mean.data(),
                        A.ln2_rstd.data(), A.mid.data(),
                        p(layer_tensor(l, kLn2W)), p(layer_tensor(l, kLn2B)),
                        N, C);
      A.fc_out.resize(static_cast<size_t>(N) * 4 * C);
      matmul_forward(A.fc_out.data(), A.ln2_out.data(),
                     p(layer_tensor(l, kFcW)), p(layer_tensor(l, kFcB)), N, C,
                     4 * C);
      A.gelu_out.resize(A.fc_out.size());
      for (size_t i = 0; i < A.fc_out.size(); ++i) {
        A.gelu_out[i] = static_cast<F>(
            detail::gelu_fwd(static_cast<double>(A.fc_out[i])));
      }
      std::vector<F> mlp(static_cast<size_t>(N) * C);
      matmul_forward(mlp.data(), A.gelu_out.data(),
                     p(layer_tensor(l, kFcProjW)), p(layer_tensor(l, kFcProjB)),
                     N, 4 * C, C);
      if (cfg_.dropout > 0 && training) {
        apply_mask_forward(mlp.data(), A.drop_mlp, mlp.size());
      }
      for (size_t i = 0; i < x.size(); ++i) x[i] = A.mid[i] + mlp[i];
    }

    act_.x_final = x;
    act_.lnf_out.resize(static_cast<size_t>(N) * C);
    act_.lnf_mean.resize(static_cast<size_t>(N));
    act_.lnf_rstd.resize(static_cast<size_t>(N));
    layernorm_forward(act_.lnf_out.data(), act_.lnf_mean.data(),
                      act_.lnf_rstd.data(), act_.x_final.data(), p(kLnfW),
                      p(kLnfB), N, C);
    // Tied output projection.
    act_.logits.resize(static_cast<size_t>(N) * V);
    matmul_forward(act_.logits.data(), act_.lnf_out.data(), p(kTokEmb),
                   nullptr, N, C, V);
  }

  void init_weights(uint64_t seed) {
    Rng rng(seed);
    const double base_std = 0.02;
    const double resid_std =
        base_std / std::sqrt(2.0 * static_cast<double>(cfg_.n_layers));
    for (const TensorSpec& s : specs_) {
      F* dst = params_.data() + s.offset;
      const bool is_resid_proj = s.name.find("attn_proj_w") != std::string::npos ||
                                 s.name.find("fcproj_w") != std::string::npos;
      const bool is_ln_gain = s.name.find("ln") != std::string::npos &&
                              s.name.back() == 'w';
      if (s.is_matrix) {
        const double std = is_resid_proj ? resid_std : base_std;
        for (int64_t i = 0; i < s.size; ++i) {
          dst[i] = static_cast<F>(rng.gauss() * std);
        }
      } else if (is_ln_gain) {
        for (int64_t i = 0; i < s.size; ++i) dst[i] = F(1);
      } else {
        for (int64_t i = 0; i < s.size; ++i) dst[i] = F(0);
      }
    }
  }

  ModelConfig cfg_;
  std::vector<TensorSpec> specs_;
  int64_t n_params_ = 0;
  std::vector<F> params_;
  std::vector<F> grads_;
  Activations act_;
  Rng dropout_rng_{0};
};

using Gpt = GptT<float>;

// AdamW with decoupled weight decay on matrix tensors only.
class AdamW {
 public:
  AdamW(size_t n_params, const TrainConfig& t)
      : m_(n_params, 0.0f), v_(n_params, 0.0f), cfg_(t) {}

  void step(std::vector<float>& params, const std::vector<float>& grads,
            const std::vector<TensorSpec>& specs, double lr);

  int64_t steps_taken() const { return t_; }

 private:
  std::vector<float> m_;
  std::vector<float> v_;
  TrainConfig cfg_;
  int64_t t_ = 0;
};

// Linear warmup then cosine decay from lr_max to lr_min.
double lr_at(int64_t iter, const TrainConfig& t);

// Training loop: random contiguous windows, AdamW, cosine schedule,
// periodic dev evaluation with early stopping, best-dev checkpointing.
Checkpoint train(Gpt& model, const DatasetSplit& data, const TrainConfig& t,
                 uint64_t vocab_hash, std::vector<EvalRecord>* log = nullptr);

// Mean dev loss over a fixed batch set (helper shared by train and tests).
double evaluate(Gpt& model, std::span<const TokenId> dev,
                const TrainConfig& t);

}  // namespace phonpipe::lm

#endif  // PHONPIPE_LM_HPP
