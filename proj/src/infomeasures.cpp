#include "phonpipe/infomeasures.hpp"

#include <cmath>

#include "phonpipe/error.hpp"

namespace phonpipe::info {

double surprisal(double p) {
  if (!(p > 0.0) || p > 1.0) {
    throw Error("surprisal: probability must be in (0, 1]");
  }
  return -std::log2(p);
}

double entropy(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0) throw Error("entropy: negative probability");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw Error("entropy: probabilities sum to " + std::to_string(sum));
  }
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

SurprisalSeries sequence_surprisals(lm::Gpt& model,
                                    std::span<const TokenId> ids, int window) {
  if (window < 1) throw Error("sequence_surprisals: window must be >= 1");
  if (ids.empty()) throw Error("sequence_surprisals: empty sequence");
  const int block = model.config().block_size;
  const int effective_window = std::min(window, block);

  SurprisalSeries series;
  series.window = window;
  series.entries.reserve(ids.size());

  for (size_t i = 0; i < ids.size(); ++i) {
    SurprisalEntry e;
    e.token = ids[i];
    if (i == 0) {
      e.context_length = 0;
      series.entries.push_back(e);
      continue;
    }
    const size_t ctx_begin =
        i > static_cast<size_t>(effective_window) ? i - effective_window : 0;
    const std::span<const TokenId> ctx = ids.subspan(ctx_begin, i - ctx_begin);
    e.context_length = static_cast<int>(ctx.size());
    const std::vector<float> probs = model.next_distribution(ctx);
    double p = static_cast<double>(probs[ids[i]]);
    if (p < kProbFloor) {
      p = kProbFloor;
      ++series.floored;
    }
    e.surprisal_bits = -std::log2(p);
    std::vector<double> pd(probs.begin(), probs.end());
    // Renormalize away float32 softmax rounding before the entropy check.
    double sum = 0.0;
    for (double v : pd) sum += v;
    for (double& v : pd) v /= sum;
    e.entropy_bits = entropy(pd);
    series.entries.push_back(e);
  }
  return series;
}

std::map<TokenId, double> informativity(
    const std::vector<std::pair<TokenId, double>>& occurrences) {
  std::map<TokenId, std::pair<double, size_t>> acc;
  for (const auto& [id, s] : occurrences) {
    auto& slot = acc[id];
    slot.first += s;
    slot.second += 1;
  }
  std::map<TokenId, double> out;
  for (const auto& [id, slot] : acc) {
    out[id] = slot.first / static_cast<double>(slot.second);
  }
  return out;
}

std::map<TokenId, double> informativity(const SurprisalSeries& series) {
  std::vector<std::pair<TokenId, double>> occ;
  for (const SurprisalEntry& e : series.entries) {
    if (e.surprisal_bits.has_value()) {
      occ.push_back({e.token, *e.surprisal_bits});
    }
  }
  return informativity(occ);
}

std::vector<WordSurprisal> word_surprisals(const SurprisalSeries& series,
                                           TokenId space_id) {
  std::vector<WordSurprisal> words;
  WordSurprisal cur;
  cur.word_index = 0;
  auto flush = [&]() {
    if (cur.n_phonemes > 0) {
      words.push_back(cur);
    }
    cur = WordSurprisal{};
    cur.word_index = static_cast<int>(words.size());
  };
  for (const SurprisalEntry& e : series.entries) {
    if (e.token == space_id) {
      flush();
      continue;
    }
    ++cur.n_phonemes;
    if (e.surprisal_bits.has_value()) {
      cur.surprisal_bits += *e.surprisal_bits;
    } else {
      cur.complete = false;
    }
  }
  flush();
  return words;
}

}  // namespace phonpipe::info
