#ifndef PHONPIPE_INFOMEASURES_HPP
#define PHONPIPE_INFOMEASURES_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "phonpipe/ipa_tok.hpp"
#include "phonpipe/lm.hpp"

namespace phonpipe::info {

// -log2 p, the information content of an event of probability p.
// Probabilities below the floor are clamped (softmax cannot emit zeros,
// but low-precision checkpoints might underflow); callers that need the
// diagnostic count use SurprisalSeries::floored.
double surprisal(double p);

constexpr double kProbFloor = 1e-12;

// -sum p log2 p with 0 log 0 = 0. Rejects vectors that are not normalized
// within 1e-6 or carry negative entries.
double entropy(std::span<const double> p);

struct SurprisalEntry {
  TokenId token = 0;
  int context_length = 0;
  // Position 0 has no context and therefore no surprisal or entropy.
  std::optional<double> surprisal_bits;
  std::optional<double> entropy_bits;
};

struct SurprisalSeries {
  std::vector<SurprisalEntry> entries;
  int window = 0;
  size_t floored = 0;  // how many probabilities hit the floor
};

// Per-position surprisal (and predictive entropy) under the model, using a
// rolling context window: position i >= 1 conditions on
// ids[max(0, i-window) .. i-1]. Position 0 is the undefined marker.
SurprisalSeries sequence_surprisals(lm::Gpt& model, std::span<const TokenId> ids,
                                    int window = 10);

// A token type's informativity: the mean surprisal over its occurrences.
// Types with no defined occurrence are absent from the map.
std::map<TokenId, double> informativity(
    const std::vector<std::pair<TokenId, double>>& occurrences);

std::map<TokenId, double> informativity(const SurprisalSeries& series);

struct WordSurprisal {
  int word_index = 0;
  double surprisal_bits = 0.0;
  int n_phonemes = 0;
  bool complete = true;  // false when a member position was undefined
};

// Convenience derived column: sums phoneme surprisals between space tokens.
std::vector<WordSurprisal> word_surprisals(const SurprisalSeries& series,
                                           TokenId space_id);

}  // namespace phonpipe::info

#endif  // PHONPIPE_INFOMEASURES_HPP
