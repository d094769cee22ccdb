#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hdphlm/model.hpp"
#include "hdphlm/prob.hpp"

namespace hdphlm {

// Per-sequence tables shared by every word-likelihood evaluation:
// frame-by-letter emission log-densities, their prefix sums, and the
// truncated duration pmf of each letter.
struct SequenceCaches {
  Eigen::MatrixXd emissions;        // T x n_letters, log N(y_t; theta_j)
  Eigen::MatrixXd emission_prefix;  // (T+1) x n_letters, column prefix sums
  std::vector<TruncatedPoisson> duration;  // one per letter

  int length() const { return static_cast<int>(emissions.rows()); }
  double emission_sum(int letter, int start, int end) const {  // frames [start, end)
    return emission_prefix(end, letter) - emission_prefix(start, letter);
  }
};

// cache[t][j] = log N(y_t; theta_j).
Eigen::MatrixXd cache_emissions(const FeatureSequence& seq,
                                const std::vector<LetterParams>& letters);

SequenceCaches make_sequence_caches(const FeatureSequence& seq,
                                    const std::vector<LetterParams>& letters,
                                    int d_max_letter);

// Forward table over (frames consumed, letters completed) for one word
// occurrence starting at `start`.  alpha(d, L) is the log-likelihood of the
// word consuming exactly d frames; entries with d < k are -inf.
Eigen::MatrixXd word_alpha_table(const std::vector<int>& word, int start,
                                 int max_duration, const SequenceCaches& caches);

// log sum over letter-duration partitions of `duration` frames, including
// the duration pmf factors.  -inf when duration < word length.
double word_log_likelihood(const std::vector<int>& word, int start, int duration,
                           const SequenceCaches& caches);

// Backward messages for the word-level semi-Markov chain plus the cached
// per-(word, start, duration) log-likelihood tables they were built from.
struct MessageBoard {
  Eigen::MatrixXd b;       // (T+1) x n_words; b(T, i) = 0
  Eigen::MatrixXd b_star;  // T x n_words
  std::vector<Eigen::MatrixXd> word_lik;  // per word: T x (d_cap+1)
  SequenceCaches caches;
  int d_cap = 0;  // min(d_max_word, T)
};

MessageBoard compute_backward_messages(const FeatureSequence& seq,
                                       const ModelState& model);
// Same computation against a caller-supplied emission cache.
MessageBoard compute_backward_messages_with_cache(const ModelState& model,
                                                  SequenceCaches caches);

// log P(y) read off the messages.
double evidence_from_messages(const MessageBoard& board, const ModelState& model);

struct BruteForceLimits {
  int max_frames = 8;
  int max_words = 3;
  int max_duration = 4;
};

// Exact log-evidence by enumerating every (word path, word durations,
// letter partitions) labeling.  Refuses instances beyond `limits`.
double brute_force_evidence(const FeatureSequence& seq, const ModelState& model,
                            const BruteForceLimits& limits = {});

}  // namespace hdphlm
