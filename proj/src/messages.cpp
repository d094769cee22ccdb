#include "hdphlm/messages.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hdphlm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Eigen::MatrixXd cache_emissions(const FeatureSequence& seq,
                                const std::vector<LetterParams>& letters) {
  const int T = seq.length();
  const int nl = static_cast<int>(letters.size());
  Eigen::MatrixXd cache(T, nl);
  for (int j = 0; j < nl; ++j) {
    if (letters[j].mean.size() != seq.dim())
      throw std::invalid_argument("cache_emissions: feature dimension mismatch");
    GaussianLogDensity density(letters[j].mean, letters[j].cov);
    for (int t = 0; t < T; ++t)
      cache(t, j) = density(seq.frames.row(t).transpose());
  }
  return cache;
}

SequenceCaches make_sequence_caches(const FeatureSequence& seq,
                                    const std::vector<LetterParams>& letters,
                                    int d_max_letter) {
  SequenceCaches caches;
  caches.emissions = cache_emissions(seq, letters);
  const int T = seq.length();
  const int nl = static_cast<int>(letters.size());
  caches.emission_prefix = Eigen::MatrixXd::Zero(T + 1, nl);
  for (int t = 0; t < T; ++t)
    caches.emission_prefix.row(t + 1) =
        caches.emission_prefix.row(t) + caches.emissions.row(t);
  caches.duration.reserve(nl);
  for (const auto& lp : letters)
    caches.duration.emplace_back(lp.omega, d_max_letter);
  return caches;
}

Eigen::MatrixXd word_alpha_table(const std::vector<int>& word, int start,
                                 int max_duration, const SequenceCaches& caches) {
  const int L = static_cast<int>(word.size());
  const int T = caches.length();
  if (start < 0 || start + max_duration > T || max_duration < 0)
    throw std::invalid_argument("word_alpha_table: window out of range");

  Eigen::MatrixXd alpha =
      Eigen::MatrixXd::Constant(max_duration + 1, L + 1, kNegInf);
  alpha(0, 0) = 0.0;

  std::vector<double> terms;
  for (int k = 1; k <= L; ++k) {
    const int letter = word[k - 1];
    const TruncatedPoisson& pmf = caches.duration[letter];
    for (int u = k; u <= max_duration; ++u) {
      const int d_hi = std::min(u - (k - 1), pmf.d_max());
      terms.clear();
      for (int d = 1; d <= d_hi; ++d) {
        const double prev = alpha(u - d, k - 1);
        if (prev == kNegInf) continue;
        terms.push_back(prev + pmf.log_pmf(d) +
                        caches.emission_sum(letter, start + u - d, start + u));
      }
      alpha(u, k) = log_sum_exp(terms);
    }
  }
  return alpha;
}

double word_log_likelihood(const std::vector<int>& word, int start, int duration,
                           const SequenceCaches& caches) {
  if (duration < 1 || start < 0 || start + duration > caches.length())
    throw std::invalid_argument("word_log_likelihood: window out of range");
  if (duration < static_cast<int>(word.size())) return kNegInf;
  const Eigen::MatrixXd alpha = word_alpha_table(word, start, duration, caches);
  return alpha(duration, static_cast<int>(word.size()));
}

MessageBoard compute_backward_messages_with_cache(const ModelState& model,
                                                  SequenceCaches caches) {
  const int T = caches.length();
  const int nw = model.inventory.size();
  MessageBoard board;
  board.caches = std::move(caches);
  board.d_cap = std::min(model.hyper.d_max_word, T);

  // One alpha table per (word, start); its last column holds every duration.
  board.word_lik.assign(nw, Eigen::MatrixXd::Constant(T, board.d_cap + 1, kNegInf));
  for (int i = 0; i < nw; ++i) {
    const auto& word = model.inventory.words[i];
    const int L = static_cast<int>(word.size());
    for (int t = 0; t < T; ++t) {
      const int d_hi = std::min(board.d_cap, T - t);
      if (d_hi < L) continue;
      const Eigen::MatrixXd alpha = word_alpha_table(word, t, d_hi, board.caches);
      for (int d = L; d <= d_hi; ++d) board.word_lik[i](t, d) = alpha(d, L);
    }
  }

  Eigen::MatrixXd log_pi(nw, nw);
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nw; ++j) {
      const double p = model.transitions.pi_lm(i, j);
      log_pi(i, j) = p > 0.0 ? std::log(p) : kNegInf;
    }

  board.b = Eigen::MatrixXd::Constant(T + 1, nw, kNegInf);
  board.b_star = Eigen::MatrixXd::Constant(T, nw, kNegInf);
  board.b.row(T).setZero();

  std::vector<double> terms;
  for (int t = T - 1; t >= 0; --t) {
    for (int i = 0; i < nw; ++i) {
      const int d_hi = std::min(board.d_cap, T - t);
      terms.clear();
      for (int d = 1; d <= d_hi; ++d) {
        const double lik = board.word_lik[i](t, d);
        if (lik == kNegInf) continue;
        const double cont = board.b(t + d, i);
        if (cont == kNegInf) continue;
        terms.push_back(lik + cont);
      }
      board.b_star(t, i) = log_sum_exp(terms);
    }
    for (int i = 0; i < nw; ++i) {
      terms.clear();
      for (int j = 0; j < nw; ++j) {
        if (log_pi(i, j) == kNegInf || board.b_star(t, j) == kNegInf) continue;
        terms.push_back(log_pi(i, j) + board.b_star(t, j));
      }
      board.b(t, i) = log_sum_exp(terms);
    }
  }
  return board;
}

MessageBoard compute_backward_messages(const FeatureSequence& seq,
                                       const ModelState& model) {
  return compute_backward_messages_with_cache(
      model, make_sequence_caches(seq, model.letters, model.hyper.d_max_letter));
}

double evidence_from_messages(const MessageBoard& board, const ModelState& model) {
  const int nw = model.inventory.size();
  std::vector<double> terms;
  for (int i = 0; i < nw; ++i) {
    const double p = model.transitions.pi_lm_initial[i];
    if (p > 0.0 && board.b_star(0, i) != kNegInf)
      terms.push_back(std::log(p) + board.b_star(0, i));
  }
  return log_sum_exp(terms);
}

namespace {

// Enumerates every full labeling and collects per-path log-probabilities.
struct BruteForce {
  const ModelState& model;
  const SequenceCaches& caches;
  int T;
  std::vector<double> path_logps;

  // Appends the log-probability of every exact L-partition of `remaining`
  // frames starting at t, letter k onward.
  void partitions(const std::vector<int>& word, int k, int t, int remaining,
                  double logp, std::vector<double>& out) const {
    const int L = static_cast<int>(word.size());
    if (k == L) {
      if (remaining == 0) out.push_back(logp);
      return;
    }
    const int letter = word[k];
    const TruncatedPoisson& pmf = caches.duration[letter];
    const int keep = L - k - 1;  // letters still to place, one frame each min
    for (int d = 1; d <= std::min(remaining - keep, pmf.d_max()); ++d) {
      const double term = pmf.log_pmf(d) + caches.emission_sum(letter, t, t + d);
      partitions(word, k + 1, t + d, remaining - d, logp + term, out);
    }
  }

  void words(int t, int prev, double logp) {
    for (int i = 0; i < model.inventory.size(); ++i) {
      const double p = prev < 0 ? model.transitions.pi_lm_initial[i]
                                : model.transitions.pi_lm(prev, i);
      if (p <= 0.0) continue;
      const int d_hi = std::min(model.hyper.d_max_word, T - t);
      for (int d = 1; d <= d_hi; ++d) {
        std::vector<double> parts;
        partitions(model.inventory.words[i], 0, t, d, logp + std::log(p), parts);
        for (double lp : parts) {
          if (t + d == T)
            path_logps.push_back(lp);
          else
            words(t + d, i, lp);
        }
      }
    }
  }
};

}  // namespace

double brute_force_evidence(const FeatureSequence& seq, const ModelState& model,
                            const BruteForceLimits& limits) {
  if (seq.length() > limits.max_frames ||
      model.inventory.size() > limits.max_words ||
      model.hyper.d_max_word > limits.max_duration ||
      model.hyper.d_max_letter > limits.max_duration)
    throw std::invalid_argument("brute_force_evidence: instance exceeds enumeration limits");

  const SequenceCaches caches =
      make_sequence_caches(seq, model.letters, model.hyper.d_max_letter);
  BruteForce bf{model, caches, seq.length(), {}};
  bf.words(0, -1, 0.0);
  return log_sum_exp(bf.path_logps);
}

}  // namespace hdphlm
