#pragma once

// Independent reference implementations used only by tests.  They share data
// types with the library but recompute every quantity with a different
// algorithm (explicit enumeration / memoized recursion instead of tabulated
// dynamic programming).

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "hdphlm/messages.hpp"
#include "hdphlm/model.hpp"

namespace oracles {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double lse_pair(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Frame-by-frame emission sum, bypassing the library's prefix-sum cache.
inline double emission_sum_direct(const hdphlm::SequenceCaches& caches, int letter,
                                  int begin, int end) {
  double s = 0.0;
  for (int t = begin; t < end; ++t) s += caches.emissions(t, letter);
  return s;
}

// Likelihood of one word over one window by explicit enumeration of every
// duration partition.
inline double enumerate_word_likelihood(const std::vector<int>& word, int start,
                                        int duration,
                                        const hdphlm::SequenceCaches& caches,
                                        std::size_t k = 0, int offset = 0,
                                        double logp = 0.0) {
  if (k == word.size())
    return offset == duration ? logp : kNegInf;
  const int letter = word[k];
  const auto& pmf = caches.duration[letter];
  double total = kNegInf;
  for (int d = 1; d <= duration - offset && d <= pmf.d_max(); ++d) {
    const double term = pmf.log_pmf(d) +
                        emission_sum_direct(caches, letter, start + offset,
                                            start + offset + d);
    total = lse_pair(total, enumerate_word_likelihood(word, start, duration, caches,
                                                      k + 1, offset + d, logp + term));
  }
  return total;
}

// log P(y_{t:T} | previous word), memoized top-down; the library computes the
// same quantity bottom-up in compute_backward_messages.
struct SuffixEvidence {
  const hdphlm::ModelState& model;
  const hdphlm::SequenceCaches& caches;
  int T;
  std::map<std::pair<int, int>, double> memo;

  double operator()(int t, int prev) {
    if (t == T) return 0.0;
    const auto key = std::make_pair(t, prev);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
    double total = kNegInf;
    for (int i = 0; i < model.inventory.size(); ++i) {
      const double p = prev < 0 ? model.transitions.pi_lm_initial[i]
                                : model.transitions.pi_lm(prev, i);
      if (p <= 0.0) continue;
      for (int d = 1; d <= T - t && d <= model.hyper.d_max_word; ++d) {
        const double lik = enumerate_word_likelihood(model.inventory.words[i], t, d, caches);
        if (lik == kNegInf) continue;
        total = lse_pair(total, std::log(p) + lik + (*this)(t + d, i));
      }
    }
    memo[key] = total;
    return total;
  }
};

inline double suffix_evidence(const hdphlm::FeatureSequence& seq,
                              const hdphlm::ModelState& model) {
  const hdphlm::SequenceCaches caches = hdphlm::make_sequence_caches(
      seq, model.letters, model.hyper.d_max_letter);
  SuffixEvidence s{model, caches, seq.length(), {}};
  return s(0, -1);
}

// Exact law of (first word, first duration) given the data, by enumeration.
inline std::map<std::pair<int, int>, double> first_segment_law(
    const hdphlm::FeatureSequence& seq, const hdphlm::ModelState& model) {
  const hdphlm::SequenceCaches caches = hdphlm::make_sequence_caches(
      seq, model.letters, model.hyper.d_max_letter);
  SuffixEvidence s{model, caches, seq.length(), {}};
  std::map<std::pair<int, int>, double> logp;
  double total = kNegInf;
  for (int i = 0; i < model.inventory.size(); ++i) {
    const double p = model.transitions.pi_lm_initial[i];
    if (p <= 0.0) continue;
    for (int d = 1; d <= seq.length() && d <= model.hyper.d_max_word; ++d) {
      const double lik = enumerate_word_likelihood(model.inventory.words[i], 0, d, caches);
      if (lik == kNegInf) continue;
      const double lp = std::log(p) + lik + s(d, i);
      logp[{i, d}] = lp;
      total = lse_pair(total, lp);
    }
  }
  std::map<std::pair<int, int>, double> law;
  for (const auto& [key, lp] : logp) law[key] = std::exp(lp - total);
  return law;
}

}  // namespace oracles
