#pragma once

#include <random>

#include "hdphlm/model.hpp"

namespace fixtures {

// Small random instance for oracle comparisons.  All structural knobs are
// explicit so tests can stay inside enumeration limits.
inline hdphlm::ModelState tiny_model(std::uint64_t seed, int n_words, int n_letters,
                                     int word_len_max, int d_max_letter,
                                     int d_max_word) {
  hdphlm::Hyperparameters h = hdphlm::Hyperparameters::defaults(1);
  h.n_words_max = n_words;
  h.n_letters_max = n_letters;
  h.word_len_max = word_len_max;
  h.d_max_letter = d_max_letter;
  h.d_max_word = d_max_word;
  h.duration_prior = {4.0, 2.0};
  hdphlm::Rng rng = hdphlm::make_rng(seed);
  hdphlm::ModelState model = hdphlm::sample_model_from_prior(h, rng);
  // Keep emissions informative but overlapping.
  for (int j = 0; j < n_letters; ++j) {
    model.letters[j].mean = Eigen::VectorXd::Constant(1, 2.0 * j);
    model.letters[j].cov = Eigen::MatrixXd::Constant(1, 1, 1.0 + 0.25 * j);
    model.letters[j].omega = 1.5 + 0.5 * j;
  }
  return model;
}

inline hdphlm::FeatureSequence random_sequence(std::uint64_t seed, int T) {
  hdphlm::Rng rng = hdphlm::make_rng(seed);
  std::normal_distribution<double> normal(1.0, 2.0);
  hdphlm::FeatureSequence seq;
  seq.frames.resize(T, 1);
  for (int t = 0; t < T; ++t) seq.frames(t, 0) = normal(rng);
  return seq;
}

}  // namespace fixtures
