#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "hdphlm/prob.hpp"
#include "hdphlm/rng.hpp"

namespace hdphlm {

// Weak-limit truncations and priors.  The two DP levels share the same
// structure: a language model over words and a word model over letters.
struct Hyperparameters {
  double gamma_lm = 10.0;
  double alpha_lm = 10.0;
  double gamma_wm = 10.0;
  double alpha_wm = 10.0;
  int n_words_max = 6;
  int n_letters_max = 7;
  GammaParams duration_prior{50.0, 10.0};
  NiwParams emission_prior;
  int d_max_letter = 0;  // 0: derived as 4x the prior mean duration
  int d_max_word = 0;    // 0: derived as word_len_max * d_max_letter
  int word_len_max = 8;

  // Fills the emission prior for dimension `dim` and derives truncations.
  static Hyperparameters defaults(int dim);
  void finalize();  // derive d_max fields left at 0
  void validate() const;
};

// Per-letter Gaussian emission and Poisson duration parameters.
struct LetterParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double omega = 1.0;
};

struct WordInventory {
  std::vector<std::vector<int>> words;

  int size() const { return static_cast<int>(words.size()); }
  void validate(const Hyperparameters& hyper) const;
};

// Row-stochastic transition structure for both levels.  Word rows exclude
// self-transitions: a semi-Markov changepoint must switch words.
struct TransitionModel {
  Eigen::VectorXd beta_lm;
  Eigen::MatrixXd pi_lm;
  Eigen::VectorXd pi_lm_initial;
  Eigen::VectorXd beta_wm;
  Eigen::MatrixXd pi_wm;
  Eigen::VectorXd pi_wm_initial;

  void validate() const;
};

struct ModelState {
  TransitionModel transitions;
  WordInventory inventory;
  std::vector<LetterParams> letters;
  Hyperparameters hyper;

  void validate() const;
};

// One observed sequence: T frames of D-dimensional features.
struct FeatureSequence {
  Eigen::MatrixXd frames;  // T x D
  double frame_rate = 100.0;

  int length() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

struct LetterSpan {
  int letter = 0;
  int duration = 0;
};

// Latent structure of one sequence: the word path, each word's letter plan,
// and the implied frame-level labels.
struct Segmentation {
  std::vector<int> word_ids;
  std::vector<int> word_durations;
  std::vector<std::vector<LetterSpan>> letter_plans;

  int total_frames() const;
  std::vector<int> frame_letter_labels() const;
  std::vector<int> frame_word_labels() const;
  // (start, end) frame of every letter segment, in order; end is inclusive.
  std::vector<std::pair<int, int>> letter_boundaries() const;
  // Checks duration sums; with an inventory, also that every plan expands
  // the word it claims.
  void validate(const WordInventory* inventory = nullptr) const;
};

ModelState sample_model_from_prior(const Hyperparameters& hyper, Rng& rng);

// Letter sequence of a fresh word under the prior: uniform length in
// [1, word_len_max], letters chained through pi_wm.
std::vector<int> sample_prior_word(const Hyperparameters& hyper,
                                   const TransitionModel& transitions, Rng& rng);

std::pair<FeatureSequence, Segmentation> generate_sequence(
    const ModelState& model, const std::vector<int>& word_id_sequence, Rng& rng);

struct Experiment1Data {
  std::vector<FeatureSequence> sequences;
  std::vector<Segmentation> truth;
  std::vector<std::vector<int>> word_sequences;  // 20 entries, 2 observations each
  ModelState ground_truth;
};

// Synthetic benchmark: 5 scalar letters with means 5, 10, ..., 25 and
// variance sigma2, 4 fixed words, 16 word pairs + 4 three-word sentences,
// two observations per sentence.
Experiment1Data make_experiment1_dataset(double sigma2, Rng& rng);

// log P(word path) + log P(letter durations) + log P(frames | assignment)
// summed over the dataset.  Deterministic monitor of sampler progress.
double joint_log_likelihood(const ModelState& model,
                            const std::vector<FeatureSequence>& dataset,
                            const std::vector<Segmentation>& segmentations);

}  // namespace hdphlm
