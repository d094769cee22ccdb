#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hdphlm/messages.hpp"
#include "hdphlm/model.hpp"

namespace hdphlm {

struct GibbsConfig {
  int iterations = 100;
  std::uint64_t seed = 0;
  int sir_candidates_per_occurrence = 1;
  int trial_count = 1;   // independent chains; used by drivers
  int record_every = 1;
  int n_threads = 1;     // per-sequence workers inside one sweep

  void validate() const;
};

// Per-iteration monitors.  ARI vectors stay empty when no ground truth is
// supplied; absence is not zero.
struct GibbsTrace {
  std::vector<int> iteration;
  std::vector<double> joint_log_likelihood;
  std::vector<double> letter_ari;
  std::vector<double> word_ari;
  std::vector<double> seconds;
};

// One frame window holding a word occurrence.
struct OccurrenceRef {
  int sequence = 0;
  int start = 0;
  int duration = 0;
};

// Word path and word durations sampled left to right from the backward
// messages; durations always sum to the sequence length.
std::pair<std::vector<int>, std::vector<int>> forward_sample_words(
    const MessageBoard& board, const ModelState& model, Rng& rng);

// Letter durations for a fixed letter sequence over a frame window, drawn
// from the exact partition posterior.
std::vector<LetterSpan> sample_letter_plan(int start, int duration,
                                           const std::vector<int>& word,
                                           const SequenceCaches& caches, Rng& rng);

// Unconstrained letter sequence for one window: an explicit-duration letter
// HSMM capped at word_len_max letters.
struct SegmentProposal {
  std::vector<LetterSpan> plan;
  double log_evidence = 0.0;  // log P(y_window), marginal over letterings
};

SegmentProposal sample_segment_letters(int start, int duration,
                                       const ModelState& model,
                                       const SequenceCaches& caches, Rng& rng);

// Sampling-importance-resampling update of the word inventory.  Candidates
// come from single-occurrence posteriors; weights multiply in the remaining
// occurrences.  Words without occurrences are redrawn from the prior.
WordInventory resample_word_inventory_sir(
    const std::vector<std::vector<OccurrenceRef>>& occurrences,
    const ModelState& model, const std::vector<SequenceCaches>& caches,
    int candidates_per_occurrence, Rng& rng);

// Conjugate NIW/Gamma draws per letter given frame and duration assignments
// taken from tentative letter plans.
std::vector<LetterParams> resample_acoustic_params(
    const std::vector<Segmentation>& plans,
    const std::vector<FeatureSequence>& dataset, const Hyperparameters& hyper,
    Rng& rng);

// Dirichlet rows with transition counts; the word level excludes
// self-transitions, and both base measures are refreshed through the
// usual table-count auxiliary variables.
TransitionModel resample_transition_models(
    const std::vector<std::vector<int>>& word_sequences,
    const WordInventory& inventory, const Hyperparameters& hyper,
    const TransitionModel& current, Rng& rng);

struct GibbsResult {
  ModelState model;
  std::vector<Segmentation> segmentations;
  GibbsTrace trace;
};

// Continuation point: a run resumed from here reproduces the uninterrupted
// run bit for bit because worker streams derive from absolute iteration
// numbers.
struct ResumeState {
  ModelState model;
  int iterations_completed = 0;
};

GibbsResult run_gibbs(const std::vector<FeatureSequence>& dataset,
                      const Hyperparameters& hyper, const GibbsConfig& config,
                      const std::vector<Segmentation>* ground_truth = nullptr,
                      const ResumeState* resume = nullptr);

// Index of the trial with the highest final joint log-likelihood; ties go to
// the lowest index.
int select_map_trial(const std::vector<GibbsResult>& results);

}  // namespace hdphlm
