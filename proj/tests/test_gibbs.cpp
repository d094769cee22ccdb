#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "fixtures.hpp"
#include "hdphlm/gibbs.hpp"
#include "oracles.hpp"

using namespace hdphlm;

TEST_CASE("config validation") {
  GibbsConfig c;
  CHECK_NOTHROW(c.validate());
  c.iterations = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.record_every = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("forward-sampled word paths tile the sequence") {
  const ModelState model = fixtures::tiny_model(1, 3, 3, 3, 4, 9);
  const FeatureSequence seq = fixtures::random_sequence(2, 20);
  const MessageBoard board = compute_backward_messages(seq, model);
  Rng rng = make_rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const auto [words, durations] = forward_sample_words(board, model, rng);
    REQUIRE(words.size() == durations.size());
    int total = 0;
    for (std::size_t s = 0; s < words.size(); ++s) {
      CHECK(words[s] >= 0);
      CHECK(words[s] < 3);
      CHECK(durations[s] >= 1);
      if (s > 0) CHECK(words[s] != words[s - 1]);  // no self-transitions
      total += durations[s];
    }
    CHECK(total == 20);
  }
}

TEST_CASE("first segment follows the enumerated conditional law") {
  const ModelState model = fixtures::tiny_model(4, 2, 2, 2, 3, 3);
  const FeatureSequence seq = fixtures::random_sequence(5, 6);
  const auto law = oracles::first_segment_law(seq, model);
  const MessageBoard board = compute_backward_messages(seq, model);

  Rng rng = make_rng(6);
  const int n = 20000;
  std::map<std::pair<int, int>, double> freq;
  for (int i = 0; i < n; ++i) {
    const auto [words, durations] = forward_sample_words(board, model, rng);
    freq[{words[0], durations[0]}] += 1.0 / n;
  }
  double tv = 0.0;
  for (const auto& [key, p] : law) tv += std::fabs(p - freq[key]);
  for (const auto& [key, p] : freq)
    if (!law.count(key)) tv += p;
  CHECK(tv / 2.0 < 0.02);
}

TEST_CASE("letter plans partition their window with the right letters") {
  const ModelState model = fixtures::tiny_model(7, 2, 3, 3, 5, 15);
  const FeatureSequence seq = fixtures::random_sequence(8, 18);
  const SequenceCaches caches =
      make_sequence_caches(seq, model.letters, model.hyper.d_max_letter);
  Rng rng = make_rng(9);
  const std::vector<int> word = {2, 0, 1};
  for (int rep = 0; rep < 100; ++rep) {
    const auto plan = sample_letter_plan(3, 11, word, caches, rng);
    REQUIRE(plan.size() == word.size());
    int total = 0;
    for (std::size_t k = 0; k < plan.size(); ++k) {
      CHECK(plan[k].letter == word[k]);
      CHECK(plan[k].duration >= 1);
      CHECK(plan[k].duration <= model.hyper.d_max_letter);
      total += plan[k].duration;
    }
    CHECK(total == 11);
  }
  CHECK_THROWS_AS(sample_letter_plan(0, 2, word, caches, rng), std::invalid_argument);
}

TEST_CASE("letter plan durations follow the exact partition posterior") {
  const ModelState model = fixtures::tiny_model(10, 2, 2, 2, 4, 8);
  const FeatureSequence seq = fixtures::random_sequence(11, 8);
  const SequenceCaches caches =
      make_sequence_caches(seq, model.letters, model.hyper.d_max_letter);
  const std::vector<int> word = {0, 1};
  const int window = 5;

  // Exact law of the first letter's duration.
  std::map<int, double> law;
  double total = oracles::kNegInf;
  for (int d1 = 1; d1 <= 4; ++d1) {
    const int d2 = window - d1;
    if (d2 < 1 || d2 > 4) continue;
    const double lp = caches.duration[0].log_pmf(d1) +
                      caches.emission_sum(0, 0, d1) +
                      caches.duration[1].log_pmf(d2) +
                      caches.emission_sum(1, d1, window);
    law[d1] = lp;
    total = oracles::lse_pair(total, lp);
  }
  for (auto& [d, lp] : law) lp = std::exp(lp - total);

  Rng rng = make_rng(12);
  const int n = 20000;
  std::map<int, double> freq;
  for (int i = 0; i < n; ++i)
    freq[sample_letter_plan(0, window, word, caches, rng)[0].duration] += 1.0 / n;
  for (const auto& [d, p] : law) CHECK(freq[d] == doctest::Approx(p).epsilon(0.05));
}

TEST_CASE("segment lettering respects the length cap and single-letter evidence") {
  ModelState model = fixtures::tiny_model(13, 2, 3, 2, 6, 12);
  const FeatureSequence seq = fixtures::random_sequence(14, 12);
  const SequenceCaches caches =
      make_sequence_caches(seq, model.letters, model.hyper.d_max_letter);
  Rng rng = make_rng(15);
  for (int rep = 0; rep < 50; ++rep) {
    const SegmentProposal prop = sample_segment_letters(2, 7, model, caches, rng);
    CHECK(prop.plan.size() <= 2);
    int total = 0;
    for (const auto& span : prop.plan) total += span.duration;
    CHECK(total == 7);
    CHECK(std::isfinite(prop.log_evidence));
  }

  // With word_len_max = 1 the evidence has a one-line closed form.
  model.hyper.word_len_max = 1;
  const int d = 4;
  double expected = oracles::kNegInf;
  for (int j = 0; j < 3; ++j) {
    const double p = model.transitions.pi_wm_initial[j];
    if (p <= 0.0) continue;
    expected = oracles::lse_pair(
        expected, std::log(p) + caches.duration[j].log_pmf(d) +
                      caches.emission_sum(j, 0, d));
  }
  const SegmentProposal prop = sample_segment_letters(0, d, model, caches, rng);
  CHECK(prop.plan.size() == 1);
  CHECK(prop.log_evidence == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("inventory resampling keeps words feasible for every occurrence") {
  const ModelState model = fixtures::tiny_model(16, 3, 3, 3, 5, 15);
  std::vector<FeatureSequence> dataset = {fixtures::random_sequence(17, 20),
                                          fixtures::random_sequence(18, 15)};
  std::vector<SequenceCaches> caches;
  for (const auto& seq : dataset)
    caches.push_back(make_sequence_caches(seq, model.letters, model.hyper.d_max_letter));

  std::vector<std::vector<OccurrenceRef>> occ(3);
  occ[0] = {{0, 0, 8}, {1, 3, 6}};
  occ[1] = {{0, 8, 12}};
  // word 2 has no occurrences: redrawn from the prior.
  Rng rng = make_rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const WordInventory inv = resample_word_inventory_sir(occ, model, caches, 1, rng);
    REQUIRE(inv.size() == 3);
    CHECK_NOTHROW(inv.validate(model.hyper));
    CHECK(static_cast<int>(inv.words[0].size()) <= 6);  // fits both windows
    for (const auto& window : occ[0])
      CHECK(word_log_likelihood(inv.words[0], window.start, window.duration,
                                caches[window.sequence]) != oracles::kNegInf);
  }
}

TEST_CASE("acoustic resampling tracks the assigned frames") {
  const Hyperparameters hyper = Hyperparameters::defaults(1);
  Rng rng = make_rng(20);

  // One sequence, one word, all frames assigned to letter 2 with duration 6.
  const int T = 600;
  FeatureSequence seq;
  seq.frames.resize(T, 1);
  std::normal_distribution<double> normal(7.0, 0.5);
  for (int t = 0; t < T; ++t) seq.frames(t, 0) = normal(rng);
  Segmentation seg;
  seg.word_ids = {0};
  seg.word_durations = {T};
  seg.letter_plans = {{}};
  for (int s = 0; s < T / 6; ++s) seg.letter_plans[0].push_back({2, 6});

  const auto letters = resample_acoustic_params({seg}, {seq}, hyper, rng);
  REQUIRE(static_cast<int>(letters.size()) == hyper.n_letters_max);
  CHECK(letters[2].mean[0] == doctest::Approx(7.0).epsilon(0.02));
  CHECK(letters[2].omega == doctest::Approx(6.0).epsilon(0.15));
  // Unassigned letters come from the prior and stay usable.
  for (const auto& lp : letters) {
    CHECK(lp.omega > 0.0);
    CHECK(lp.cov(0, 0) > 0.0);
  }
}

TEST_CASE("transition resampling is conjugate to the observed counts") {
  const Hyperparameters hyper = Hyperparameters::defaults(1);
  Rng rng = make_rng(21);
  const ModelState model = sample_model_from_prior(hyper, rng);

  // Overwhelm the prior: long word sequences alternating 0 -> 1 -> 0.
  std::vector<std::vector<int>> word_seqs(50);
  for (auto& ws : word_seqs) {
    ws.resize(100);
    for (int s = 0; s < 100; ++s) ws[s] = s % 2;
  }
  const TransitionModel tr = resample_transition_models(
      word_seqs, model.inventory, hyper, model.transitions, rng);
  CHECK_NOTHROW(tr.validate());
  CHECK(tr.pi_lm(0, 1) > 0.95);
  CHECK(tr.pi_lm(1, 0) > 0.95);
  for (int i = 0; i < hyper.n_words_max; ++i) CHECK(tr.pi_lm(i, i) == 0.0);
}

TEST_CASE("chains are deterministic and thread-count invariant") {
  Rng rng = make_rng(22);
  Experiment1Data data = make_experiment1_dataset(1.0, rng);
  data.sequences.resize(8);
  data.truth.resize(8);

  GibbsConfig config;
  config.iterations = 3;
  config.seed = 5;

  const GibbsResult a = run_gibbs(data.sequences, data.ground_truth.hyper, config,
                                  &data.truth);
  const GibbsResult b = run_gibbs(data.sequences, data.ground_truth.hyper, config,
                                  &data.truth);
  config.n_threads = 4;
  const GibbsResult c = run_gibbs(data.sequences, data.ground_truth.hyper, config,
                                  &data.truth);
  REQUIRE(a.trace.joint_log_likelihood.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(a.trace.joint_log_likelihood[i] == b.trace.joint_log_likelihood[i]);
    CHECK(a.trace.joint_log_likelihood[i] == c.trace.joint_log_likelihood[i]);
    CHECK(a.trace.letter_ari[i] == c.trace.letter_ari[i]);
  }
  CHECK(a.model.transitions.pi_lm == c.model.transitions.pi_lm);
  // Without ground truth the ARI columns stay absent.
  const GibbsResult d = run_gibbs(data.sequences, data.ground_truth.hyper, config);
  CHECK(d.trace.letter_ari.empty());
  CHECK(d.trace.word_ari.empty());
}

TEST_CASE("resuming mid-run reproduces the uninterrupted chain") {
  Rng rng = make_rng(23);
  Experiment1Data data = make_experiment1_dataset(0.5, rng);
  data.sequences.resize(6);
  data.truth.resize(6);

  GibbsConfig config;
  config.iterations = 4;
  config.seed = 9;
  const GibbsResult full =
      run_gibbs(data.sequences, data.ground_truth.hyper, config, &data.truth);

  GibbsConfig head = config;
  head.iterations = 2;
  const GibbsResult part =
      run_gibbs(data.sequences, data.ground_truth.hyper, head, &data.truth);
  const ResumeState resume{part.model, 2};
  const GibbsResult rest =
      run_gibbs(data.sequences, data.ground_truth.hyper, config, &data.truth, &resume);

  CHECK(rest.trace.iteration == std::vector<int>{3, 4});
  CHECK(rest.trace.joint_log_likelihood.back() ==
        full.trace.joint_log_likelihood.back());
  CHECK(rest.model.transitions.pi_lm == full.model.transitions.pi_lm);
  CHECK(rest.model.inventory.words == full.model.inventory.words);
}

TEST_CASE("a chain started at the generating model stays near it") {
  Rng rng = make_rng(24);
  const Experiment1Data data = make_experiment1_dataset(0.1, rng);

  GibbsConfig config;
  config.iterations = 5;
  config.seed = 1;
  const ResumeState at_truth{data.ground_truth, 0};
  const GibbsResult result = run_gibbs(data.sequences, data.ground_truth.hyper,
                                       config, &data.truth, &at_truth);
  CHECK(result.trace.letter_ari.back() > 0.9);
  CHECK(result.trace.word_ari.back() > 0.7);
}

TEST_CASE("MAP trial selection takes the best final likelihood, ties to lowest") {
  auto with_ll = [](double ll) {
    GibbsResult r;
    r.trace.joint_log_likelihood = {ll - 1.0, ll};
    return r;
  };
  CHECK(select_map_trial({with_ll(-5.0), with_ll(-2.0), with_ll(-9.0)}) == 1);
  CHECK(select_map_trial({with_ll(-3.0), with_ll(-3.0)}) == 0);
  CHECK_THROWS_AS(select_map_trial({}), std::invalid_argument);
}
