#include "hdphlm/gibbs.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "hdphlm/eval.hpp"

namespace hdphlm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_or_neg_inf(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// Deterministic chunked parallel loop; results are written by index so the
// schedule cannot change the outcome.
template <typename Fn>
void parallel_for(int n, int n_threads, Fn&& fn) {
  n_threads = std::max(1, std::min(n_threads, n));
  if (n_threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n_threads);
  for (int w = 0; w < n_threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void GibbsConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("GibbsConfig: iterations must be >= 1");
  if (sir_candidates_per_occurrence < 1)
    throw std::invalid_argument("GibbsConfig: sir_candidates_per_occurrence must be >= 1");
  if (trial_count < 1) throw std::invalid_argument("GibbsConfig: trial_count must be >= 1");
  if (record_every < 1) throw std::invalid_argument("GibbsConfig: record_every must be >= 1");
}

std::pair<std::vector<int>, std::vector<int>> forward_sample_words(
    const MessageBoard& board, const ModelState& model, Rng& rng) {
  const int T = board.caches.length();
  const int nw = model.inventory.size();
  const auto& tr = model.transitions;

  std::vector<int> words, durations;
  std::vector<double> weights(nw);
  int t = 0;
  int prev = -1;
  while (t < T) {
    for (int i = 0; i < nw; ++i) {
      const double p = prev < 0 ? tr.pi_lm_initial[i] : tr.pi_lm(prev, i);
      weights[i] = log_or_neg_inf(p) + board.b_star(t, i);
    }
    int word;
    try {
      word = sample_categorical_log(weights, rng);
    } catch (const std::runtime_error&) {
      throw std::runtime_error(
          "forward_sample_words: no word has positive probability at frame " +
          std::to_string(t) + " (previous word " + std::to_string(prev) + ")");
    }

    const int d_hi = std::min(board.d_cap, T - t);
    std::vector<double> dur_weights(d_hi + 1, kNegInf);
    for (int d = 1; d <= d_hi; ++d) {
      const double lik = board.word_lik[word](t, d);
      if (lik == kNegInf || board.b(t + d, word) == kNegInf) continue;
      dur_weights[d] = lik + board.b(t + d, word);
    }
    int d;
    try {
      d = sample_categorical_log(dur_weights, rng);
    } catch (const std::runtime_error&) {
      throw std::runtime_error(
          "forward_sample_words: no feasible duration for word " +
          std::to_string(word) + " at frame " + std::to_string(t));
    }
    words.push_back(word);
    durations.push_back(d);
    t += d;
    prev = word;
  }
  return {std::move(words), std::move(durations)};
}

std::vector<LetterSpan> sample_letter_plan(int start, int duration,
                                           const std::vector<int>& word,
                                           const SequenceCaches& caches, Rng& rng) {
  const int L = static_cast<int>(word.size());
  if (duration < L)
    throw std::invalid_argument("sample_letter_plan: window shorter than the word");
  const Eigen::MatrixXd alpha = word_alpha_table(word, start, duration, caches);
  if (alpha(duration, L) == kNegInf)
    throw std::invalid_argument("sample_letter_plan: infeasible window");

  // Backward sampling through the alpha table.
  std::vector<LetterSpan> plan(L);
  int u = duration;
  for (int k = L; k >= 1; --k) {
    const int letter = word[k - 1];
    const TruncatedPoisson& pmf = caches.duration[letter];
    const int d_hi = std::min(u - (k - 1), pmf.d_max());
    std::vector<double> weights(d_hi + 1, kNegInf);
    for (int d = 1; d <= d_hi; ++d) {
      const double prev = alpha(u - d, k - 1);
      if (prev == kNegInf) continue;
      weights[d] = prev + pmf.log_pmf(d) +
                   caches.emission_sum(letter, start + u - d, start + u);
    }
    const int d = sample_categorical_log(weights, rng);
    plan[k - 1] = {letter, d};
    u -= d;
  }
  return plan;
}

SegmentProposal sample_segment_letters(int start, int duration,
                                       const ModelState& model,
                                       const SequenceCaches& caches, Rng& rng) {
  const int nl = model.hyper.n_letters_max;
  const int k_max = model.hyper.word_len_max;
  if (duration < 1 || start + duration > caches.length())
    throw std::invalid_argument("sample_segment_letters: window out of range");
  const auto& tr = model.transitions;

  // Backward messages of the within-segment letter HSMM, indexed by
  // (frames consumed, letters used, current letter).  The position index
  // keeps proposals within the inventory's length cap.
  auto idx = [&](int t, int k, int j) { return (t * (k_max + 1) + k) * nl + j; };
  std::vector<double> b((duration + 1) * (k_max + 1) * nl, kNegInf);
  std::vector<double> b_star(b.size(), kNegInf);
  for (int k = 0; k <= k_max; ++k)
    for (int j = 0; j < nl; ++j) b[idx(duration, k, j)] = 0.0;

  std::vector<double> terms;
  for (int t = duration - 1; t >= 0; --t) {
    for (int k = 1; k <= k_max; ++k)
      for (int j = 0; j < nl; ++j) {
        const TruncatedPoisson& pmf = caches.duration[j];
        const int r_hi = std::min(duration - t, pmf.d_max());
        terms.clear();
        for (int r = 1; r <= r_hi; ++r) {
          const double cont = b[idx(t + r, k, j)];
          if (cont == kNegInf) continue;
          terms.push_back(pmf.log_pmf(r) +
                          caches.emission_sum(j, start + t, start + t + r) + cont);
        }
        b_star[idx(t, k, j)] = log_sum_exp(terms);
      }
    for (int k = 0; k < k_max; ++k)
      for (int j = 0; j < nl; ++j) {
        terms.clear();
        for (int jn = 0; jn < nl; ++jn) {
          const double p = tr.pi_wm(j, jn);
          const double cont = b_star[idx(t, k + 1, jn)];
          if (p <= 0.0 || cont == kNegInf) continue;
          terms.push_back(std::log(p) + cont);
        }
        b[idx(t, k, j)] = log_sum_exp(terms);
      }
  }

  std::vector<double> init(nl, kNegInf);
  for (int j = 0; j < nl; ++j)
    init[j] = log_or_neg_inf(tr.pi_wm_initial[j]) + b_star[idx(0, 1, j)];
  SegmentProposal proposal;
  proposal.log_evidence = log_sum_exp(init);
  if (proposal.log_evidence == kNegInf)
    throw std::runtime_error("sample_segment_letters: window admits no lettering");

  int t = 0;
  int k = 1;
  int j = sample_categorical_log(init, rng);
  while (true) {
    const TruncatedPoisson& pmf = caches.duration[j];
    const int r_hi = std::min(duration - t, pmf.d_max());
    std::vector<double> dur_weights(r_hi + 1, kNegInf);
    for (int r = 1; r <= r_hi; ++r) {
      const double cont = b[idx(t + r, k, j)];
      if (cont == kNegInf) continue;
      dur_weights[r] = pmf.log_pmf(r) +
                       caches.emission_sum(j, start + t, start + t + r) + cont;
    }
    const int r = sample_categorical_log(dur_weights, rng);
    proposal.plan.push_back({j, r});
    t += r;
    if (t == duration) break;
    std::vector<double> next(nl, kNegInf);
    for (int jn = 0; jn < nl; ++jn)
      next[jn] = log_or_neg_inf(tr.pi_wm(j, jn)) + b_star[idx(t, k + 1, jn)];
    j = sample_categorical_log(next, rng);
    ++k;
  }
  return proposal;
}

namespace {

std::vector<int> plan_letters(const std::vector<LetterSpan>& plan) {
  std::vector<int> letters;
  letters.reserve(plan.size());
  for (const auto& span : plan) letters.push_back(span.letter);
  return letters;
}

}  // namespace

WordInventory resample_word_inventory_sir(
    const std::vector<std::vector<OccurrenceRef>>& occurrences,
    const ModelState& model, const std::vector<SequenceCaches>& caches,
    int candidates_per_occurrence, Rng& rng) {
  const int nw = model.inventory.size();
  if (static_cast<int>(occurrences.size()) != nw)
    throw std::invalid_argument("resample_word_inventory_sir: occurrence map size mismatch");

  WordInventory inventory;
  inventory.words.resize(nw);
  for (int i = 0; i < nw; ++i) {
    const auto& occ = occurrences[i];
    if (occ.empty()) {
      inventory.words[i] = sample_prior_word(model.hyper, model.transitions, rng);
      continue;
    }

    std::vector<std::vector<int>> candidates;
    LogWeights weights;
    for (std::size_t j = 0; j < occ.size(); ++j) {
      const auto& window = occ[j];
      for (int c = 0; c < candidates_per_occurrence; ++c) {
        SegmentProposal prop = sample_segment_letters(
            window.start, window.duration, model, caches[window.sequence], rng);
        std::vector<int> letters = plan_letters(prop.plan);
        double weight = prop.log_evidence;
        for (std::size_t o = 0; o < occ.size(); ++o) {
          if (o == j) continue;
          weight += word_log_likelihood(letters, occ[o].start, occ[o].duration,
                                        caches[occ[o].sequence]);
        }
        candidates.push_back(std::move(letters));
        weights.push_back(weight);
      }
    }

    if (log_sum_exp(weights) == kNegInf) {
      // No proposal fits every occurrence (window lengths can rule out every
      // candidate); keeping the current word is always feasible.
      std::cerr << "hdphlm: degenerate inventory proposals for word " << i
                << "; keeping the current word" << std::endl;
      inventory.words[i] = model.inventory.words[i];
    } else {
      inventory.words[i] = candidates[sample_categorical_log(weights, rng)];
    }
  }
  return inventory;
}

std::vector<LetterParams> resample_acoustic_params(
    const std::vector<Segmentation>& plans,
    const std::vector<FeatureSequence>& dataset, const Hyperparameters& hyper,
    Rng& rng) {
  if (plans.size() != dataset.size())
    throw std::invalid_argument("resample_acoustic_params: plan/dataset count mismatch");
  const int nl = hyper.n_letters_max;
  const int dim = hyper.emission_prior.dim();

  std::vector<GaussianStats> stats(nl, GaussianStats(dim));
  std::vector<std::vector<int>> durations(nl);
  for (std::size_t m = 0; m < plans.size(); ++m) {
    int t = 0;
    for (const auto& plan : plans[m].letter_plans)
      for (const auto& span : plan) {
        durations[span.letter].push_back(span.duration);
        for (int u = 0; u < span.duration; ++u)
          stats[span.letter].add(dataset[m].frames.row(t + u).transpose());
        t += span.duration;
      }
    if (t != dataset[m].length())
      throw std::invalid_argument("resample_acoustic_params: plans do not cover all frames");
  }

  std::vector<LetterParams> letters(nl);
  for (int j = 0; j < nl; ++j) {
    Gaussian g = sample_niw(niw_posterior(hyper.emission_prior, stats[j]), rng);
    letters[j].mean = std::move(g.mean);
    letters[j].cov = std::move(g.cov);
    letters[j].omega =
        sample_gamma(gamma_poisson_posterior(hyper.duration_prior, durations[j]), rng);
  }
  return letters;
}

namespace {

// Chinese-restaurant table count for n customers at concentration a.
int sample_table_count(double a, int n, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int m = 0;
  for (int l = 0; l < n; ++l)
    if (unif(rng) * (a + l) < a) ++m;
  return m;
}

struct LevelCounts {
  Eigen::MatrixXd transitions;
  Eigen::VectorXd initial;
};

// Shared machinery for both DP levels: auxiliary table counts refresh the
// base measure, then rows are conjugate Dirichlet draws.
void resample_level(const LevelCounts& counts, double gamma, double alpha,
                    const Eigen::VectorXd& beta_current, bool exclude_diagonal,
                    Eigen::VectorXd& beta_out, Eigen::MatrixXd& pi_out,
                    Eigen::VectorXd& init_out, Rng& rng) {
  const int n = static_cast<int>(beta_current.size());

  Eigen::VectorXd tables = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      tables[j] += sample_table_count(alpha * beta_current[j],
                                      static_cast<int>(counts.transitions(i, j)), rng);
  for (int j = 0; j < n; ++j)
    tables[j] += sample_table_count(alpha * beta_current[j],
                                    static_cast<int>(counts.initial[j]), rng);
  beta_out = sample_dirichlet(
      (Eigen::VectorXd::Constant(n, gamma / n) + tables).cwiseMax(1e-12), rng);

  pi_out.resize(n, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd conc =
        (alpha * beta_out + counts.transitions.row(i).transpose()).cwiseMax(1e-12);
    pi_out.row(i) = sample_dirichlet(conc, rng);
  }
  if (exclude_diagonal) {
    for (int i = 0; i < n; ++i) {
      pi_out(i, i) = 0.0;
      const double s = pi_out.row(i).sum();
      if (s <= 0.0) {
        const double u = 1.0 / (n - 1);
        for (int j = 0; j < n; ++j) pi_out(i, j) = (j == i) ? 0.0 : u;
      } else {
        pi_out.row(i) /= s;
      }
    }
  }
  init_out = sample_dirichlet(
      (alpha * beta_out + counts.initial).cwiseMax(1e-12), rng);
}

}  // namespace

TransitionModel resample_transition_models(
    const std::vector<std::vector<int>>& word_sequences,
    const WordInventory& inventory, const Hyperparameters& hyper,
    const TransitionModel& current, Rng& rng) {
  const int nw = hyper.n_words_max;
  const int nl = hyper.n_letters_max;

  LevelCounts lm{Eigen::MatrixXd::Zero(nw, nw), Eigen::VectorXd::Zero(nw)};
  for (const auto& ws : word_sequences) {
    if (ws.empty()) continue;
    lm.initial[ws.front()] += 1.0;
    for (std::size_t s = 1; s < ws.size(); ++s)
      lm.transitions(ws[s - 1], ws[s]) += 1.0;
  }

  LevelCounts wm{Eigen::MatrixXd::Zero(nl, nl), Eigen::VectorXd::Zero(nl)};
  for (const auto& word : inventory.words) {
    if (word.empty()) continue;
    wm.initial[word.front()] += 1.0;
    for (std::size_t k = 1; k < word.size(); ++k)
      wm.transitions(word[k - 1], word[k]) += 1.0;
  }

  TransitionModel out;
  resample_level(lm, hyper.gamma_lm, hyper.alpha_lm, current.beta_lm,
                 /*exclude_diagonal=*/true, out.beta_lm, out.pi_lm,
                 out.pi_lm_initial, rng);
  resample_level(wm, hyper.gamma_wm, hyper.alpha_wm, current.beta_wm,
                 /*exclude_diagonal=*/false, out.beta_wm, out.pi_wm,
                 out.pi_wm_initial, rng);
  return out;
}

namespace {

// Random segmentation with geometric word lengths around the prior mean;
// used once to seed the parameter side of the chain.
Segmentation initial_segmentation(const FeatureSequence& seq,
                                  const ModelState& model,
                                  const SequenceCaches& caches, Rng& rng) {
  const Hyperparameters& hyper = model.hyper;
  const double mean_len =
      hyper.duration_prior.mean() * 0.5 * (hyper.word_len_max + 1);
  std::geometric_distribution<int> geom(1.0 / std::max(2.0, mean_len));
  std::uniform_int_distribution<int> word_dist(0, hyper.n_words_max - 1);

  Segmentation seg;
  const int T = seq.length();
  int t = 0;
  int prev = -1;
  while (t < T) {
    int word = word_dist(rng);
    while (word == prev) word = word_dist(rng);
    const auto& letters = model.inventory.words[word];
    const int L = static_cast<int>(letters.size());
    // Keep the segment inside the word's coverable range so the letter plan
    // always exists; the final segment may still undercut the word length.
    const int d = std::clamp(1 + geom(rng), 1,
                             std::min({hyper.d_max_word, T - t, L * hyper.d_max_letter}));
    std::vector<LetterSpan> plan;
    if (L <= d) {
      plan = sample_letter_plan(t, d, letters, caches, rng);
    } else {
      for (int k = 0; k < d; ++k) plan.push_back({letters[k], 1});
    }
    seg.word_ids.push_back(word);
    seg.word_durations.push_back(d);
    seg.letter_plans.push_back(std::move(plan));
    t += d;
    prev = word;
  }
  return seg;
}

ModelState initialize_model(const std::vector<FeatureSequence>& dataset,
                            const Hyperparameters& hyper, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0, 0);
  ModelState model = sample_model_from_prior(hyper, rng);

  std::vector<Segmentation> segs;
  std::vector<std::vector<int>> word_seqs;
  for (const auto& seq : dataset) {
    const SequenceCaches caches =
        make_sequence_caches(seq, model.letters, hyper.d_max_letter);
    segs.push_back(initial_segmentation(seq, model, caches, rng));
    word_seqs.push_back(segs.back().word_ids);
  }
  model.letters = resample_acoustic_params(segs, dataset, hyper, rng);
  model.transitions = resample_transition_models(word_seqs, model.inventory,
                                                 hyper, model.transitions, rng);
  return model;
}

}  // namespace

GibbsResult run_gibbs(const std::vector<FeatureSequence>& dataset,
                      const Hyperparameters& hyper, const GibbsConfig& config,
                      const std::vector<Segmentation>* ground_truth,
                      const ResumeState* resume) {
  hyper.validate();
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("run_gibbs: empty dataset");
  if (ground_truth && ground_truth->size() != dataset.size())
    throw std::invalid_argument("run_gibbs: ground truth count mismatch");

  const int M = static_cast<int>(dataset.size());
  GibbsResult result;
  int start_iteration = 1;
  if (resume) {
    result.model = resume->model;
    start_iteration = resume->iterations_completed + 1;
  } else {
    result.model = initialize_model(dataset, hyper, config.seed);
  }
  result.segmentations.resize(M);

  std::vector<SequenceCaches> caches(M);
  for (int iter = start_iteration; iter <= config.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelState& model = result.model;

    // Per-sequence phase against an immutable model snapshot.
    std::vector<std::string> seq_errors(M);
    parallel_for(M, config.n_threads, [&](int m) {
      try {
        Rng rng = derive_rng(config.seed, iter, m);
        MessageBoard board = compute_backward_messages(dataset[m], model);
        auto [words, durations] = forward_sample_words(board, model, rng);
        Segmentation seg;
        seg.word_ids = std::move(words);
        seg.word_durations = std::move(durations);
        int t = 0;
        for (std::size_t s = 0; s < seg.word_ids.size(); ++s) {
          seg.letter_plans.push_back(sample_letter_plan(
              t, seg.word_durations[s], model.inventory.words[seg.word_ids[s]],
              board.caches, rng));
          t += seg.word_durations[s];
        }
        result.segmentations[m] = std::move(seg);
        caches[m] = std::move(board.caches);
      } catch (const std::exception& e) {
        seq_errors[m] = e.what();
      }
    });
    for (int m = 0; m < M; ++m)
      if (!seq_errors[m].empty())
        throw std::runtime_error("run_gibbs: iteration " + std::to_string(iter) +
                                 ", sequence " + std::to_string(m) + ": " +
                                 seq_errors[m]);

    // Global updates, merged in sequence order.
    Rng rng = derive_rng(config.seed, iter, static_cast<std::uint64_t>(M) + 1);
    model.letters =
        resample_acoustic_params(result.segmentations, dataset, hyper, rng);

    std::vector<std::vector<OccurrenceRef>> occurrences(hyper.n_words_max);
    std::vector<std::vector<int>> word_seqs(M);
    for (int m = 0; m < M; ++m) {
      // Refresh emission caches against the new acoustic parameters.
      caches[m] = make_sequence_caches(dataset[m], model.letters, hyper.d_max_letter);
      const auto& seg = result.segmentations[m];
      word_seqs[m] = seg.word_ids;
      int t = 0;
      for (std::size_t s = 0; s < seg.word_ids.size(); ++s) {
        occurrences[seg.word_ids[s]].push_back({m, t, seg.word_durations[s]});
        t += seg.word_durations[s];
      }
    }

    model.inventory = resample_word_inventory_sir(
        occurrences, model, caches, config.sir_candidates_per_occurrence, rng);

    // Align letter plans with the refreshed inventory so every stored
    // segmentation expands the word it names.
    for (int m = 0; m < M; ++m) {
      auto& seg = result.segmentations[m];
      int t = 0;
      for (std::size_t s = 0; s < seg.word_ids.size(); ++s) {
        seg.letter_plans[s] =
            sample_letter_plan(t, seg.word_durations[s],
                               model.inventory.words[seg.word_ids[s]],
                               caches[m], rng);
        t += seg.word_durations[s];
      }
    }

    model.transitions = resample_transition_models(word_seqs, model.inventory,
                                                   hyper, model.transitions, rng);

    if (iter % config.record_every == 0 || iter == config.iterations) {
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.trace.iteration.push_back(iter);
      result.trace.joint_log_likelihood.push_back(
          joint_log_likelihood(model, dataset, result.segmentations));
      result.trace.seconds.push_back(seconds);
      if (ground_truth) {
        const auto [letter_ari, word_ari] =
            dataset_ari(result.segmentations, *ground_truth);
        result.trace.letter_ari.push_back(letter_ari);
        result.trace.word_ari.push_back(word_ari);
      }
    }
  }
  return result;
}

int select_map_trial(const std::vector<GibbsResult>& results) {
  if (results.empty())
    throw std::invalid_argument("select_map_trial: no trials");
  int best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const auto& cur = results[i].trace.joint_log_likelihood;
    const auto& top = results[best].trace.joint_log_likelihood;
    if (cur.empty())
      throw std::invalid_argument("select_map_trial: trial without a recorded trace");
    if (cur.back() > top.back()) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace hdphlm
