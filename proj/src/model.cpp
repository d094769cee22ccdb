#include "hdphlm/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hdphlm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_simplex(const Eigen::VectorXd& v, const char* what) {
  if (v.minCoeff() < 0.0)
    throw std::invalid_argument(std::string(what) + ": negative entry");
  if (std::abs(v.sum() - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(what) + ": does not sum to 1");
}
}  // namespace

Hyperparameters Hyperparameters::defaults(int dim) {
  Hyperparameters h;
  h.emission_prior.mu0 = Eigen::VectorXd::Zero(dim);
  h.emission_prior.kappa0 = 0.01;
  h.emission_prior.nu0 = dim == 1 ? 1.0 : dim + 5.0;
  h.emission_prior.psi0 = Eigen::MatrixXd::Identity(dim, dim);
  h.finalize();
  return h;
}

void Hyperparameters::finalize() {
  if (d_max_letter <= 0)
    d_max_letter = static_cast<int>(std::ceil(4.0 * duration_prior.mean()));
  if (d_max_word <= 0) d_max_word = word_len_max * d_max_letter;
}

void Hyperparameters::validate() const {
  if (!(gamma_lm > 0.0 && alpha_lm > 0.0 && gamma_wm > 0.0 && alpha_wm > 0.0))
    throw std::invalid_argument("Hyperparameters: concentrations must be > 0");
  if (n_words_max < 1 || n_letters_max < 1)
    throw std::invalid_argument("Hyperparameters: truncations must be >= 1");
  if (word_len_max < 1)
    throw std::invalid_argument("Hyperparameters: word_len_max must be >= 1");
  if (d_max_letter < 1 || d_max_word < d_max_letter)
    throw std::invalid_argument("Hyperparameters: need d_max_word >= d_max_letter >= 1");
  duration_prior.validate();
  emission_prior.validate();
}

void WordInventory::validate(const Hyperparameters& hyper) const {
  if (size() != hyper.n_words_max)
    throw std::invalid_argument("WordInventory: wrong number of words");
  for (const auto& w : words) {
    if (w.empty() || static_cast<int>(w.size()) > hyper.word_len_max)
      throw std::invalid_argument("WordInventory: word length out of range");
    for (int j : w)
      if (j < 0 || j >= hyper.n_letters_max)
        throw std::invalid_argument("WordInventory: letter index out of range");
  }
}

void TransitionModel::validate() const {
  check_simplex(beta_lm, "beta_lm");
  check_simplex(pi_lm_initial, "pi_lm_initial");
  check_simplex(beta_wm, "beta_wm");
  check_simplex(pi_wm_initial, "pi_wm_initial");
  for (int i = 0; i < pi_lm.rows(); ++i) {
    check_simplex(pi_lm.row(i), "pi_lm row");
    if (pi_lm(i, i) != 0.0)
      throw std::invalid_argument("pi_lm: nonzero self-transition");
  }
  for (int i = 0; i < pi_wm.rows(); ++i) check_simplex(pi_wm.row(i), "pi_wm row");
}

void ModelState::validate() const {
  hyper.validate();
  transitions.validate();
  inventory.validate(hyper);
  if (static_cast<int>(letters.size()) != hyper.n_letters_max)
    throw std::invalid_argument("ModelState: wrong number of letter parameters");
  for (const auto& lp : letters)
    if (!(lp.omega > 0.0))
      throw std::invalid_argument("ModelState: nonpositive duration rate");
}

int Segmentation::total_frames() const {
  int t = 0;
  for (int d : word_durations) t += d;
  return t;
}

std::vector<int> Segmentation::frame_letter_labels() const {
  std::vector<int> labels;
  labels.reserve(total_frames());
  for (const auto& plan : letter_plans)
    for (const auto& span : plan)
      for (int i = 0; i < span.duration; ++i) labels.push_back(span.letter);
  return labels;
}

std::vector<int> Segmentation::frame_word_labels() const {
  std::vector<int> labels;
  labels.reserve(total_frames());
  for (std::size_t s = 0; s < word_ids.size(); ++s)
    for (int i = 0; i < word_durations[s]; ++i) labels.push_back(word_ids[s]);
  return labels;
}

std::vector<std::pair<int, int>> Segmentation::letter_boundaries() const {
  std::vector<std::pair<int, int>> bounds;
  int t = 0;
  for (const auto& plan : letter_plans)
    for (const auto& span : plan) {
      bounds.emplace_back(t, t + span.duration - 1);
      t += span.duration;
    }
  return bounds;
}

void Segmentation::validate(const WordInventory* inventory) const {
  if (word_ids.size() != word_durations.size() ||
      word_ids.size() != letter_plans.size())
    throw std::invalid_argument("Segmentation: field lengths disagree");
  for (std::size_t s = 0; s < word_ids.size(); ++s) {
    int sum = 0;
    for (const auto& span : letter_plans[s]) {
      if (span.duration < 1)
        throw std::invalid_argument("Segmentation: letter duration < 1");
      sum += span.duration;
    }
    if (sum != word_durations[s])
      throw std::invalid_argument("Segmentation: letter durations do not sum to word duration");
    if (inventory) {
      const auto& w = inventory->words.at(word_ids[s]);
      if (w.size() != letter_plans[s].size())
        throw std::invalid_argument("Segmentation: plan length differs from inventory word");
      for (std::size_t k = 0; k < w.size(); ++k)
        if (w[k] != letter_plans[s][k].letter)
          throw std::invalid_argument("Segmentation: plan letters differ from inventory word");
    }
  }
}

namespace {

// Weak-limit DP row: Dirichlet(alpha * beta).
Eigen::VectorXd sample_dp_row(double alpha, const Eigen::VectorXd& beta, Rng& rng) {
  Eigen::VectorXd conc = alpha * beta;
  // Guard against zero concentrations from an exactly-zero beta entry.
  for (int i = 0; i < conc.size(); ++i)
    conc[i] = std::max(conc[i], 1e-12);
  return sample_dirichlet(conc, rng);
}

void zero_diagonal_renormalize(Eigen::MatrixXd& pi) {
  for (int i = 0; i < pi.rows(); ++i) {
    pi(i, i) = 0.0;
    const double s = pi.row(i).sum();
    if (s <= 0.0) {
      // Degenerate row: fall back to uniform over the other states.
      const double u = 1.0 / (pi.cols() - 1);
      for (int j = 0; j < pi.cols(); ++j) pi(i, j) = (j == i) ? 0.0 : u;
    } else {
      pi.row(i) /= s;
    }
  }
}

}  // namespace

std::vector<int> sample_prior_word(const Hyperparameters& hyper,
                                   const TransitionModel& transitions, Rng& rng) {
  std::uniform_int_distribution<int> len_dist(1, hyper.word_len_max);
  const int len = len_dist(rng);
  std::vector<int> word(len);
  word[0] = sample_categorical(transitions.pi_wm_initial, rng);
  for (int k = 1; k < len; ++k)
    word[k] = sample_categorical(transitions.pi_wm.row(word[k - 1]), rng);
  return word;
}

ModelState sample_model_from_prior(const Hyperparameters& hyper, Rng& rng) {
  hyper.validate();
  const int nw = hyper.n_words_max;
  const int nl = hyper.n_letters_max;

  ModelState model;
  model.hyper = hyper;
  TransitionModel& tr = model.transitions;

  tr.beta_lm = sample_dirichlet(
      Eigen::VectorXd::Constant(nw, hyper.gamma_lm / nw), rng);
  tr.pi_lm.resize(nw, nw);
  for (int i = 0; i < nw; ++i)
    tr.pi_lm.row(i) = sample_dp_row(hyper.alpha_lm, tr.beta_lm, rng);
  zero_diagonal_renormalize(tr.pi_lm);
  tr.pi_lm_initial = sample_dp_row(hyper.alpha_lm, tr.beta_lm, rng);

  tr.beta_wm = sample_dirichlet(
      Eigen::VectorXd::Constant(nl, hyper.gamma_wm / nl), rng);
  tr.pi_wm.resize(nl, nl);
  for (int j = 0; j < nl; ++j)
    tr.pi_wm.row(j) = sample_dp_row(hyper.alpha_wm, tr.beta_wm, rng);
  tr.pi_wm_initial = sample_dp_row(hyper.alpha_wm, tr.beta_wm, rng);

  model.inventory.words.reserve(nw);
  for (int i = 0; i < nw; ++i)
    model.inventory.words.push_back(sample_prior_word(hyper, tr, rng));

  model.letters.resize(nl);
  for (int j = 0; j < nl; ++j) {
    Gaussian g = sample_niw(hyper.emission_prior, rng);
    model.letters[j].mean = std::move(g.mean);
    model.letters[j].cov = std::move(g.cov);
    model.letters[j].omega = sample_gamma(hyper.duration_prior, rng);
  }
  return model;
}

std::pair<FeatureSequence, Segmentation> generate_sequence(
    const ModelState& model, const std::vector<int>& word_id_sequence, Rng& rng) {
  if (word_id_sequence.empty())
    throw std::invalid_argument("generate_sequence: empty word sequence");
  for (int id : word_id_sequence)
    if (id < 0 || id >= model.inventory.size())
      throw std::invalid_argument("generate_sequence: word index out of range");

  const int dim = static_cast<int>(model.letters.front().mean.size());
  Segmentation seg;
  std::vector<Eigen::VectorXd> rows;

  for (int id : word_id_sequence) {
    const auto& word = model.inventory.words[id];
    std::vector<LetterSpan> plan;
    int word_dur = 0;
    for (int letter : word) {
      std::poisson_distribution<int> pois(model.letters[letter].omega);
      const int d = std::max(pois(rng), 1);
      plan.push_back({letter, d});
      word_dur += d;
      Eigen::LLT<Eigen::MatrixXd> llt(model.letters[letter].cov);
      if (llt.info() != Eigen::Success)
        throw std::domain_error("generate_sequence: covariance not positive definite");
      std::normal_distribution<double> normal(0.0, 1.0);
      const Eigen::MatrixXd L = llt.matrixL();
      for (int t = 0; t < d; ++t) {
        Eigen::VectorXd z(dim);
        for (int k = 0; k < dim; ++k) z[k] = normal(rng);
        rows.push_back(model.letters[letter].mean + L * z);
      }
    }
    seg.word_ids.push_back(id);
    seg.word_durations.push_back(word_dur);
    seg.letter_plans.push_back(std::move(plan));
  }

  FeatureSequence seq;
  seq.frames.resize(static_cast<int>(rows.size()), dim);
  for (std::size_t t = 0; t < rows.size(); ++t) seq.frames.row(t) = rows[t];
  return {std::move(seq), std::move(seg)};
}

Experiment1Data make_experiment1_dataset(double sigma2, Rng& rng) {
  if (!(sigma2 > 0.0))
    throw std::invalid_argument("make_experiment1_dataset: sigma2 must be > 0");

  Experiment1Data data;
  Hyperparameters hyper = Hyperparameters::defaults(1);
  ModelState& truth = data.ground_truth;
  truth.hyper = hyper;

  const int nw = hyper.n_words_max;   // 6
  const int nl = hyper.n_letters_max; // 7
  constexpr int kTrueLetters = 5;
  constexpr int kTrueWords = 4;

  truth.letters.resize(nl);
  for (int j = 0; j < nl; ++j) {
    truth.letters[j].mean = Eigen::VectorXd::Constant(1, 5.0 * (j + 1));
    truth.letters[j].cov = Eigen::MatrixXd::Constant(1, 1, sigma2);
    truth.letters[j].omega =
        j < kTrueLetters ? sample_gamma(hyper.duration_prior, rng) : hyper.duration_prior.mean();
  }

  truth.inventory.words = {{0, 2, 4}, {2, 1}, {3, 0, 4, 1}, {0, 4}, {0}, {1}};

  TransitionModel& tr = truth.transitions;
  tr.beta_lm = Eigen::VectorXd::Zero(nw);
  tr.beta_lm.head(kTrueWords).setConstant(1.0 / kTrueWords);
  tr.pi_lm_initial = tr.beta_lm;
  tr.pi_lm = Eigen::MatrixXd::Zero(nw, nw);
  for (int i = 0; i < nw; ++i) {
    const int others = (i < kTrueWords) ? kTrueWords - 1 : kTrueWords;
    for (int j = 0; j < kTrueWords; ++j)
      if (j != i) tr.pi_lm(i, j) = 1.0 / others;
  }
  tr.beta_wm = Eigen::VectorXd::Zero(nl);
  tr.beta_wm.head(kTrueLetters).setConstant(1.0 / kTrueLetters);
  tr.pi_wm_initial = tr.beta_wm;
  tr.pi_wm = Eigen::MatrixXd::Zero(nl, nl);
  for (int i = 0; i < nl; ++i) tr.pi_wm.row(i).head(kTrueLetters).setConstant(1.0 / kTrueLetters);

  // 16 word pairs and 4 three-word sentences, words uniform with repeats.
  std::uniform_int_distribution<int> word_dist(0, kTrueWords - 1);
  for (int n = 0; n < 20; ++n) {
    const int len = n < 16 ? 2 : 3;
    std::vector<int> ws(len);
    for (int& w : ws) w = word_dist(rng);
    data.word_sequences.push_back(ws);
  }
  for (const auto& ws : data.word_sequences)
    for (int rep = 0; rep < 2; ++rep) {
      auto [seq, seg] = generate_sequence(truth, ws, rng);
      data.sequences.push_back(std::move(seq));
      data.truth.push_back(std::move(seg));
    }
  return data;
}

double joint_log_likelihood(const ModelState& model,
                            const std::vector<FeatureSequence>& dataset,
                            const std::vector<Segmentation>& segmentations) {
  if (dataset.size() != segmentations.size())
    throw std::invalid_argument("joint_log_likelihood: dataset/segmentation count mismatch");

  std::vector<GaussianLogDensity> densities;
  densities.reserve(model.letters.size());
  for (const auto& lp : model.letters) densities.emplace_back(lp.mean, lp.cov);

  const auto& tr = model.transitions;
  double total = 0.0;
  for (std::size_t m = 0; m < dataset.size(); ++m) {
    const auto& seq = dataset[m];
    const auto& seg = segmentations[m];
    seg.validate(&model.inventory);
    if (seg.total_frames() != seq.length())
      throw std::invalid_argument("joint_log_likelihood: segmentation does not cover the sequence");

    double lp = 0.0;
    for (std::size_t s = 0; s < seg.word_ids.size(); ++s) {
      const double p = s == 0 ? tr.pi_lm_initial[seg.word_ids[0]]
                              : tr.pi_lm(seg.word_ids[s - 1], seg.word_ids[s]);
      lp += p > 0.0 ? std::log(p) : kNegInf;
      for (const auto& span : seg.letter_plans[s])
        lp += shifted_poisson_log_pmf(span.duration, model.letters[span.letter].omega);
    }
    const auto labels = seg.frame_letter_labels();
    for (int t = 0; t < seq.length(); ++t)
      lp += densities[labels[t]](seq.frames.row(t).transpose());
    total += lp;
  }
  return total;
}

}  // namespace hdphlm
