#include "hdphlm/eval.hpp"

#include <stdexcept>
#include <unordered_map>

namespace hdphlm {

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("adjusted_rand_index: label length mismatch");
  if (a.empty())
    throw std::invalid_argument("adjusted_rand_index: empty labelings");

  std::unordered_map<int, int> ia, ib;
  for (int x : a) ia.emplace(x, static_cast<int>(ia.size()));
  for (int x : b) ib.emplace(x, static_cast<int>(ib.size()));

  const int ra = static_cast<int>(ia.size());
  const int rb = static_cast<int>(ib.size());
  std::vector<std::vector<long long>> table(ra, std::vector<long long>(rb, 0));
  std::vector<long long> row(ra, 0), col(rb, 0);
  for (std::size_t t = 0; t < a.size(); ++t) {
    const int i = ia[a[t]];
    const int j = ib[b[t]];
    ++table[i][j];
    ++row[i];
    ++col[j];
  }

  auto choose2 = [](long long n) { return 0.5 * n * (n - 1); };
  double sum_nij = 0.0, sum_ai = 0.0, sum_bj = 0.0;
  for (int i = 0; i < ra; ++i)
    for (int j = 0; j < rb; ++j) sum_nij += choose2(table[i][j]);
  for (int i = 0; i < ra; ++i) sum_ai += choose2(row[i]);
  for (int j = 0; j < rb; ++j) sum_bj += choose2(col[j]);

  const double total_pairs = choose2(static_cast<long long>(a.size()));
  const double expected = total_pairs > 0.0 ? sum_ai * sum_bj / total_pairs : 0.0;
  const double max_index = 0.5 * (sum_ai + sum_bj);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;  // both partitions trivial and identical
  return (sum_nij - expected) / denom;
}

FrameLabeling frame_labels_from_segmentation(const Segmentation& seg) {
  seg.validate();
  return {seg.frame_letter_labels(), seg.frame_word_labels()};
}

std::pair<double, double> dataset_ari(const std::vector<Segmentation>& estimated,
                                      const std::vector<Segmentation>& truth) {
  if (estimated.size() != truth.size())
    throw std::invalid_argument("dataset_ari: sequence count mismatch");
  std::vector<int> est_letters, est_words, true_letters, true_words;
  for (std::size_t m = 0; m < estimated.size(); ++m) {
    const FrameLabeling e = frame_labels_from_segmentation(estimated[m]);
    const FrameLabeling t = frame_labels_from_segmentation(truth[m]);
    if (e.letter_labels.size() != t.letter_labels.size())
      throw std::invalid_argument("dataset_ari: frame count mismatch");
    est_letters.insert(est_letters.end(), e.letter_labels.begin(), e.letter_labels.end());
    est_words.insert(est_words.end(), e.word_labels.begin(), e.word_labels.end());
    true_letters.insert(true_letters.end(), t.letter_labels.begin(), t.letter_labels.end());
    true_words.insert(true_words.end(), t.word_labels.begin(), t.word_labels.end());
  }
  return {adjusted_rand_index(est_letters, true_letters),
          adjusted_rand_index(est_words, true_words)};
}

}  // namespace hdphlm
