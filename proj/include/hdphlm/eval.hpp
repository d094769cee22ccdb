#pragma once

#include <utility>
#include <vector>

#include "hdphlm/model.hpp"

namespace hdphlm {

struct FrameLabeling {
  std::vector<int> letter_labels;
  std::vector<int> word_labels;
};

// Chance-corrected partition agreement from the pair-counting contingency
// table.  1 for identical partitions, about 0 for independent ones.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

FrameLabeling frame_labels_from_segmentation(const Segmentation& seg);

// Concatenates frame labels across all sequences and returns
// (letter ARI, word ARI).
std::pair<double, double> dataset_ari(const std::vector<Segmentation>& estimated,
                                      const std::vector<Segmentation>& truth);

}  // namespace hdphlm
