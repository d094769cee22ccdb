#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hdphlm/eval.hpp"
#include "hdphlm/gibbs.hpp"
#include "hdphlm/model.hpp"

namespace hdphlm {

struct ManifestEntry {
  int id = 0;
  std::string feature_path;
  std::string label_path;  // empty when no ground truth
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int dim = 0;
  double frame_rate = 100.0;
};

// Feature CSV: one frame per row, D comma-separated reals, optional header.
// Readers reject ragged rows and non-finite values with a line number.
FeatureSequence read_feature_csv(const std::filesystem::path& path);
void write_feature_csv(const FeatureSequence& seq, const std::filesystem::path& path);

// Label CSV: header plus rows "frame,letter_label,word_label".
FrameLabeling read_label_csv(const std::filesystem::path& path);
void write_label_csv(const FrameLabeling& labels, const std::filesystem::path& path);

// Manifest (JSON): entry list plus feature dimension and frame rate.
// Relative file paths resolve against the manifest's directory on read.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Everything needed to restart a chain.  `iterations_completed` is 0 for
// snapshots that only describe a model (e.g. ground truth).
struct Snapshot {
  ModelState model;
  std::vector<Segmentation> segmentations;
  int iterations_completed = 0;
};

// Versioned snapshot: a magic first line and a structured body.  read(write(x))
// reproduces every numeric field; unknown versions fail without a partial load.
void write_model_snapshot(const Snapshot& snapshot, const std::filesystem::path& path);
Snapshot read_model_snapshot(const std::filesystem::path& path);

// Metrics CSV: iteration, joint_log_likelihood, letter_ari, word_ari, seconds.
// ARI cells are empty (not zero) when the trace carries no ground truth.
void write_metrics_csv(const GibbsTrace& trace, const std::filesystem::path& path);
GibbsTrace read_metrics_csv(const std::filesystem::path& path);

// Shared formatting/plumbing for all writers.
std::string format_double(double v);  // 17 significant digits
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace hdphlm
