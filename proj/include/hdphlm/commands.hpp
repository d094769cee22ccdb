#pragma once

#include <string>

#include "hdphlm/gibbs.hpp"
#include "hdphlm/io.hpp"
#include "hdphlm/model.hpp"

namespace hdphlm {

// Full description of one training run: model priors, sampler settings and
// the file-system endpoints.
struct RunConfig {
  Hyperparameters hyper = Hyperparameters::defaults(1);
  GibbsConfig gibbs;
  std::string manifest_path;
  std::string out_dir;
  std::string condition;  // free-form tag carried into summaries

  void validate() const;
};

struct GenerateOptions {
  double sigma2 = 1.0;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool force = false;
};

// Writes the synthetic benchmark: 40 feature CSVs, 40 label CSVs, a manifest
// and a ground-truth snapshot.  Refuses a non-empty directory unless forced.
int cmd_generate(const GenerateOptions& options);

// Runs trial_count independent chains over the manifest's dataset.  Each
// trial gets its own subdirectory with a metrics CSV and a final snapshot;
// summary.csv marks the chain with the highest final joint log-likelihood.
int cmd_train(const RunConfig& config);

// Scores an estimated snapshot against a labeled dataset; prints and writes
// letter ARI, word ARI and joint log-likelihood.
int cmd_eval(const std::string& snapshot_path, const std::string& manifest_path,
             const std::string& out_path);

// Aggregates every summary.csv below `runs_dir` into one report CSV with
// per-run mean and MAP-trial metrics.
int cmd_report(const std::string& runs_dir, const std::string& out_path);

}  // namespace hdphlm
