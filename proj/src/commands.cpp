#include "hdphlm/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hdphlm/eval.hpp"

namespace fs = std::filesystem;

namespace hdphlm {

namespace {

template <typename Fn>
void parallel_trials(int n, int n_threads, Fn&& fn) {
  n_threads = std::max(1, std::min(n_threads, n));
  if (n_threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < n_threads; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::string seq_name(const char* stem, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.csv", stem, i);
  return buf;
}

// Rebuilds a segmentation whose frame labels equal the given labeling:
// word segments are maximal runs of the word label, letter spans maximal
// runs of the letter label inside each word segment.
Segmentation segmentation_from_frame_labels(const FrameLabeling& labels) {
  const int T = static_cast<int>(labels.word_labels.size());
  if (T == 0 || labels.letter_labels.size() != labels.word_labels.size())
    throw std::invalid_argument("segmentation_from_frame_labels: bad labeling");
  Segmentation seg;
  int t = 0;
  while (t < T) {
    const int word = labels.word_labels[t];
    int end = t;
    while (end < T && labels.word_labels[end] == word) ++end;
    std::vector<LetterSpan> plan;
    int u = t;
    while (u < end) {
      const int letter = labels.letter_labels[u];
      int v = u;
      while (v < end && labels.letter_labels[v] == letter) ++v;
      plan.push_back({letter, v - u});
      u = v;
    }
    seg.word_ids.push_back(word);
    seg.word_durations.push_back(end - t);
    seg.letter_plans.push_back(std::move(plan));
    t = end;
  }
  return seg;
}

struct LoadedDataset {
  std::vector<FeatureSequence> sequences;
  std::vector<Segmentation> truth;  // empty when any label file is missing
};

LoadedDataset load_dataset(const DatasetManifest& manifest, bool require_labels) {
  LoadedDataset data;
  std::vector<std::string> missing;
  bool all_labeled = true;
  for (const auto& entry : manifest.entries) {
    FeatureSequence seq = read_feature_csv(entry.feature_path);
    if (seq.dim() != manifest.dim)
      throw std::runtime_error(entry.feature_path + ": dimension " +
                               std::to_string(seq.dim()) + " disagrees with manifest " +
                               std::to_string(manifest.dim));
    seq.frame_rate = manifest.frame_rate;
    data.sequences.push_back(std::move(seq));
    if (entry.label_path.empty() || !fs::exists(entry.label_path)) {
      all_labeled = false;
      if (!entry.label_path.empty()) missing.push_back(entry.label_path);
      continue;
    }
    data.truth.push_back(segmentation_from_frame_labels(read_label_csv(entry.label_path)));
  }
  if (require_labels && !all_labeled) {
    std::string msg = "missing label files:";
    if (missing.empty()) msg = "manifest has sequences without label files";
    for (const auto& p : missing) msg += "\n  " + p;
    throw std::runtime_error(msg);
  }
  if (!all_labeled) data.truth.clear();
  return data;
}

void write_summary_csv(const std::string& condition,
                       const std::vector<GibbsResult>& results, int map_trial,
                       bool has_truth, const fs::path& path) {
  std::string out =
      "condition,trial,final_joint_log_likelihood,letter_ari,word_ari,is_map\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& trace = results[i].trace;
    out += condition;
    out += ',';
    out += std::to_string(i);
    out += ',';
    out += format_double(trace.joint_log_likelihood.back());
    out += ',';
    if (has_truth) out += format_double(trace.letter_ari.back());
    out += ',';
    if (has_truth) out += format_double(trace.word_ari.back());
    out += ',';
    out += (static_cast<int>(i) == map_trial ? '1' : '0');
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace

void RunConfig::validate() const {
  hyper.validate();
  gibbs.validate();
  if (manifest_path.empty()) throw std::invalid_argument("RunConfig: manifest path required");
  if (out_dir.empty()) throw std::invalid_argument("RunConfig: output directory required");
}

int cmd_generate(const GenerateOptions& options) {
  if (options.sigma2 <= 0.0) throw std::invalid_argument("generate: sigma2 must be > 0");
  if (options.out_dir.empty()) throw std::invalid_argument("generate: output directory required");
  const fs::path out(options.out_dir);
  if (fs::exists(out) && !fs::is_empty(out) && !options.force)
    throw std::runtime_error("generate: " + out.string() +
                             " is not empty (use --force to overwrite)");
  fs::create_directories(out);

  Rng rng = make_rng(options.seed);
  Experiment1Data data = make_experiment1_dataset(options.sigma2, rng);

  DatasetManifest manifest;
  manifest.dim = 1;
  manifest.frame_rate = data.sequences.front().frame_rate;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const std::string features = seq_name("seq", static_cast<int>(i));
    const std::string labels = seq_name("labels", static_cast<int>(i));
    write_feature_csv(data.sequences[i], out / features);
    write_label_csv(frame_labels_from_segmentation(data.truth[i]), out / labels);
    manifest.entries.push_back({static_cast<int>(i), features, labels});
  }
  write_manifest(manifest, out / "manifest.json");
  write_model_snapshot({data.ground_truth, data.truth, 0}, out / "truth.snapshot");
  std::cout << "wrote " << data.sequences.size() << " sequences to " << out.string()
            << std::endl;
  return 0;
}

int cmd_train(const RunConfig& config) {
  config.validate();
  const DatasetManifest manifest = read_manifest(config.manifest_path);
  if (config.hyper.emission_prior.dim() != manifest.dim)
    throw std::runtime_error("train: emission prior is " +
                             std::to_string(config.hyper.emission_prior.dim()) +
                             "-dimensional but the dataset has dimension " +
                             std::to_string(manifest.dim));
  const LoadedDataset data = load_dataset(manifest, /*require_labels=*/false);
  const bool has_truth = !data.truth.empty();
  fs::create_directories(config.out_dir);

  const int n_trials = config.gibbs.trial_count;
  std::vector<GibbsResult> results(n_trials);
  std::vector<std::string> errors(n_trials);

  // Trials are the outer parallelism; each chain runs single threaded so a
  // trial's draws never depend on scheduling.
  GibbsConfig trial_config = config.gibbs;
  const int pool = trial_config.n_threads;
  trial_config.n_threads = n_trials > 1 ? 1 : pool;
  parallel_trials(n_trials, n_trials > 1 ? pool : 1, [&](int trial) {
    try {
      GibbsConfig c = trial_config;
      c.seed = config.gibbs.seed + static_cast<std::uint64_t>(trial);
      GibbsResult result =
          run_gibbs(data.sequences, config.hyper, c, has_truth ? &data.truth : nullptr);

      const fs::path dir = fs::path(config.out_dir) /
                           ("trial_" + std::to_string(trial));
      fs::create_directories(dir);
      write_metrics_csv(result.trace, dir / "metrics.csv");
      write_model_snapshot({result.model, result.segmentations, c.iterations},
                           dir / "final.snapshot");
      results[trial] = std::move(result);
    } catch (const std::exception& e) {
      errors[trial] = e.what();
    }
  });

  bool any_error = false;
  std::vector<GibbsResult> finished;
  for (int trial = 0; trial < n_trials; ++trial) {
    if (!errors[trial].empty()) {
      any_error = true;
      std::cerr << "trial " << trial << " failed: " << errors[trial] << std::endl;
    } else {
      finished.push_back(std::move(results[trial]));
    }
  }
  if (finished.empty()) throw std::runtime_error("train: all trials failed");

  const int map_trial = select_map_trial(finished);
  write_summary_csv(config.condition, finished, map_trial, has_truth,
                    fs::path(config.out_dir) / "summary.csv");

  if (has_truth) {
    double mean_letter = 0.0, mean_word = 0.0;
    for (const auto& r : finished) {
      mean_letter += r.trace.letter_ari.back();
      mean_word += r.trace.word_ari.back();
    }
    mean_letter /= finished.size();
    mean_word /= finished.size();
    std::cout << "trials " << finished.size() << "  mean letter ARI "
              << mean_letter << "  mean word ARI " << mean_word
              << "  MAP trial " << map_trial << std::endl;
  } else {
    std::cout << "trials " << finished.size() << "  MAP trial " << map_trial
              << "  final log-likelihood "
              << finished[map_trial].trace.joint_log_likelihood.back() << std::endl;
  }
  return any_error ? 1 : 0;
}

int cmd_eval(const std::string& snapshot_path, const std::string& manifest_path,
             const std::string& out_path) {
  const Snapshot snapshot = read_model_snapshot(snapshot_path);
  const DatasetManifest manifest = read_manifest(manifest_path);
  const LoadedDataset data = load_dataset(manifest, /*require_labels=*/true);
  if (snapshot.segmentations.size() != data.sequences.size())
    throw std::runtime_error("eval: snapshot has " +
                             std::to_string(snapshot.segmentations.size()) +
                             " segmentations but the dataset has " +
                             std::to_string(data.sequences.size()) + " sequences");

  const auto [letter_ari, word_ari] = dataset_ari(snapshot.segmentations, data.truth);
  const double ll =
      joint_log_likelihood(snapshot.model, data.sequences, snapshot.segmentations);

  std::cout << "letter_ari " << letter_ari << "\nword_ari " << word_ari
            << "\njoint_log_likelihood " << ll << std::endl;
  if (!out_path.empty()) {
    std::string out = "letter_ari,word_ari,joint_log_likelihood\n";
    out += format_double(letter_ari);
    out += ',';
    out += format_double(word_ari);
    out += ',';
    out += format_double(ll);
    out += '\n';
    write_file_atomic(out_path, out);
  }
  return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& out_path) {
  if (!fs::exists(runs_dir))
    throw std::runtime_error("report: no such directory " + runs_dir);
  std::vector<fs::path> summaries;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir))
    if (entry.is_regular_file() && entry.path().filename() == "summary.csv")
      summaries.push_back(entry.path());
  std::sort(summaries.begin(), summaries.end());
  if (summaries.empty())
    throw std::runtime_error("report: no summary.csv under " + runs_dir);

  std::string out =
      "run,condition,trials,mean_letter_ari,mean_word_ari,"
      "map_letter_ari,map_word_ari,map_joint_log_likelihood\n";
  for (const auto& path : summaries) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header
    std::string condition;
    int trials = 0;
    double sum_letter = 0.0, sum_word = 0.0;
    double map_letter = 0.0, map_word = 0.0, map_ll = 0.0;
    bool has_ari = true, saw_map = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::string cell;
      std::stringstream ss(line);
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      while (cells.size() < 6) cells.emplace_back();
      condition = cells[0];
      ++trials;
      if (cells[3].empty() || cells[4].empty()) {
        has_ari = false;
      } else {
        sum_letter += std::stod(cells[3]);
        sum_word += std::stod(cells[4]);
      }
      if (cells[5] == "1") {
        saw_map = true;
        map_ll = std::stod(cells[2]);
        if (!cells[3].empty()) map_letter = std::stod(cells[3]);
        if (!cells[4].empty()) map_word = std::stod(cells[4]);
      }
    }
    if (trials == 0 || !saw_map)
      throw std::runtime_error("report: malformed summary " + path.string());
    const std::string run =
        fs::relative(path.parent_path(), runs_dir).string();
    out += run.empty() || run == "." ? "." : run;
    out += ',' + condition + ',' + std::to_string(trials) + ',';
    if (has_ari) out += format_double(sum_letter / trials);
    out += ',';
    if (has_ari) out += format_double(sum_word / trials);
    out += ',';
    if (has_ari) out += format_double(map_letter);
    out += ',';
    if (has_ari) out += format_double(map_word);
    out += ',';
    out += format_double(map_ll);
    out += '\n';
  }
  if (!out_path.empty())
    write_file_atomic(out_path, out);
  else
    std::cout << out;
  return 0;
}

}  // namespace hdphlm
