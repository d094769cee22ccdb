#include "hdphlm/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hdphlm {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line,
                             const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

bool parse_int(const std::string& cell, int& out) {
  double v;
  if (!parse_double(cell, v)) return false;
  if (!std::isfinite(v) || v != std::floor(v)) return false;
  out = static_cast<int>(v);
  return true;
}

std::string read_whole_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::VectorXd vector_from_json(const ordered_json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw std::runtime_error("snapshot: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

constexpr const char* kSnapshotMagic = "HDPHLM-SNAPSHOT 1";

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

FeatureSequence read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    for (const auto& cell : cells) {
      double v;
      if (!parse_double(cell, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (lineno == 1 && rows.empty()) continue;  // optional header
      parse_fail(path, lineno, "non-numeric cell");
    }
    for (double v : row)
      if (!std::isfinite(v)) parse_fail(path, lineno, "non-finite value");
    if (dim < 0)
      dim = static_cast<int>(row.size());
    else if (static_cast<int>(row.size()) != dim)
      parse_fail(path, lineno, "ragged row: expected " + std::to_string(dim) +
                                   " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) parse_fail(path, lineno, "no data rows");

  FeatureSequence seq;
  seq.frames.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (int d = 0; d < dim; ++d) seq.frames(static_cast<Eigen::Index>(t), d) = rows[t][d];
  return seq;
}

void write_feature_csv(const FeatureSequence& seq, const std::filesystem::path& path) {
  std::string out;
  for (int t = 0; t < seq.length(); ++t) {
    for (int d = 0; d < seq.dim(); ++d) {
      if (d) out += ',';
      out += format_double(seq.frames(t, d));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

FrameLabeling read_label_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  FrameLabeling labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != 3)
      parse_fail(path, lineno, "expected 3 columns (frame,letter_label,word_label)");
    int frame, letter, word;
    if (!parse_int(cells[0], frame) || !parse_int(cells[1], letter) ||
        !parse_int(cells[2], word)) {
      if (lineno == 1 && labels.letter_labels.empty()) continue;  // header
      parse_fail(path, lineno, "non-integer cell");
    }
    if (frame != static_cast<int>(labels.letter_labels.size()))
      parse_fail(path, lineno, "frame indices must be consecutive from 0");
    labels.letter_labels.push_back(letter);
    labels.word_labels.push_back(word);
  }
  if (labels.letter_labels.empty()) parse_fail(path, lineno, "no data rows");
  return labels;
}

void write_label_csv(const FrameLabeling& labels, const std::filesystem::path& path) {
  std::string out = "frame,letter_label,word_label\n";
  for (std::size_t t = 0; t < labels.letter_labels.size(); ++t) {
    out += std::to_string(t);
    out += ',';
    out += std::to_string(labels.letter_labels[t]);
    out += ',';
    out += std::to_string(labels.word_labels[t]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_whole_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest manifest;
  manifest.dim = j.at("dim").get<int>();
  manifest.frame_rate = j.at("frame_rate").get<double>();
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };
  for (const auto& e : j.at("sequences")) {
    ManifestEntry entry;
    entry.id = e.at("id").get<int>();
    entry.feature_path = resolve(e.at("features").get<std::string>());
    if (e.contains("labels")) entry.label_path = resolve(e.at("labels").get<std::string>());
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  ordered_json j;
  j["dim"] = manifest.dim;
  j["frame_rate"] = manifest.frame_rate;
  j["sequences"] = ordered_json::array();
  for (const auto& e : manifest.entries) {
    ordered_json je;
    je["id"] = e.id;
    je["features"] = e.feature_path;
    if (!e.label_path.empty()) je["labels"] = e.label_path;
    j["sequences"].push_back(std::move(je));
  }
  write_file_atomic(path, j.dump(2) + "\n");
}

void write_model_snapshot(const Snapshot& snapshot, const std::filesystem::path& path) {
  const ModelState& model = snapshot.model;
  const Hyperparameters& h = model.hyper;
  ordered_json j;

  ordered_json jh;
  jh["gamma_lm"] = h.gamma_lm;
  jh["alpha_lm"] = h.alpha_lm;
  jh["gamma_wm"] = h.gamma_wm;
  jh["alpha_wm"] = h.alpha_wm;
  jh["n_words_max"] = h.n_words_max;
  jh["n_letters_max"] = h.n_letters_max;
  jh["duration_prior"] = {{"shape", h.duration_prior.shape}, {"rate", h.duration_prior.rate}};
  jh["emission_prior"] = {{"mu0", vector_to_json(h.emission_prior.mu0)},
                          {"kappa0", h.emission_prior.kappa0},
                          {"nu0", h.emission_prior.nu0},
                          {"psi0", matrix_to_json(h.emission_prior.psi0)}};
  jh["d_max_letter"] = h.d_max_letter;
  jh["d_max_word"] = h.d_max_word;
  jh["word_len_max"] = h.word_len_max;
  j["hyperparameters"] = std::move(jh);

  const TransitionModel& tr = model.transitions;
  j["transitions"] = {{"beta_lm", vector_to_json(tr.beta_lm)},
                      {"pi_lm", matrix_to_json(tr.pi_lm)},
                      {"pi_lm_initial", vector_to_json(tr.pi_lm_initial)},
                      {"beta_wm", vector_to_json(tr.beta_wm)},
                      {"pi_wm", matrix_to_json(tr.pi_wm)},
                      {"pi_wm_initial", vector_to_json(tr.pi_wm_initial)}};

  j["inventory"] = model.inventory.words;

  j["letters"] = ordered_json::array();
  for (const auto& lp : model.letters)
    j["letters"].push_back({{"mean", vector_to_json(lp.mean)},
                            {"cov", matrix_to_json(lp.cov)},
                            {"omega", lp.omega}});

  j["segmentations"] = ordered_json::array();
  for (const auto& seg : snapshot.segmentations) {
    ordered_json js;
    js["word_ids"] = seg.word_ids;
    js["word_durations"] = seg.word_durations;
    js["letter_plans"] = ordered_json::array();
    for (const auto& plan : seg.letter_plans) {
      ordered_json jp = ordered_json::array();
      for (const auto& span : plan) jp.push_back({span.letter, span.duration});
      js["letter_plans"].push_back(std::move(jp));
    }
    j["segmentations"].push_back(std::move(js));
  }
  j["iterations_completed"] = snapshot.iterations_completed;

  write_file_atomic(path, std::string(kSnapshotMagic) + "\n" + j.dump(2) + "\n");
}

Snapshot read_model_snapshot(const std::filesystem::path& path) {
  const std::string content = read_whole_file(path);
  const std::size_t nl = content.find('\n');
  std::string magic = nl == std::string::npos ? content : content.substr(0, nl);
  if (!magic.empty() && magic.back() == '\r') magic.pop_back();
  if (magic != kSnapshotMagic)
    throw std::runtime_error("snapshot " + path.string() +
                             ": unsupported format header \"" + magic + "\"");
  ordered_json j;
  try {
    j = ordered_json::parse(content.substr(nl + 1));
  } catch (const std::exception& e) {
    throw std::runtime_error("snapshot " + path.string() + ": " + e.what());
  }

  Snapshot snapshot;
  ModelState& model = snapshot.model;
  try {
    const auto& jh = j.at("hyperparameters");
    Hyperparameters& h = model.hyper;
    h.gamma_lm = jh.at("gamma_lm").get<double>();
    h.alpha_lm = jh.at("alpha_lm").get<double>();
    h.gamma_wm = jh.at("gamma_wm").get<double>();
    h.alpha_wm = jh.at("alpha_wm").get<double>();
    h.n_words_max = jh.at("n_words_max").get<int>();
    h.n_letters_max = jh.at("n_letters_max").get<int>();
    h.duration_prior.shape = jh.at("duration_prior").at("shape").get<double>();
    h.duration_prior.rate = jh.at("duration_prior").at("rate").get<double>();
    h.emission_prior.mu0 = vector_from_json(jh.at("emission_prior").at("mu0"));
    h.emission_prior.kappa0 = jh.at("emission_prior").at("kappa0").get<double>();
    h.emission_prior.nu0 = jh.at("emission_prior").at("nu0").get<double>();
    h.emission_prior.psi0 = matrix_from_json(jh.at("emission_prior").at("psi0"));
    h.d_max_letter = jh.at("d_max_letter").get<int>();
    h.d_max_word = jh.at("d_max_word").get<int>();
    h.word_len_max = jh.at("word_len_max").get<int>();

    const auto& jt = j.at("transitions");
    model.transitions.beta_lm = vector_from_json(jt.at("beta_lm"));
    model.transitions.pi_lm = matrix_from_json(jt.at("pi_lm"));
    model.transitions.pi_lm_initial = vector_from_json(jt.at("pi_lm_initial"));
    model.transitions.beta_wm = vector_from_json(jt.at("beta_wm"));
    model.transitions.pi_wm = matrix_from_json(jt.at("pi_wm"));
    model.transitions.pi_wm_initial = vector_from_json(jt.at("pi_wm_initial"));

    model.inventory.words = j.at("inventory").get<std::vector<std::vector<int>>>();

    for (const auto& jl : j.at("letters")) {
      LetterParams lp;
      lp.mean = vector_from_json(jl.at("mean"));
      lp.cov = matrix_from_json(jl.at("cov"));
      lp.omega = jl.at("omega").get<double>();
      model.letters.push_back(std::move(lp));
    }

    for (const auto& js : j.at("segmentations")) {
      Segmentation seg;
      seg.word_ids = js.at("word_ids").get<std::vector<int>>();
      seg.word_durations = js.at("word_durations").get<std::vector<int>>();
      for (const auto& jp : js.at("letter_plans")) {
        std::vector<LetterSpan> plan;
        for (const auto& span : jp)
          plan.push_back({span.at(0).get<int>(), span.at(1).get<int>()});
        seg.letter_plans.push_back(std::move(plan));
      }
      snapshot.segmentations.push_back(std::move(seg));
    }
    snapshot.iterations_completed = j.at("iterations_completed").get<int>();
  } catch (const ordered_json::exception& e) {
    throw std::runtime_error("snapshot " + path.string() + ": " + e.what());
  }
  return snapshot;
}

void write_metrics_csv(const GibbsTrace& trace, const std::filesystem::path& path) {
  const bool has_ari = !trace.letter_ari.empty();
  if (has_ari && (trace.letter_ari.size() != trace.iteration.size() ||
                  trace.word_ari.size() != trace.iteration.size()))
    throw std::invalid_argument("write_metrics_csv: ragged trace");
  std::string out = "iteration,joint_log_likelihood,letter_ari,word_ari,seconds\n";
  for (std::size_t i = 0; i < trace.iteration.size(); ++i) {
    out += std::to_string(trace.iteration[i]);
    out += ',';
    out += format_double(trace.joint_log_likelihood[i]);
    out += ',';
    if (has_ari) out += format_double(trace.letter_ari[i]);
    out += ',';
    if (has_ari) out += format_double(trace.word_ari[i]);
    out += ',';
    out += format_double(trace.seconds[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

GibbsTrace read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  GibbsTrace trace;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) continue;  // header
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != 5) parse_fail(path, lineno, "expected 5 columns");
    int iter;
    double ll, sec;
    if (!parse_int(cells[0], iter) || !parse_double(cells[1], ll) ||
        !parse_double(cells[4], sec))
      parse_fail(path, lineno, "non-numeric cell");
    trace.iteration.push_back(iter);
    trace.joint_log_likelihood.push_back(ll);
    trace.seconds.push_back(sec);
    if (!cells[2].empty() || !cells[3].empty()) {
      double la, wa;
      if (!parse_double(cells[2], la) || !parse_double(cells[3], wa))
        parse_fail(path, lineno, "non-numeric ARI cell");
      trace.letter_ari.push_back(la);
      trace.word_ari.push_back(wa);
    }
  }
  return trace;
}

}  // namespace hdphlm
