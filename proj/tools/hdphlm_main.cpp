#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hdphlm/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Two-level unsupervised segmentation of continuous time series"};
  app.require_subcommand(1);

  hdphlm::GenerateOptions gen;
  CLI::App* generate = app.add_subcommand(
      "generate", "Write the synthetic benchmark dataset");
  generate->add_option("--sigma2", gen.sigma2, "Observation noise variance")
      ->check(CLI::PositiveNumber);
  generate->add_option("--seed", gen.seed, "Random seed");
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_flag("--force", gen.force, "Overwrite a non-empty directory");

  hdphlm::RunConfig run;
  int dim = 1;
  CLI::App* train = app.add_subcommand("train", "Run blocked Gibbs sampling chains");
  train->set_config("--config", "", "Flat key=value config file");
  train->add_option("--manifest", run.manifest_path, "Dataset manifest")->required();
  train->add_option("--out", run.out_dir, "Output directory")->required();
  train->add_option("--trials", run.gibbs.trial_count, "Independent chains");
  train->add_option("--iterations", run.gibbs.iterations, "Sweeps per chain");
  train->add_option("--seed", run.gibbs.seed, "Base random seed");
  train->add_option("--threads", run.gibbs.n_threads, "Worker threads");
  train->add_option("--record-every", run.gibbs.record_every, "Trace stride");
  train->add_option("--sir-candidates", run.gibbs.sir_candidates_per_occurrence,
                    "Inventory proposals per occurrence");
  train->add_option("--condition", run.condition, "Tag carried into summary.csv");
  train->add_option("--dim", dim, "Feature dimension")->check(CLI::PositiveNumber);
  train->add_option("--gamma-lm", run.hyper.gamma_lm, "Word-level top concentration");
  train->add_option("--alpha-lm", run.hyper.alpha_lm, "Word-level row concentration");
  train->add_option("--gamma-wm", run.hyper.gamma_wm, "Letter-level top concentration");
  train->add_option("--alpha-wm", run.hyper.alpha_wm, "Letter-level row concentration");
  train->add_option("--words-max", run.hyper.n_words_max, "Word truncation");
  train->add_option("--letters-max", run.hyper.n_letters_max, "Letter truncation");
  train->add_option("--word-len-max", run.hyper.word_len_max, "Letters per word cap");
  train->add_option("--duration-shape", run.hyper.duration_prior.shape,
                    "Duration prior shape");
  train->add_option("--duration-rate", run.hyper.duration_prior.rate,
                    "Duration prior rate");
  double kappa0 = 0.01;
  train->add_option("--kappa0", kappa0, "Emission prior mean strength");

  std::string snapshot_path, truth_manifest, eval_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a snapshot against labels");
  eval_cmd->add_option("--snapshot", snapshot_path, "Estimated snapshot")->required();
  eval_cmd->add_option("--truth", truth_manifest, "Labeled dataset manifest")->required();
  eval_cmd->add_option("--out", eval_out, "Optional metrics CSV");

  std::string runs_dir, report_out;
  CLI::App* report = app.add_subcommand("report", "Aggregate run summaries");
  report->add_option("--runs", runs_dir, "Directory of training runs")->required();
  report->add_option("--out", report_out, "Report CSV (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return hdphlm::cmd_generate(gen);
    if (*train) {
      run.hyper = [&] {
        hdphlm::Hyperparameters h = hdphlm::Hyperparameters::defaults(dim);
        h.gamma_lm = run.hyper.gamma_lm;
        h.alpha_lm = run.hyper.alpha_lm;
        h.gamma_wm = run.hyper.gamma_wm;
        h.alpha_wm = run.hyper.alpha_wm;
        h.n_words_max = run.hyper.n_words_max;
        h.n_letters_max = run.hyper.n_letters_max;
        h.word_len_max = run.hyper.word_len_max;
        h.duration_prior = run.hyper.duration_prior;
        h.emission_prior.kappa0 = kappa0;
        h.d_max_letter = 0;
        h.d_max_word = 0;
        h.finalize();
        return h;
      }();
      return hdphlm::cmd_train(run);
    }
    if (*eval_cmd) return hdphlm::cmd_eval(snapshot_path, truth_manifest, eval_out);
    if (*report) return hdphlm::cmd_report(runs_dir, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
