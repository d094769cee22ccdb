#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hdphlm/rng.hpp"

namespace hdphlm {

// Normal-inverse-Wishart parameters for a Gaussian emission model.
// The one-dimensional case reduces to a normal-inverse-gamma prior.
struct NiwParams {
  Eigen::VectorXd mu0;
  double kappa0 = 1.0;
  double nu0 = 1.0;
  Eigen::MatrixXd psi0;

  int dim() const { return static_cast<int>(mu0.size()); }
  void validate() const;
};

// Gamma(shape, rate) prior over a Poisson duration rate.
struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;

  double mean() const { return shape / rate; }
  void validate() const;
};

// Sufficient statistics for the Gaussian likelihood: count, sum of the
// observations and sum of their outer products.
struct GaussianStats {
  double count = 0.0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd outer;

  explicit GaussianStats(int dim)
      : sum(Eigen::VectorXd::Zero(dim)), outer(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::Ref<const Eigen::VectorXd>& y) {
    count += 1.0;
    sum += y;
    outer.noalias() += y * y.transpose();
  }
  void merge(const GaussianStats& other) {
    count += other.count;
    sum += other.sum;
    outer += other.outer;
  }
  int dim() const { return static_cast<int>(sum.size()); }
};

using LogWeights = std::vector<double>;

// log(sum_i exp(v_i)); returns -inf for an empty or all -inf input.
double log_sum_exp(const double* values, int n);
double log_sum_exp(const LogWeights& values);

// Draw an index with probability proportional to exp(weight).
// Throws std::runtime_error when no weight is finite.
int sample_categorical_log(const LogWeights& weights, Rng& rng);
int sample_categorical_log(const double* weights, int n, Rng& rng);

// Draw an index from a normalized probability vector.
int sample_categorical(const Eigen::VectorXd& probs, Rng& rng);

// Dirichlet draw; all concentration entries must be positive.
Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& concentration, Rng& rng);

NiwParams niw_posterior(const NiwParams& prior, const GaussianStats& stats);
GammaParams gamma_poisson_posterior(const GammaParams& prior,
                                    const std::vector<int>& durations);

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Sample (mean, cov) from a Normal-inverse-Wishart distribution.
Gaussian sample_niw(const NiwParams& params, Rng& rng);

double sample_gamma(const GammaParams& params, Rng& rng);

// Multivariate Gaussian log-density with a cached Cholesky factor.
// Throws std::domain_error when the covariance is not positive definite.
class GaussianLogDensity {
 public:
  GaussianLogDensity(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& y) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_norm_;
};

// Draw from N(mean, cov).
Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& cov, Rng& rng);

// Poisson pmf restricted to {1, ..., d_max} and renormalized.  Zero-frame
// durations carry no meaning for a latent letter, and message passing only
// marginalizes a finite duration range, so both truncations live here.
class TruncatedPoisson {
 public:
  TruncatedPoisson(double omega, int d_max);

  double log_pmf(int d) const;            // -inf outside [1, d_max]
  double truncated_mass() const { return truncated_mass_; }  // diagnostic
  int d_max() const { return static_cast<int>(log_pmf_.size()) - 1; }

 private:
  std::vector<double> log_pmf_;  // index 0 unused
  double truncated_mass_;
};

// Poisson log-pmf renormalized over d >= 1 (no upper cut).
double shifted_poisson_log_pmf(int d, double omega);

}  // namespace hdphlm
