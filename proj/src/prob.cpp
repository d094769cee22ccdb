#include "hdphlm/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hdphlm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

void NiwParams::validate() const {
  const int d = dim();
  if (d < 1) throw std::invalid_argument("NiwParams: empty mean");
  if (!(kappa0 > 0.0)) throw std::invalid_argument("NiwParams: kappa0 must be > 0");
  if (!(nu0 > d - 1)) throw std::invalid_argument("NiwParams: nu0 must exceed dim - 1");
  if (psi0.rows() != d || psi0.cols() != d)
    throw std::invalid_argument("NiwParams: psi0 dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(psi0);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("NiwParams: psi0 not positive definite");
}

void GammaParams::validate() const {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("GammaParams: shape and rate must be > 0");
}

double log_sum_exp(const double* values, int n) {
  double m = kNegInf;
  for (int i = 0; i < n; ++i) m = std::max(m, values[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(values[i] - m);
  return m + std::log(s);
}

double log_sum_exp(const LogWeights& values) {
  return log_sum_exp(values.data(), static_cast<int>(values.size()));
}

int sample_categorical_log(const double* weights, int n, Rng& rng) {
  const double total = log_sum_exp(weights, n);
  if (total == kNegInf)
    throw std::runtime_error("sample_categorical_log: degenerate distribution, all weights are -inf");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cum = 0.0;
  int last_finite = 0;
  for (int i = 0; i < n; ++i) {
    if (weights[i] == kNegInf) continue;
    last_finite = i;
    cum += std::exp(weights[i] - total);
    if (u < cum) return i;
  }
  return last_finite;  // round-off spill
}

int sample_categorical_log(const LogWeights& weights, Rng& rng) {
  return sample_categorical_log(weights.data(), static_cast<int>(weights.size()), rng);
}

int sample_categorical(const Eigen::VectorXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng) * probs.sum();
  double cum = 0.0;
  int last_positive = 0;
  for (int i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cum += probs[i];
    if (u < cum) return i;
  }
  return last_positive;
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& concentration, Rng& rng) {
  const int n = static_cast<int>(concentration.size());
  if (n < 1) throw std::invalid_argument("sample_dirichlet: empty concentration");
  for (int i = 0; i < n; ++i)
    if (!(concentration[i] > 0.0))
      throw std::invalid_argument("sample_dirichlet: concentration entries must be > 0");

  Eigen::VectorXd out(n);
  for (int attempt = 0; attempt < 100; ++attempt) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      std::gamma_distribution<double> g(concentration[i], 1.0);
      out[i] = g(rng);
      total += out[i];
    }
    if (total > 0.0) {
      out /= total;
      return out;
    }
  }
  throw std::runtime_error("sample_dirichlet: gamma draws underflowed to zero");
}

NiwParams niw_posterior(const NiwParams& prior, const GaussianStats& stats) {
  prior.validate();
  if (stats.count < 0.0) throw std::invalid_argument("niw_posterior: negative count");
  if (stats.dim() != prior.dim() || stats.outer.rows() != prior.dim() ||
      stats.outer.cols() != prior.dim())
    throw std::invalid_argument("niw_posterior: dimension mismatch");
  if (stats.count == 0.0) return prior;

  const double n = stats.count;
  const Eigen::VectorXd ybar = stats.sum / n;
  NiwParams post;
  post.kappa0 = prior.kappa0 + n;
  post.nu0 = prior.nu0 + n;
  post.mu0 = (prior.kappa0 * prior.mu0 + stats.sum) / post.kappa0;
  const Eigen::MatrixXd scatter = stats.outer - n * ybar * ybar.transpose();
  const Eigen::VectorXd diff = ybar - prior.mu0;
  post.psi0 = prior.psi0 + scatter +
              (prior.kappa0 * n / post.kappa0) * diff * diff.transpose();
  return post;
}

GammaParams gamma_poisson_posterior(const GammaParams& prior,
                                    const std::vector<int>& durations) {
  prior.validate();
  GammaParams post = prior;
  for (int d : durations) {
    if (d < 1) throw std::invalid_argument("gamma_poisson_posterior: duration < 1");
    post.shape += d;
  }
  post.rate += static_cast<double>(durations.size());
  return post;
}

namespace {

// chi^2_k draw with possibly non-integer k.
double sample_chi_squared(double k, Rng& rng) {
  std::gamma_distribution<double> g(0.5 * k, 2.0);
  return g(rng);
}

}  // namespace

Gaussian sample_niw(const NiwParams& params, Rng& rng) {
  params.validate();
  const int d = params.dim();

  // Bartlett decomposition: W ~ Wishart(nu, psi^{-1}), cov = W^{-1}.
  Eigen::LLT<Eigen::MatrixXd> psi_llt(params.psi0);
  const Eigen::MatrixXd psi_inv =
      psi_llt.solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::LLT<Eigen::MatrixXd> inv_llt(psi_inv);
  if (inv_llt.info() != Eigen::Success)
    throw std::domain_error("sample_niw: psi0 inverse not positive definite");
  const Eigen::MatrixXd L = inv_llt.matrixL();

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    A(i, i) = std::sqrt(sample_chi_squared(params.nu0 - i, rng));
    for (int j = 0; j < i; ++j) A(i, j) = normal(rng);
  }
  const Eigen::MatrixXd LA = L * A;  // W = LA LA^T, cov = LA^{-T} LA^{-1}
  const Eigen::MatrixXd LA_inv =
      LA.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  Gaussian out;
  out.cov = LA_inv.transpose() * LA_inv;
  out.cov = 0.5 * (out.cov + out.cov.transpose().eval());  // enforce symmetry
  out.mean = sample_gaussian(params.mu0, out.cov / params.kappa0, rng);
  return out;
}

double sample_gamma(const GammaParams& params, Rng& rng) {
  params.validate();
  std::gamma_distribution<double> g(params.shape, 1.0 / params.rate);
  double x = g(rng);
  while (!(x > 0.0)) x = g(rng);
  return x;
}

GaussianLogDensity::GaussianLogDensity(const Eigen::VectorXd& mean,
                                       const Eigen::MatrixXd& cov)
    : mean_(mean), llt_(cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw std::invalid_argument("GaussianLogDensity: dimension mismatch");
  if (llt_.info() != Eigen::Success)
    throw std::domain_error("GaussianLogDensity: covariance not positive definite");
  const Eigen::MatrixXd L = llt_.matrixL();
  double log_det_half = 0.0;
  for (int i = 0; i < L.rows(); ++i) log_det_half += std::log(L(i, i));
  log_norm_ = -0.5 * mean.size() * kLog2Pi - log_det_half;
}

double GaussianLogDensity::operator()(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const Eigen::VectorXd diff = y - mean_;
  const Eigen::VectorXd z =
      Eigen::MatrixXd(llt_.matrixL()).triangularView<Eigen::Lower>().solve(diff);
  return log_norm_ - 0.5 * z.squaredNorm();
}

Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean,
                                const Eigen::MatrixXd& cov, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("sample_gaussian: covariance not positive definite");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(mean.size());
  for (int i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return mean + Eigen::MatrixXd(llt.matrixL()) * z;
}

TruncatedPoisson::TruncatedPoisson(double omega, int d_max) {
  if (!(omega > 0.0)) throw std::invalid_argument("TruncatedPoisson: omega must be > 0");
  if (d_max < 1) throw std::invalid_argument("TruncatedPoisson: d_max must be >= 1");
  log_pmf_.assign(d_max + 1, kNegInf);
  const double log_omega = std::log(omega);
  for (int d = 1; d <= d_max; ++d)
    log_pmf_[d] = d * log_omega - omega - std::lgamma(d + 1.0);
  const double log_z = log_sum_exp(log_pmf_.data() + 1, d_max);
  for (int d = 1; d <= d_max; ++d) log_pmf_[d] -= log_z;
  truncated_mass_ = 1.0 - std::exp(log_z);
}

double TruncatedPoisson::log_pmf(int d) const {
  if (d < 1 || d >= static_cast<int>(log_pmf_.size())) return kNegInf;
  return log_pmf_[d];
}

double shifted_poisson_log_pmf(int d, double omega) {
  if (d < 1) return kNegInf;
  if (!(omega > 0.0)) throw std::invalid_argument("shifted_poisson_log_pmf: omega must be > 0");
  return d * std::log(omega) - omega - std::lgamma(d + 1.0) -
         std::log1p(-std::exp(-omega));
}

}  // namespace hdphlm
