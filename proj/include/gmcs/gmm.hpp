#ifndef GMCS_GMM_HPP
#define GMCS_GMM_HPP

#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "gmcs/common.hpp"
#include "gmcs/dataset.hpp"

namespace gmcs {

// Mixture parameters constrained to covariance spectra inside [lambda, 1/lambda].
struct GmmParams {
  Eigen::VectorXd weights;            // k entries, nonnegative, sums to 1
  RowMatrixXd means;                  // k x d
  std::vector<Eigen::MatrixXd> covs;  // k matrices, d x d
  double lambda = 1e-3;

  Eigen::Index k() const { return weights.size(); }
  Eigen::Index dim() const { return means.cols(); }
  void validate() const;  // throws DataError / NumericError
};

// Symmetrize and clamp the spectrum to [lambda, 1/lambda]. A matrix already in
// band (and symmetric to 1e-12) is returned unchanged, bit for bit.
Eigen::MatrixXd clamp_covariance(const Eigen::MatrixXd& sigma, double lambda);

// Cached Cholesky factorizations for density work. All evaluation is done in the
// log domain so Mahalanobis distances around 1e3 neither underflow nor overflow.
class GmmEval {
 public:
  explicit GmmEval(const GmmParams& theta);  // throws NumericError on non-PD cov

  double log_component(Eigen::Index j, ConstRowRef x) const;  // ln N(x; mu_j, cov_j)
  // ln sum_j w_j N_j(x); zero-weight components are skipped.
  double log_mixture(ConstRowRef x) const;
  // f(x) = ln Z - ln sum_j (w_j / Z) N_j(x) >= 0 (clamped against rounding).
  double point_cost(ConstRowRef x) const { return std::max(log_z_ - log_mixture(x), 0.0); }
  double log_z() const { return log_z_; }
  const Eigen::VectorXd& log_weights() const { return log_w_; }

  // allocation-free inner loop: fills logc[0..k); scratch must hold dim() doubles
  void log_components(ConstRowRef x, double* logc, double* scratch) const;

 private:
  const GmmParams* theta_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> chol_;
  Eigen::VectorXd log_norm_;  // -(d/2) ln 2pi - (1/2) ln |cov_j|
  Eigen::VectorXd log_w_;     // ln w_j, -inf for zero weights
  double log_z_ = 0.0;
};

double log_gaussian(ConstRowRef x, ConstRowRef mu, const Eigen::MatrixXd& sigma);
// ln Z(theta) = ln sum_j w_j / sqrt(|2 pi cov_j|)
double log_normalizer(const GmmParams& theta);
double point_cost(const GmmParams& theta, ConstRowRef x);
// sum_i w_i f(x_i), accumulated in the fixed deterministic order
double cost_of_set(const DataSet& x, const GmmParams& theta);
// -W ln Z + cost_of_set, the decomposition the cost function is defined by
double negative_log_likelihood(const DataSet& x, const GmmParams& theta);

// Responsibilities scaled by point weight: eta(i,j) = w_i * p(j | x_i); each row
// sums to the point's weight.
RowMatrixXd e_step(const DataSet& x, const GmmParams& theta);

struct MStepInfo {
  std::vector<Eigen::Index> rescued;  // components re-seeded after collapsing to zero mass
  bool clamped = false;               // some spectrum needed clamping into band
  bool ridge_material = false;        // ridge >= 10% of a smallest final eigenvalue
  bool floor_active() const { return !rescued.empty() || clamped || ridge_material; }
};

// Weighted maximum-likelihood update from responsibilities. Covariances are the
// two-pass weighted scatter around the new mean, plus lambda on the diagonal,
// then clamped into band. A zero-mass component is re-seeded at the point with
// the largest weighted mixture cost under the surviving components, with weight
// 1/(10k); weights are renormalized afterwards.
GmmParams m_step(const DataSet& x, const RowMatrixXd& eta, double lambda,
                 MStepInfo* info = nullptr);

struct EmOptions {
  int max_iters = 100;
  double rel_tol = 1e-3;  // stop when |delta objective| <= rel_tol * |objective|
  int lloyd_iters = 10;
};

struct EmReport {
  // Regularized objective per iteration: NLL plus the covariance ridge term
  // lambda/2 sum_j z_j tr(Sigma_j^-1). This is the quantity the iteration
  // descends (plain NLL is not monotone under the ridge) and the one the
  // stopping rule watches. Length iterations + 1, entry 0 = after init.
  std::vector<double> nll_trace;
  std::vector<bool> floor_active;  // aligned with nll_trace, one per m-step
  std::vector<bool> rescue;        // aligned with nll_trace
  int iterations = 0;
  bool converged = false;
};

// Weighted EM initialized from a weighted Lloyd hard assignment.
GmmParams em_fit(const DataSet& x, int k, double lambda, Rng rng, const EmOptions& opt = {},
                 EmReport* report = nullptr);

// Best of `restarts` independent runs (substreams 0..restarts-1), lowest final
// regularized objective.
GmmParams em_fit_best(const DataSet& x, int k, double lambda, Rng rng, int restarts,
                      const EmOptions& opt = {}, double* best_nll = nullptr,
                      EmReport* best_report = nullptr);

// |(approx - full) / full|
double relative_error_eta(double full_cost, double approx_cost);

// Residual of the smoothness bound f(x) <= (1/lambda) ||x-y||^2 + 2 f(y):
// returns (1/lambda) ||x-y||^2 + 2 f(y) - f(x), which is >= 0 for valid theta.
double smoothness_residual(const GmmParams& theta, ConstRowRef x, ConstRowRef y);

struct LikelihoodErrorCheck {
  bool precondition = false;  // every covariance satisfies |cov_j| >= (2 pi)^-d
  double rel_error = 0.0;     // |L(X) - L(C)| / |L(X)|
};
// Compares total log-likelihood of a weighted proxy set against the full set.
LikelihoodErrorCheck likelihood_error_check(const DataSet& x, const DataSet& proxy,
                                            const GmmParams& theta);

void save_theta(const std::string& path, const GmmParams& theta);  // text, 17 sig digits
GmmParams load_theta(const std::string& path);

}  // namespace gmcs

#endif
