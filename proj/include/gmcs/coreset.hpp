#ifndef GMCS_CORESET_HPP
#define GMCS_CORESET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gmcs/common.hpp"
#include "gmcs/dataset.hpp"
#include "gmcs/gmm.hpp"
#include "gmcs/seeding.hpp"

namespace gmcs {

// Importance scores s(x) = alpha d(x,B)^2 + (2 alpha / W_j) cellcost_j
//                        + (2 / W_j) phi, with W_j the weight of x's cell.
// On unit weights the scores sum to (3 alpha + 2 beta') phi, beta' = nonempty cells.
struct SensitivityScores {
  Eigen::VectorXd s;              // per-point unnormalized score
  Eigen::VectorXd q;              // draw probabilities w_i s_i / sum, sums to 1
  double total = 0.0;             // sum_i w_i s_i
  double phi = 0.0;               // quantization cost the scores were built from
  double alpha = 0.0;
  Eigen::Index beta = 0;
  Eigen::Index nonempty_cells = 0;

  // normalized total-sensitivity ceilings; both are surfaced in diagnostics
  double total_bound(double lambda) const {
    return (6.0 * alpha + 4.0 * static_cast<double>(beta)) / (lambda * lambda);
  }
  double total_bound_alt(double lambda) const {
    return (4.0 * alpha + 2.0 * static_cast<double>(beta)) / (lambda * lambda);
  }
};

SensitivityScores sensitivity_scores(const DataSet& x, const Bicriteria& b,
                                     const VoronoiPartition& part);

// Per-point ceiling n (2/lambda^2) s(x)/phi on unit-weight sets; the supremum of
// normalized mixture cost n f(x) / sum f under the spectrum band never exceeds it.
Eigen::VectorXd normalized_sensitivity_bound(const SensitivityScores& scores, const DataSet& x,
                                             double lambda);

struct CoresetMeta {
  std::uint64_t source_n = 0;     // points the coreset stands in for
  std::uint64_t m_requested = 0;  // draw budget that produced it
  double epsilon_budget = 0.0;    // composed approximation budget (bookkeeping)
  int level = 0;                  // height in a composition tree
};

// Weighted proxy set. Duplicate draws are aggregated, so n() <= m_requested;
// all weights are positive.
class Coreset {
 public:
  Coreset() = default;  // empty; valid only as a merge identity
  Coreset(RowMatrixXd points, Eigen::VectorXd weights, CoresetMeta meta);

  bool empty() const { return points_.rows() == 0; }
  Eigen::Index n() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  const RowMatrixXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const CoresetMeta& meta() const { return meta_; }
  CoresetMeta& meta() { return meta_; }
  DataSet as_dataset() const;

 private:
  RowMatrixXd points_;
  Eigen::VectorXd weights_;
  CoresetMeta meta_;
};

// Vose alias table over a probability vector (entries >= 0, sum within 1e-9 of 1).
struct AliasTable {
  std::vector<double> prob;
  std::vector<std::uint32_t> alias;
  std::size_t size() const { return prob.size(); }
  // two uniforms in [0,1) -> bucket index
  std::size_t draw(double u1, double u2) const {
    auto i = static_cast<std::size_t>(u1 * static_cast<double>(prob.size()));
    if (i >= prob.size()) i = prob.size() - 1;
    return u2 < prob[i] ? i : alias[i];
  }
};

AliasTable build_alias_table(const Eigen::VectorXd& q);

// m draws with replacement from q; draw of x_i carries w_i / (m q_i); duplicates
// are merged by summing weights and emitted in source index order.
Coreset draw_coreset(const DataSet& x, const SensitivityScores& scores, std::uint64_t m,
                     Rng& rng, double epsilon_budget = 0.0);

// ceil(c (d^4 k^6 + k^2 ln(1/delta)) / (lambda^4 eps^2)); advisory only.
double coreset_size_bound_real(int k, Eigen::Index d, double eps, double delta, double lambda,
                               double c = 1.0);
std::uint64_t coreset_size_bound(int k, Eigen::Index d, double eps, double delta, double lambda,
                                 double c = 1.0);

enum class SeedingMode { kmeanspp, adaptive };

struct BuildOptions {
  SeedingMode seeding = SeedingMode::kmeanspp;
  double delta = 0.1;
  double epsilon = 0.1;  // recorded as the coreset's budget; m governs quality
  double lambda = 1e-3;  // spectrum band edge, used only for the diagnostic bounds
};

struct BuildDiagnostics {
  Bicriteria seed;
  double sum_s = 0.0;             // sum of scores on unit weights
  double identity_expected = 0.0; // (3 alpha + 2 beta) phi
  double total_bound = 0.0;
  double total_bound_alt = 0.0;
  Eigen::Index nonempty_cells = 0;
};

// seed -> partition -> scores -> draw. Seeding uses rng.substream(0) (best-of-p
// runs substream per run inside), drawing uses rng.substream(1).
Coreset build_coreset(const DataSet& x, int k, std::uint64_t m, const BuildOptions& opt,
                      Rng rng, BuildDiagnostics* diag = nullptr);

// max over the grid of n f(x) / sum_i f(x_i), per point; test oracle.
// Requires unit weights; every grid theta must satisfy the spectrum band.
Eigen::VectorXd brute_force_sensitivity(const DataSet& x, const std::vector<GmmParams>& grid);

std::uint64_t hash_coreset(const Coreset& c);

}  // namespace gmcs

#endif
