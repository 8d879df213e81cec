#ifndef GMCS_SEEDING_HPP
#define GMCS_SEEDING_HPP

#include <vector>

#include "gmcs/common.hpp"
#include "gmcs/dataset.hpp"

namespace gmcs {

// (alpha, beta) bicriteria approximation of the k-means optimum: beta = number
// of centers, alpha = assumed cost ratio against the best k centers.
struct Bicriteria {
  RowMatrixXd centers;
  double alpha = 0.0;
  double cost = 0.0;  // phi(X, centers)
  Eigen::Index beta() const { return centers.rows(); }
};

double default_alpha(int k);  // 16 (log2 k + 2)

// Weighted k-means++: first center drawn by weight, later centers by
// w(x) d(x, B)^2. If the residual mass hits zero, remaining draws fall back to
// weight-proportional. Draws consume rng sequentially; distance updates are
// order-free, so results do not depend on worker count.
Bicriteria kmeanspp_seed(const DataSet& x, int k, Rng rng);

// p = ceil(log2(1/delta)) independent runs on rng.substream(0..p-1); keeps the
// lowest cost, lowest run index on ties.
Bicriteria best_seed_of_p(const DataSet& x, int k, double delta, Rng rng);

// Iterative halving: sample c = ceil(10 d k ln(1/delta)) points uniformly from
// the remainder, drop the half closest to the sample, repeat while more than c
// points remain; centers are all samples plus the final remainder.
Bicriteria adaptive_bicriteria(const DataSet& x, int k, double delta, Rng rng);

struct LloydResult {
  std::vector<Eigen::Index> assignment;  // against the returned centers
  RowMatrixXd centers;
  double cost = 0.0;       // phi(X, centers)
  int iterations = 0;
  bool reseeded = false;   // an empty cell was re-seeded at some iteration
};

// Weighted Lloyd iterations from a k-means++ seed. Empty cells are re-seeded at
// the not-yet-taken point with the largest weighted squared distance to its
// assigned center. Weighted phi never increases across iterations.
LloydResult weighted_lloyd(const DataSet& x, int k, Rng rng, int max_iters = 10);

}  // namespace gmcs

#endif
