#ifndef GMCS_DATASET_HPP
#define GMCS_DATASET_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gmcs/common.hpp"

namespace gmcs {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowRef = Eigen::Ref<const Eigen::RowVectorXd>;

// Immutable weighted point set. Weights are nonnegative with at least one
// positive entry; zero-weight points are kept (they carry no cost mass but
// survive round-trips).
class DataSet {
 public:
  DataSet(RowMatrixXd points, Eigen::VectorXd weights);
  static DataSet unit(RowMatrixXd points);  // all weights = 1

  Eigen::Index n() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  const RowMatrixXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  ConstRowRef point(Eigen::Index i) const { return points_.row(i); }
  double weight(Eigen::Index i) const { return weights_[i]; }
  double total_weight() const { return total_weight_; }
  bool unit_weights() const { return unit_weights_; }

 private:
  RowMatrixXd points_;
  Eigen::VectorXd weights_;
  double total_weight_ = 0.0;
  bool unit_weights_ = false;
};

struct VoronoiPartition {
  std::vector<Eigen::Index> assignment;  // owning center per point, lowest index on ties
  std::vector<std::int64_t> cell_sizes;  // point count per cell (zero-weight points included)
  Eigen::VectorXd cell_weights;          // sum of point weights per cell
  Eigen::VectorXd cell_costs;            // sum of w * d^2 per cell
  double total_cost = 0.0;               // equals phi(X, centers)
  Eigen::Index nonempty() const;         // cells with positive weight
};

// (index of nearest center, squared distance); ties resolved to the lowest index.
std::pair<Eigen::Index, double> nearest_center(ConstRowRef x, const RowMatrixXd& centers);

// Weighted quantization cost sum_i w_i * d(x_i, centers)^2.
double phi(const DataSet& x, const RowMatrixXd& centers);

VoronoiPartition voronoi_partition(const DataSet& x, const RowMatrixXd& centers);

enum class FileFormat { csv, f64le };

// csv: one row per point, decimal floats, optional leading weight column
// (weighted = true). f64le: magic "GMCS", u32 version, u64 n, u32 d,
// u8 has_weights, then row-major little-endian doubles, each row
// [weight?, x_1..x_d]; the header flag wins over `weighted`.
DataSet load_points(const std::string& path, FileFormat fmt, bool weighted);
void save_points(const std::string& path, const DataSet& x, FileFormat fmt, bool weighted);

// Row-at-a-time reader for bounded-memory consumers; same formats and checks as
// load_points. fn receives each (point, weight) in file order.
void stream_points(const std::string& path, FileFormat fmt, bool weighted,
                   const std::function<void(ConstRowRef, double)>& fn);

std::uint64_t hash_points(const DataSet& x);  // bit-pattern hash of dims + payload

}  // namespace gmcs

#endif
