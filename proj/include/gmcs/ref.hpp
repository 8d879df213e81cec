#ifndef GMCS_REF_HPP
#define GMCS_REF_HPP

#include <functional>

#include "gmcs/coreset.hpp"
#include "gmcs/dataset.hpp"
#include "gmcs/gmm.hpp"
#include "gmcs/seeding.hpp"

// Serial direct-formula implementations of the parallel kernels: left-to-right
// sums, explicit inverses and determinants, densities outside the log domain.
// Oracles for tests and baselines for the kernel benchmark. Valid at modest
// scales only; densities underflow for points far from every component.
namespace gmcs::ref {

double sum_ref(Eigen::Index n, const std::function<double(Eigen::Index)>& term);

double phi_ref(const DataSet& x, const RowMatrixXd& centers);

VoronoiPartition voronoi_ref(const DataSet& x, const RowMatrixXd& centers);

double gaussian_pdf_ref(ConstRowRef x, ConstRowRef mean, const Eigen::MatrixXd& cov);

double mixture_pdf_ref(ConstRowRef x, const GmmParams& theta);

double normalizer_ref(const GmmParams& theta);  // Z: weighted sum of peak densities

double point_cost_ref(ConstRowRef x, const GmmParams& theta);  // ln Z - ln p(x)

double cost_ref(const DataSet& x, const GmmParams& theta);

double nll_ref(const DataSet& x, const GmmParams& theta);

Eigen::MatrixXd e_step_ref(const DataSet& x, const GmmParams& theta);

// recomputes the partition statistics per point, straight from the score formula
Eigen::VectorXd sensitivity_ref(const DataSet& x, const Bicriteria& b);

}  // namespace gmcs::ref

#endif
