#include "gmcs/ref.hpp"

#include <cmath>

namespace gmcs::ref {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double sum_ref(Eigen::Index n, const std::function<double(Eigen::Index)>& term) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += term(i);
  return acc;
}

double phi_ref(const DataSet& x, const RowMatrixXd& centers) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.n(); ++i)
    acc += x.weight(i) * nearest_center(x.point(i), centers).second;
  return acc;
}

VoronoiPartition voronoi_ref(const DataSet& x, const RowMatrixXd& centers) {
  const Eigen::Index k = centers.rows();
  VoronoiPartition part;
  part.assignment.resize(static_cast<std::size_t>(x.n()));
  part.cell_sizes.assign(static_cast<std::size_t>(k), 0);
  part.cell_weights = Eigen::VectorXd::Zero(k);
  part.cell_costs = Eigen::VectorXd::Zero(k);
  part.total_cost = 0.0;
  for (Eigen::Index i = 0; i < x.n(); ++i) {
    auto [j, d2] = nearest_center(x.point(i), centers);
    part.assignment[static_cast<std::size_t>(i)] = j;
    part.cell_sizes[static_cast<std::size_t>(j)] += 1;
    part.cell_weights[j] += x.weight(i);
    part.cell_costs[j] += x.weight(i) * d2;
    part.total_cost += x.weight(i) * d2;
  }
  return part;
}

double gaussian_pdf_ref(ConstRowRef x, ConstRowRef mean, const Eigen::MatrixXd& cov) {
  const auto d = static_cast<double>(x.size());
  const Eigen::VectorXd diff = (x - mean).transpose();
  const double q = diff.dot(cov.inverse() * diff);
  return std::exp(-0.5 * q) / std::sqrt(std::pow(kTwoPi, d) * cov.determinant());
}

double mixture_pdf_ref(ConstRowRef x, const GmmParams& theta) {
  double p = 0.0;
  for (Eigen::Index j = 0; j < theta.k(); ++j)
    p += theta.weights[j] *
         gaussian_pdf_ref(x, theta.means.row(j), theta.covs[static_cast<std::size_t>(j)]);
  return p;
}

double normalizer_ref(const GmmParams& theta) {
  const auto d = static_cast<double>(theta.dim());
  double z = 0.0;
  for (Eigen::Index j = 0; j < theta.k(); ++j)
    z += theta.weights[j] /
         std::sqrt(std::pow(kTwoPi, d) * theta.covs[static_cast<std::size_t>(j)].determinant());
  return z;
}

double point_cost_ref(ConstRowRef x, const GmmParams& theta) {
  return std::log(normalizer_ref(theta)) - std::log(mixture_pdf_ref(x, theta));
}

double cost_ref(const DataSet& x, const GmmParams& theta) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.n(); ++i) acc += x.weight(i) * point_cost_ref(x.point(i), theta);
  return acc;
}

double nll_ref(const DataSet& x, const GmmParams& theta) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.n(); ++i)
    acc -= x.weight(i) * std::log(mixture_pdf_ref(x.point(i), theta));
  return acc;
}

Eigen::MatrixXd e_step_ref(const DataSet& x, const GmmParams& theta) {
  Eigen::MatrixXd eta(x.n(), theta.k());
  for (Eigen::Index i = 0; i < x.n(); ++i) {
    const double p = mixture_pdf_ref(x.point(i), theta);
    for (Eigen::Index j = 0; j < theta.k(); ++j)
      eta(i, j) = x.weight(i) * theta.weights[j] *
                  gaussian_pdf_ref(x.point(i), theta.means.row(j),
                                   theta.covs[static_cast<std::size_t>(j)]) /
                  p;
  }
  return eta;
}

Eigen::VectorXd sensitivity_ref(const DataSet& x, const Bicriteria& b) {
  const Eigen::Index n = x.n();
  const Eigen::Index cells = b.centers.rows();
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n));
  Eigen::VectorXd d2(n);
  Eigen::VectorXd cell_w = Eigen::VectorXd::Zero(cells);
  Eigen::VectorXd cell_cost = Eigen::VectorXd::Zero(cells);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [j, dd] = nearest_center(x.point(i), b.centers);
    assign[static_cast<std::size_t>(i)] = j;
    d2[i] = dd;
    cell_w[j] += x.weight(i);
    cell_cost[j] += x.weight(i) * dd;
    total += x.weight(i) * dd;
  }
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = assign[static_cast<std::size_t>(i)];
    if (cell_w[j] > 0.0)
      s[i] = b.alpha * d2[i] + 2.0 * b.alpha * cell_cost[j] / cell_w[j] + 2.0 * total / cell_w[j];
    else
      s[i] = b.alpha * d2[i];
  }
  return s;
}

}  // namespace gmcs::ref
