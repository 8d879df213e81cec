#include "gmcs/synth.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace gmcs {

DataSet generate_gmm_sample(Eigen::Index n, const GmmParams& theta, Rng& rng) {
  if (n < 1) throw DataError("sample size must be >= 1");
  theta.validate();
  const Eigen::Index k = theta.k();
  const Eigen::Index d = theta.dim();

  std::vector<RowMatrixXd> root(static_cast<std::size_t>(k));  // U sqrt(D), row-major for speed
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta.covs[static_cast<std::size_t>(j)]);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    root[static_cast<std::size_t>(j)] =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  RowMatrixXd pts(n, d);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    Eigen::Index comp = k - 1;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      acc += theta.weights[j];
      if (u < acc) {
        comp = j;
        break;
      }
    }
    for (Eigen::Index c = 0; c < d; ++c) z[c] = rng.normal();
    pts.row(i) = theta.means.row(comp) +
                 (root[static_cast<std::size_t>(comp)] * z).transpose();
  }
  return DataSet::unit(std::move(pts));
}

GmmParams imbalanced_preset(Eigen::Index n, double lambda) {
  if (n < 4) throw DataError("preset needs n >= 4");
  GmmParams theta;
  theta.lambda = lambda;
  const double w1 = 1.0 / std::sqrt(static_cast<double>(n));
  theta.weights = Eigen::VectorXd(2);
  theta.weights << w1, 1.0 - w1;
  theta.means = RowMatrixXd(2, 2);
  theta.means << 0.0, 0.0, 20.0, 0.0;
  theta.covs = {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
  return theta;
}

GmmParams spherical_k3_preset(double lambda) {
  GmmParams theta;
  theta.lambda = lambda;
  theta.weights = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  theta.means = RowMatrixXd(3, 2);
  theta.means << 0.0, 0.0, 8.0, 0.0, 0.0, 8.0;
  theta.covs = {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2),
                Eigen::MatrixXd::Identity(2, 2)};
  return theta;
}

GmmParams mixture_from_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  GmmParams theta;
  try {
    theta.lambda = j.value("lambda", 1e-3);
    const auto& comps = j.at("components");
    const auto k = static_cast<Eigen::Index>(comps.size());
    if (k < 1) throw DataError(path + ": no components");
    const auto d = static_cast<Eigen::Index>(comps[0].at("mean").size());
    theta.weights.resize(k);
    theta.means.resize(k, d);
    theta.covs.assign(static_cast<std::size_t>(k), Eigen::MatrixXd(d, d));
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto& comp = comps[static_cast<std::size_t>(c)];
      theta.weights[c] = comp.at("weight").get<double>();
      const auto& mean = comp.at("mean");
      if (static_cast<Eigen::Index>(mean.size()) != d)
        throw DataError(path + ": mean dimension mismatch");
      for (Eigen::Index i = 0; i < d; ++i) theta.means(c, i) = mean[static_cast<std::size_t>(i)].get<double>();
      const auto& cov = comp.at("cov");
      if (static_cast<Eigen::Index>(cov.size()) != d)
        throw DataError(path + ": cov row count mismatch");
      for (Eigen::Index r = 0; r < d; ++r) {
        const auto& row = cov[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != d)
          throw DataError(path + ": cov column count mismatch");
        for (Eigen::Index cc = 0; cc < d; ++cc)
          theta.covs[static_cast<std::size_t>(c)](r, cc) = row[static_cast<std::size_t>(cc)].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  theta.validate();
  return theta;
}

}  // namespace gmcs
