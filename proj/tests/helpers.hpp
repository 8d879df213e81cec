#ifndef GMCS_TESTS_HELPERS_HPP
#define GMCS_TESTS_HELPERS_HPP

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "gmcs/common.hpp"
#include "gmcs/dataset.hpp"
#include "gmcs/gmm.hpp"

namespace testutil {

// unique scratch directory, removed on destruction
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "gmcs_test_XXXXXX").string();
    char* got = mkdtemp(tmpl.data());
    if (!got) throw std::runtime_error("mkdtemp failed");
    path = got;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline gmcs::RowMatrixXd random_points(Eigen::Index n, Eigen::Index d, gmcs::Rng& rng,
                                       double scale = 1.0) {
  gmcs::RowMatrixXd p(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) p(i, j) = scale * rng.normal();
  return p;
}

// symmetric, spectrum clamped into [lambda, 1/lambda]
inline Eigen::MatrixXd random_cov(Eigen::Index d, double lambda, gmcs::Rng& rng,
                                  double scale = 1.0) {
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rng.normal();
  Eigen::MatrixXd s = scale / static_cast<double>(d) * (m * m.transpose());
  return gmcs::clamp_covariance(0.5 * (s + s.transpose()), lambda);
}

inline gmcs::GmmParams random_theta(int k, Eigen::Index d, double lambda, gmcs::Rng& rng,
                                    double mean_scale = 3.0) {
  gmcs::GmmParams t;
  t.lambda = lambda;
  t.weights.resize(k);
  t.means.resize(k, d);
  double sum = 0.0;
  for (int j = 0; j < k; ++j) {
    t.weights[j] = 0.1 + rng.uniform();
    sum += t.weights[j];
  }
  t.weights /= sum;
  for (int j = 0; j < k; ++j) {
    for (Eigen::Index c = 0; c < d; ++c) t.means(j, c) = mean_scale * rng.normal();
    t.covs.push_back(random_cov(d, lambda, rng));
  }
  return t;
}

}  // namespace testutil

#endif
