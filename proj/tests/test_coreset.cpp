#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <cmath>
#include <vector>

#include "gmcs/coreset.hpp"
#include "gmcs/ref.hpp"
#include "helpers.hpp"

using namespace gmcs;

namespace {

RowMatrixXd circle_points(Eigen::Index n, double radius) {
  RowMatrixXd pts(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
    pts(i, 0) = radius * std::cos(t);
    pts(i, 1) = radius * std::sin(t);
  }
  return pts;
}

Bicriteria origin_center(double alpha, const DataSet& x) {
  Bicriteria b;
  b.centers = RowMatrixXd::Zero(1, x.dim());
  b.alpha = alpha;
  b.cost = phi(x, b.centers);
  return b;
}

}  // namespace

TEST_CASE("single-cell scores follow the closed form") {
  Rng rng(3);
  RowMatrixXd pts = testutil::random_points(40, 2, rng, 2.0);
  DataSet x = DataSet::unit(pts);
  Bicriteria b = origin_center(default_alpha(1), x);
  VoronoiPartition part = voronoi_partition(x, b.centers);
  SensitivityScores sc = sensitivity_scores(x, b, part);

  const double n = 40.0;
  for (Eigen::Index i = 0; i < 40; ++i) {
    const double d2 = pts.row(i).squaredNorm();
    const double want = b.alpha * d2 + (2.0 * b.alpha + 2.0) * part.total_cost / n;
    CHECK(sc.s[i] == doctest::Approx(want).epsilon(1e-14));
  }
  CHECK(sc.nonempty_cells == 1);
  CHECK(sc.phi == part.total_cost);
}

TEST_CASE("weighted score mass matches the counting identity") {
  Rng rng(7);
  for (int t = 0; t < 10; ++t) {
    RowMatrixXd pts = testutil::random_points(120, 3, rng, 4.0);
    Eigen::VectorXd w(120);
    for (Eigen::Index i = 0; i < 120; ++i) w[i] = 0.2 + rng.uniform();
    DataSet x(pts, w);
    Bicriteria b = kmeanspp_seed(x, 4, rng.substream(static_cast<std::uint64_t>(t)));
    VoronoiPartition part = voronoi_partition(x, b.centers);
    SensitivityScores sc = sensitivity_scores(x, b, part);
    const double expected =
        (3.0 * b.alpha + 2.0 * static_cast<double>(sc.nonempty_cells)) * part.total_cost;
    CHECK(sc.total == doctest::Approx(expected).epsilon(1e-11));
    CHECK(sc.q.sum() == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::VectorXd want = ref::sensitivity_ref(x, b);
    for (Eigen::Index i = 0; i < 120; ++i)
      CHECK(sc.s[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("identical points fall back to weight-proportional draws") {
  RowMatrixXd pts = RowMatrixXd::Zero(6, 2);
  pts.col(0).setConstant(1.5);
  DataSet x = DataSet::unit(pts);
  Bicriteria b = kmeanspp_seed(x, 2, Rng(1));
  VoronoiPartition part = voronoi_partition(x, b.centers);
  SensitivityScores sc = sensitivity_scores(x, b, part);
  CHECK(sc.total == 0.0);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(sc.q[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

  // draws aggregate by source index, so several identical rows may survive, but
  // the represented mass is the full set
  BuildOptions opt;
  Coreset c = build_coreset(x, 2, 32, opt, Rng(2));
  CHECK(c.n() >= 1);
  CHECK(c.n() <= 6);
  for (Eigen::Index r = 0; r < c.n(); ++r) {
    CHECK(c.points()(r, 0) == 1.5);
    CHECK(c.points()(r, 1) == 0.0);
  }
  CHECK(c.weights().sum() == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("total-sensitivity ceilings") {
  RowMatrixXd pts(2, 2);
  pts << -1, 0, 1, 0;
  DataSet x = DataSet::unit(pts);
  Bicriteria b = origin_center(1.0, x);
  VoronoiPartition part = voronoi_partition(x, b.centers);
  SensitivityScores sc = sensitivity_scores(x, b, part);
  CHECK(sc.total_bound(0.5) == 40.0);      // (6 + 4) / 0.25
  CHECK(sc.total_bound_alt(0.5) == 24.0);  // (4 + 2) / 0.25

  // mirrored points carry identical scores, hence identical per-point ceilings
  Eigen::VectorXd bound = normalized_sensitivity_bound(sc, x, 0.5);
  CHECK(bound[0] == bound[1]);
  const double want = 2.0 * (2.0 / 0.25) * sc.s[0] / sc.phi;
  CHECK(bound[0] == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("alias table") {
  Eigen::VectorXd trivial(1);
  trivial << 1.0;
  AliasTable t1 = build_alias_table(trivial);
  Rng rng(11);
  for (int i = 0; i < 100; ++i) CHECK(t1.draw(rng.uniform(), rng.uniform()) == 0);

  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  AliasTable t2 = build_alias_table(half);
  int hits = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) hits += t2.draw(rng.uniform(), rng.uniform()) == 0 ? 1 : 0;
  CHECK(std::abs(static_cast<double>(hits) / draws - 0.5) <= 0.01);

  Eigen::VectorXd q(3);
  q << 0.2, 0.3, 0.5;
  AliasTable t3 = build_alias_table(q);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < draws; ++i) counts[t3.draw(rng.uniform(), rng.uniform())] += 1;
  double chi2 = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double expect = q[j] * draws;
    chi2 += (counts[j] - expect) * (counts[j] - expect) / expect;
  }
  CHECK(chi2 < 9.21);  // dof 2, p = 0.01

  // exact reconstruction: per-bucket mass recovers q
  Rng qr(13);
  Eigen::VectorXd big(17);
  for (Eigen::Index i = 0; i < 17; ++i) big[i] = 0.05 + qr.uniform();
  big /= big.sum();
  AliasTable tb = build_alias_table(big);
  std::vector<double> mass(17, 0.0);
  for (std::size_t j = 0; j < tb.size(); ++j) {
    mass[j] += tb.prob[j];
    mass[tb.alias[j]] += 1.0 - tb.prob[j];
  }
  for (Eigen::Index i = 0; i < 17; ++i)
    CHECK(mass[static_cast<std::size_t>(i)] / 17.0 == doctest::Approx(big[i]).epsilon(1e-12));

  Eigen::VectorXd bad(2);
  bad << 0.7, 0.6;
  CHECK_THROWS_AS(build_alias_table(bad), DataError);
}

TEST_CASE("draws concentrate around unit weights") {
  DataSet x = DataSet::unit(circle_points(10, 2.0));
  Bicriteria b = origin_center(default_alpha(1), x);
  VoronoiPartition part = voronoi_partition(x, b.centers);
  SensitivityScores sc = sensitivity_scores(x, b, part);
  for (Eigen::Index i = 0; i < 10; ++i) CHECK(sc.q[i] == doctest::Approx(0.1).epsilon(1e-12));

  Rng rng(17);
  Coreset c = draw_coreset(x, sc, 10000, rng);
  CHECK(c.n() == 10);
  for (Eigen::Index r = 0; r < c.n(); ++r) {
    CHECK(c.weights()[r] >= 0.85);
    CHECK(c.weights()[r] <= 1.15);
  }
  CHECK(c.weights().sum() == doctest::Approx(10.0).epsilon(0.05));
  CHECK(c.meta().source_n == 10);
  CHECK(c.meta().m_requested == 10000);
}

TEST_CASE("degenerate draws keep exact weights") {
  RowMatrixXd p(1, 2);
  p << 4, -1;
  {
    DataSet x = DataSet::unit(p);
    Bicriteria b = origin_center(default_alpha(1), x);
    VoronoiPartition part = voronoi_partition(x, b.centers);
    SensitivityScores sc = sensitivity_scores(x, b, part);
    Rng rng(19);
    Coreset c = draw_coreset(x, sc, 7, rng);
    CHECK(c.n() == 1);
    CHECK(c.weights()[0] == 1.0);
  }
  {
    DataSet x(p, Eigen::VectorXd::Constant(1, 2.5));
    Bicriteria b = origin_center(default_alpha(1), x);
    VoronoiPartition part = voronoi_partition(x, b.centers);
    SensitivityScores sc = sensitivity_scores(x, b, part);
    Rng rng(23);
    Coreset c = draw_coreset(x, sc, 64, rng);
    CHECK(c.n() == 1);
    CHECK(c.weights()[0] == 2.5);  // 64 * 2.5 / (64 * 1), all dyadic
  }
}

TEST_CASE("budgets larger than the set are fine") {
  Rng rng(29);
  RowMatrixXd pts = testutil::random_points(5, 2, rng, 2.0);
  DataSet x = DataSet::unit(pts);
  BuildOptions opt;
  Coreset c = build_coreset(x, 2, 100, opt, Rng(31));
  CHECK(c.n() <= 5);
  CHECK(c.weights().minCoeff() > 0.0);
}

TEST_CASE("build replays and ignores the worker count") {
  Rng rng(37);
  RowMatrixXd pts = testutil::random_points(400, 3, rng, 3.0);
  DataSet x = DataSet::unit(pts);
  BuildOptions opt;

  BuildDiagnostics diag;
  Coreset a = build_coreset(x, 3, 80, opt, Rng(41), &diag);
  Coreset b = build_coreset(x, 3, 80, opt, Rng(41));
  CHECK(hash_coreset(a) == hash_coreset(b));
  CHECK(diag.sum_s == doctest::Approx(diag.identity_expected).epsilon(1e-10));
  CHECK(diag.nonempty_cells >= 1);

  omp_set_num_threads(1);
  Coreset c1 = build_coreset(x, 3, 80, opt, Rng(41));
  omp_set_num_threads(4);
  Coreset c4 = build_coreset(x, 3, 80, opt, Rng(41));
  omp_set_num_threads(1);
  CHECK(hash_coreset(c1) == hash_coreset(c4));
  CHECK(hash_coreset(c1) == hash_coreset(a));

  // adaptive seeding path stays deterministic as well
  BuildOptions ad;
  ad.seeding = SeedingMode::adaptive;
  Coreset a1 = build_coreset(x, 3, 80, ad, Rng(43));
  Coreset a2 = build_coreset(x, 3, 80, ad, Rng(43));
  CHECK(hash_coreset(a1) == hash_coreset(a2));
  CHECK(hash_coreset(a1) != hash_coreset(a));
}

TEST_CASE("advisory size bound") {
  CHECK(coreset_size_bound(3, 2, 0.1, 0.1, 0.5) == 18695558ull);
  const double real = coreset_size_bound_real(3, 2, 0.1, 0.1, 0.5);
  const double direct =
      (std::pow(2.0, 4) * std::pow(3.0, 6) + 9.0 * std::log(10.0)) / (std::pow(0.5, 4) * 0.01);
  CHECK(real == doctest::Approx(direct).epsilon(1e-12));

  CHECK(coreset_size_bound_real(3, 2, 0.1, 0.1, 0.5) ==
        4.0 * coreset_size_bound_real(3, 2, 0.2, 0.1, 0.5));
  CHECK(coreset_size_bound_real(3, 2, 0.1, 0.1, 0.25) ==
        16.0 * coreset_size_bound_real(3, 2, 0.1, 0.1, 0.5));
  CHECK_THROWS_AS(coreset_size_bound(3, 2, 0.8, 0.1, 0.5), DataError);  // eps outside (0, 1/2)
}

TEST_CASE("brute-force sensitivity on a symmetric ring") {
  DataSet x = DataSet::unit(circle_points(8, 1.0));
  std::vector<GmmParams> grid;
  for (double s2 : {0.5, 1.0, 2.0}) {
    GmmParams t;
    t.weights = Eigen::VectorXd::Constant(1, 1.0);
    t.means = RowMatrixXd::Zero(1, 2);
    t.covs.push_back(s2 * Eigen::MatrixXd::Identity(2, 2));
    t.lambda = 0.1;
    t.validate();
    grid.push_back(t);
  }
  Eigen::VectorXd hat = brute_force_sensitivity(x, grid);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(hat[i] == doctest::Approx(1.0).epsilon(1e-12));

  // off-center thetas break the tie but the mean never drops below 1
  GmmParams off;
  off.weights = Eigen::VectorXd::Constant(1, 1.0);
  off.means = RowMatrixXd::Zero(1, 2);
  off.means(0, 0) = 0.8;
  off.covs.push_back(0.7 * Eigen::MatrixXd::Identity(2, 2));
  off.lambda = 0.1;
  off.validate();
  grid.push_back(off);
  Eigen::VectorXd hat2 = brute_force_sensitivity(x, grid);
  CHECK(hat2.mean() >= 1.0 - 1e-12);
  CHECK(hat2.maxCoeff() > 1.0);
}
