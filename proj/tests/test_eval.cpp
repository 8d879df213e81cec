#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <algorithm>
#include <sstream>
#include <vector>

#include "gmcs/eval.hpp"
#include "gmcs/synth.hpp"
#include "helpers.hpp"

using namespace gmcs;

TEST_CASE("split_indices") {
  auto [train, hold] = split_indices(100, 0.8, Rng(3));
  CHECK(train.size() == 80);
  CHECK(hold.size() == 20);
  CHECK(std::is_sorted(train.begin(), train.end()));
  CHECK(std::is_sorted(hold.begin(), hold.end()));
  std::vector<bool> seen(100, false);
  for (Eigen::Index i : train) seen[static_cast<std::size_t>(i)] = true;
  for (Eigen::Index i : hold) {
    CHECK(!seen[static_cast<std::size_t>(i)]);  // halves are disjoint
    seen[static_cast<std::size_t>(i)] = true;
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));

  auto [t2, h2] = split_indices(100, 0.8, Rng(3));
  CHECK(t2 == train);

  auto [t3, h3] = split_indices(3, 0.5, Rng(7));
  CHECK(t3.size() + h3.size() == 3);
}

TEST_CASE("subset keeps points and weights aligned") {
  Rng rng(5);
  RowMatrixXd pts = testutil::random_points(20, 2, rng, 2.0);
  Eigen::VectorXd w(20);
  for (Eigen::Index i = 0; i < 20; ++i) w[i] = 0.5 + rng.uniform();
  DataSet x(pts, w);
  std::vector<Eigen::Index> idx = {1, 4, 17};
  DataSet s = subset(x, idx);
  CHECK(s.n() == 3);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    CHECK((s.point(static_cast<Eigen::Index>(r)) - x.point(idx[r])).norm() == 0.0);
    CHECK(s.weight(static_cast<Eigen::Index>(r)) == w[idx[r]]);
  }
}

TEST_CASE("uniform_subsample arms") {
  Rng rng(7);
  RowMatrixXd pts = testutil::random_points(50, 2, rng, 2.0);
  Eigen::VectorXd w(50);
  for (Eigen::Index i = 0; i < 50; ++i) w[i] = 0.5 + rng.uniform();
  DataSet x(pts, w);

  DataSet fit_arm = uniform_subsample(x, 10, Rng(11), false);
  CHECK(fit_arm.n() == 10);
  CHECK(fit_arm.unit_weights());

  DataSet probe_arm = uniform_subsample(x, 10, Rng(11), true);
  CHECK(probe_arm.n() == 10);
  const double want = x.total_weight() / 10.0;
  for (Eigen::Index i = 0; i < 10; ++i) {
    CHECK(probe_arm.weight(i) == want);
    CHECK((probe_arm.point(i) - fit_arm.point(i)).norm() == 0.0);  // same draw
  }
  // ascending source order: consecutive points keep their source ordering
  DataSet all = uniform_subsample(x, 50, Rng(13), false);
  CHECK(all.n() == 50);
  CHECK(hash_points(all) == hash_points(DataSet::unit(pts)));

  CHECK_THROWS_AS(uniform_subsample(x, 51, Rng(17), false), DataError);
  CHECK_THROWS_AS(uniform_subsample(x, 0, Rng(17), false), DataError);
}

TEST_CASE("probe thetas respect the constraint set") {
  Rng rng(19);
  RowMatrixXd pts = testutil::random_points(200, 2, rng, 4.0);
  DataSet x = DataSet::unit(pts);
  std::vector<GmmParams> probes = probe_thetas(x, 3, 0.05, 40, Rng(23));
  CHECK(probes.size() == 40);
  for (const GmmParams& t : probes) {
    t.validate();  // throws if weights or spectra are off
    CHECK(t.k() == 3);
    CHECK(t.dim() == 2);
    CHECK(t.lambda == 0.05);
    for (const Eigen::MatrixXd& c : t.covs) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
      CHECK(es.eigenvalues().minCoeff() >= 0.05 * (1.0 - 1e-9));
      CHECK(es.eigenvalues().maxCoeff() <= 20.0 * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("the full set is its own perfect proxy") {
  Rng rng(29);
  RowMatrixXd pts = testutil::random_points(150, 2, rng, 3.0);
  DataSet x = DataSet::unit(pts);
  std::vector<GmmParams> probes = probe_thetas(x, 2, 0.1, 20, Rng(31));
  CHECK(probe_max_ratio(x, x, probes) == 0.0);
}

TEST_CASE("evaluation at m = n reproduces the baseline") {
  // well-separated unit clusters; with the proxy equal in size to the train
  // half, both arms essentially refit the same model
  GmmParams mix = spherical_k3_preset(0.1);
  Rng gen(37);
  DataSet x = generate_gmm_sample(600, mix, gen);

  EvalOptions opt;
  opt.k = 3;
  opt.lambda = 0.1;
  opt.trials = 3;
  opt.restarts = 3;
  opt.probe_count = 10;
  opt.em.max_iters = 40;
  const std::uint64_t m = 480;  // the whole train half
  std::vector<EvalRow> rows = evaluate_sizes(x, {m}, opt, 41);
  REQUIRE(rows.size() == 2);
  for (const EvalRow& r : rows) {
    CHECK(r.m == m);
    CHECK(r.median_eta <= 0.02);
    CHECK(r.p90_eta >= r.median_eta);
  }
  CHECK(rows[0].method == "coreset");
  CHECK(rows[1].method == "uniform");
}

TEST_CASE("csv and table round-trip the rows") {
  std::vector<EvalRow> rows(2);
  rows[0] = {100, "coreset", 0.01, 0.02, 0.05, 0.5, 1.5};
  rows[1] = {100, "uniform", 0.03, 0.04, 0.25, 0.0, 1.25};
  const std::string csv = eval_csv(rows);
  std::istringstream is(csv);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "m,method,median_eta,p90_eta,probe_max_ratio,build_s,fit_s");
  int count = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    CHECK(line.substr(0, 4) == "100,");
    ++count;
  }
  CHECK(count == 2);

  const std::string table = eval_table(rows);
  CHECK(table.find("coreset") != std::string::npos);
  CHECK(table.find("uniform") != std::string::npos);
}

TEST_CASE("evaluation rows do not depend on the worker count") {
  GmmParams mix = spherical_k3_preset(0.1);
  Rng gen(43);
  DataSet x = generate_gmm_sample(400, mix, gen);
  EvalOptions opt;
  opt.k = 3;
  opt.lambda = 0.1;
  opt.trials = 2;
  opt.restarts = 2;
  opt.probe_count = 8;
  opt.em.max_iters = 15;

  omp_set_num_threads(1);
  std::vector<EvalRow> a = evaluate_sizes(x, {64, 128}, opt, 47);
  omp_set_num_threads(4);
  std::vector<EvalRow> b = evaluate_sizes(x, {64, 128}, opt, 47);
  omp_set_num_threads(1);
  REQUIRE(a.size() == b.size());
  // timing columns are wall clock; every statistical column must match bitwise
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].m == b[i].m);
    CHECK(a[i].method == b[i].method);
    CHECK(a[i].median_eta == b[i].median_eta);
    CHECK(a[i].p90_eta == b[i].p90_eta);
    CHECK(a[i].probe_max_ratio == b[i].probe_max_ratio);
  }
}
