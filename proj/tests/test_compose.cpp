#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "gmcs/compose.hpp"
#include "gmcs/gmm.hpp"
#include "helpers.hpp"

using namespace gmcs;

namespace {

Coreset make_coreset(Eigen::Index n, Eigen::Index d, Rng& rng, CoresetMeta meta) {
  RowMatrixXd pts = testutil::random_points(n, d, rng, 2.0);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = 0.5 + rng.uniform();
  if (meta.source_n == 0) meta.source_n = static_cast<std::uint64_t>(n);
  return Coreset(std::move(pts), std::move(w), meta);
}

}  // namespace

TEST_CASE("merge composes points, weights, and metadata") {
  Rng rng(3);
  Coreset a = make_coreset(10, 2, rng, {100, 10, 0.2, 1});
  Coreset b = make_coreset(6, 2, rng, {40, 6, 0.05, 3});
  Coreset m = merge_coresets(a, b);
  CHECK(m.n() == 16);
  CHECK(m.meta().source_n == 140);
  CHECK(m.meta().m_requested == 16);
  CHECK(m.meta().epsilon_budget == 0.2);
  CHECK(m.meta().level == 3);
  CHECK(std::memcmp(m.points().data(), a.points().data(), sizeof(double) * 20) == 0);
  CHECK(std::memcmp(m.points().data() + 20, b.points().data(), sizeof(double) * 12) == 0);
  CHECK(std::memcmp(m.weights().data(), a.weights().data(), sizeof(double) * 10) == 0);
  CHECK(std::memcmp(m.weights().data() + 10, b.weights().data(), sizeof(double) * 6) == 0);

  Coreset empty;
  CHECK(hash_coreset(merge_coresets(empty, a)) == hash_coreset(a));
  CHECK(hash_coreset(merge_coresets(a, empty)) == hash_coreset(a));

  Coreset c3 = make_coreset(4, 3, rng, {});
  CHECK_THROWS_AS(merge_coresets(a, c3), DataError);
}

TEST_CASE("merged cost is the rounded sum of the part costs") {
  // 64-point parts occupy exactly one accumulation leaf each, so the merged
  // cost is fl(cost_a + cost_b): equality is bitwise, not approximate
  Rng rng(7);
  Coreset a = make_coreset(64, 3, rng, {});
  Coreset b = make_coreset(64, 3, rng, {});
  Coreset m = merge_coresets(a, b);
  for (int t = 0; t < 20; ++t) {
    GmmParams theta = testutil::random_theta(2, 3, 0.1, rng);
    const double ca = cost_of_set(a.as_dataset(), theta);
    const double cb = cost_of_set(b.as_dataset(), theta);
    CHECK(cost_of_set(m.as_dataset(), theta) == ca + cb);
  }
}

TEST_CASE("compress composes the budget multiplicatively") {
  Rng rng(11);
  Coreset c = make_coreset(50, 2, rng, {50, 50, 0.1, 2});
  BuildOptions opt;
  Coreset out = compress_coreset(c, 2, 20, 0.1, opt, Rng(13));
  CHECK(out.n() <= 20);
  CHECK(out.meta().epsilon_budget == (1.0 + 0.1) * (1.0 + 0.1) - 1.0);
  CHECK(out.meta().epsilon_budget == doctest::Approx(0.21).epsilon(1e-12));
  CHECK(out.meta().source_n == 50);
  CHECK(out.meta().m_requested == 20);
  CHECK(out.meta().level == 2);
  CHECK(out.weights().minCoeff() > 0.0);
}

TEST_CASE("compress passes tiny inputs through unchanged") {
  RowMatrixXd p(1, 2);
  p << 3.5, -1.25;
  Eigen::VectorXd w(1);
  w << 7.5;
  Coreset c(p, w, {200, 1, 0.0, 4});
  BuildOptions opt;

  Coreset same = compress_coreset(c, 3, 7, 0.0, opt, Rng(1));
  CHECK(same.n() == 1);
  CHECK(same.points()(0, 0) == 3.5);
  CHECK(same.points()(0, 1) == -1.25);
  CHECK(same.weights()[0] == 7.5);
  CHECK(same.meta().epsilon_budget == 0.0);  // (1+0)(1+0)-1
  CHECK(same.meta().m_requested == 7);
  CHECK(same.meta().source_n == 200);
  CHECK(same.meta().level == 4);

  Coreset stepped = compress_coreset(c, 3, 7, 0.25, opt, Rng(1));
  CHECK(stepped.meta().epsilon_budget == 0.25);
  CHECK(stepped.weights()[0] == 7.5);

  CHECK_THROWS_AS(compress_coreset(Coreset{}, 2, 5, 0.1, opt, Rng(1)), DataError);
  CHECK_THROWS_AS(compress_coreset(c, 2, 5, -0.1, opt, Rng(1)), DataError);
  CHECK_THROWS_AS(compress_coreset(c, 2, 5, std::nan(""), opt, Rng(1)), DataError);
  CHECK_THROWS_AS(compress_coreset(c, 2, 0, 0.1, opt, Rng(1)), DataError);
  CHECK_THROWS_AS(compress_coreset(c, 0, 5, 0.1, opt, Rng(1)), DataError);
}

TEST_CASE("per-operation budget schedule") {
  CHECK(epsilon_schedule(0.6, 1u << 10) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(epsilon_schedule(0.0, 16), DataError);
  CHECK_THROWS_AS(epsilon_schedule(1.0, 16), DataError);
  CHECK_THROWS_AS(epsilon_schedule(0.5, 1), DataError);
  CHECK_THROWS_AS(epsilon_schedule(0.5, 0), DataError);

  // compounding (1 + eps')^depth stays within the top-level eps/3 share
  for (std::uint64_t lg : {4u, 10u, 20u, 30u}) {
    const auto n = std::uint64_t{1} << lg;
    for (double eps : {0.1, 0.5, 0.9}) {
      const double step = epsilon_schedule(eps, n);
      const double compounded = std::pow(1.0 + step, static_cast<double>(lg));
      CHECK(compounded <= 1.0 + eps / 3.0 + 1e-12);
    }
  }
}

TEST_CASE("stream tree carries like a binary counter") {
  StreamParams sp;
  sp.k = 3;
  sp.m_leaf = 512;
  sp.eps_target = 0.2;
  sp.seed = 99;
  CoresetTree tree(sp);
  CHECK(tree.block_size() == 1024);
  CHECK(tree.n_estimate_current() == 4096);
  CHECK(tree.current_eps_prime() == doctest::Approx(epsilon_schedule(0.2, 4096)).epsilon(1e-15));

  Rng rng(17);
  RowMatrixXd pts = testutil::random_points(4096, 2, rng, 5.0);

  auto occupancy = [&tree]() {
    std::vector<int> occ;
    for (std::size_t l = 0; l < tree.levels().size(); ++l)
      if (!tree.levels()[l].empty()) occ.push_back(static_cast<int>(l));
    return occ;
  };

  for (Eigen::Index i = 0; i < 1024; ++i) tree.insert(pts.row(i));
  CHECK(tree.buffer_fill() == 0);
  CHECK(tree.n_seen() == 1024);
  CHECK(occupancy() == std::vector<int>{0});
  CHECK(tree.levels()[0].meta().source_n == 1024);
  CHECK(tree.levels()[0].n() <= 512);

  for (Eigen::Index i = 1024; i < 3072; ++i) tree.insert(pts.row(i));
  CHECK(occupancy() == std::vector<int>{0, 1});
  CHECK(tree.levels()[1].meta().level == 1);
  CHECK(tree.levels()[1].meta().source_n == 2048);

  for (Eigen::Index i = 3072; i < 4096; ++i) tree.insert(pts.row(i));
  CHECK(occupancy() == std::vector<int>{2});
  CHECK(tree.levels()[2].meta().source_n == 4096);
  CHECK(tree.high_water() <= 1024 + 512 * 3);  // b + m_leaf (ceil(log2(n/b)) + 1)

  // finalize is const and replays: same inputs, same bits
  Coreset f1 = tree.finalize(400);
  Coreset f2 = tree.finalize(400);
  CHECK(hash_coreset(f1) == hash_coreset(f2));
  CHECK(f1.n() <= 400);
  CHECK(f1.meta().source_n == 4096);
  CHECK(f1.meta().level == 3);

  // n_estimate doubles once the stream outgrows it
  tree.insert(pts.row(0));
  CHECK(tree.n_estimate_current() == 8192);
  CHECK(tree.current_eps_prime() < epsilon_schedule(0.2, 4096));
}

TEST_CASE("short stream finalizes from the verbatim buffer") {
  StreamParams sp;
  sp.k = 2;
  sp.m_leaf = 512;
  sp.eps_target = 0.3;
  sp.seed = 5;
  CoresetTree tree(sp);
  CHECK_THROWS_AS(tree.finalize(10), DataError);  // empty stream

  Rng rng(23);
  RowMatrixXd pts = testutil::random_points(100, 3, rng, 2.0);
  tree.insert_block(DataSet::unit(pts));
  CHECK(tree.buffer_fill() == 100);
  Coreset out = tree.finalize(40);
  CHECK(out.n() <= 40);
  CHECK(out.meta().source_n == 100);
  CHECK(out.meta().level == 1);
  CHECK(out.meta().epsilon_budget == doctest::Approx(0.1).epsilon(1e-12));  // one eps/3 step
}

TEST_CASE("insert and insert_block agree") {
  StreamParams sp;
  sp.k = 2;
  sp.m_leaf = 512;
  sp.seed = 7;
  CoresetTree a(sp), b(sp);
  Rng rng(29);
  RowMatrixXd pts = testutil::random_points(1500, 2, rng, 3.0);
  Eigen::VectorXd w(1500);
  for (Eigen::Index i = 0; i < 1500; ++i) w[i] = 0.5 + rng.uniform();
  DataSet x(pts, w);

  a.insert_block(x);
  for (Eigen::Index i = 0; i < 1500; ++i) b.insert(x.point(i), w[i]);
  CHECK(a.n_seen() == b.n_seen());
  CHECK(a.buffer_fill() == b.buffer_fill());
  CHECK(hash_coreset(a.finalize(200)) == hash_coreset(b.finalize(200)));
}

TEST_CASE("stream input validation") {
  StreamParams sp;
  sp.m_leaf = 512;
  CoresetTree tree(sp);
  RowMatrixXd p(2, 2);
  p << 1, 2, 3, 4;
  CHECK_THROWS_AS(tree.insert(p.row(0), 0.0), DataError);
  CHECK_THROWS_AS(tree.insert(p.row(0), -1.0), DataError);
  tree.insert(p.row(0));
  RowMatrixXd q(1, 3);
  q << 1, 2, 3;
  CHECK_THROWS_AS(tree.insert(q.row(0)), DataError);
  RowMatrixXd bad(1, 2);
  bad << std::nan(""), 0.0;
  CHECK_THROWS_AS(tree.insert(bad.row(0)), DataError);

  StreamParams badp = sp;
  badp.k = 0;
  CHECK_THROWS_AS(CoresetTree{badp}, DataError);
  badp = sp;
  badp.m_leaf = 0;
  CHECK_THROWS_AS(CoresetTree{badp}, DataError);
  badp = sp;
  badp.eps_target = 1.0;
  CHECK_THROWS_AS(CoresetTree{badp}, DataError);
  badp = sp;
  badp.k = 2000;  // exceeds the 1024-point block
  CHECK_THROWS_AS(CoresetTree{badp}, DataError);
}

TEST_CASE("checkpoint restores the exact stream state") {
  StreamParams sp;
  sp.k = 3;
  sp.m_leaf = 512;
  sp.eps_target = 0.2;
  sp.seed = 31;
  CoresetTree tree(sp);

  Rng rng(37);
  RowMatrixXd pts = testutil::random_points(4096, 2, rng, 4.0);
  for (Eigen::Index i = 0; i < 2560; ++i) tree.insert(pts.row(i));

  testutil::TempDir tmp;
  const std::string ckpt = tmp.file("tree.gmct");
  tree.save(ckpt);
  CoresetTree back = CoresetTree::load(ckpt);
  CHECK(back.n_seen() == tree.n_seen());
  CHECK(back.buffer_fill() == tree.buffer_fill());
  CHECK(back.n_estimate_current() == tree.n_estimate_current());
  CHECK(back.high_water() == tree.high_water());
  CHECK(back.dim() == 2);
  CHECK(back.levels().size() == tree.levels().size());

  for (Eigen::Index i = 2560; i < 4096; ++i) {
    tree.insert(pts.row(i));
    back.insert(pts.row(i));
  }
  CHECK(hash_coreset(tree.finalize(300)) == hash_coreset(back.finalize(300)));

  const std::string junk = tmp.file("junk.gmct");
  {
    std::ofstream out(junk, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(CoresetTree::load(junk), DataError);
}

TEST_CASE("single-partition parallel build is the batch builder") {
  Rng rng(41);
  RowMatrixXd pts = testutil::random_points(500, 2, rng, 3.0);
  DataSet x = DataSet::unit(pts);
  BuildOptions opt;
  Coreset p1 = parallel_build(x, 1, 3, 64, opt, 77, ParallelMode::tree);
  Coreset direct = build_coreset(x, 3, 64, opt, Rng(77).substream(1).substream(0));
  CHECK(hash_coreset(p1) == hash_coreset(direct));
  CHECK(hash_coreset(parallel_build(x, 1, 3, 64, opt, 77, ParallelMode::union_then_compress)) ==
        hash_coreset(direct));
}

TEST_CASE("parallel build is deterministic in the worker count") {
  Rng rng(43);
  RowMatrixXd pts = testutil::random_points(2000, 2, rng, 5.0);
  DataSet x = DataSet::unit(pts);
  BuildOptions opt;

  for (ParallelMode mode : {ParallelMode::tree, ParallelMode::union_then_compress}) {
    omp_set_num_threads(1);
    Coreset c1 = parallel_build(x, 4, 3, 96, opt, 53, mode);
    omp_set_num_threads(4);
    Coreset c4 = parallel_build(x, 4, 3, 96, opt, 53, mode);
    omp_set_num_threads(1);
    CHECK(hash_coreset(c1) == hash_coreset(c4));
    CHECK(c1.meta().source_n == 2000);
  }

  Coreset t = parallel_build(x, 4, 3, 96, opt, 53, ParallelMode::tree);
  CHECK(t.meta().level == 2);  // 4 -> 2 -> 1 pairwise rounds
  Coreset u = parallel_build(x, 4, 3, 96, opt, 53, ParallelMode::union_then_compress);
  CHECK(u.meta().level == 1);
  CHECK(u.n() <= 96);

  CHECK_THROWS_AS(parallel_build(x, 0, 3, 96, opt, 53, ParallelMode::tree), DataError);
  CHECK_THROWS_AS(parallel_build(x, 2001, 3, 96, opt, 53, ParallelMode::tree), DataError);
}
