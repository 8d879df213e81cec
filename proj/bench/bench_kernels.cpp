// Timing comparison of the blocked OpenMP kernels against the serial reference
// implementations, with agreement checks on the results. Usage:
//   gmcs_bench [n] [d] [k] [seed]
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gmcs/coreset.hpp"
#include "gmcs/dataset.hpp"
#include "gmcs/gmm.hpp"
#include "gmcs/ref.hpp"
#include "gmcs/seeding.hpp"
#include "gmcs/synth.hpp"

namespace {

template <class F>
double best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, s);
  }
  return best;
}

double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

void row(const char* name, double ref_s, double omp_s, double err) {
  std::printf("%-22s %10.4f s %10.4f s %8.2fx   rel err %.3e\n", name, ref_s, omp_s,
              omp_s > 0.0 ? ref_s / omp_s : 0.0, err);
}

}  // namespace

int main(int argc, char** argv) {
  const Eigen::Index n = argc > 1 ? std::atoll(argv[1]) : 100000;
  const Eigen::Index d = argc > 2 ? std::atoll(argv[2]) : 8;
  const int k = argc > 3 ? std::atoi(argv[3]) : 8;
  const std::uint64_t seed = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 1;
  const int reps = 3;

#ifdef _OPENMP
  std::printf("n=%lld d=%lld k=%d threads=%d\n", static_cast<long long>(n),
              static_cast<long long>(d), k, omp_get_max_threads());
#else
  std::printf("n=%lld d=%lld k=%d (no OpenMP)\n", static_cast<long long>(n),
              static_cast<long long>(d), k);
#endif

  // k separated unit-covariance components
  gmcs::Rng rng(seed);
  gmcs::GmmParams theta;
  theta.lambda = 1e-3;
  theta.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  theta.means.resize(k, d);
  gmcs::Rng mr = rng.substream(0);
  for (int j = 0; j < k; ++j)
    for (Eigen::Index c = 0; c < d; ++c) theta.means(j, c) = 6.0 * mr.normal();
  for (int j = 0; j < k; ++j) theta.covs.push_back(Eigen::MatrixXd::Identity(d, d));

  gmcs::Rng dr = rng.substream(1);
  const gmcs::DataSet x = gmcs::generate_gmm_sample(n, theta, dr);
  const gmcs::Bicriteria b = gmcs::kmeanspp_seed(x, k, rng.substream(2));

  std::printf("%-22s %12s %12s %10s\n", "kernel", "serial ref", "blocked omp", "speedup");

  {
    double a = 0.0, c = 0.0;
    const double t_ref = best_of(reps, [&] { a = gmcs::ref::phi_ref(x, b.centers); });
    const double t_omp = best_of(reps, [&] { c = gmcs::phi(x, b.centers); });
    row("phi", t_ref, t_omp, rel_diff(a, c));
  }
  {
    gmcs::VoronoiPartition pr, pp;
    const double t_ref = best_of(reps, [&] { pr = gmcs::ref::voronoi_ref(x, b.centers); });
    const double t_omp = best_of(reps, [&] { pp = gmcs::voronoi_partition(x, b.centers); });
    row("voronoi_partition", t_ref, t_omp, rel_diff(pr.total_cost, pp.total_cost));
  }
  {
    const gmcs::VoronoiPartition part = gmcs::voronoi_partition(x, b.centers);
    Eigen::VectorXd sr;
    gmcs::SensitivityScores sc;
    const double t_ref = best_of(reps, [&] { sr = gmcs::ref::sensitivity_ref(x, b); });
    const double t_omp = best_of(reps, [&] { sc = gmcs::sensitivity_scores(x, b, part); });
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) err = std::max(err, rel_diff(sr[i], sc.s[i]));
    row("sensitivity_scores", t_ref, t_omp, err);
  }
  {
    double a = 0.0, c = 0.0;
    const double t_ref = best_of(reps, [&] { a = gmcs::ref::cost_ref(x, theta); });
    const double t_omp = best_of(reps, [&] { c = gmcs::cost_of_set(x, theta); });
    row("cost_of_set", t_ref, t_omp, rel_diff(a, c));
  }
  {
    Eigen::MatrixXd er;
    gmcs::RowMatrixXd ep;
    const double t_ref = best_of(reps, [&] { er = gmcs::ref::e_step_ref(x, theta); });
    const double t_omp = best_of(reps, [&] { ep = gmcs::e_step(x, theta); });
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) err = std::max(err, rel_diff(er(i, j), ep(i, j)));
    row("e_step", t_ref, t_omp, err);
  }
  {
    const Eigen::Index big = 10'000'000;
    auto term = [](Eigen::Index i) { return std::sqrt(static_cast<double>(i)); };
    double a = 0.0, c = 0.0;
    const double t_ref = best_of(reps, [&] { a = gmcs::ref::sum_ref(big, term); });
    const double t_omp = best_of(reps, [&] { c = gmcs::block_sum(big, term); });
    row("block_sum (1e7)", t_ref, t_omp, rel_diff(a, c));
  }
  return 0;
}
