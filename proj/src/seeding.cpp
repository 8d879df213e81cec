#include "gmcs/seeding.hpp"

#include <cmath>
#include <numeric>

namespace gmcs {

namespace {

// weight-proportional draw via a serial prefix walk; never lands on zero weight
Eigen::Index draw_by_mass(const Eigen::VectorXd& mass, double total, Rng& rng) {
  const double target = rng.uniform() * total;
  double running = 0.0;
  Eigen::Index last_pos = -1;
  for (Eigen::Index i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    running += mass[i];
    last_pos = i;
    if (running > target) return i;
  }
  return last_pos;  // prefix rounding overran; take the last positive entry
}

void update_min_d2(const DataSet& x, ConstRowRef center, Eigen::VectorXd& min_d2) {
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < x.n(); ++i) {
    const double d2 = (x.point(i) - center).squaredNorm();
    if (d2 < min_d2[i]) min_d2[i] = d2;
  }
}

}  // namespace

double default_alpha(int k) {
  if (k < 1) throw DataError("k must be >= 1");
  return 16.0 * (std::log2(static_cast<double>(k)) + 2.0);
}

Bicriteria kmeanspp_seed(const DataSet& x, int k, Rng rng) {
  if (k < 1 || static_cast<Eigen::Index>(k) > x.n())
    throw DataError("k out of range for point count");
  const Eigen::Index n = x.n();
  Bicriteria b;
  b.centers.resize(k, x.dim());
  b.alpha = default_alpha(k);

  Eigen::Index first = draw_by_mass(x.weights(), x.total_weight(), rng);
  b.centers.row(0) = x.point(first);
  Eigen::VectorXd min_d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  update_min_d2(x, b.centers.row(0), min_d2);

  Eigen::VectorXd mass(n);
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      mass[i] = x.weight(i) * min_d2[i];
      total += mass[i];
    }
    Eigen::Index pick;
    if (total > 0.0) {
      pick = draw_by_mass(mass, total, rng);
    } else {
      // every point sits on a chosen center; fall back to weight-proportional
      pick = draw_by_mass(x.weights(), x.total_weight(), rng);
    }
    b.centers.row(j) = x.point(pick);
    update_min_d2(x, b.centers.row(j), min_d2);
  }
  b.cost = phi(x, b.centers);
  return b;
}

Bicriteria best_seed_of_p(const DataSet& x, int k, double delta, Rng rng) {
  if (!(delta > 0.0 && delta < 1.0)) throw DataError("delta must lie in (0, 1)");
  const int p = std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / delta))));
  Bicriteria best;
  bool have = false;
  for (int r = 0; r < p; ++r) {
    Bicriteria cand = kmeanspp_seed(x, k, rng.substream(static_cast<std::uint64_t>(r)));
    if (!have || cand.cost < best.cost) {
      best = std::move(cand);
      have = true;
    }
  }
  return best;
}

Bicriteria adaptive_bicriteria(const DataSet& x, int k, double delta, Rng rng) {
  if (k < 1) throw DataError("k must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw DataError("delta must lie in (0, 1)");
  const Eigen::Index n = x.n();
  const auto c = static_cast<Eigen::Index>(
      std::ceil(10.0 * static_cast<double>(x.dim()) * static_cast<double>(k) *
                std::log(1.0 / delta)));
  std::vector<Eigen::Index> remainder(static_cast<std::size_t>(n));
  std::iota(remainder.begin(), remainder.end(), 0);
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);

  while (static_cast<Eigen::Index>(remainder.size()) > c) {
    // partial Fisher-Yates: uniform sample of c remainder slots, no replacement
    std::vector<Eigen::Index> sample(static_cast<std::size_t>(c));
    for (Eigen::Index t = 0; t < c; ++t) {
      const auto span = static_cast<std::uint64_t>(remainder.size() - static_cast<std::size_t>(t));
      const auto pick = static_cast<std::size_t>(t) + static_cast<std::size_t>(rng.below(span));
      std::swap(remainder[static_cast<std::size_t>(t)], remainder[pick]);
      sample[static_cast<std::size_t>(t)] = remainder[static_cast<std::size_t>(t)];
    }
    for (Eigen::Index idx : sample) chosen[static_cast<std::size_t>(idx)] = 1;

    RowMatrixXd sc(c, x.dim());
    for (Eigen::Index t = 0; t < c; ++t) sc.row(t) = x.point(sample[static_cast<std::size_t>(t)]);

    const auto r = static_cast<Eigen::Index>(remainder.size());
    std::vector<double> d2(static_cast<std::size_t>(r));
#pragma omp parallel for schedule(static)
    for (Eigen::Index t = 0; t < r; ++t)
      d2[static_cast<std::size_t>(t)] =
          nearest_center(x.point(remainder[static_cast<std::size_t>(t)]), sc).second;

    // drop the ceil(r/2) remainder points closest to the sample; ties by index
    std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index bdx) {
      const double da = d2[static_cast<std::size_t>(a)], db = d2[static_cast<std::size_t>(bdx)];
      if (da != db) return da < db;
      return remainder[static_cast<std::size_t>(a)] < remainder[static_cast<std::size_t>(bdx)];
    });
    const Eigen::Index drop = (r + 1) / 2;
    std::vector<char> dropped(static_cast<std::size_t>(r), 0);
    for (Eigen::Index t = 0; t < drop; ++t)
      dropped[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = 1;
    std::vector<Eigen::Index> kept;
    kept.reserve(static_cast<std::size_t>(r - drop));
    for (Eigen::Index t = 0; t < r; ++t)
      if (!dropped[static_cast<std::size_t>(t)]) kept.push_back(remainder[static_cast<std::size_t>(t)]);
    remainder = std::move(kept);
  }
  for (Eigen::Index idx : remainder) chosen[static_cast<std::size_t>(idx)] = 1;

  Eigen::Index beta = 0;
  for (char f : chosen) beta += f;
  Bicriteria b;
  b.centers.resize(beta, x.dim());
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (chosen[static_cast<std::size_t>(i)]) b.centers.row(t++) = x.point(i);
  b.alpha = default_alpha(k);
  b.cost = phi(x, b.centers);
  return b;
}

LloydResult weighted_lloyd(const DataSet& x, int k, Rng rng, int max_iters) {
  if (max_iters < 1) throw DataError("max_iters must be >= 1");
  Bicriteria seed = kmeanspp_seed(x, k, rng);
  RowMatrixXd centers = seed.centers;
  const Eigen::Index n = x.n();
  LloydResult res;
  std::vector<Eigen::Index> prev_assign;

  for (int it = 0; it < max_iters; ++it) {
    VoronoiPartition part = voronoi_partition(x, centers);
    res.iterations = it + 1;
    const bool stable = it > 0 && part.assignment == prev_assign;
    prev_assign = part.assignment;

    // weighted means per cell, fixed block fold
    const Eigen::Index nb = (n + kStatBlock - 1) / kStatBlock;
    std::vector<RowMatrixXd> bm(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(static)
    for (Eigen::Index b = 0; b < nb; ++b) {
      RowMatrixXd m = RowMatrixXd::Zero(k, x.dim());
      const Eigen::Index lo = b * kStatBlock, hi = std::min(n, lo + kStatBlock);
      for (Eigen::Index i = lo; i < hi; ++i)
        m.row(part.assignment[static_cast<std::size_t>(i)]) += x.weight(i) * x.point(i);
      bm[static_cast<std::size_t>(b)] = std::move(m);
    }
    RowMatrixXd msum = RowMatrixXd::Zero(k, x.dim());
    for (Eigen::Index b = 0; b < nb; ++b) msum += bm[static_cast<std::size_t>(b)];

    std::vector<Eigen::Index> empties;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (part.cell_weights[j] > 0.0)
        centers.row(j) = msum.row(j) / part.cell_weights[j];
      else
        empties.push_back(j);
    }
    if (!empties.empty()) {
      res.reseeded = true;
      // per-point weighted squared distance under the assignment just computed
      std::vector<double> score(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
      for (Eigen::Index i = 0; i < n; ++i)
        score[static_cast<std::size_t>(i)] =
            x.weight(i) * (x.point(i) - centers.row(part.assignment[static_cast<std::size_t>(i)]))
                              .squaredNorm();
      std::vector<char> used(static_cast<std::size_t>(n), 0);
      for (Eigen::Index j : empties) {
        Eigen::Index pick = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
          if (!used[static_cast<std::size_t>(i)] && score[static_cast<std::size_t>(i)] > best) {
            best = score[static_cast<std::size_t>(i)];
            pick = i;
          }
        used[static_cast<std::size_t>(pick)] = 1;
        centers.row(j) = x.point(pick);
      }
    }
    if (stable) break;
  }
  VoronoiPartition final_part = voronoi_partition(x, centers);
  res.assignment = std::move(final_part.assignment);
  res.centers = std::move(centers);
  res.cost = final_part.total_cost;
  return res;
}

}  // namespace gmcs
