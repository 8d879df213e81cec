#include "gmcs/coreset.hpp"

#include <cmath>
#include <map>

namespace gmcs {

SensitivityScores sensitivity_scores(const DataSet& x, const Bicriteria& b,
                                     const VoronoiPartition& part) {
  const Eigen::Index n = x.n();
  if (static_cast<Eigen::Index>(part.assignment.size()) != n)
    throw DataError("partition does not match point set");
  if (part.cell_weights.size() != b.beta()) throw DataError("partition does not match centers");
  if (!(b.alpha > 0.0)) throw DataError("alpha must be positive");

  SensitivityScores out;
  out.alpha = b.alpha;
  out.beta = b.beta();
  out.phi = part.total_cost;
  out.nonempty_cells = part.nonempty();
  out.s.resize(n);

  const double alpha = b.alpha;
  const double total_cost = part.total_cost;
  // wj > 0 whenever the cell holds any weight; a cell of only zero-weight
  // points still needs a finite score for them, so the cell terms are dropped
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = part.assignment[static_cast<std::size_t>(i)];
    const double wj = part.cell_weights[j];
    const double d2 = (x.point(i) - b.centers.row(j)).squaredNorm();
    if (wj > 0.0) {
      out.s[i] = alpha * d2 + (2.0 * alpha / wj) * part.cell_costs[j] + (2.0 / wj) * total_cost;
    } else {
      // only reachable when every point of the cell has zero weight
      out.s[i] = alpha * d2;
    }
  }
  out.total = block_sum(n, [&](Eigen::Index i) { return x.weight(i) * out.s[i]; });
  out.q.resize(n);
  if (out.total > 0.0) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) out.q[i] = x.weight(i) * out.s[i] / out.total;
  } else {
    // every positive-weight point sits on its own center and phi = 0; fall back
    // to weight-proportional draws (uniform on unit weights)
    for (Eigen::Index i = 0; i < n; ++i) out.q[i] = x.weight(i) / x.total_weight();
  }
  return out;
}

Eigen::VectorXd normalized_sensitivity_bound(const SensitivityScores& scores, const DataSet& x,
                                             double lambda) {
  if (!x.unit_weights()) throw DataError("normalized bound requires unit weights");
  if (!(lambda > 0.0 && lambda < 1.0)) throw DataError("lambda must lie in (0, 1)");
  if (!(scores.phi > 0.0)) throw DataError("degenerate point set: zero quantization cost");
  const double scale =
      static_cast<double>(x.n()) * 2.0 / (lambda * lambda * scores.phi);
  return scale * scores.s;
}

Coreset::Coreset(RowMatrixXd points, Eigen::VectorXd weights, CoresetMeta meta)
    : points_(std::move(points)), weights_(std::move(weights)), meta_(meta) {
  if (points_.rows() != weights_.size()) throw DataError("coreset weight count mismatch");
  for (Eigen::Index i = 0; i < weights_.size(); ++i)
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
      throw DataError("coreset weights must be positive and finite");
  if (!points_.allFinite()) throw DataError("non-finite coreset coordinate");
}

DataSet Coreset::as_dataset() const {
  if (empty()) throw DataError("empty coreset has no dataset view");
  return DataSet(points_, weights_);
}

AliasTable build_alias_table(const Eigen::VectorXd& q) {
  const Eigen::Index n = q.size();
  if (n < 1) throw DataError("empty probability vector");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(q[i] >= 0.0) || !std::isfinite(q[i]))
      throw DataError("probabilities must be nonnegative and finite");
    sum += q[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("probabilities must sum to 1");

  AliasTable t;
  t.prob.assign(static_cast<std::size_t>(n), 0.0);
  t.alias.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> scaled(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) scaled[static_cast<std::size_t>(i)] = q[i] * static_cast<double>(n);

  std::vector<std::uint32_t> small, large;
  for (Eigen::Index i = 0; i < n; ++i)
    (scaled[static_cast<std::size_t>(i)] < 1.0 ? small : large)
        .push_back(static_cast<std::uint32_t>(i));
  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back();
    small.pop_back();
    const std::uint32_t l = large.back();
    t.prob[s] = scaled[s];
    t.alias[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (std::uint32_t i : large) {
    t.prob[i] = 1.0;
    t.alias[i] = i;
  }
  for (std::uint32_t i : small) {  // leftovers from rounding; mass is ~1 anyway
    t.prob[i] = 1.0;
    t.alias[i] = i;
  }
  return t;
}

Coreset draw_coreset(const DataSet& x, const SensitivityScores& scores, std::uint64_t m,
                     Rng& rng, double epsilon_budget) {
  if (m < 1) throw DataError("coreset size must be >= 1");
  if (scores.q.size() != x.n()) throw DataError("scores do not match point set");
  AliasTable t = build_alias_table(scores.q);
  std::map<Eigen::Index, std::uint64_t> counts;  // ordered: output in source index order
  for (std::uint64_t r = 0; r < m; ++r) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    counts[static_cast<Eigen::Index>(t.draw(u1, u2))] += 1;
  }
  const auto mm = static_cast<double>(m);
  RowMatrixXd pts(static_cast<Eigen::Index>(counts.size()), x.dim());
  Eigen::VectorXd w(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index r = 0;
  for (const auto& [idx, cnt] : counts) {
    pts.row(r) = x.point(idx);
    w[r] = static_cast<double>(cnt) * x.weight(idx) / (mm * scores.q[idx]);
    ++r;
  }
  CoresetMeta meta;
  meta.source_n = static_cast<std::uint64_t>(x.n());
  meta.m_requested = m;
  meta.epsilon_budget = epsilon_budget;
  meta.level = 0;
  return Coreset(std::move(pts), std::move(w), meta);
}

double coreset_size_bound_real(int k, Eigen::Index d, double eps, double delta, double lambda,
                               double c) {
  if (k < 1 || d < 1) throw DataError("k and d must be >= 1");
  if (!(eps > 0.0 && eps < 0.5)) throw DataError("eps must lie in (0, 1/2)");
  if (!(delta > 0.0 && delta < 1.0)) throw DataError("delta must lie in (0, 1)");
  if (!(lambda > 0.0 && lambda < 1.0)) throw DataError("lambda must lie in (0, 1)");
  if (!(c > 0.0)) throw DataError("c must be positive");
  const double dd = static_cast<double>(d);
  const double kk = static_cast<double>(k);
  const double num = std::pow(dd, 4) * std::pow(kk, 6) + kk * kk * std::log(1.0 / delta);
  return c * num / (std::pow(lambda, 4) * eps * eps);
}

std::uint64_t coreset_size_bound(int k, Eigen::Index d, double eps, double delta, double lambda,
                                 double c) {
  return static_cast<std::uint64_t>(std::ceil(coreset_size_bound_real(k, d, eps, delta, lambda, c)));
}

Coreset build_coreset(const DataSet& x, int k, std::uint64_t m, const BuildOptions& opt,
                      Rng rng, BuildDiagnostics* diag) {
  Bicriteria seed = opt.seeding == SeedingMode::kmeanspp
                        ? best_seed_of_p(x, k, opt.delta, rng.substream(0))
                        : adaptive_bicriteria(x, k, opt.delta, rng.substream(0));
  VoronoiPartition part = voronoi_partition(x, seed.centers);
  SensitivityScores scores = sensitivity_scores(x, seed, part);
  logf(LogLevel::info, "build: n=", x.n(), " k=", k, " m=", m, " phi=", part.total_cost,
       " cells=", scores.nonempty_cells);
  if (diag) {
    diag->sum_s = block_sum(x.n(), [&](Eigen::Index i) { return scores.s[i]; });
    diag->identity_expected =
        (3.0 * seed.alpha + 2.0 * static_cast<double>(seed.beta())) * part.total_cost;
    diag->total_bound = scores.total_bound(opt.lambda);
    diag->total_bound_alt = scores.total_bound_alt(opt.lambda);
    diag->nonempty_cells = scores.nonempty_cells;
    diag->seed = std::move(seed);
  }
  Rng draw_rng = rng.substream(1);
  return draw_coreset(x, scores, m, draw_rng, opt.epsilon);
}

Eigen::VectorXd brute_force_sensitivity(const DataSet& x, const std::vector<GmmParams>& grid) {
  if (!x.unit_weights()) throw DataError("brute-force sensitivity requires unit weights");
  if (grid.empty()) throw DataError("empty theta grid");
  const Eigen::Index n = x.n();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f(n);
  for (const GmmParams& theta : grid) {
    GmmEval eval(theta);  // validates the spectrum band
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) f[i] = eval.point_cost(x.point(i));
    const double total = block_sum(n, [&](Eigen::Index i) { return f[i]; });
    if (!(total > 0.0)) continue;  // theta fits every point exactly; contributes nothing
    const double scale = static_cast<double>(n) / total;
    for (Eigen::Index i = 0; i < n; ++i) best[i] = std::max(best[i], scale * f[i]);
  }
  return best;
}

std::uint64_t hash_coreset(const Coreset& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const std::uint64_t n = static_cast<std::uint64_t>(c.n());
  const std::uint64_t d = static_cast<std::uint64_t>(c.dim());
  h = fnv1a64(&n, sizeof n, h);
  h = fnv1a64(&d, sizeof d, h);
  if (!c.empty()) {
    h = fnv1a64(c.points().data(), sizeof(double) * static_cast<std::size_t>(c.n() * c.dim()), h);
    h = fnv1a64(c.weights().data(), sizeof(double) * static_cast<std::size_t>(c.n()), h);
  }
  const CoresetMeta& m = c.meta();
  h = fnv1a64(&m.source_n, sizeof m.source_n, h);
  h = fnv1a64(&m.m_requested, sizeof m.m_requested, h);
  h = fnv1a64(&m.epsilon_budget, sizeof m.epsilon_budget, h);
  h = fnv1a64(&m.level, sizeof m.level, h);
  return h;
}

}  // namespace gmcs
