#include "gmcs/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "gmcs/seeding.hpp"

namespace gmcs {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n, std::uint64_t m, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (std::uint64_t i = 0; i < m; ++i) {
    const auto j = i + rng.below(static_cast<std::uint64_t>(n) - i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return idx;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double p90(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(0.9 * static_cast<double>(v.size())));
  return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

double max_ratio_against_base(const DataSet& proxy, const std::vector<GmmParams>& probes,
                              const std::vector<double>& base_costs) {
  double worst = 0.0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const double cp = cost_of_set(proxy, probes[p]);
    const double cx = base_costs[p];
    double r;
    if (cx == 0.0)
      r = cp == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    else
      r = std::abs(cp / cx - 1.0);
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n, double train_fraction, Rng rng) {
  if (n < 2) throw DataError("need at least 2 points to split");
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw DataError("train_fraction must be in (0, 1)");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = rng.below(static_cast<std::uint64_t>(i) + 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  auto n_train = static_cast<Eigen::Index>(
      std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<Eigen::Index>(n_train, 1, n - 1);
  std::vector<Eigen::Index> train(idx.begin(), idx.begin() + n_train);
  std::vector<Eigen::Index> hold(idx.begin() + n_train, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(hold.begin(), hold.end());
  return {std::move(train), std::move(hold)};
}

DataSet subset(const DataSet& x, const std::vector<Eigen::Index>& idx) {
  if (idx.empty()) throw DataError("empty index set");
  RowMatrixXd pts(static_cast<Eigen::Index>(idx.size()), x.dim());
  Eigen::VectorXd w(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= x.n()) throw DataError("subset index out of range");
    pts.row(static_cast<Eigen::Index>(r)) = x.points().row(idx[r]);
    w[static_cast<Eigen::Index>(r)] = x.weight(idx[r]);
  }
  return DataSet(std::move(pts), std::move(w));
}

DataSet uniform_subsample(const DataSet& x, std::uint64_t m, Rng rng, bool reweight) {
  if (m < 1) throw DataError("m must be positive");
  if (m > static_cast<std::uint64_t>(x.n())) throw DataError("subsample larger than the set");
  const auto idx = sample_without_replacement(x.n(), m, rng);
  RowMatrixXd pts(static_cast<Eigen::Index>(m), x.dim());
  for (std::size_t r = 0; r < idx.size(); ++r)
    pts.row(static_cast<Eigen::Index>(r)) = x.points().row(idx[r]);
  const double w = reweight ? x.total_weight() / static_cast<double>(m) : 1.0;
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), w);
  return DataSet(std::move(pts), std::move(weights));
}

std::vector<GmmParams> probe_thetas(const DataSet& x, int k, double lambda, int count, Rng rng) {
  if (count < 0) throw DataError("probe count must be nonnegative");
  if (k < 1) throw DataError("k must be positive");
  const Eigen::Index d = x.dim();
  const Eigen::RowVectorXd mean = x.points().colwise().mean();
  double v = (x.points().rowwise() - mean).squaredNorm() /
             static_cast<double>(x.n() * d);
  if (!(v > 0.0) || !std::isfinite(v)) v = 1.0;
  v = std::clamp(v, lambda, 1.0 / lambda);

  std::vector<GmmParams> probes;
  probes.reserve(static_cast<std::size_t>(count));
  for (int p = 0; p < count; ++p) {
    Rng pr = rng.substream(static_cast<std::uint64_t>(p));
    Rng r_mean = pr.substream(0);
    Rng r_cov = pr.substream(1);
    Rng r_w = pr.substream(2);

    GmmParams theta;
    theta.lambda = lambda;
    theta.means = kmeanspp_seed(x, k, r_mean).centers;
    theta.covs.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      Eigen::MatrixXd m1(d, d);
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) m1(a, b) = r_cov.normal();
      Eigen::MatrixXd s = (v / static_cast<double>(d)) * (m1 * m1.transpose());
      theta.covs.push_back(clamp_covariance(s, lambda));
    }
    theta.weights.resize(k);
    for (int j = 0; j < k; ++j)
      theta.weights[j] = std::max(-std::log1p(-r_w.uniform()), 1e-12);
    theta.weights /= theta.weights.sum();
    theta.validate();
    probes.push_back(std::move(theta));
  }
  return probes;
}

double probe_max_ratio(const DataSet& x, const DataSet& proxy,
                       const std::vector<GmmParams>& probes) {
  std::vector<double> base(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) base[p] = cost_of_set(x, probes[p]);
  return max_ratio_against_base(proxy, probes, base);
}

std::vector<EvalRow> evaluate_sizes(const DataSet& x, const std::vector<std::uint64_t>& sizes,
                                    const EvalOptions& opt, std::uint64_t seed) {
  if (sizes.empty()) throw DataError("no sizes given");
  if (opt.trials < 1) throw DataError("trials must be positive");
  if (opt.restarts < 1) throw DataError("restarts must be positive");
  Rng master(seed);

  const auto [train_idx, hold_idx] = split_indices(x.n(), opt.train_fraction, master.substream(0));
  const DataSet train = subset(x, train_idx);
  const DataSet hold = subset(x, hold_idx);

  // baseline: best-of-R fit on the train half, error measured on the holdout half
  const GmmParams theta_full =
      em_fit_best(train, opt.k, opt.lambda, master.substream(1), opt.restarts, opt.em);
  const double base_nll = negative_log_likelihood(hold, theta_full);

  const std::vector<GmmParams> probes =
      probe_thetas(train, opt.k, opt.lambda, opt.probe_count, master.substream(2));
  std::vector<double> base_costs(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) base_costs[p] = cost_of_set(train, probes[p]);

  std::vector<EvalRow> rows;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const std::uint64_t m = sizes[si];
    if (m < 1) throw DataError("size must be positive");
    const std::uint64_t m_uni = std::min(m, static_cast<std::uint64_t>(train.n()));
    const int trials = opt.trials;
    std::vector<double> eta_c(static_cast<std::size_t>(trials)),
        eta_u(static_cast<std::size_t>(trials)), ratio_c(static_cast<std::size_t>(trials)),
        ratio_u(static_cast<std::size_t>(trials)), build_c(static_cast<std::size_t>(trials)),
        build_u(static_cast<std::size_t>(trials)), fit_c(static_cast<std::size_t>(trials)),
        fit_u(static_cast<std::size_t>(trials));

#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < trials; ++t) {
      const auto st = static_cast<std::size_t>(t);
      const auto tu = static_cast<std::uint64_t>(t);
      // coreset arm
      auto t0 = std::chrono::steady_clock::now();
      const Coreset c = build_coreset(train, opt.k, m, opt.build,
                                      master.substream(4).substream(si).substream(tu));
      build_c[st] = seconds_since(t0);
      const DataSet cd = c.as_dataset();
      t0 = std::chrono::steady_clock::now();
      const GmmParams theta_c = em_fit(cd, opt.k, opt.lambda,
                                       master.substream(5).substream(si).substream(tu), opt.em);
      fit_c[st] = seconds_since(t0);
      eta_c[st] = relative_error_eta(base_nll, negative_log_likelihood(hold, theta_c));
      ratio_c[st] = probes.empty() ? 0.0 : max_ratio_against_base(cd, probes, base_costs);

      // uniform arm: same subset fit with unit weights, probed with total/m weights
      t0 = std::chrono::steady_clock::now();
      Rng ur = master.substream(6).substream(si).substream(tu);
      const auto uidx = sample_without_replacement(train.n(), m_uni, ur);
      RowMatrixXd upts(static_cast<Eigen::Index>(m_uni), train.dim());
      for (std::size_t r = 0; r < uidx.size(); ++r)
        upts.row(static_cast<Eigen::Index>(r)) = train.points().row(uidx[r]);
      const DataSet u_fit = DataSet::unit(upts);
      build_u[st] = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      const GmmParams theta_u = em_fit(u_fit, opt.k, opt.lambda,
                                       master.substream(7).substream(si).substream(tu), opt.em);
      fit_u[st] = seconds_since(t0);
      eta_u[st] = relative_error_eta(base_nll, negative_log_likelihood(hold, theta_u));
      if (probes.empty()) {
        ratio_u[st] = 0.0;
      } else {
        Eigen::VectorXd uw = Eigen::VectorXd::Constant(
            static_cast<Eigen::Index>(m_uni),
            train.total_weight() / static_cast<double>(m_uni));
        const DataSet u_probe(upts, std::move(uw));
        ratio_u[st] = max_ratio_against_base(u_probe, probes, base_costs);
      }
    }

    EvalRow rc;
    rc.m = m;
    rc.method = "coreset";
    rc.median_eta = median(eta_c);
    rc.p90_eta = p90(eta_c);
    rc.probe_max_ratio = median(ratio_c);
    rc.build_s = median(build_c);
    rc.fit_s = median(fit_c);
    rows.push_back(rc);

    EvalRow ru;
    ru.m = m;
    ru.method = "uniform";
    ru.median_eta = median(eta_u);
    ru.p90_eta = p90(eta_u);
    ru.probe_max_ratio = median(ratio_u);
    ru.build_s = median(build_u);
    ru.fit_s = median(fit_u);
    rows.push_back(ru);
  }
  return rows;
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
  std::string out = "m,method,median_eta,p90_eta,probe_max_ratio,build_s,fit_s\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.m), r.method.c_str(), r.median_eta, r.p90_eta,
                  r.probe_max_ratio, r.build_s, r.fit_s);
    out += buf;
  }
  return out;
}

std::string eval_table(const std::vector<EvalRow>& rows) {
  std::string out =
      "        m   method    median_eta     p90_eta   probe_max     build_s       fit_s\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%9llu %8s %13.4g %11.4g %11.4g %11.4g %11.4g\n",
                  static_cast<unsigned long long>(r.m), r.method.c_str(), r.median_eta, r.p90_eta,
                  r.probe_max_ratio, r.build_s, r.fit_s);
    out += buf;
  }
  return out;
}

}  // namespace gmcs
