#include "gmcs/gmm.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <Eigen/Eigenvalues>

#include "gmcs/seeding.hpp"

namespace gmcs {

namespace {

constexpr double kLn2Pi = 1.8378770664093454835606594728112353;

struct ClampResult {
  Eigen::MatrixXd sigma;
  double min_eig = 0.0;  // spectrum of the symmetrized input
  double max_eig = 0.0;
  bool changed = false;
};

ClampResult clamp_covariance_ex(const Eigen::MatrixXd& sigma, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw DataError("lambda must lie in (0, 1)");
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) throw DataError("covariance not square");
  if (!sigma.allFinite()) throw NumericError("non-finite covariance");
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, sigma.cwiseAbs().maxCoeff()))
    throw DataError("covariance asymmetric beyond tolerance");
  Eigen::MatrixXd a = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  ClampResult r;
  r.min_eig = es.eigenvalues().minCoeff();
  r.max_eig = es.eigenvalues().maxCoeff();
  const double lo = lambda, hi = 1.0 / lambda;
  // small relative slack so a clamped matrix re-clamps to itself bit for bit
  if (r.min_eig >= lo * (1.0 - 1e-12) && r.max_eig <= hi * (1.0 + 1e-12)) {
    r.sigma = sigma;
    return r;
  }
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(lo).cwiseMin(hi);
  Eigen::MatrixXd out =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  r.sigma = 0.5 * (out + out.transpose());
  r.changed = true;
  return r;
}

// forward substitution against the cached lower factor; v is overwritten
inline double quad_form(const Eigen::MatrixXd& l, double* v, Eigen::Index d) {
  double q = 0.0;
  for (Eigen::Index r = 0; r < d; ++r) {
    double s = v[r];
    for (Eigen::Index c = 0; c < r; ++c) s -= l(r, c) * v[c];
    s /= l(r, r);
    v[r] = s;
    q += s * s;
  }
  return q;
}

}  // namespace

void GmmParams::validate() const {
  const Eigen::Index kk = weights.size();
  if (kk < 1) throw DataError("mixture has no components");
  if (means.rows() != kk || static_cast<Eigen::Index>(covs.size()) != kk)
    throw DataError("component count mismatch across weights/means/covs");
  const Eigen::Index d = means.cols();
  if (d < 1) throw DataError("zero-dimensional mixture");
  if (!(lambda > 0.0 && lambda < 1.0)) throw DataError("lambda must lie in (0, 1)");
  if (!means.allFinite() || !weights.allFinite()) throw NumericError("non-finite parameter");
  double wsum = 0.0;
  for (Eigen::Index j = 0; j < kk; ++j) {
    if (weights[j] < 0.0) throw DataError("negative mixture weight");
    wsum += weights[j];
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw DataError("mixture weights do not sum to 1");
  for (Eigen::Index j = 0; j < kk; ++j) {
    const Eigen::MatrixXd& s = covs[static_cast<std::size_t>(j)];
    if (s.rows() != d || s.cols() != d) throw DataError("covariance dimension mismatch");
    if (!s.allFinite()) throw NumericError("non-finite covariance");
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff()))
      throw DataError("covariance asymmetric beyond tolerance");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    if (es.eigenvalues().minCoeff() < lambda - 1e-9 ||
        es.eigenvalues().maxCoeff() > 1.0 / lambda + 1e-9)
      throw DataError("covariance spectrum outside [lambda, 1/lambda]");
  }
}

Eigen::MatrixXd clamp_covariance(const Eigen::MatrixXd& sigma, double lambda) {
  return clamp_covariance_ex(sigma, lambda).sigma;
}

GmmEval::GmmEval(const GmmParams& theta) : theta_(&theta) {
  theta.validate();
  const Eigen::Index k = theta.k();
  chol_.reserve(static_cast<std::size_t>(k));
  log_norm_.resize(k);
  log_w_.resize(k);
  const double d = static_cast<double>(theta.dim());
  for (Eigen::Index j = 0; j < k; ++j) {
    chol_.emplace_back(theta.covs[static_cast<std::size_t>(j)]);
    if (chol_.back().info() != Eigen::Success)
      throw NumericError("covariance not positive definite");
    double half_logdet = 0.0;
    const auto& l = chol_.back().matrixLLT();
    for (Eigen::Index r = 0; r < theta.dim(); ++r) half_logdet += std::log(l(r, r));
    log_norm_[j] = -0.5 * d * kLn2Pi - half_logdet;
    log_w_[j] = theta.weights[j] > 0.0 ? std::log(theta.weights[j])
                                       : -std::numeric_limits<double>::infinity();
  }
  Eigen::VectorXd t = log_w_ + log_norm_;
  log_z_ = log_sum_exp(t.data(), k);
}

void GmmEval::log_components(ConstRowRef x, double* logc, double* scratch) const {
  const Eigen::Index d = theta_->dim();
  const Eigen::Index k = theta_->k();
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index c = 0; c < d; ++c) scratch[c] = x[c] - theta_->means(j, c);
    const double q = quad_form(chol_[static_cast<std::size_t>(j)].matrixLLT(), scratch, d);
    logc[j] = log_norm_[j] - 0.5 * q;
  }
}

double GmmEval::log_component(Eigen::Index j, ConstRowRef x) const {
  const Eigen::Index d = theta_->dim();
  Eigen::VectorXd v = (x - theta_->means.row(j)).transpose();
  const double q = quad_form(chol_[static_cast<std::size_t>(j)].matrixLLT(), v.data(), d);
  return log_norm_[j] - 0.5 * q;
}

double GmmEval::log_mixture(ConstRowRef x) const {
  const Eigen::Index k = theta_->k();
  Eigen::VectorXd logc(k), scratch(theta_->dim());
  log_components(x, logc.data(), scratch.data());
  Eigen::VectorXd t = log_w_ + logc;
  return log_sum_exp(t.data(), k);
}

double log_gaussian(ConstRowRef x, ConstRowRef mu, const Eigen::MatrixXd& sigma) {
  const Eigen::Index d = x.size();
  if (mu.size() != d || sigma.rows() != d || sigma.cols() != d)
    throw DataError("dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericError("covariance not positive definite");
  double half_logdet = 0.0;
  for (Eigen::Index r = 0; r < d; ++r) half_logdet += std::log(llt.matrixLLT()(r, r));
  Eigen::VectorXd v = (x - mu).transpose();
  const double q = quad_form(llt.matrixLLT(), v.data(), d);
  return -0.5 * static_cast<double>(d) * kLn2Pi - half_logdet - 0.5 * q;
}

double log_normalizer(const GmmParams& theta) { return GmmEval(theta).log_z(); }

double point_cost(const GmmParams& theta, ConstRowRef x) { return GmmEval(theta).point_cost(x); }

namespace {

// same 64-leaf halving shape as block_sum, with per-block evaluation scratch
double cost_impl(const DataSet& x, const GmmEval& eval) {
  const Eigen::Index n = x.n();
  const Eigen::Index k = eval.log_weights().size();
  const Eigen::Index nb = (n + kSumLeaf - 1) / kSumLeaf;
  std::vector<double> partial(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    Eigen::VectorXd logc(k), scratch(x.dim());
    const Eigen::Index lo = b * kSumLeaf, hi = std::min(n, lo + kSumLeaf);
    double acc = 0.0;
    for (Eigen::Index i = lo; i < hi; ++i) {
      eval.log_components(x.point(i), logc.data(), scratch.data());
      logc += eval.log_weights();
      const double f = eval.log_z() - log_sum_exp(logc.data(), k);
      acc += x.weight(i) * std::max(f, 0.0);
    }
    partial[static_cast<std::size_t>(b)] = acc;
  }
  return halving_reduce(partial);
}

void e_step_impl(const DataSet& x, const GmmEval& eval, const GmmParams& theta,
                 RowMatrixXd& eta) {
  const Eigen::Index n = x.n();
  const Eigen::Index k = theta.k();
  eta.resize(n, k);
  const Eigen::Index nb = (n + kStatBlock - 1) / kStatBlock;
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    Eigen::VectorXd logr(k), scratch(x.dim());
    const Eigen::Index lo = b * kStatBlock, hi = std::min(n, lo + kStatBlock);
    for (Eigen::Index i = lo; i < hi; ++i) {
      eval.log_components(x.point(i), logr.data(), scratch.data());
      logr += eval.log_weights();
      const double z = log_sum_exp(logr.data(), k);
      const double w = x.weight(i);
      for (Eigen::Index j = 0; j < k; ++j)
        eta(i, j) = std::isfinite(logr[j]) ? w * std::exp(logr[j] - z) : 0.0;
    }
  }
}

}  // namespace

double cost_of_set(const DataSet& x, const GmmParams& theta) {
  if (x.dim() != theta.dim()) throw DataError("dimension mismatch");
  return cost_impl(x, GmmEval(theta));
}

double negative_log_likelihood(const DataSet& x, const GmmParams& theta) {
  if (x.dim() != theta.dim()) throw DataError("dimension mismatch");
  GmmEval eval(theta);
  return -x.total_weight() * eval.log_z() + cost_impl(x, eval);
}

RowMatrixXd e_step(const DataSet& x, const GmmParams& theta) {
  if (x.dim() != theta.dim()) throw DataError("dimension mismatch");
  GmmEval eval(theta);
  RowMatrixXd eta;
  e_step_impl(x, eval, theta, eta);
  return eta;
}

GmmParams m_step(const DataSet& x, const RowMatrixXd& eta, double lambda, MStepInfo* info) {
  const Eigen::Index n = x.n();
  const Eigen::Index d = x.dim();
  const Eigen::Index k = eta.cols();
  if (eta.rows() != n) throw DataError("responsibility row count mismatch");
  if (k < 1) throw DataError("no components");
  if (!(lambda > 0.0 && lambda < 1.0)) throw DataError("lambda must lie in (0, 1)");
  if (!eta.allFinite()) throw NumericError("non-finite responsibility");
  if ((eta.array() < 0.0).any()) throw DataError("negative responsibility");

  MStepInfo local;
  MStepInfo& out = info ? *info : local;
  out = MStepInfo{};

  const Eigen::Index nb = (n + kStatBlock - 1) / kStatBlock;

  // pass 1: masses and weighted sums, block partials folded in fixed order
  std::vector<Eigen::VectorXd> bz(static_cast<std::size_t>(nb));
  std::vector<RowMatrixXd> bm(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
    RowMatrixXd m = RowMatrixXd::Zero(k, d);
    const Eigen::Index lo = b * kStatBlock, hi = std::min(n, lo + kStatBlock);
    for (Eigen::Index i = lo; i < hi; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        const double e = eta(i, j);
        z[j] += e;
        m.row(j) += e * x.point(i);
      }
    bz[static_cast<std::size_t>(b)] = std::move(z);
    bm[static_cast<std::size_t>(b)] = std::move(m);
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
  RowMatrixXd msum = RowMatrixXd::Zero(k, d);
  for (Eigen::Index b = 0; b < nb; ++b) {
    z += bz[static_cast<std::size_t>(b)];
    msum += bm[static_cast<std::size_t>(b)];
  }
  const double z_total = z.sum();
  if (!(z_total > 0.0)) throw DataError("zero total responsibility mass");

  std::vector<bool> dead(static_cast<std::size_t>(k), false);
  for (Eigen::Index j = 0; j < k; ++j)
    if (z[j] <= z_total * 1e-15) dead[static_cast<std::size_t>(j)] = true;

  GmmParams theta;
  theta.lambda = lambda;
  theta.weights = Eigen::VectorXd::Zero(k);
  theta.means = RowMatrixXd::Zero(k, d);
  theta.covs.assign(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(d, d));
  for (Eigen::Index j = 0; j < k; ++j)
    if (!dead[static_cast<std::size_t>(j)]) theta.means.row(j) = msum.row(j) / z[j];

  // pass 2: scatter around the final means
  std::vector<std::vector<Eigen::MatrixXd>> bS(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    std::vector<Eigen::MatrixXd> s(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(d, d));
    Eigen::RowVectorXd v(d);
    const Eigen::Index lo = b * kStatBlock, hi = std::min(n, lo + kStatBlock);
    for (Eigen::Index i = lo; i < hi; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        if (dead[static_cast<std::size_t>(j)]) continue;
        const double e = eta(i, j);
        if (e == 0.0) continue;
        v = x.point(i) - theta.means.row(j);
        auto& sj = s[static_cast<std::size_t>(j)];
        for (Eigen::Index r = 0; r < d; ++r)
          for (Eigen::Index c = 0; c < d; ++c) sj(r, c) += e * v[r] * v[c];
      }
    bS[static_cast<std::size_t>(b)] = std::move(s);
  }
  std::vector<Eigen::MatrixXd> scatter(static_cast<std::size_t>(k),
                                       Eigen::MatrixXd::Zero(d, d));
  for (Eigen::Index b = 0; b < nb; ++b)
    for (Eigen::Index j = 0; j < k; ++j)
      scatter[static_cast<std::size_t>(j)] += bS[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];

  for (Eigen::Index j = 0; j < k; ++j) {
    if (dead[static_cast<std::size_t>(j)]) continue;
    Eigen::MatrixXd sigma = scatter[static_cast<std::size_t>(j)] / z[j];
    sigma.diagonal().array() += lambda;
    ClampResult cr = clamp_covariance_ex(sigma, lambda);
    theta.covs[static_cast<std::size_t>(j)] = std::move(cr.sigma);
    out.clamped |= cr.changed;
    out.ridge_material |= cr.min_eig <= 10.0 * lambda;
    theta.weights[j] = z[j] / z_total;
  }

  // collapsed components: re-seed at the worst-covered point under the survivors
  bool any_dead = false;
  for (bool f : dead) any_dead |= f;
  if (any_dead) {
    Eigen::Index live = 0;
    for (Eigen::Index j = 0; j < k; ++j)
      if (!dead[static_cast<std::size_t>(j)]) ++live;
    if (live == 0) throw NumericError("all components collapsed");
    GmmParams survivors;
    survivors.lambda = lambda;
    survivors.weights = Eigen::VectorXd::Zero(live);
    survivors.means = RowMatrixXd::Zero(live, d);
    Eigen::Index t = 0;
    double live_mass = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      if (!dead[static_cast<std::size_t>(j)]) live_mass += z[j];
    for (Eigen::Index j = 0; j < k; ++j) {
      if (dead[static_cast<std::size_t>(j)]) continue;
      survivors.weights[t] = z[j] / live_mass;
      survivors.means.row(t) = theta.means.row(j);
      survivors.covs.push_back(theta.covs[static_cast<std::size_t>(j)]);
      ++t;
    }
    GmmEval eval(survivors);
    std::vector<double> badness(static_cast<std::size_t>(n));
    const Eigen::Index nb2 = (n + kStatBlock - 1) / kStatBlock;
#pragma omp parallel for schedule(static)
    for (Eigen::Index b = 0; b < nb2; ++b) {
      const Eigen::Index lo = b * kStatBlock, hi = std::min(n, lo + kStatBlock);
      for (Eigen::Index i = lo; i < hi; ++i)
        badness[static_cast<std::size_t>(i)] = x.weight(i) * eval.point_cost(x.point(i));
    }
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!dead[static_cast<std::size_t>(j)]) continue;
      Eigen::Index pick = -1;
      double best = -1.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!used[static_cast<std::size_t>(i)] && badness[static_cast<std::size_t>(i)] > best) {
          best = badness[static_cast<std::size_t>(i)];
          pick = i;
        }
      if (pick < 0) pick = 0;
      used[static_cast<std::size_t>(pick)] = true;
      theta.means.row(j) = x.point(pick);
      theta.covs[static_cast<std::size_t>(j)] =
          clamp_covariance(Eigen::MatrixXd::Identity(d, d), lambda);
      theta.weights[j] = 1.0 / (10.0 * static_cast<double>(k));
      out.rescued.push_back(j);
    }
    theta.weights /= theta.weights.sum();
  }
  return theta;
}

// lambda/2 sum_j z_j tr(Sigma_j^-1): the ridge term the M-step maximizes against,
// so NLL plus this is the objective the iteration actually descends. Plain NLL is
// not monotone under the ridge; this sum is, which is what nll_trace promises.
static double ridge_penalty(const RowMatrixXd& eta, const GmmParams& theta, double lambda) {
  const Eigen::Index d = theta.dim();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  double p = 0.0;
  for (int j = 0; j < theta.k(); ++j) {
    const double z = eta.col(j).sum();
    if (z <= 0.0) continue;
    p += 0.5 * lambda * z * theta.covs[static_cast<std::size_t>(j)].llt().solve(id).trace();
  }
  return p;
}

GmmParams em_fit(const DataSet& x, int k, double lambda, Rng rng, const EmOptions& opt,
                 EmReport* report) {
  if (k < 1 || static_cast<Eigen::Index>(k) > x.n())
    throw DataError("component count out of range");
  EmReport local;
  EmReport& rep = report ? *report : local;
  rep = EmReport{};

  LloydResult init = weighted_lloyd(x, k, rng.substream(0), opt.lloyd_iters);
  RowMatrixXd eta = RowMatrixXd::Zero(x.n(), k);
  for (Eigen::Index i = 0; i < x.n(); ++i)
    eta(i, init.assignment[static_cast<std::size_t>(i)]) = x.weight(i);

  MStepInfo info;
  GmmParams theta = m_step(x, eta, lambda, &info);
  double nll = negative_log_likelihood(x, theta) + ridge_penalty(eta, theta, lambda);
  rep.nll_trace.push_back(nll);
  rep.floor_active.push_back(info.floor_active());
  rep.rescue.push_back(!info.rescued.empty());

  for (int t = 1; t <= opt.max_iters; ++t) {
    GmmEval eval(theta);
    e_step_impl(x, eval, theta, eta);
    theta = m_step(x, eta, lambda, &info);
    const double prev = nll;
    nll = negative_log_likelihood(x, theta) + ridge_penalty(eta, theta, lambda);
    rep.nll_trace.push_back(nll);
    rep.floor_active.push_back(info.floor_active());
    rep.rescue.push_back(!info.rescued.empty());
    rep.iterations = t;
    logf(LogLevel::debug, "em: iter=", t, " obj=", nll, info.floor_active() ? " floor" : "");
    if (std::abs(nll - prev) <= opt.rel_tol * std::abs(prev)) {
      rep.converged = true;
      break;
    }
  }
  logf(LogLevel::info, "em: k=", k, " n=", x.n(), " iters=", rep.iterations,
       rep.converged ? " converged" : " capped", " obj=", nll);
  return theta;
}

GmmParams em_fit_best(const DataSet& x, int k, double lambda, Rng rng, int restarts,
                      const EmOptions& opt, double* best_nll, EmReport* best_report) {
  if (restarts < 1) throw DataError("restarts must be >= 1");
  GmmParams best;
  EmReport best_rep;
  double best_v = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    EmReport rep;
    GmmParams theta = em_fit(x, k, lambda, rng.substream(static_cast<std::uint64_t>(r)), opt, &rep);
    const double v = rep.nll_trace.back();
    if (v < best_v) {
      best_v = v;
      best = std::move(theta);
      best_rep = std::move(rep);
    }
  }
  if (best_nll) *best_nll = best_v;
  if (best_report) *best_report = std::move(best_rep);
  return best;
}

double relative_error_eta(double full_cost, double approx_cost) {
  if (full_cost == 0.0)
    return approx_cost == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs((approx_cost - full_cost) / full_cost);
}

double smoothness_residual(const GmmParams& theta, ConstRowRef x, ConstRowRef y) {
  GmmEval eval(theta);
  const double d2 = (x - y).squaredNorm();
  return d2 / theta.lambda + 2.0 * eval.point_cost(y) - eval.point_cost(x);
}

LikelihoodErrorCheck likelihood_error_check(const DataSet& x, const DataSet& proxy,
                                            const GmmParams& theta) {
  LikelihoodErrorCheck r;
  r.precondition = true;
  const double d = static_cast<double>(theta.dim());
  for (const auto& s : theta.covs) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw NumericError("covariance not positive definite");
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
    if (logdet < -d * kLn2Pi) r.precondition = false;
  }
  const double lx = negative_log_likelihood(x, theta);
  const double lc = negative_log_likelihood(proxy, theta);
  if (lx == 0.0)
    r.rel_error = lc == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  else
    r.rel_error = std::abs(lx - lc) / std::abs(lx);
  return r;
}

void save_theta(const std::string& path, const GmmParams& theta) {
  theta.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "gmcs-theta 1\n";
  out << "k " << theta.k() << "\n";
  out << "d " << theta.dim() << "\n";
  out << "lambda " << num(theta.lambda) << "\n";
  for (Eigen::Index j = 0; j < theta.k(); ++j) {
    out << "component " << j << "\n";
    out << "weight " << num(theta.weights[j]) << "\n";
    out << "mean";
    for (Eigen::Index c = 0; c < theta.dim(); ++c) out << ' ' << num(theta.means(j, c));
    out << "\n";
    for (Eigen::Index r = 0; r < theta.dim(); ++r) {
      out << "cov";
      for (Eigen::Index c = 0; c < theta.dim(); ++c)
        out << ' ' << num(theta.covs[static_cast<std::size_t>(j)](r, c));
      out << "\n";
    }
  }
  if (!out) throw DataError("write failed: " + path);
}

GmmParams load_theta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  std::string tok;
  auto expect = [&](const char* want) {
    if (!(in >> tok) || tok != want)
      throw DataError(path + ": expected '" + want + "', got '" + tok + "'");
  };
  expect("gmcs-theta");
  int version = 0;
  if (!(in >> version) || version != 1) throw DataError(path + ": unsupported theta version");
  GmmParams theta;
  Eigen::Index k = 0, d = 0;
  expect("k");
  if (!(in >> k) || k < 1) throw DataError(path + ": bad k");
  expect("d");
  if (!(in >> d) || d < 1) throw DataError(path + ": bad d");
  expect("lambda");
  if (!(in >> theta.lambda)) throw DataError(path + ": bad lambda");
  theta.weights.resize(k);
  theta.means.resize(k, d);
  theta.covs.assign(static_cast<std::size_t>(k), Eigen::MatrixXd(d, d));
  for (Eigen::Index j = 0; j < k; ++j) {
    expect("component");
    Eigen::Index idx = -1;
    if (!(in >> idx) || idx != j) throw DataError(path + ": component index out of order");
    expect("weight");
    if (!(in >> theta.weights[j])) throw DataError(path + ": bad weight");
    expect("mean");
    for (Eigen::Index c = 0; c < d; ++c)
      if (!(in >> theta.means(j, c))) throw DataError(path + ": bad mean entry");
    for (Eigen::Index r = 0; r < d; ++r) {
      expect("cov");
      for (Eigen::Index c = 0; c < d; ++c)
        if (!(in >> theta.covs[static_cast<std::size_t>(j)](r, c)))
          throw DataError(path + ": bad covariance entry");
    }
  }
  theta.validate();
  return theta;
}

}  // namespace gmcs
