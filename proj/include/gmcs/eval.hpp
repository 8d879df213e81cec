#ifndef GMCS_EVAL_HPP
#define GMCS_EVAL_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gmcs/compose.hpp"
#include "gmcs/coreset.hpp"
#include "gmcs/gmm.hpp"

namespace gmcs {

// Seed-shuffled split: first round(train_fraction * n) shuffled indices train,
// the rest holdout. Both halves returned in ascending index order.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_indices(
    Eigen::Index n, double train_fraction, Rng rng);

DataSet subset(const DataSet& x, const std::vector<Eigen::Index>& idx);

// m of n points drawn uniformly without replacement, in ascending source order.
// reweight=false keeps unit weights (the fitting arm); reweight=true assigns each
// point total_weight/m so set costs stay comparable to the full set (probe arm).
DataSet uniform_subsample(const DataSet& x, std::uint64_t m, Rng rng, bool reweight);

// Randomized audit set for the coreset guarantee, which quantifies over all
// constrained mixtures: means drawn by k-means++ on x, covariances from scaled
// Wishart-style draws clamped into the spectrum band, weights Dirichlet-uniform.
std::vector<GmmParams> probe_thetas(const DataSet& x, int k, double lambda, int count, Rng rng);

// max over probes of |cost(proxy, theta) / cost(x, theta) - 1|
double probe_max_ratio(const DataSet& x, const DataSet& proxy,
                       const std::vector<GmmParams>& probes);

struct EvalOptions {
  int k = 3;
  double lambda = 1e-3;
  double train_fraction = 0.8;
  int trials = 20;
  int restarts = 10;     // baseline best-of-R full-data fits
  int probe_count = 50;  // 0 disables the probe-ratio column (reported as 0)
  BuildOptions build;
  EmOptions em;
};

struct EvalRow {
  std::uint64_t m = 0;
  std::string method;  // "coreset" or "uniform"
  double median_eta = 0.0;
  double p90_eta = 0.0;
  double probe_max_ratio = 0.0;  // median over trials of the per-trial max ratio
  double build_s = 0.0;          // median seconds
  double fit_s = 0.0;            // median seconds
};

// The scaled evaluation protocol: one shared split (substream 0) and one shared
// best-of-R baseline fit on the train half (substream 1); probes drawn once on
// the train half (substream 2). Per (size, trial): a coreset of the train half
// and a uniform subsample at equal m, each fit by single-restart weighted EM;
// eta is the relative holdout-NLL error against the baseline. The uniform arm
// fits with unit weights but is probed with total/m weights. Trials may run
// concurrently; every substream is indexed by (size, trial, arm), so results do
// not depend on worker count.
std::vector<EvalRow> evaluate_sizes(const DataSet& x, const std::vector<std::uint64_t>& sizes,
                                    const EvalOptions& opt, std::uint64_t seed);

// CSV with header m,method,median_eta,p90_eta,probe_max_ratio,build_s,fit_s
std::string eval_csv(const std::vector<EvalRow>& rows);

// aligned text table, 4 significant digits
std::string eval_table(const std::vector<EvalRow>& rows);

}  // namespace gmcs

#endif
