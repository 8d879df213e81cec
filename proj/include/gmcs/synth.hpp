#ifndef GMCS_SYNTH_HPP
#define GMCS_SYNTH_HPP

#include <string>

#include "gmcs/common.hpp"
#include "gmcs/dataset.hpp"
#include "gmcs/gmm.hpp"

namespace gmcs {

// n unit-weight draws from the mixture. Component choice by cdf inversion, then
// mu + U sqrt(D) z with z standard normal and (U, D) the covariance eigensystem.
// Two uniforms per component pick plus 2d per point; replay depends only on the
// rng and n.
DataSet generate_gmm_sample(Eigen::Index n, const GmmParams& theta, Rng& rng);

// Two spherical unit-covariance components 20 sigma apart with the small one
// carrying weight 1/sqrt(n); the classic case where uniform subsampling misses
// the small cluster.
GmmParams imbalanced_preset(Eigen::Index n, double lambda = 1e-3);

// Three spherical unit-covariance components, equal weights, well separated.
GmmParams spherical_k3_preset(double lambda = 1e-3);

// JSON mixture description: {"lambda": ..., "components": [{"weight": w,
// "mean": [...], "cov": [[...], ...]}, ...]}
GmmParams mixture_from_json(const std::string& path);

}  // namespace gmcs

#endif
