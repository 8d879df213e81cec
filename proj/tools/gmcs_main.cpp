#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "gmcs/common.hpp"
#include "gmcs/compose.hpp"
#include "gmcs/coreset.hpp"
#include "gmcs/dataset.hpp"
#include "gmcs/eval.hpp"
#include "gmcs/gmm.hpp"
#include "gmcs/synth.hpp"

namespace {

using nlohmann::ordered_json;

struct Args {
  std::string input;
  std::string output;
  std::string format = "csv";
  bool weighted = false;
  int k = 3;
  std::uint64_t m = 1000;
  double epsilon = 0.1;
  double delta = 0.1;
  double lambda = 1e-3;
  std::uint64_t seed = 0;
  int workers = 0;
  // gen
  std::string preset;
  std::string mixture;
  std::int64_t n = 10000;
  // build
  std::string mode = "batch";
  std::string seeding = "kmeanspp";
  std::string scheme = "tree";
  int partitions = 4;
  std::uint64_t m_leaf = 0;  // 0: use m
  std::uint64_t n_estimate = 0;
  // fit
  int restarts = 1;
  int max_iters = 100;
  double rel_tol = 1e-3;
  // eval
  std::vector<std::uint64_t> sizes;
  int trials = 20;
  int eval_restarts = 10;
  int probe_thetas = 50;
  double train_fraction = 0.8;
  // stream-demo
  std::string checkpoint;
};

gmcs::FileFormat parse_format(const std::string& s) {
  if (s == "csv") return gmcs::FileFormat::csv;
  if (s == "f64le") return gmcs::FileFormat::f64le;
  throw gmcs::DataError("unknown format: " + s);
}

gmcs::SeedingMode parse_seeding(const std::string& s) {
  if (s == "kmeanspp") return gmcs::SeedingMode::kmeanspp;
  if (s == "adaptive") return gmcs::SeedingMode::adaptive;
  throw gmcs::DataError("unknown seeding mode: " + s);
}

void apply_workers(int workers) {
#ifdef _OPENMP
  if (workers > 0) omp_set_num_threads(workers);
#else
  (void)workers;
#endif
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_manifest(const std::string& output_path, const ordered_json& j) {
  const std::string path = output_path + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw gmcs::DataError("cannot write: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw gmcs::DataError("write failed: " + path);
}

ordered_json coreset_meta_json(const gmcs::Coreset& c) {
  return ordered_json{{"rows", c.n()},
                      {"dim", c.dim()},
                      {"total_weight", c.weights().sum()},
                      {"source_n", c.meta().source_n},
                      {"m_requested", c.meta().m_requested},
                      {"epsilon_budget", c.meta().epsilon_budget},
                      {"level", c.meta().level},
                      {"points_hash", gmcs::hex64(gmcs::hash_coreset(c))}};
}

int run_gen(const Args& a) {
  if (a.preset.empty() == a.mixture.empty()) {
    std::cerr << "gen: give exactly one of --preset / --mixture\n";
    return 2;
  }
  if (a.n < 1) {
    std::cerr << "gen: --n must be positive\n";
    return 2;
  }
  gmcs::GmmParams theta;
  if (!a.mixture.empty())
    theta = gmcs::mixture_from_json(a.mixture);
  else if (a.preset == "imbalanced")
    theta = gmcs::imbalanced_preset(a.n, a.lambda);
  else if (a.preset == "spherical-k3")
    theta = gmcs::spherical_k3_preset(a.lambda);
  else
    throw gmcs::DataError("unknown preset: " + a.preset);

  gmcs::Rng rng(a.seed);
  const gmcs::DataSet ds = gmcs::generate_gmm_sample(a.n, theta, rng);
  gmcs::save_points(a.output, ds, parse_format(a.format), a.weighted);

  ordered_json man{
      {"command", "gen"},
      {"config",
       {{"preset", a.preset},
        {"mixture", a.mixture},
        {"n", a.n},
        {"lambda", a.lambda},
        {"seed", a.seed},
        {"format", a.format},
        {"weighted", a.weighted},
        {"output", a.output}}},
      {"results",
       {{"n", ds.n()},
        {"dim", ds.dim()},
        {"components", theta.k()},
        {"points_hash", gmcs::hex64(gmcs::hash_points(ds))},
        {"file_hash", gmcs::hex64(gmcs::fnv1a64_file(a.output))}}}};
  write_manifest(a.output, man);
  std::printf("wrote %s: n=%lld d=%lld hash=%s\n", a.output.c_str(),
              static_cast<long long>(ds.n()), static_cast<long long>(ds.dim()),
              gmcs::hex64(gmcs::hash_points(ds)).c_str());
  return 0;
}

int run_build(const Args& a) {
  const auto fmt = parse_format(a.format);
  gmcs::BuildOptions opt;
  opt.seeding = parse_seeding(a.seeding);
  opt.delta = a.delta;
  opt.epsilon = a.epsilon;
  opt.lambda = a.lambda;

  ordered_json config{{"input", a.input},       {"output", a.output},
                      {"format", a.format},     {"weighted", a.weighted},
                      {"mode", a.mode},         {"seeding", a.seeding},
                      {"k", a.k},               {"m", a.m},
                      {"epsilon", a.epsilon},   {"delta", a.delta},
                      {"lambda", a.lambda},     {"seed", a.seed},
                      {"workers", a.workers},   {"partitions", a.partitions},
                      {"scheme", a.scheme},     {"m_leaf", a.m_leaf},
                      {"n_estimate", a.n_estimate}};
  ordered_json results;
  gmcs::Coreset c;
  const auto t0 = std::chrono::steady_clock::now();

  if (a.mode == "batch") {
    const gmcs::DataSet x = gmcs::load_points(a.input, fmt, a.weighted);
    gmcs::BuildDiagnostics diag;
    c = gmcs::build_coreset(x, a.k, a.m, opt, gmcs::Rng(a.seed), &diag);
    const double identity_err =
        diag.identity_expected > 0.0
            ? std::abs(diag.sum_s - diag.identity_expected) / diag.identity_expected
            : 0.0;
    results["diagnostics"] = {
        {"phi", diag.seed.cost},
        {"alpha", diag.seed.alpha},
        {"beta", diag.seed.beta()},
        {"sum_s", diag.sum_s},
        {"identity_expected", diag.identity_expected},
        {"identity_rel_error", identity_err},
        {"total_bound", diag.total_bound},
        {"total_bound_alt", diag.total_bound_alt},
        {"nonempty_cells", diag.nonempty_cells},
        {"advisory_size_bound",
         gmcs::coreset_size_bound_real(a.k, x.dim(), a.epsilon, a.delta, a.lambda)}};
  } else if (a.mode == "parallel") {
    const gmcs::DataSet x = gmcs::load_points(a.input, fmt, a.weighted);
    const auto mode = a.scheme == "union" ? gmcs::ParallelMode::union_then_compress
                                          : gmcs::ParallelMode::tree;
    c = gmcs::parallel_build(x, a.partitions, a.k, a.m, opt, a.seed, mode);
  } else if (a.mode == "stream") {
    gmcs::StreamParams sp;
    sp.k = a.k;
    sp.m_leaf = a.m_leaf > 0 ? a.m_leaf : a.m;
    sp.eps_target = a.epsilon;
    sp.n_estimate = a.n_estimate;
    sp.seed = a.seed;
    sp.build = opt;
    gmcs::CoresetTree tree(sp);
    gmcs::stream_points(a.input, fmt, a.weighted,
                        [&](gmcs::ConstRowRef x, double w) { tree.insert(x, w); });
    c = tree.finalize(a.m);
    results["stream"] = {{"n_seen", tree.n_seen()},
                         {"block_size", tree.block_size()},
                         {"m_leaf", sp.m_leaf},
                         {"eps_prime", tree.current_eps_prime()},
                         {"n_estimate_final", tree.n_estimate_current()},
                         {"high_water_points", tree.high_water()},
                         {"levels", tree.levels().size()}};
  } else {
    std::cerr << "build: unknown --mode " << a.mode << "\n";
    return 2;
  }

  const double build_s = seconds_since(t0);
  // Coresets are always weighted f64le; --format applies to the input only.
  gmcs::save_points(a.output, c.as_dataset(), gmcs::FileFormat::f64le, /*weighted=*/true);
  results["coreset"] = coreset_meta_json(c);
  results["build_seconds"] = build_s;
  results["file_hash"] = gmcs::hex64(gmcs::fnv1a64_file(a.output));

  ordered_json man{{"command", "build"}, {"config", config}, {"results", results}};
  write_manifest(a.output, man);
  std::printf("coreset %s: rows=%lld of m=%llu, %.3fs, hash=%s\n", a.output.c_str(),
              static_cast<long long>(c.n()), static_cast<unsigned long long>(a.m), build_s,
              gmcs::hex64(gmcs::hash_coreset(c)).c_str());
  return 0;
}

int run_fit(const Args& a) {
  const gmcs::DataSet x = gmcs::load_points(a.input, parse_format(a.format), a.weighted);
  if (a.restarts < 1) {
    std::cerr << "fit: --restarts must be positive\n";
    return 2;
  }
  gmcs::EmOptions em;
  em.max_iters = a.max_iters;
  em.rel_tol = a.rel_tol;

  gmcs::Rng master(a.seed);
  gmcs::GmmParams best;
  gmcs::EmReport best_report;
  double best_nll = 0.0;
  int best_r = -1;
  std::vector<double> restart_nlls(static_cast<std::size_t>(a.restarts));
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < a.restarts; ++r) {
    gmcs::EmReport rep;
    gmcs::GmmParams theta =
        gmcs::em_fit(x, a.k, a.lambda, master.substream(static_cast<std::uint64_t>(r)), em, &rep);
    const double nll = rep.nll_trace.back();
    restart_nlls[static_cast<std::size_t>(r)] = nll;
    if (best_r < 0 || nll < best_nll) {
      best_nll = nll;
      best_r = r;
      best = std::move(theta);
      best_report = std::move(rep);
    }
  }
  const double fit_s = seconds_since(t0);
  gmcs::save_theta(a.output, best);

  int floor_iters = 0;
  for (bool f : best_report.floor_active) floor_iters += f ? 1 : 0;
  ordered_json man{
      {"command", "fit"},
      {"config",
       {{"input", a.input},
        {"output", a.output},
        {"format", a.format},
        {"weighted", a.weighted},
        {"k", a.k},
        {"lambda", a.lambda},
        {"seed", a.seed},
        {"restarts", a.restarts},
        {"max_iters", a.max_iters},
        {"rel_tol", a.rel_tol},
        {"workers", a.workers}}},
      {"results",
       {{"best_restart", best_r},
        {"best_nll", best_nll},
        {"restart_nlls", restart_nlls},
        {"iterations", best_report.iterations},
        {"converged", best_report.converged},
        {"floor_active_iterations", floor_iters},
        {"nll_trace", best_report.nll_trace},
        {"fit_seconds", fit_s},
        {"file_hash", gmcs::hex64(gmcs::fnv1a64_file(a.output))}}}};
  write_manifest(a.output, man);
  std::printf("fit %s: k=%d restarts=%d best=%d nll=%.6f iters=%d %s, %.3fs\n", a.output.c_str(),
              a.k, a.restarts, best_r, best_nll, best_report.iterations,
              best_report.converged ? "converged" : "max-iters", fit_s);
  return 0;
}

int run_eval(const Args& a) {
  const gmcs::DataSet x = gmcs::load_points(a.input, parse_format(a.format), a.weighted);
  gmcs::EvalOptions eo;
  eo.k = a.k;
  eo.lambda = a.lambda;
  eo.train_fraction = a.train_fraction;
  eo.trials = a.trials;
  eo.restarts = a.eval_restarts;
  eo.probe_count = a.probe_thetas;
  eo.build.seeding = parse_seeding(a.seeding);
  eo.build.delta = a.delta;
  eo.build.epsilon = a.epsilon;
  eo.em.max_iters = a.max_iters;
  eo.em.rel_tol = a.rel_tol;

  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = gmcs::evaluate_sizes(x, a.sizes, eo, a.seed);
  const double eval_s = seconds_since(t0);

  const std::string csv = gmcs::eval_csv(rows);
  std::ofstream out(a.output);
  if (!out) throw gmcs::DataError("cannot write: " + a.output);
  out << csv;
  out.close();
  std::fputs(gmcs::eval_table(rows).c_str(), stdout);

  ordered_json man{{"command", "eval"},
                   {"config",
                    {{"input", a.input},
                     {"output", a.output},
                     {"format", a.format},
                     {"weighted", a.weighted},
                     {"k", a.k},
                     {"sizes", a.sizes},
                     {"trials", a.trials},
                     {"restarts", a.eval_restarts},
                     {"probe_thetas", a.probe_thetas},
                     {"train_fraction", a.train_fraction},
                     {"epsilon", a.epsilon},
                     {"delta", a.delta},
                     {"lambda", a.lambda},
                     {"seeding", a.seeding},
                     {"seed", a.seed},
                     {"workers", a.workers}}},
                   {"results",
                    {{"eval_seconds", eval_s},
                     {"file_hash", gmcs::hex64(gmcs::fnv1a64_file(a.output))}}}};
  write_manifest(a.output, man);
  return 0;
}

int run_stream_demo(const Args& a) {
  gmcs::StreamParams sp;
  sp.k = a.k;
  sp.m_leaf = a.m_leaf > 0 ? a.m_leaf : 512;
  sp.eps_target = a.epsilon;
  sp.n_estimate = a.n_estimate;
  sp.seed = a.seed;
  sp.build.seeding = parse_seeding(a.seeding);
  sp.build.delta = a.delta;
  sp.build.epsilon = a.epsilon;

  // data: a file if given, otherwise a synthetic three-cluster sample
  gmcs::RowMatrixXd pts;
  Eigen::VectorXd weights;
  if (!a.input.empty()) {
    const gmcs::DataSet ds = gmcs::load_points(a.input, parse_format(a.format), a.weighted);
    pts = ds.points();
    weights = ds.weights();
  } else {
    gmcs::Rng rng(a.seed + 1);
    const gmcs::DataSet ds =
        gmcs::generate_gmm_sample(a.n, gmcs::spherical_k3_preset(a.lambda), rng);
    pts = ds.points();
    weights = ds.weights();
  }
  const auto n = pts.rows();

  gmcs::CoresetTree tree(sp);
  const Eigen::Index half = n / 2;
  for (Eigen::Index i = 0; i < half; ++i) tree.insert(pts.row(i), weights[i]);

  bool checkpoint_match = true;
  if (!a.checkpoint.empty()) {
    tree.save(a.checkpoint);
    gmcs::CoresetTree resumed = gmcs::CoresetTree::load(a.checkpoint);
    for (Eigen::Index i = half; i < n; ++i) {
      tree.insert(pts.row(i), weights[i]);
      resumed.insert(pts.row(i), weights[i]);
    }
    const gmcs::Coreset direct = tree.finalize(a.m);
    const gmcs::Coreset replayed = resumed.finalize(a.m);
    checkpoint_match = gmcs::hash_coreset(direct) == gmcs::hash_coreset(replayed);
    std::printf("checkpoint resume: %s\n", checkpoint_match ? "hash-identical" : "MISMATCH");
  } else {
    for (Eigen::Index i = half; i < n; ++i) tree.insert(pts.row(i), weights[i]);
  }

  const gmcs::Coreset c = tree.finalize(a.m);
  int occupied = 0;
  for (const auto& lvl : tree.levels()) occupied += lvl.empty() ? 0 : 1;
  std::printf(
      "stream: n=%lld block=%llu m_leaf=%llu levels=%zu (occupied %d) stored=%llu "
      "high_water=%llu eps'=%.6f\n",
      static_cast<long long>(n), static_cast<unsigned long long>(tree.block_size()),
      static_cast<unsigned long long>(sp.m_leaf), tree.levels().size(), occupied,
      static_cast<unsigned long long>(tree.stored_points()),
      static_cast<unsigned long long>(tree.high_water()), tree.current_eps_prime());
  std::printf("final coreset: rows=%lld budget=%.6f hash=%s\n", static_cast<long long>(c.n()),
              c.meta().epsilon_budget, gmcs::hex64(gmcs::hash_coreset(c)).c_str());

  if (!a.output.empty()) {
    gmcs::save_points(a.output, c.as_dataset(), gmcs::FileFormat::f64le, /*weighted=*/true);
    ordered_json man{{"command", "stream-demo"},
                     {"config",
                      {{"input", a.input},
                       {"output", a.output},
                       {"n", n},
                       {"k", a.k},
                       {"m", a.m},
                       {"m_leaf", sp.m_leaf},
                       {"epsilon", a.epsilon},
                       {"seed", a.seed},
                       {"checkpoint", a.checkpoint}}},
                     {"results",
                      {{"high_water_points", tree.high_water()},
                       {"levels_occupied", occupied},
                       {"checkpoint_match", checkpoint_match},
                       {"coreset", coreset_meta_json(c)},
                       {"file_hash", gmcs::hex64(gmcs::fnv1a64_file(a.output))}}}};
    write_manifest(a.output, man);
  }
  return checkpoint_match ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coreset construction and weighted EM fitting for Gaussian mixtures"};
  app.require_subcommand(1);
  Args a;

  auto add_shared = [&](CLI::App* cmd, bool needs_input) {
    if (needs_input) cmd->add_option("--input", a.input, "input points file")->required();
    cmd->add_option("--format", a.format, "file format")
        ->check(CLI::IsMember({"csv", "f64le"}));
    cmd->add_flag("--weighted", a.weighted, "input carries a leading weight column");
    cmd->add_option("--k", a.k, "mixture components")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", a.lambda, "spectrum band [lambda, 1/lambda]")->capture_default_str()
        ->check(CLI::Range(1e-12, 1.0 - 1e-12));
    cmd->add_option("--seed", a.seed, "master RNG seed");
    cmd->add_option("--workers", a.workers, "worker threads (0: library default)");
  };

  auto* gen = app.add_subcommand("gen", "sample a synthetic mixture to a points file");
  add_shared(gen, false);
  gen->add_option("--output", a.output, "points file to write")->required();
  gen->add_option("--preset", a.preset, "named mixture")
      ->check(CLI::IsMember({"imbalanced", "spherical-k3"}));
  gen->add_option("--mixture", a.mixture, "mixture description JSON file");
  gen->add_option("--n", a.n, "points to sample")->check(CLI::PositiveNumber);

  auto* build = app.add_subcommand("build", "compress a points file into a coreset");
  add_shared(build, true);
  build->add_option("--output", a.output, "coreset file to write")->required();
  build->add_option("--m", a.m, "coreset draw budget")->required()->check(CLI::PositiveNumber);
  build->add_option("--epsilon", a.epsilon, "target quality budget")->capture_default_str()
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  build->add_option("--delta", a.delta, "seeding failure probability")->capture_default_str()
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  build->add_option("--mode", a.mode, "construction mode")->capture_default_str()
      ->check(CLI::IsMember({"batch", "stream", "parallel"}));
  build->add_option("--seeding", a.seeding, "bicriteria seeding")->capture_default_str()
      ->check(CLI::IsMember({"kmeanspp", "adaptive"}));
  build->add_option("--partitions", a.partitions, "parallel mode partitions")->capture_default_str()
      ->check(CLI::PositiveNumber);
  build->add_option("--scheme", a.scheme, "parallel composition scheme")->capture_default_str()
      ->check(CLI::IsMember({"tree", "union"}));
  build->add_option("--m-leaf", a.m_leaf, "stream mode leaf size (0: use --m)");
  build->add_option("--n-estimate", a.n_estimate, "stream length estimate (0: adaptive)");

  auto* fit = app.add_subcommand("fit", "weighted EM fit, best of restarts");
  add_shared(fit, true);
  fit->add_option("--output", a.output, "theta file to write")->required();
  fit->add_option("--restarts", a.restarts, "independent EM runs")->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit->add_option("--max-iters", a.max_iters, "EM iteration cap")->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit->add_option("--rel-tol", a.rel_tol, "relative NLL stopping tolerance")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "coreset vs uniform subsample comparison");
  add_shared(eval, true);
  eval->add_option("--output", a.output, "CSV file to write")->required();
  eval->add_option("--sizes", a.sizes, "coreset sizes to evaluate")
      ->required()
      ->delimiter(',');
  eval->add_option("--trials", a.trials, "trials per size")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--restarts", a.eval_restarts, "baseline full-fit restarts")->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval->add_option("--probe-thetas", a.probe_thetas, "probe mixtures for the ratio check")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--train-fraction", a.train_fraction, "train split fraction")->capture_default_str()
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  eval->add_option("--epsilon", a.epsilon, "coreset budget")->capture_default_str();
  eval->add_option("--delta", a.delta, "seeding failure probability")->capture_default_str();
  eval->add_option("--seeding", a.seeding, "bicriteria seeding")->capture_default_str()
      ->check(CLI::IsMember({"kmeanspp", "adaptive"}));
  eval->add_option("--max-iters", a.max_iters, "EM iteration cap")->capture_default_str();
  eval->add_option("--rel-tol", a.rel_tol, "relative NLL stopping tolerance")->capture_default_str();

  auto* demo = app.add_subcommand("stream-demo", "stream a set through the coreset tree");
  add_shared(demo, false);
  demo->add_option("--input", a.input, "points file (omit to synthesize)");
  demo->add_option("--output", a.output, "final coreset file (optional)");
  demo->add_option("--n", a.n, "synthetic points when no input")->capture_default_str()
      ->check(CLI::PositiveNumber);
  demo->add_option("--m", a.m, "final coreset size")->capture_default_str()->check(CLI::PositiveNumber);
  demo->add_option("--m-leaf", a.m_leaf, "leaf size (default 512)");
  demo->add_option("--epsilon", a.epsilon, "target stream budget")->capture_default_str();
  demo->add_option("--delta", a.delta, "seeding failure probability")->capture_default_str();
  demo->add_option("--seeding", a.seeding, "bicriteria seeding")->capture_default_str()
      ->check(CLI::IsMember({"kmeanspp", "adaptive"}));
  demo->add_option("--n-estimate", a.n_estimate, "stream length estimate (0: adaptive)");
  demo->add_option("--checkpoint", a.checkpoint, "save/load a mid-stream checkpoint here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_workers(a.workers);
    if (gen->parsed()) return run_gen(a);
    if (build->parsed()) return run_build(a);
    if (fit->parsed()) return run_fit(a);
    if (eval->parsed()) return run_eval(a);
    if (demo->parsed()) return run_stream_demo(a);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const gmcs::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const gmcs::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
