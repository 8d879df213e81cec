#ifndef GMCS_COMPOSE_HPP
#define GMCS_COMPOSE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gmcs/coreset.hpp"

namespace gmcs {

// Union of two coresets: points of `a` followed by points of `b`, weights kept.
// Metadata composes as source_n = sum, epsilon_budget = max, level = max.
// An empty coreset acts as the identity.
Coreset merge_coresets(const Coreset& a, const Coreset& b);

// Re-runs the sampling builder on the coreset's own weighted points, shrinking it
// to m points at step quality delta_step. The recorded budget composes
// multiplicatively: eps_out = (1 + eps_in)(1 + delta_step) - 1. source_n and level
// are preserved. Inputs with at most max(k, 1) points pass through unchanged
// (aside from the budget update): they are already small and the builder needs
// more points than centers.
Coreset compress_coreset(const Coreset& c, int k, std::uint64_t m, double delta_step,
                         const BuildOptions& opt, Rng rng);

// Per-operation quality for a stream of about n_estimate points:
// eps_target / (6 * log2(n_estimate)). Requires eps_target in (0,1), n_estimate >= 2.
double epsilon_schedule(double eps_target, std::uint64_t n_estimate);

struct StreamParams {
  int k = 3;
  std::uint64_t m_leaf = 1024;  // size of every leaf and internal coreset
  double eps_target = 0.1;
  // Expected stream length, used only to set the per-operation budget. 0 means
  // unknown: start from 4 * block_size and double whenever the stream exceeds it.
  std::uint64_t n_estimate = 0;
  std::uint64_t seed = 0;
  BuildOptions build;  // seeding mode and delta for leaf/compress builds
};

// Bounded-memory streaming builder. Points accumulate in a buffer of
// b = max(2 * m_leaf, 1024); a full buffer is compressed into a leaf coreset that
// carries into a binary-counter array of per-level coresets: two coresets meeting
// at a level merge and compress one level up, so at most one coreset per level is
// held and memory stays at b + m_leaf * (levels + 1) points.
//
// Every leaf and merge build takes its own RNG substream keyed by a running build
// counter, so results do not depend on worker count, and a checkpoint that stores
// the counter resumes bit-identically. Exceeding n_estimate doubles it; the
// tightened per-operation budget applies to subsequent builds only, and each
// coreset keeps the budget it was built with.
class CoresetTree {
 public:
  explicit CoresetTree(const StreamParams& params);

  // w must be positive and finite; the first insert fixes the dimension
  void insert(ConstRowRef x, double w = 1.0);
  void insert_block(const DataSet& block);

  // Merges the buffer (as-is if it holds at most m_leaf points, else compressed
  // to a leaf) with all level coresets, then compresses once to m_final points at
  // step quality eps_target / 3. Does not modify the tree; the stream may
  // continue afterwards. Throws DataError on an empty stream.
  Coreset finalize(std::uint64_t m_final) const;

  std::uint64_t n_seen() const { return n_seen_; }
  Eigen::Index dim() const { return dim_; }
  std::uint64_t block_size() const { return block_; }
  std::uint64_t buffer_fill() const { return static_cast<std::uint64_t>(buf_w_.size()); }
  std::uint64_t n_estimate_current() const { return n_est_; }
  double current_eps_prime() const;
  // points currently held: buffer plus all occupied levels
  std::uint64_t stored_points() const;
  // maximum of stored_points over the whole run, sampled inside carry propagation
  std::uint64_t high_water() const { return high_water_; }
  // occupied entries are non-empty; index equals level
  const std::vector<Coreset>& levels() const { return levels_; }
  const StreamParams& params() const { return params_; }

  // Checkpoint format "GMCT" v1: parameters plus full state (buffer, levels,
  // counters). load() resumes the exact state, so continuing a restored tree
  // yields bit-identical coresets.
  void save(const std::string& path) const;
  static CoresetTree load(const std::string& path);

 private:
  void flush_buffer();
  void note_stored(std::uint64_t extra);

  StreamParams params_;
  std::uint64_t block_ = 0;
  Eigen::Index dim_ = 0;  // fixed by the first insert
  std::vector<double> buf_pts_;
  std::vector<double> buf_w_;
  std::vector<Coreset> levels_;
  std::uint64_t n_seen_ = 0;
  std::uint64_t n_est_ = 0;
  std::uint64_t build_counter_ = 0;
  std::uint64_t high_water_ = 0;
};

enum class ParallelMode {
  tree,                 // pairwise merge+compress reduction over partition coresets
  union_then_compress,  // single merge of all partition coresets, one final compress
};

// Splits x into `partitions` contiguous slices, builds a coreset of m points per
// slice (parallel across slices), and combines them per `mode`. Deterministic in
// worker count: slice i always uses substream(1).substream(i) of seed, reduction
// step (level, pair j) uses substream(2).substream(level).substream(j), the final
// union compress uses substream(3). With partitions == 1 this is exactly the
// batch builder on x.
Coreset parallel_build(const DataSet& x, int partitions, int k, std::uint64_t m,
                       const BuildOptions& opt, std::uint64_t seed, ParallelMode mode);

}  // namespace gmcs

#endif
