#include "gmcs/compose.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gmcs/binio.hpp"

namespace gmcs {

namespace {

using namespace binio;

// weighted point block, same layout as the dataset binary format
void write_block(std::ostream& os, const RowMatrixXd& pts, const Eigen::VectorXd& w) {
  put_bytes(os, "GMCS", 4);
  put_u32(os, 1);
  put_u64(os, static_cast<std::uint64_t>(pts.rows()));
  put_u32(os, static_cast<std::uint32_t>(pts.cols()));
  unsigned char has_w = 1;
  put_bytes(os, &has_w, 1);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    put_f64(os, w[i]);
    for (Eigen::Index j = 0; j < pts.cols(); ++j) put_f64(os, pts(i, j));
  }
}

void read_block(std::istream& is, const std::string& path, RowMatrixXd& pts, Eigen::VectorXd& w) {
  char magic[4];
  std::uint32_t version = 0, d32 = 0;
  std::uint64_t n64 = 0;
  unsigned char has_w = 0;
  if (!get_bytes(is, magic, 4) || std::memcmp(magic, "GMCS", 4) != 0)
    throw DataError(path + ": bad point block magic");
  if (!get_u32(is, version) || version != 1) throw DataError(path + ": bad point block version");
  if (!get_u64(is, n64) || !get_u32(is, d32) || !get_bytes(is, &has_w, 1) || has_w != 1)
    throw DataError(path + ": bad point block header");
  if (n64 == 0 || d32 == 0 || n64 > (1ull << 40) || d32 > (1u << 20))
    throw DataError(path + ": implausible point block header");
  const auto n = static_cast<Eigen::Index>(n64);
  const auto d = static_cast<Eigen::Index>(d32);
  pts.resize(n, d);
  w.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!get_f64(is, w[i])) throw DataError(path + ": truncated point block");
    for (Eigen::Index j = 0; j < d; ++j)
      if (!get_f64(is, pts(i, j))) throw DataError(path + ": truncated point block");
  }
}

void write_coreset(std::ostream& os, const Coreset& c) {
  put_u64(os, c.meta().source_n);
  put_u64(os, c.meta().m_requested);
  put_f64(os, c.meta().epsilon_budget);
  put_i32(os, c.meta().level);
  write_block(os, c.points(), c.weights());
}

Coreset read_coreset(std::istream& is, const std::string& path) {
  CoresetMeta meta;
  if (!get_u64(is, meta.source_n) || !get_u64(is, meta.m_requested) ||
      !get_f64(is, meta.epsilon_budget) || !get_i32(is, meta.level))
    throw DataError(path + ": truncated coreset header");
  RowMatrixXd pts;
  Eigen::VectorXd w;
  read_block(is, path, pts, w);
  return Coreset(std::move(pts), std::move(w), meta);
}

}  // namespace

Coreset merge_coresets(const Coreset& a, const Coreset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim() != b.dim())
    throw DataError("merge dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()));
  RowMatrixXd pts(a.n() + b.n(), a.dim());
  pts.topRows(a.n()) = a.points();
  pts.bottomRows(b.n()) = b.points();
  Eigen::VectorXd w(a.n() + b.n());
  w.head(a.n()) = a.weights();
  w.tail(b.n()) = b.weights();
  CoresetMeta meta;
  meta.source_n = a.meta().source_n + b.meta().source_n;
  meta.m_requested = a.meta().m_requested + b.meta().m_requested;
  meta.epsilon_budget = std::max(a.meta().epsilon_budget, b.meta().epsilon_budget);
  meta.level = std::max(a.meta().level, b.meta().level);
  return Coreset(std::move(pts), std::move(w), meta);
}

Coreset compress_coreset(const Coreset& c, int k, std::uint64_t m, double delta_step,
                         const BuildOptions& opt, Rng rng) {
  if (c.empty()) throw DataError("cannot compress an empty coreset");
  if (k < 1) throw DataError("k must be positive");
  if (m < 1) throw DataError("m must be positive");
  if (!(delta_step >= 0.0) || !std::isfinite(delta_step))
    throw DataError("invalid compression step budget");
  const double composed = (1.0 + c.meta().epsilon_budget) * (1.0 + delta_step) - 1.0;
  if (c.n() <= std::max<Eigen::Index>(k, 1)) {
    Coreset out = c;
    out.meta().epsilon_budget = composed;
    out.meta().m_requested = m;
    return out;
  }
  BuildOptions o = opt;
  o.epsilon = delta_step;
  Coreset out = build_coreset(c.as_dataset(), k, m, o, rng);
  out.meta().source_n = c.meta().source_n;
  out.meta().m_requested = m;
  out.meta().epsilon_budget = composed;
  out.meta().level = c.meta().level;
  return out;
}

double epsilon_schedule(double eps_target, std::uint64_t n_estimate) {
  if (!(eps_target > 0.0) || !(eps_target < 1.0))
    throw DataError("eps_target must be in (0, 1)");
  if (n_estimate < 2) throw DataError("n_estimate must be at least 2");
  return eps_target / (6.0 * std::log2(static_cast<double>(n_estimate)));
}

CoresetTree::CoresetTree(const StreamParams& params) : params_(params) {
  if (params_.k < 1) throw DataError("k must be positive");
  if (params_.m_leaf < 1) throw DataError("m_leaf must be positive");
  if (!(params_.eps_target > 0.0) || !(params_.eps_target < 1.0))
    throw DataError("eps_target must be in (0, 1)");
  if (!(params_.build.delta > 0.0) || !(params_.build.delta < 1.0))
    throw DataError("delta must be in (0, 1)");
  block_ = std::max<std::uint64_t>(2 * params_.m_leaf, 1024);
  if (static_cast<std::uint64_t>(params_.k) > block_)
    throw DataError("k exceeds the stream block size");
  n_est_ = params_.n_estimate > 0 ? params_.n_estimate : 4 * block_;
  if (n_est_ < 2) n_est_ = 2;
}

double CoresetTree::current_eps_prime() const {
  return epsilon_schedule(params_.eps_target, n_est_);
}

std::uint64_t CoresetTree::stored_points() const {
  std::uint64_t total = buffer_fill();
  for (const auto& c : levels_) total += static_cast<std::uint64_t>(c.n());
  return total;
}

void CoresetTree::note_stored(std::uint64_t extra) {
  high_water_ = std::max(high_water_, stored_points() + extra);
}

void CoresetTree::insert(ConstRowRef x, double w) {
  if (!(w > 0.0) || !std::isfinite(w)) throw DataError("stream weight must be positive");
  if (dim_ == 0) {
    if (x.size() < 1) throw DataError("empty point");
    dim_ = x.size();
    buf_pts_.reserve(static_cast<std::size_t>(block_) * static_cast<std::size_t>(dim_));
    buf_w_.reserve(static_cast<std::size_t>(block_));
  } else if (x.size() != dim_) {
    throw DataError("stream dimension mismatch: expected " + std::to_string(dim_) + ", got " +
                    std::to_string(x.size()));
  }
  for (Eigen::Index j = 0; j < dim_; ++j) {
    if (!std::isfinite(x[j])) throw DataError("non-finite stream coordinate");
    buf_pts_.push_back(x[j]);
  }
  buf_w_.push_back(w);
  ++n_seen_;
  while (n_seen_ > n_est_) n_est_ *= 2;  // tightened budget applies to later builds
  note_stored(0);
  if (buffer_fill() == block_) flush_buffer();
}

void CoresetTree::insert_block(const DataSet& block) {
  for (Eigen::Index i = 0; i < block.n(); ++i) insert(block.point(i), block.weight(i));
}

void CoresetTree::flush_buffer() {
  const auto fill = static_cast<Eigen::Index>(buf_w_.size());
  RowMatrixXd pts =
      Eigen::Map<const RowMatrixXd>(buf_pts_.data(), fill, dim_);
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(buf_w_.data(), fill);
  DataSet block(std::move(pts), std::move(w));

  const double eps_prime = current_eps_prime();
  BuildOptions o = params_.build;
  o.epsilon = eps_prime;
  // buffer and fresh leaf coexist while the leaf is drawn
  note_stored(params_.m_leaf);
  Rng leaf_rng = Rng(params_.seed).substream(1).substream(build_counter_++);
  Coreset carry = build_coreset(block, params_.k, params_.m_leaf, o, leaf_rng);
  buf_pts_.clear();
  buf_w_.clear();

  std::size_t lvl = 0;
  while (lvl < levels_.size() && !levels_[lvl].empty()) {
    Coreset merged = merge_coresets(levels_[lvl], carry);
    levels_[lvl] = Coreset{};
    // union and its compression coexist during the build
    note_stored(static_cast<std::uint64_t>(merged.n()) + params_.m_leaf);
    Rng up_rng = Rng(params_.seed).substream(1).substream(build_counter_++);
    carry = compress_coreset(merged, params_.k, params_.m_leaf, current_eps_prime(),
                             params_.build, up_rng);
    carry.meta().level = static_cast<int>(lvl) + 1;
    ++lvl;
  }
  if (lvl == levels_.size())
    levels_.push_back(std::move(carry));
  else
    levels_[lvl] = std::move(carry);
  note_stored(0);
  logf(LogLevel::debug, "stream: n_seen=", n_seen_, " carry to level ", lvl,
       " stored=", stored_points(), " high_water=", high_water());
}

Coreset CoresetTree::finalize(std::uint64_t m_final) const {
  if (n_seen_ == 0) throw DataError("empty stream");
  if (m_final < 1) throw DataError("m_final must be positive");
  Coreset acc;
  for (const auto& c : levels_) acc = merge_coresets(acc, c);
  if (!buf_w_.empty()) {
    const auto fill = static_cast<Eigen::Index>(buf_w_.size());
    RowMatrixXd pts = Eigen::Map<const RowMatrixXd>(buf_pts_.data(), fill, dim_);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(buf_w_.data(), fill);
    Coreset partial;
    if (static_cast<std::uint64_t>(fill) <= params_.m_leaf) {
      // small enough to carry verbatim: a set is an exact coreset of itself
      CoresetMeta meta;
      meta.source_n = static_cast<std::uint64_t>(fill);
      meta.m_requested = static_cast<std::uint64_t>(fill);
      meta.epsilon_budget = 0.0;
      meta.level = 0;
      partial = Coreset(std::move(pts), std::move(w), meta);
    } else {
      DataSet block(std::move(pts), std::move(w));
      BuildOptions o = params_.build;
      o.epsilon = current_eps_prime();
      Rng r = Rng(params_.seed).substream(2).substream(n_seen_);
      partial = build_coreset(block, params_.k, params_.m_leaf, o, r);
    }
    acc = merge_coresets(acc, partial);
  }
  Rng r = Rng(params_.seed).substream(3).substream(n_seen_);
  const int top = acc.meta().level;
  Coreset out = compress_coreset(acc, params_.k, m_final, params_.eps_target / 3.0,
                                 params_.build, r);
  out.meta().level = top + 1;
  return out;
}

void CoresetTree::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write: " + path);
  put_bytes(out, "GMCT", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(params_.k));
  put_u64(out, params_.m_leaf);
  put_f64(out, params_.eps_target);
  put_u64(out, params_.n_estimate);
  put_u64(out, params_.seed);
  unsigned char seeding = params_.build.seeding == SeedingMode::adaptive ? 1 : 0;
  put_bytes(out, &seeding, 1);
  put_f64(out, params_.build.delta);
  put_f64(out, params_.build.epsilon);
  put_u32(out, static_cast<std::uint32_t>(dim_));
  put_u64(out, n_seen_);
  put_u64(out, n_est_);
  put_u64(out, build_counter_);
  put_u64(out, high_water_);
  put_u64(out, buffer_fill());
  if (!buf_w_.empty()) {
    const auto fill = static_cast<Eigen::Index>(buf_w_.size());
    RowMatrixXd pts = Eigen::Map<const RowMatrixXd>(buf_pts_.data(), fill, dim_);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(buf_w_.data(), fill);
    write_block(out, pts, w);
  }
  put_u32(out, static_cast<std::uint32_t>(levels_.size()));
  for (const auto& c : levels_) {
    unsigned char occupied = c.empty() ? 0 : 1;
    put_bytes(out, &occupied, 1);
    if (occupied) write_coreset(out, c);
  }
  if (!out) throw DataError("write failed: " + path);
}

CoresetTree CoresetTree::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[4];
  if (!get_bytes(in, magic, 4) || std::memcmp(magic, "GMCT", 4) != 0)
    throw DataError(path + ": bad magic (not a GMCT checkpoint)");
  std::uint32_t version = 0;
  if (!get_u32(in, version) || version != 1)
    throw DataError(path + ": unsupported checkpoint version");
  StreamParams p;
  std::uint32_t k32 = 0;
  unsigned char seeding = 0;
  if (!get_u32(in, k32) || !get_u64(in, p.m_leaf) || !get_f64(in, p.eps_target) ||
      !get_u64(in, p.n_estimate) || !get_u64(in, p.seed) || !get_bytes(in, &seeding, 1) ||
      !get_f64(in, p.build.delta) || !get_f64(in, p.build.epsilon))
    throw DataError(path + ": truncated checkpoint header");
  p.k = static_cast<int>(k32);
  p.build.seeding = seeding ? SeedingMode::adaptive : SeedingMode::kmeanspp;
  CoresetTree t(p);
  std::uint32_t dim32 = 0, level_count = 0;
  std::uint64_t fill = 0;
  if (!get_u32(in, dim32) || !get_u64(in, t.n_seen_) || !get_u64(in, t.n_est_) ||
      !get_u64(in, t.build_counter_) || !get_u64(in, t.high_water_) || !get_u64(in, fill))
    throw DataError(path + ": truncated checkpoint state");
  t.dim_ = static_cast<Eigen::Index>(dim32);
  if (fill > 0) {
    RowMatrixXd pts;
    Eigen::VectorXd w;
    read_block(in, path, pts, w);
    if (static_cast<std::uint64_t>(pts.rows()) != fill || pts.cols() != t.dim_)
      throw DataError(path + ": buffer block shape mismatch");
    t.buf_pts_.assign(pts.data(), pts.data() + pts.size());
    t.buf_w_.assign(w.data(), w.data() + w.size());
  }
  if (!get_u32(in, level_count)) throw DataError(path + ": truncated checkpoint levels");
  t.levels_.resize(level_count);
  for (std::uint32_t i = 0; i < level_count; ++i) {
    unsigned char occupied = 0;
    if (!get_bytes(in, &occupied, 1)) throw DataError(path + ": truncated checkpoint levels");
    if (occupied) {
      t.levels_[i] = read_coreset(in, path);
      if (t.levels_[i].dim() != t.dim_) throw DataError(path + ": level block shape mismatch");
    }
  }
  return t;
}

Coreset parallel_build(const DataSet& x, int partitions, int k, std::uint64_t m,
                       const BuildOptions& opt, std::uint64_t seed, ParallelMode mode) {
  if (partitions < 1) throw DataError("partitions must be positive");
  if (static_cast<Eigen::Index>(partitions) > x.n())
    throw DataError("more partitions than points");
  Rng root(seed);
  if (partitions == 1) return build_coreset(x, k, m, opt, root.substream(1).substream(0));

  const Eigen::Index n = x.n();
  const Eigen::Index p = partitions;
  const Eigen::Index base = n / p;
  const Eigen::Index rem = n % p;
  BuildOptions part_opt = opt;
  const double step = mode == ParallelMode::tree
                          ? epsilon_schedule(opt.epsilon,
                                             std::max<std::uint64_t>(2, static_cast<std::uint64_t>(p)))
                          : opt.epsilon / 3.0;
  part_opt.epsilon = step;

  std::vector<Coreset> parts(static_cast<std::size_t>(p));
#pragma omp parallel for schedule(dynamic, 1)
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index lo = i * base + std::min(i, rem);
    const Eigen::Index len = base + (i < rem ? 1 : 0);
    DataSet slice(x.points().middleRows(lo, len), x.weights().segment(lo, len));
    Rng r = root.substream(1).substream(static_cast<std::uint64_t>(i));
    parts[static_cast<std::size_t>(i)] = build_coreset(slice, k, m, part_opt, r);
  }

  if (mode == ParallelMode::union_then_compress) {
    Coreset acc;
    for (const auto& c : parts) acc = merge_coresets(acc, c);
    Coreset out = compress_coreset(acc, k, m, opt.epsilon / 3.0, opt, root.substream(3));
    out.meta().level = acc.meta().level + 1;
    return out;
  }

  // pairwise reduction in fixed pair order; odd tail passes through unchanged
  std::vector<Coreset> cur = std::move(parts);
  int level = 0;
  while (cur.size() > 1) {
    const auto pairs = static_cast<Eigen::Index>(cur.size() / 2);
    std::vector<Coreset> next(static_cast<std::size_t>(pairs) + (cur.size() % 2));
#pragma omp parallel for schedule(dynamic, 1)
    for (Eigen::Index j = 0; j < pairs; ++j) {
      Coreset merged = merge_coresets(cur[static_cast<std::size_t>(2 * j)],
                                      cur[static_cast<std::size_t>(2 * j + 1)]);
      Rng r = root.substream(2)
                  .substream(static_cast<std::uint64_t>(level))
                  .substream(static_cast<std::uint64_t>(j));
      Coreset c = compress_coreset(merged, k, m, step, opt, r);
      c.meta().level = level + 1;
      next[static_cast<std::size_t>(j)] = std::move(c);
    }
    if (cur.size() % 2) next.back() = std::move(cur.back());
    cur = std::move(next);
    ++level;
  }
  return std::move(cur.front());
}

}  // namespace gmcs
