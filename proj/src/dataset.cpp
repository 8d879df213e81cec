#include "gmcs/dataset.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "gmcs/binio.hpp"

namespace gmcs {

namespace {

using namespace binio;

// strips a trailing \r; returns false for blank lines
bool csv_row(const std::string& path, std::size_t lineno, std::string& line,
             std::vector<double>& row) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  bool blank = true;
  for (char c : line)
    if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
  if (blank) return false;

  row.clear();
  const char* p = line.c_str();
  while (true) {
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (end == p)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected a number at '" +
                      std::string(p).substr(0, 16) + "'");
    if (!std::isfinite(v))
      throw DataError(path + ":" + std::to_string(lineno) + ": non-finite value");
    row.push_back(v);
    p = end;
    while (*p == ' ' || *p == '\t') ++p;
    if (*p == ',') {
      ++p;
      continue;
    }
    if (*p == '\0') break;
    throw DataError(path + ":" + std::to_string(lineno) + ": unexpected character '" +
                    std::string(1, *p) + "'");
  }
  return true;
}

DataSet load_csv(const std::string& path, bool weighted) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  std::vector<double> vals;
  std::vector<double> weights;
  Eigen::Index d = -1;
  std::string line;
  std::vector<double> row;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!csv_row(path, lineno, line, row)) continue;
    const Eigen::Index row_d = static_cast<Eigen::Index>(row.size()) - (weighted ? 1 : 0);
    if (row_d < 1)
      throw DataError(path + ":" + std::to_string(lineno) + ": row has no coordinates");
    if (d < 0) d = row_d;
    if (row_d != d)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d) +
                      " coordinates, got " + std::to_string(row_d));
    std::size_t off = 0;
    if (weighted) weights.push_back(row[off++]);
    vals.insert(vals.end(), row.begin() + static_cast<std::ptrdiff_t>(off), row.end());
  }
  const Eigen::Index n = weighted ? static_cast<Eigen::Index>(weights.size())
                                  : (d > 0 ? static_cast<Eigen::Index>(vals.size()) / d : 0);
  if (n == 0) throw DataError(path + ": no points");
  RowMatrixXd pts(n, d);
  std::memcpy(pts.data(), vals.data(), sizeof(double) * vals.size());
  if (!weighted) return DataSet::unit(std::move(pts));
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(), n);
  return DataSet(std::move(pts), std::move(w));
}

DataSet load_f64le(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[4];
  if (!get_bytes(in, magic, 4) || std::memcmp(magic, "GMCS", 4) != 0)
    throw DataError(path + ": bad magic (not a GMCS point file)");
  std::uint32_t version = 0, d32 = 0;
  std::uint64_t n64 = 0;
  unsigned char has_w = 0;
  if (!get_u32(in, version) || version != 1)
    throw DataError(path + ": unsupported version " + std::to_string(version));
  if (!get_u64(in, n64) || !get_u32(in, d32) || !get_bytes(in, &has_w, 1))
    throw DataError(path + ": truncated header");
  if (n64 == 0 || d32 == 0 || n64 > (1ull << 40) || d32 > (1u << 20))
    throw DataError(path + ": implausible header (n=" + std::to_string(n64) +
                    ", d=" + std::to_string(d32) + ")");
  const auto n = static_cast<Eigen::Index>(n64);
  const auto d = static_cast<Eigen::Index>(d32);
  RowMatrixXd pts(n, d);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (has_w && !get_f64(in, w[i])) throw DataError(path + ": truncated payload");
    for (Eigen::Index j = 0; j < d; ++j)
      if (!get_f64(in, pts(i, j))) throw DataError(path + ": truncated payload");
  }
  if (has_w) return DataSet(std::move(pts), std::move(w));
  return DataSet::unit(std::move(pts));
}

void save_csv(const std::string& path, const DataSet& x, bool weighted) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  char buf[40];
  std::string line;
  for (Eigen::Index i = 0; i < x.n(); ++i) {
    line.clear();
    if (weighted) {
      std::snprintf(buf, sizeof buf, "%.17g", x.weight(i));
      line += buf;
    }
    for (Eigen::Index j = 0; j < x.dim(); ++j) {
      if (!line.empty()) line += ',';
      std::snprintf(buf, sizeof buf, "%.17g", x.points()(i, j));
      line += buf;
    }
    line += '\n';
    out << line;
  }
  if (!out) throw DataError("write failed: " + path);
}

void stream_csv(const std::string& path, bool weighted,
                const std::function<void(ConstRowRef, double)>& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  Eigen::Index d = -1;
  std::string line;
  std::vector<double> row;
  Eigen::RowVectorXd pt;
  std::size_t lineno = 0, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!csv_row(path, lineno, line, row)) continue;
    const Eigen::Index row_d = static_cast<Eigen::Index>(row.size()) - (weighted ? 1 : 0);
    if (row_d < 1)
      throw DataError(path + ":" + std::to_string(lineno) + ": row has no coordinates");
    if (d < 0) {
      d = row_d;
      pt.resize(d);
    }
    if (row_d != d)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d) +
                      " coordinates, got " + std::to_string(row_d));
    double w = 1.0;
    std::size_t off = 0;
    if (weighted) {
      w = row[off++];
      if (w < 0.0) throw DataError(path + ":" + std::to_string(lineno) + ": negative weight");
    }
    for (Eigen::Index j = 0; j < d; ++j) pt[j] = row[off + static_cast<std::size_t>(j)];
    fn(pt, w);
    ++rows;
  }
  if (rows == 0) throw DataError(path + ": no points");
}

void stream_f64le(const std::string& path, const std::function<void(ConstRowRef, double)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[4];
  if (!get_bytes(in, magic, 4) || std::memcmp(magic, "GMCS", 4) != 0)
    throw DataError(path + ": bad magic (not a GMCS point file)");
  std::uint32_t version = 0, d32 = 0;
  std::uint64_t n64 = 0;
  unsigned char has_w = 0;
  if (!get_u32(in, version) || version != 1)
    throw DataError(path + ": unsupported version " + std::to_string(version));
  if (!get_u64(in, n64) || !get_u32(in, d32) || !get_bytes(in, &has_w, 1))
    throw DataError(path + ": truncated header");
  if (n64 == 0 || d32 == 0 || n64 > (1ull << 40) || d32 > (1u << 20))
    throw DataError(path + ": implausible header (n=" + std::to_string(n64) +
                    ", d=" + std::to_string(d32) + ")");
  const auto d = static_cast<Eigen::Index>(d32);
  Eigen::RowVectorXd pt(d);
  for (std::uint64_t i = 0; i < n64; ++i) {
    double w = 1.0;
    if (has_w && !get_f64(in, w)) throw DataError(path + ": truncated payload");
    for (Eigen::Index j = 0; j < d; ++j)
      if (!get_f64(in, pt[j])) throw DataError(path + ": truncated payload");
    if (!pt.allFinite()) throw DataError(path + ": non-finite coordinate");
    if (w < 0.0 || !std::isfinite(w)) throw DataError(path + ": invalid weight");
    fn(pt, w);
  }
}

void save_f64le(const std::string& path, const DataSet& x, bool weighted) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write: " + path);
  put_bytes(out, "GMCS", 4);
  put_u32(out, 1);
  put_u64(out, static_cast<std::uint64_t>(x.n()));
  put_u32(out, static_cast<std::uint32_t>(x.dim()));
  unsigned char has_w = weighted ? 1 : 0;
  put_bytes(out, &has_w, 1);
  for (Eigen::Index i = 0; i < x.n(); ++i) {
    if (weighted) put_f64(out, x.weight(i));
    for (Eigen::Index j = 0; j < x.dim(); ++j) put_f64(out, x.points()(i, j));
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace

DataSet::DataSet(RowMatrixXd points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.rows() < 1 || points_.cols() < 1) throw DataError("empty point set");
  if (weights_.size() != points_.rows())
    throw DataError("weight count " + std::to_string(weights_.size()) + " != point count " +
                    std::to_string(points_.rows()));
  if (!points_.allFinite()) throw DataError("non-finite coordinate");
  bool any_pos = false;
  unit_weights_ = true;
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    const double w = weights_[i];
    if (!std::isfinite(w) || w < 0.0) throw DataError("weight " + std::to_string(i) + " invalid");
    any_pos |= w > 0.0;
    unit_weights_ &= w == 1.0;
  }
  if (!any_pos) throw DataError("all weights are zero");
  total_weight_ = block_sum(weights_.size(), [&](Eigen::Index i) { return weights_[i]; });
}

DataSet DataSet::unit(RowMatrixXd points) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(points.rows());
  return DataSet(std::move(points), std::move(w));
}

Eigen::Index VoronoiPartition::nonempty() const {
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < cell_weights.size(); ++j)
    if (cell_sizes[static_cast<std::size_t>(j)] > 0) ++c;
  return c;
}

std::pair<Eigen::Index, double> nearest_center(ConstRowRef x, const RowMatrixXd& centers) {
  if (centers.rows() < 1) throw DataError("empty center set");
  if (centers.cols() != x.size()) throw DataError("center dimension mismatch");
  Eigen::Index best = 0;
  double best_d2 = (x - centers.row(0)).squaredNorm();
  for (Eigen::Index j = 1; j < centers.rows(); ++j) {
    const double d2 = (x - centers.row(j)).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  return {best, best_d2};
}

double phi(const DataSet& x, const RowMatrixXd& centers) {
  if (centers.cols() != x.dim()) throw DataError("center dimension mismatch");
  return block_sum(x.n(), [&](Eigen::Index i) {
    return x.weight(i) * nearest_center(x.point(i), centers).second;
  });
}

VoronoiPartition voronoi_partition(const DataSet& x, const RowMatrixXd& centers) {
  if (centers.rows() < 1) throw DataError("empty center set");
  if (centers.cols() != x.dim()) throw DataError("center dimension mismatch");
  const Eigen::Index n = x.n();
  const Eigen::Index k = centers.rows();
  VoronoiPartition part;
  part.assignment.resize(static_cast<std::size_t>(n));
  std::vector<double> d2(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [j, dd] = nearest_center(x.point(i), centers);
    part.assignment[static_cast<std::size_t>(i)] = j;
    d2[static_cast<std::size_t>(i)] = dd;
  }

  const Eigen::Index nb = (n + kStatBlock - 1) / kStatBlock;
  std::vector<std::vector<std::int64_t>> bs(static_cast<std::size_t>(nb));
  std::vector<Eigen::VectorXd> bw(static_cast<std::size_t>(nb));
  std::vector<Eigen::VectorXd> bc(static_cast<std::size_t>(nb));
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    auto& s = bs[static_cast<std::size_t>(b)];
    auto& w = bw[static_cast<std::size_t>(b)];
    auto& c = bc[static_cast<std::size_t>(b)];
    s.assign(static_cast<std::size_t>(k), 0);
    w = Eigen::VectorXd::Zero(k);
    c = Eigen::VectorXd::Zero(k);
    const Eigen::Index lo = b * kStatBlock, hi = std::min(n, lo + kStatBlock);
    for (Eigen::Index i = lo; i < hi; ++i) {
      const auto j = part.assignment[static_cast<std::size_t>(i)];
      s[static_cast<std::size_t>(j)] += 1;
      w[j] += x.weight(i);
      c[j] += x.weight(i) * d2[static_cast<std::size_t>(i)];
    }
  }
  part.cell_sizes.assign(static_cast<std::size_t>(k), 0);
  part.cell_weights = Eigen::VectorXd::Zero(k);
  part.cell_costs = Eigen::VectorXd::Zero(k);
  for (Eigen::Index b = 0; b < nb; ++b) {  // fixed fold order
    for (Eigen::Index j = 0; j < k; ++j) {
      part.cell_sizes[static_cast<std::size_t>(j)] += bs[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];
      part.cell_weights[j] += bw[static_cast<std::size_t>(b)][j];
      part.cell_costs[j] += bc[static_cast<std::size_t>(b)][j];
    }
  }
  part.total_cost = block_sum(
      n, [&](Eigen::Index i) { return x.weight(i) * d2[static_cast<std::size_t>(i)]; });
  return part;
}

DataSet load_points(const std::string& path, FileFormat fmt, bool weighted) {
  return fmt == FileFormat::csv ? load_csv(path, weighted) : load_f64le(path);
}

void save_points(const std::string& path, const DataSet& x, FileFormat fmt, bool weighted) {
  if (fmt == FileFormat::csv)
    save_csv(path, x, weighted);
  else
    save_f64le(path, x, weighted);
}

void stream_points(const std::string& path, FileFormat fmt, bool weighted,
                   const std::function<void(ConstRowRef, double)>& fn) {
  if (fmt == FileFormat::csv)
    stream_csv(path, weighted, fn);
  else
    stream_f64le(path, fn);
}

std::uint64_t hash_points(const DataSet& x) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const std::uint64_t n = static_cast<std::uint64_t>(x.n());
  const std::uint64_t d = static_cast<std::uint64_t>(x.dim());
  h = fnv1a64(&n, sizeof n, h);
  h = fnv1a64(&d, sizeof d, h);
  h = fnv1a64(x.points().data(), sizeof(double) * static_cast<std::size_t>(x.n() * x.dim()), h);
  h = fnv1a64(x.weights().data(), sizeof(double) * static_cast<std::size_t>(x.n()), h);
  return h;
}

}  // namespace gmcs
