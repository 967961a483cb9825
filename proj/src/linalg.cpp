#include "mdfo/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace mdfo {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

double dot(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, const Vec& x, Vec& y) {
  require(x.size() == y.size(), "axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(Vec& x, double alpha) {
  for (double& v : x) v *= alpha;
}

Vec matvec(const Mat& m, const Vec& x) {
  require(static_cast<std::size_t>(m.cols) == x.size(), "matvec: dimension mismatch");
  Vec y(static_cast<std::size_t>(m.rows), 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double acc = 0.0;
    const double* row = m.data.data() + static_cast<std::size_t>(i) * m.cols;
    for (int j = 0; j < m.cols; ++j) acc += row[j] * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

Vec mat_t_vec(const Mat& m, const Vec& x) {
  require(static_cast<std::size_t>(m.rows) == x.size(), "mat_t_vec: dimension mismatch");
  Vec y(static_cast<std::size_t>(m.cols), 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    const double* row = m.data.data() + static_cast<std::size_t>(i) * m.cols;
    for (int j = 0; j < m.cols; ++j) y[static_cast<std::size_t>(j)] += row[j] * xi;
  }
  return y;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

Vec sample_unit_sphere(int dim, RngStream& rng) {
  require(dim >= 1, "sample_unit_sphere: dim must be >= 1");
  Vec v(static_cast<std::size_t>(dim));
  double nrm = 0.0;
  do {
    for (double& x : v) x = rng.next_gaussian();
    nrm = norm2(v);
  } while (nrm < 1e-150);
  // True division: x / |x| is exact, so dim = 1 yields exactly +/-1.
  for (double& x : v) x /= nrm;
  return v;
}

GramSchmidtResult gram_schmidt(const Mat& m) {
  require(m.rows >= 1 && m.cols >= 1, "gram_schmidt: empty matrix");
  require(m.rows >= m.cols, "gram_schmidt: expected tall matrix (d >= n)");
  const int d = m.rows;
  const int n = m.cols;
  std::vector<Vec> basis;
  basis.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    Vec v(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] = m.at(i, j);
    const double orig_norm = norm2(v);
    const double tol = 1e-10 * std::max(orig_norm, 1e-300);
    // Two passes of subtraction: the second cleans up cancellation error
    // when the column is nearly in the current span.
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& q : basis) axpy(-dot(q, v), q, v);
    }
    const double res_norm = norm2(v);
    if (res_norm < tol) continue;
    scale(v, 1.0 / res_norm);
    basis.push_back(std::move(v));
  }
  GramSchmidtResult out;
  out.n_eff = static_cast<int>(basis.size());
  out.q = Mat(d, out.n_eff);
  for (int j = 0; j < out.n_eff; ++j)
    for (int i = 0; i < d; ++i) out.q.at(i, j) = basis[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  return out;
}

SymmetricEigen symmetric_eigen(const Mat& a) {
  require(a.rows == a.cols && a.rows >= 1, "symmetric_eigen: matrix must be square");
  const int n = a.rows;
  Mat s = a;
  Mat v(n, n);
  for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += s.at(p, q) * s.at(p, q);
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = s.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double app = s.at(p, p);
        const double aqq = s.at(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        for (int k = 0; k < n; ++k) {
          const double skp = s.at(k, p);
          const double skq = s.at(k, q);
          s.at(k, p) = c * skp - sn * skq;
          s.at(k, q) = sn * skp + c * skq;
        }
        for (int k = 0; k < n; ++k) {
          const double spk = s.at(p, k);
          const double sqk = s.at(q, k);
          s.at(p, k) = c * spk - sn * sqk;
          s.at(q, k) = sn * spk + c * sqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v.at(k, p);
          const double vkq = v.at(k, q);
          v.at(k, p) = c * vkp - sn * vkq;
          v.at(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  SymmetricEigen out;
  out.eigenvalues.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.eigenvalues[static_cast<std::size_t>(i)] = s.at(i, i);
  // Sort ascending, permuting eigenvector columns alongside.
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < n; ++i) {
    int best = i;
    for (int j = i + 1; j < n; ++j)
      if (out.eigenvalues[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] <
          out.eigenvalues[static_cast<std::size_t>(order[static_cast<std::size_t>(best)])])
        best = j;
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(best)]);
  }
  Vec sorted_vals(static_cast<std::size_t>(n));
  Mat sorted_vecs(n, n);
  for (int i = 0; i < n; ++i) {
    const int src = order[static_cast<std::size_t>(i)];
    sorted_vals[static_cast<std::size_t>(i)] = out.eigenvalues[static_cast<std::size_t>(src)];
    for (int k = 0; k < n; ++k) sorted_vecs.at(k, i) = v.at(k, src);
  }
  out.eigenvalues = std::move(sorted_vals);
  out.eigenvectors = std::move(sorted_vecs);
  return out;
}

}  // namespace mdfo
