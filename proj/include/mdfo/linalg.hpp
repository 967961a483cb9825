#ifndef MDFO_LINALG_HPP
#define MDFO_LINALG_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "mdfo/rng.hpp"

namespace mdfo {

using Vec = std::vector<double>;

/// Dense row-major matrix.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
};

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
/// y += alpha * x
void axpy(double alpha, const Vec& x, Vec& y);
void scale(Vec& x, double alpha);
Vec matvec(const Mat& m, const Vec& x);
/// m^T x
Vec mat_t_vec(const Mat& m, const Vec& x);
Mat transpose(const Mat& m);

bool all_finite(const Vec& v);

/// Uniform draw from the unit sphere in R^dim (gaussian sample, normalized).
Vec sample_unit_sphere(int dim, RngStream& rng);

struct GramSchmidtResult {
  Mat q;      // d x n_eff, orthonormal columns
  int n_eff;  // retained rank
};

/// Modified Gram-Schmidt with one re-orthogonalization pass. A column is
/// dropped when its residual norm falls below 1e-10 times the original
/// column norm (floored at 1e-300), so degenerate inputs shrink n_eff
/// instead of emitting NaN columns. An all-zero matrix yields n_eff = 0.
GramSchmidtResult gram_schmidt(const Mat& m);

struct SymmetricEigen {
  Vec eigenvalues;   // ascending
  Mat eigenvectors;  // columns correspond to eigenvalues
};

/// Cyclic Jacobi rotations; intended for small symmetric matrices (n <= 64).
SymmetricEigen symmetric_eigen(const Mat& a);

}  // namespace mdfo

#endif  // MDFO_LINALG_HPP
