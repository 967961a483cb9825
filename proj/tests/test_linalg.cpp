#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mdfo/linalg.hpp"

using namespace mdfo;

TEST_CASE("dot / axpy / matvec basics") {
  CHECK(dot({1, 2}, {3, 4}) == 11.0);
  CHECK_THROWS_AS((void)dot({1, 2}, {1}), std::invalid_argument);

  Mat id(2, 2);
  id.at(0, 0) = 1.0;
  id.at(1, 1) = 1.0;
  const Vec v{0.5, -2.0};
  CHECK(matvec(id, v) == v);

  Mat diag(2, 2);
  diag.at(0, 0) = 2.0;
  diag.at(1, 1) = 3.0;
  CHECK(matvec(diag, {1, 1}) == Vec{2, 3});
  CHECK_THROWS_AS((void)matvec(diag, {1, 2, 3}), std::invalid_argument);

  Vec y{1, 1};
  axpy(2.0, {1, -1}, y);
  CHECK(y == Vec{3, -1});

  Mat rect(2, 3);
  rect.at(0, 0) = 1;
  rect.at(0, 2) = 2;
  rect.at(1, 1) = 4;
  const Mat t = transpose(rect);
  CHECK(t.rows == 3);
  CHECK(t.cols == 2);
  CHECK(t.at(2, 0) == 2);
  CHECK(mat_t_vec(rect, {1, 1}) == Vec{1, 4, 2});
}

TEST_CASE("sphere sampling: unit norm, dim=1 signs, low-dim moments") {
  RngStream rng(123);
  for (int rep = 0; rep < 50; ++rep) {
    const Vec s1 = sample_unit_sphere(1, rng);
    CHECK((s1[0] == 1.0 || s1[0] == -1.0));
  }
  for (int rep = 0; rep < 100; ++rep) {
    const Vec s = sample_unit_sphere(5, rng);
    CHECK(std::abs(norm2(s) - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS((void)sample_unit_sphere(0, rng), std::invalid_argument);

  // d=3: componentwise mean ~ 0; mean of (s^T e1)^2 ~ 1/3.
  const int n = 100000;
  Vec mean(3, 0.0);
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec s = sample_unit_sphere(3, rng);
    axpy(1.0, s, mean);
    sq += s[0] * s[0];
  }
  scale(mean, 1.0 / n);
  for (double m : mean) CHECK(std::abs(m) < 0.02);
  CHECK(std::abs(sq / n - 1.0 / 3.0) < 0.02);
}

TEST_CASE("second moment of projections: E[(s^T v)^2] = ||v||^2 / d") {
  RngStream rng(7);
  for (int d : {2, 10, 100}) {
    Vec v(static_cast<std::size_t>(d));
    for (double& x : v) x = rng.next_gaussian();
    const double target = dot(v, v) / d;
    const int n = 100000;
    double mean = 0.0;
    double m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec s = sample_unit_sphere(d, rng);
      const double p = dot(s, v);
      mean += p * p;
      m2 += p * p * p * p;
    }
    mean /= n;
    const double var = m2 / n - mean * mean;
    const double se = std::sqrt(var / n);
    CHECK(std::abs(mean - target) < 3.0 * se);
  }
}

TEST_CASE("gram_schmidt: identity, duplicate columns, hand-worked 3x2 case") {
  Mat id(3, 3);
  for (int i = 0; i < 3; ++i) id.at(i, i) = 1.0;
  const GramSchmidtResult r1 = gram_schmidt(id);
  CHECK(r1.n_eff == 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(r1.q.at(i, j) == (i == j ? 1.0 : 0.0));

  Mat dup(3, 2);
  dup.at(0, 0) = 2.0;
  dup.at(1, 0) = 1.0;
  dup.at(0, 1) = 2.0;
  dup.at(1, 1) = 1.0;
  const GramSchmidtResult r2 = gram_schmidt(dup);
  CHECK(r2.n_eff == 1);
  const double nrm = std::sqrt(5.0);
  CHECK(r2.q.at(0, 0) == doctest::Approx(2.0 / nrm).epsilon(1e-15));
  CHECK(r2.q.at(1, 0) == doctest::Approx(1.0 / nrm).epsilon(1e-15));

  Mat m(3, 2);
  m.at(0, 0) = 1.0;
  m.at(0, 1) = 1.0;
  m.at(1, 1) = 1.0;
  const GramSchmidtResult r3 = gram_schmidt(m);
  CHECK(r3.n_eff == 2);
  CHECK(r3.q.at(0, 0) == 1.0);
  CHECK(r3.q.at(1, 0) == 0.0);
  CHECK(r3.q.at(0, 1) == doctest::Approx(0.0));
  CHECK(r3.q.at(1, 1) == doctest::Approx(1.0));
  CHECK(r3.q.at(2, 1) == 0.0);

  Mat zero(4, 2);
  const GramSchmidtResult r4 = gram_schmidt(zero);
  CHECK(r4.n_eff == 0);
  CHECK(r4.q.cols == 0);
}

TEST_CASE("gram_schmidt properties: orthonormality and projection idempotence") {
  RngStream rng(99);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 5 + static_cast<int>(rng.next_below(10));
    const int n = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(d)));
    Mat m(d, n);
    for (double& v : m.data) v = rng.next_gaussian();
    const GramSchmidtResult r = gram_schmidt(m);
    REQUIRE(r.n_eff >= 1);
    for (int i = 0; i < r.n_eff; ++i) {
      for (int j = 0; j < r.n_eff; ++j) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += r.q.at(k, i) * r.q.at(k, j);
        CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-10);
      }
    }
    // P = q q^T is idempotent.
    Vec v(static_cast<std::size_t>(d));
    for (double& x : v) x = rng.next_gaussian();
    const Vec pv = matvec(r.q, mat_t_vec(r.q, v));
    const Vec ppv = matvec(r.q, mat_t_vec(r.q, pv));
    Vec diff = ppv;
    axpy(-1.0, pv, diff);
    CHECK(norm2(diff) < 1e-10);
  }
}

TEST_CASE("gram_schmidt keeps the span") {
  RngStream rng(100);
  const int d = 8;
  const int n = 3;
  Mat m(d, n);
  for (double& v : m.data) v = rng.next_gaussian();
  const GramSchmidtResult r = gram_schmidt(m);
  REQUIRE(r.n_eff == n);
  // Every original column projects onto the basis with zero residual.
  for (int j = 0; j < n; ++j) {
    Vec col(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) col[static_cast<std::size_t>(i)] = m.at(i, j);
    const Vec proj = matvec(r.q, mat_t_vec(r.q, col));
    Vec diff = col;
    axpy(-1.0, proj, diff);
    CHECK(norm2(diff) < 1e-9 * std::max(1.0, norm2(col)));
  }
}

TEST_CASE("symmetric_eigen reconstructs small matrices") {
  RngStream rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 2 + static_cast<int>(rng.next_below(6));
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double v = rng.next_gaussian();
        a.at(i, j) = v;
        a.at(j, i) = v;
      }
    const SymmetricEigen eig = symmetric_eigen(a);
    // A v_k = lambda_k v_k
    for (int k = 0; k < n; ++k) {
      Vec v(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = eig.eigenvectors.at(i, k);
      const Vec av = matvec(a, v);
      for (int i = 0; i < n; ++i)
        CHECK(std::abs(av[static_cast<std::size_t>(i)] -
                       eig.eigenvalues[static_cast<std::size_t>(k)] * v[static_cast<std::size_t>(i)]) < 1e-9);
    }
    for (int k = 1; k < n; ++k)
      CHECK(eig.eigenvalues[static_cast<std::size_t>(k)] >=
            eig.eigenvalues[static_cast<std::size_t>(k - 1)]);
  }
}
