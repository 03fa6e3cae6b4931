#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pdekf {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  Shape,
  PsdFailure,
  Numeric,
  Parameter,
  Domain,
  StepFailure,
  Divergence,
  SizeLimit,
  NonConvergence,
  Config,
  Misuse,
  Io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` distinguishes failure classes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Dense symmetric matrix. The stored entries satisfy S(i,j) == S(j,i) bit for
/// bit; every constructor path goes through symmetrization.
template <typename Scalar>
class SymmetricMatrix {
 public:
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  SymmetricMatrix() = default;

  static SymmetricMatrix Zero(Index n) { return SymmetricMatrix(Dense::Zero(n, n), exact_tag{}); }
  static SymmetricMatrix Identity(Index n) { return SymmetricMatrix(Dense::Identity(n, n), exact_tag{}); }
  static SymmetricMatrix Diagonal(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& d) {
    return SymmetricMatrix(Dense(d.asDiagonal()), exact_tag{});
  }

  /// Averages `m` with its transpose. Throws Shape on non-square input.
  template <typename Derived>
  static SymmetricMatrix FromDense(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols()) {
      throw Error(ErrorKind::Shape, "symmetrize: matrix is " + std::to_string(m.rows()) + "x" +
                                        std::to_string(m.cols()));
    }
    Dense s(m.rows(), m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
      s(j, j) = m(j, j);
      for (Index i = j + 1; i < m.rows(); ++i) {
        const Scalar v = (m(i, j) + m(j, i)) / Scalar(2);
        s(i, j) = v;
        s(j, i) = v;
      }
    }
    return SymmetricMatrix(std::move(s), exact_tag{});
  }

  Index order() const { return m_.rows(); }
  const Dense& dense() const { return m_; }
  Scalar operator()(Index i, Index j) const { return m_(i, j); }

  SymmetricMatrix operator*(Scalar a) const { return SymmetricMatrix(Dense(a * m_), exact_tag{}); }
  SymmetricMatrix operator+(const SymmetricMatrix& o) const { return SymmetricMatrix(Dense(m_ + o.m_), exact_tag{}); }
  SymmetricMatrix operator-(const SymmetricMatrix& o) const { return SymmetricMatrix(Dense(m_ - o.m_), exact_tag{}); }

 private:
  struct exact_tag {};
  SymmetricMatrix(Dense m, exact_tag) : m_(std::move(m)) {}
  Dense m_;
};

using SymMatrix = SymmetricMatrix<double>;

template <typename Derived>
SymmetricMatrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& p) {
  return SymmetricMatrix<typename Derived::Scalar>::FromDense(p);
}

/// Solves m X = b by Cholesky. Throws PsdFailure naming the first non-positive pivot.
Matrix solve_spd(const SymMatrix& m, const Matrix& b);

/// Smallest eigenvalue (self-adjoint QR iteration). Throws Numeric on non-finite entries.
double min_eigenvalue(const SymMatrix& s);

/// Largest absolute eigenvalue, i.e. the spectral norm of a symmetric matrix.
double spectral_norm(const SymMatrix& s);

/// Counter-based stream: draw k is a pure function of (key, k). Substreams are
/// derived by hashing (key, label), so the draws for one signal never depend on
/// how many draws another signal consumed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0) : key_(seed), counter_(counter) {}

  std::uint64_t seed() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in the open interval (0, 1).
  double next_uniform();
  double next_normal();

  RngStream substream(std::uint64_t label) const;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Symmetric square root factor F (cov = F F^T) by eigen-decomposition, with
/// eigenvalues in [-1e-12 ||cov||, 0] clipped to zero.
class CovarianceFactor {
 public:
  explicit CovarianceFactor(const SymMatrix& cov);
  Index dimension() const { return factor_.rows(); }
  const Matrix& factor() const { return factor_; }
  Vector sample(RngStream& rng) const;

 private:
  Matrix factor_;
};

/// One zero-mean draw with covariance `cov`; advances `rng` by cov.order() normals.
Vector gaussian_vector(RngStream& rng, const SymMatrix& cov);

bool all_finite(const Eigen::Ref<const Matrix>& m);

}  // namespace pdekf
