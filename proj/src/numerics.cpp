#include "pdekf/numerics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace pdekf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::PsdFailure: return "PSD failure";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::StepFailure: return "step failure";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::SizeLimit: return "size limit";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Misuse: return "misuse";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

Matrix solve_spd(const SymMatrix& m, const Matrix& b) {
  const Index n = m.order();
  if (b.rows() != n) {
    throw Error(ErrorKind::Shape, "solve_spd: rhs has " + std::to_string(b.rows()) + " rows, matrix order " +
                                      std::to_string(n));
  }
  // Hand-rolled column Cholesky so the failing pivot can be reported.
  Matrix l = Matrix::Zero(n, n);
  const Matrix& a = m.dense();
  for (Index j = 0; j < n; ++j) {
    const double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) {
      std::ostringstream os;
      os << "solve_spd: non-positive pivot " << d << " at index " << j;
      throw Error(ErrorKind::PsdFailure, os.str());
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    if (j + 1 < n) {
      l.col(j).tail(n - j - 1) =
          (a.col(j).tail(n - j - 1) - l.bottomLeftCorner(n - j - 1, j) * l.row(j).head(j).transpose()) / ljj;
    }
  }
  const Matrix y = l.triangularView<Eigen::Lower>().solve(b);
  return l.transpose().triangularView<Eigen::Upper>().solve(y);
}

double min_eigenvalue(const SymMatrix& s) {
  if (!s.dense().allFinite()) throw Error(ErrorKind::Numeric, "min_eigenvalue: non-finite entries");
  if (s.order() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double spectral_norm(const SymMatrix& s) {
  if (s.order() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RngStream::next_u64() {
  const std::uint64_t c = counter_++;
  return mix64(mix64(key_ ^ 0x6a09e667f3bcc909ULL) + mix64(c));
}

double RngStream::next_uniform() {
  // 53 random bits, shifted half an ulp away from zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() {
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::substream(std::uint64_t label) const {
  return RngStream(mix64(key_ * 0x2545f4914f6cdd1dULL + mix64(label ^ 0xa0761d6478bd642fULL)), 0);
}

CovarianceFactor::CovarianceFactor(const SymMatrix& cov) {
  const Index n = cov.order();
  if (!cov.dense().allFinite()) throw Error(ErrorKind::Numeric, "covariance has non-finite entries");
  if (n == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov.dense());
  Vector lambda = es.eigenvalues();
  const double scale = lambda.cwiseAbs().maxCoeff();
  const double floor = -1e-12 * scale;
  for (Index i = 0; i < n; ++i) {
    if (lambda(i) < floor) {
      std::ostringstream os;
      os << "covariance eigenvalue " << lambda(i) << " below tolerance " << floor;
      throw Error(ErrorKind::PsdFailure, os.str());
    }
    lambda(i) = lambda(i) > 0.0 ? std::sqrt(lambda(i)) : 0.0;
  }
  factor_ = es.eigenvectors() * lambda.asDiagonal();
}

Vector CovarianceFactor::sample(RngStream& rng) const {
  const Index n = factor_.rows();
  Vector xi(n);
  for (Index i = 0; i < n; ++i) xi(i) = rng.next_normal();
  return factor_ * xi;
}

Vector gaussian_vector(RngStream& rng, const SymMatrix& cov) { return CovarianceFactor(cov).sample(rng); }

}  // namespace pdekf
