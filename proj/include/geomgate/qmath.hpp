#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace geomgate {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NotHermitianError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidStateError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline ComplexMatrix pauli_i() { return ComplexMatrix::Identity(2, 2); }

inline ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}

inline ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

// index 0..3 -> I, X, Y, Z
inline ComplexMatrix pauli(int k) {
  switch (k) {
    case 0: return pauli_i();
    case 1: return pauli_x();
    case 2: return pauli_y();
    case 3: return pauli_z();
  }
  throw std::out_of_range("pauli index must be 0..3");
}

inline ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  return a * b;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline ComplexMatrix dagger(const ComplexMatrix& a) { return a.adjoint(); }

inline bool is_square(const ComplexMatrix& a) { return a.rows() == a.cols() && a.rows() > 0; }

inline bool is_hermitian(const ComplexMatrix& h, double tol = 1e-10) {
  if (!is_square(h)) return false;
  return (h - h.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, h.cwiseAbs().maxCoeff());
}

inline bool is_unitary(const ComplexMatrix& u, double tol = 1e-9) {
  if (!is_square(u)) return false;
  ComplexMatrix e = u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols());
  return e.cwiseAbs().maxCoeff() <= tol;
}

// exp(-i h t) for Hermitian h
inline ComplexMatrix expm_hermitian(const ComplexMatrix& h, double t = 1.0) {
  if (!is_square(h)) throw DimensionError("expm: matrix must be square");
  if (!is_hermitian(h, 1e-9)) throw NotHermitianError("expm: matrix is not Hermitian");
  const auto n = h.rows();
  if (n == 1) {
    ComplexMatrix out(1, 1);
    out(0, 0) = std::exp(-kI * h(0, 0).real() * t);
    return out;
  }
  if (n == 2) {
    // closed form: h = a I + b.sigma
    const double a = 0.5 * (h(0, 0).real() + h(1, 1).real());
    const double bz = 0.5 * (h(0, 0).real() - h(1, 1).real());
    const double bx = h(1, 0).real();
    const double by = h(1, 0).imag();
    const double r = std::sqrt(bx * bx + by * by + bz * bz);
    const double c = std::cos(r * t);
    const double s = r > 0 ? std::sin(r * t) / r : t;
    const cplx ph = std::exp(-kI * a * t);
    ComplexMatrix out(2, 2);
    out(0, 0) = ph * cplx(c, -s * bz);
    out(1, 1) = ph * cplx(c, s * bz);
    out(0, 1) = ph * (-kI * s) * cplx(bx, -by);
    out(1, 0) = ph * (-kI * s) * cplx(bx, by);
    return out;
  }
  const ComplexMatrix hh = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hh);
  const ComplexMatrix& v = es.eigenvectors();
  ComplexVector ph(n);
  for (Eigen::Index k = 0; k < n; ++k) ph(k) = std::exp(-kI * es.eigenvalues()(k) * t);
  return v * ph.asDiagonal() * v.adjoint();
}

// general matrix exponential exp(a) (Pade with scaling and squaring)
inline ComplexMatrix expm_general(const ComplexMatrix& a) {
  if (!is_square(a)) throw DimensionError("expm: matrix must be square");
  return a.exp();
}

inline ComplexMatrix sqrtm_psd(const ComplexMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (rho + rho.adjoint()));
  RealVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

// |Tr(ideal^dag u)| / Tr(ideal^dag ideal)
inline double unitary_fidelity(const ComplexMatrix& u, const ComplexMatrix& ideal) {
  if (u.rows() != ideal.rows() || u.cols() != ideal.cols())
    throw DimensionError("unitary_fidelity: shape mismatch");
  const cplx num = (ideal.adjoint() * u).trace();
  const double den = (ideal.adjoint() * ideal).trace().real();
  return std::abs(num) / den;
}

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2
inline double state_fidelity(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
  if (rho.rows() != sigma.rows() || !is_square(rho) || !is_square(sigma))
    throw DimensionError("state_fidelity: shape mismatch");
  const ComplexMatrix s = sqrtm_psd(rho);
  const ComplexMatrix m = s * sigma * s;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (m + m.adjoint()));
  double tr = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) tr += std::sqrt(std::max(0.0, es.eigenvalues()(k)));
  return tr * tr;
}

inline double trace_distance(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) throw DimensionError("trace_distance: shape mismatch");
  const ComplexMatrix d = rho - sigma;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (d + d.adjoint()));
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline ComplexMatrix projector(const ComplexVector& psi) { return psi * psi.adjoint(); }

inline ComplexVector basis_ket(Eigen::Index dim, Eigen::Index k) {
  if (k < 0 || k >= dim) throw DimensionError("basis_ket: index out of range");
  ComplexVector v = ComplexVector::Zero(dim);
  v(k) = 1.0;
  return v;
}

inline void validate_density(const ComplexMatrix& rho, double tol = 1e-8) {
  if (!is_square(rho)) throw DimensionError("density matrix must be square");
  if (!is_hermitian(rho, tol)) throw InvalidStateError("density matrix is not Hermitian");
  if (std::abs(rho.trace() - cplx(1.0)) > tol) throw InvalidStateError("density matrix trace is not 1");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (rho + rho.adjoint()));
  if (es.eigenvalues().minCoeff() < -tol) throw InvalidStateError("density matrix is not positive semidefinite");
}

inline double bessel_j1(double x) {
  if (!std::isfinite(x)) throw std::domain_error("bessel_j1: non-finite argument");
  if (x < 0) return -std::cyl_bessel_j(1.0, -x);
  return std::cyl_bessel_j(1.0, x);
}

inline double erf(double x) { return std::erf(x); }

// column-stacking vectorisation; vec(A X B) = (B^T kron A) vec(X)
inline ComplexVector vec(const ComplexMatrix& m) {
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index d) {
  if (v.size() != d * d) throw DimensionError("unvec: size mismatch");
  return Eigen::Map<const ComplexMatrix>(v.data(), d, d);
}

inline ComplexMatrix unitary_superop(const ComplexMatrix& u) { return kron(u.conjugate(), u); }

// entanglement (process) fidelity of superoperator s against unitary u
inline double process_fidelity(const ComplexMatrix& s, const ComplexMatrix& u) {
  const ComplexMatrix su = unitary_superop(u);
  if (su.rows() != s.rows()) throw DimensionError("process_fidelity: shape mismatch");
  const double d = static_cast<double>(u.rows());
  return (su.adjoint() * s).trace().real() / (d * d);
}

inline double wrap_phase(double x) {
  double y = std::remainder(x, kTwoPi);
  if (y <= -kPi) y += kTwoPi;
  return y;
}

}  // namespace geomgate
