#pragma once

#include "device.hpp"
#include "qmath.hpp"

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace geomgate {

struct TomographyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Channel = std::function<ComplexMatrix(const ComplexMatrix&)>;

inline int qubit_dim(int n) { return 1 << n; }

// Pauli products, leftmost qubit slowest, ordering I, X, Y, Z
inline std::vector<ComplexMatrix> pauli_basis(int n) {
  if (n < 1 || n > 3) throw DimensionError("pauli basis supports 1 to 3 qubits");
  std::vector<ComplexMatrix> out{ComplexMatrix::Identity(1, 1)};
  for (int q = 0; q < n; ++q) {
    std::vector<ComplexMatrix> next;
    for (const auto& e : out)
      for (int k = 0; k < 4; ++k) next.push_back(kron(e, pauli(k)));
    out = std::move(next);
  }
  return out;
}

inline std::string pauli_label(int index, int n) {
  static const char* names = "IXYZ";
  std::string s(n, 'I');
  for (int q = n - 1; q >= 0; --q) {
    s[q] = names[index % 4];
    index /= 4;
  }
  return s;
}

inline int pauli_index(const std::string& label) {
  int k = 0;
  for (char c : label) {
    const auto p = std::string("IXYZ").find(c);
    if (p == std::string::npos) throw std::invalid_argument("bad Pauli label " + label);
    k = 4 * k + static_cast<int>(p);
  }
  return k;
}

// ---- state tomography ----

struct MeasurementOptions {
  long shots = 0;                           // 0 means exact expectation values
  std::uint64_t seed = 0;
  std::optional<ConfusionMatrix> readout;   // applied before sampling, inverted afterwards
  bool project = false;                     // positivity projection of reconstructed states
};

// {I, X/2, Y/2} on each qubit, leftmost qubit slowest
inline std::vector<ComplexMatrix> qst_prerotations(int n) {
  const std::vector<ComplexMatrix> single{ComplexMatrix::Identity(2, 2), expm_hermitian(0.5 * pauli_x(), kPi / 2),
                                          expm_hermitian(0.5 * pauli_y(), kPi / 2)};
  std::vector<ComplexMatrix> out{ComplexMatrix::Identity(1, 1)};
  for (int q = 0; q < n; ++q) {
    std::vector<ComplexMatrix> next;
    for (const auto& r : out)
      for (const auto& s : single) next.push_back(kron(r, s));
    out = std::move(next);
  }
  return out;
}

struct TomographyData {
  int n_qubits = 1;
  std::vector<RealVector> probabilities;   // one distribution over bitstrings per prerotation
};

inline RealVector sample_distribution(const RealVector& p, long shots, std::mt19937_64& rng) {
  RealVector counts = RealVector::Zero(p.size());
  long left = shots;
  double mass = 1.0;
  for (Eigen::Index k = 0; k + 1 < p.size() && left > 0; ++k) {
    const double q = mass > 0 ? std::clamp(p(k) / mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<long> b(left, q);
    const long c = b(rng);
    counts(k) = static_cast<double>(c);
    left -= c;
    mass -= p(k);
  }
  counts(p.size() - 1) += static_cast<double>(left);
  return counts / static_cast<double>(shots);
}

inline TomographyData measure_tomography(const ComplexMatrix& rho, int n, const MeasurementOptions& o, std::mt19937_64& rng) {
  const int d = qubit_dim(n);
  if (rho.rows() != d || rho.cols() != d) throw DimensionError("tomography: state dimension mismatch");
  if (o.readout && o.readout->dim() != d) throw DimensionError("tomography: readout dimension mismatch");
  TomographyData data;
  data.n_qubits = n;
  for (const auto& r : qst_prerotations(n)) {
    const ComplexMatrix out = r * rho * r.adjoint();
    RealVector p(d);
    for (int b = 0; b < d; ++b) p(b) = std::max(0.0, out(b, b).real());
    p /= p.sum();
    if (o.shots > 0) {
      if (o.readout) p = o.readout->apply(p);
      p = sample_distribution(p, o.shots, rng);
      if (o.readout) p = o.readout->correct(p);
    }
    data.probabilities.push_back(p);
  }
  return data;
}

namespace detail {

// least-squares map from stacked probabilities to Pauli coefficients
inline const Eigen::MatrixXd& qst_inverse(int n) {
  static std::map<int, Eigen::MatrixXd> cache;
  static std::mutex mu;
  const std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const int d = qubit_dim(n);
  const auto rots = qst_prerotations(n);
  const auto basis = pauli_basis(n);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rots.size()) * d, d * d);
  for (std::size_t r = 0; r < rots.size(); ++r)
    for (int b = 0; b < d; ++b) {
      const ComplexMatrix m = rots[r].adjoint() * projector(basis_ket(d, b)) * rots[r];
      for (int k = 0; k < d * d; ++k) a(static_cast<Eigen::Index>(r) * d + b, k) = (m * basis[k]).trace().real() / d;
    }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  if (cod.rank() < d * d) throw TomographyError("tomography settings are not informationally complete");
  return cache.emplace(n, cod.pseudoInverse()).first->second;
}

}  // namespace detail

inline ComplexMatrix nearest_density(const ComplexMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (rho + rho.adjoint()));
  RealVector w = es.eigenvalues().cwiseMax(0.0);
  if (w.sum() <= 0) throw InvalidStateError("cannot project a negative operator onto the state space");
  w /= w.sum();
  return es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

inline ComplexMatrix reconstruct_state(const TomographyData& data, bool project = false) {
  const int n = data.n_qubits, d = qubit_dim(n);
  RealVector p(static_cast<Eigen::Index>(data.probabilities.size()) * d);
  for (std::size_t r = 0; r < data.probabilities.size(); ++r) p.segment(static_cast<Eigen::Index>(r) * d, d) = data.probabilities[r];
  const RealVector c = detail::qst_inverse(n) * p;
  const auto basis = pauli_basis(n);
  ComplexMatrix rho = ComplexMatrix::Zero(d, d);
  for (int k = 0; k < d * d; ++k) rho += c(k) * basis[k];
  rho /= static_cast<double>(d);
  rho = 0.5 * (rho + rho.adjoint());
  return project ? nearest_density(rho) : rho;
}

inline ComplexMatrix qst(const ComplexMatrix& rho, int n, const MeasurementOptions& o, std::mt19937_64& rng) {
  return reconstruct_state(measure_tomography(rho, n, o, rng), o.project);
}

inline ComplexMatrix qst(const ComplexMatrix& rho, int n, const MeasurementOptions& o = {}) {
  std::mt19937_64 rng(o.seed);
  return qst(rho, n, o, rng);
}

// ---- process tomography ----

struct ProcessMatrix {
  int n_qubits = 1;
  ComplexMatrix chi;

  int dim() const { return qubit_dim(n_qubits); }
  // || sum chi_mn E_n^dag E_m - I ||_max
  double tp_error() const {
    const auto basis = pauli_basis(n_qubits);
    ComplexMatrix s = ComplexMatrix::Zero(dim(), dim());
    for (int m = 0; m < chi.rows(); ++m)
      for (int k = 0; k < chi.cols(); ++k) s += chi(m, k) * basis[k].adjoint() * basis[m];
    return (s - ComplexMatrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (chi + chi.adjoint()));
    return es.eigenvalues().minCoeff();
  }
  void validate(double herm_tol = 1e-8, double tp_tol = 1e-6) const {
    const int d2 = dim() * dim();
    if (chi.rows() != d2 || chi.cols() != d2) throw DimensionError("chi matrix has the wrong size");
    if ((chi - chi.adjoint()).cwiseAbs().maxCoeff() > herm_tol) throw NotHermitianError("chi matrix is not Hermitian");
    if (tp_error() > tp_tol) throw TomographyError("chi matrix is not trace preserving");
  }
};

inline ComplexMatrix superop_from_chi(const ProcessMatrix& p) {
  const auto basis = pauli_basis(p.n_qubits);
  const int d2 = p.dim() * p.dim();
  ComplexMatrix s = ComplexMatrix::Zero(d2, d2);
  for (int m = 0; m < d2; ++m)
    for (int k = 0; k < d2; ++k)
      if (p.chi(m, k) != cplx(0.0)) s += p.chi(m, k) * kron(basis[k].conjugate(), basis[m]);
  return s;
}

// column-stacking superoperator to chi
inline ProcessMatrix chi_from_superop(const ComplexMatrix& s, int n) {
  const int d = qubit_dim(n), d2 = d * d;
  if (s.rows() != d2 || s.cols() != d2) throw DimensionError("superoperator size mismatch");
  const auto basis = pauli_basis(n);
  ProcessMatrix p;
  p.n_qubits = n;
  p.chi.resize(d2, d2);
  for (int m = 0; m < d2; ++m)
    for (int k = 0; k < d2; ++k) p.chi(m, k) = (kron(basis[k].conjugate(), basis[m]).adjoint() * s).trace() / static_cast<double>(d2);
  return p;
}

inline ProcessMatrix chi_from_unitary(const ComplexMatrix& u) {
  const int d = static_cast<int>(u.rows());
  const int n = static_cast<int>(std::lround(std::log2(d)));
  if (qubit_dim(n) != d) throw DimensionError("unitary dimension is not a power of two");
  const auto basis = pauli_basis(n);
  ComplexVector c(d * d);
  for (int m = 0; m < d * d; ++m) c(m) = (basis[m].adjoint() * u).trace() / static_cast<double>(d);
  return {n, c * c.adjoint()};
}

inline ProcessMatrix chi_from_kraus(const std::vector<ComplexMatrix>& ks) {
  if (ks.empty()) throw std::invalid_argument("empty Kraus set");
  ProcessMatrix p = chi_from_unitary(ks[0]);
  for (std::size_t k = 1; k < ks.size(); ++k) p.chi += chi_from_unitary(ks[k]).chi;
  return p;
}

inline ComplexMatrix apply_chi(const ProcessMatrix& p, const ComplexMatrix& rho) {
  return unvec(superop_from_chi(p) * vec(rho), p.dim());
}

// {|0>, |1>, (|0> - i|1>)/sqrt2, (|0> + |1>)/sqrt2} on each qubit
inline std::vector<ComplexMatrix> qpt_input_states(int n) {
  std::vector<ComplexVector> single(4, ComplexVector(2));
  single[0] << 1.0, 0.0;
  single[1] << 0.0, 1.0;
  single[2] << 1.0 / std::sqrt(2.0), -kI / std::sqrt(2.0);
  single[3] << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  std::vector<ComplexVector> kets{ComplexVector::Ones(1)};
  for (int q = 0; q < n; ++q) {
    std::vector<ComplexVector> next;
    for (const auto& k : kets)
      for (const auto& s : single) next.push_back(kron(k, s));
    kets = std::move(next);
  }
  std::vector<ComplexMatrix> out;
  for (const auto& k : kets) out.push_back(projector(k));
  return out;
}

inline ProcessMatrix chi_from_io(const std::vector<ComplexMatrix>& in, const std::vector<ComplexMatrix>& out, int n) {
  const int d2 = qubit_dim(n) * qubit_dim(n);
  if (static_cast<int>(in.size()) != d2 || in.size() != out.size()) throw DimensionError("process tomography needs 4^n input states");
  ComplexMatrix a(d2, d2), b(d2, d2);
  for (int j = 0; j < d2; ++j) {
    a.col(j) = vec(in[j]);
    b.col(j) = vec(out[j]);
  }
  Eigen::FullPivLU<ComplexMatrix> lu(a);
  if (!lu.isInvertible()) throw TomographyError("process tomography input states are linearly dependent");
  return chi_from_superop(b * lu.inverse(), n);
}

inline ProcessMatrix qpt(const Channel& channel, int n, const MeasurementOptions& o = {}) {
  std::mt19937_64 rng(o.seed);
  const auto in = qpt_input_states(n);
  std::vector<ComplexMatrix> out;
  MeasurementOptions inner = o;
  inner.project = false;
  for (const auto& rho : in) {
    const ComplexMatrix r = channel(rho);
    out.push_back(o.shots == 0 && !o.readout ? r : qst(r, n, inner, rng));
  }
  return chi_from_io(in, out, n);
}

inline double process_fidelity(const ProcessMatrix& a, const ProcessMatrix& b) { return (a.chi * b.chi).trace().real(); }

// alternating projections onto completely positive (eigenvalue clipping) and trace-preserving (affine) sets,
// carried out on the Choi matrix J = sum chi_mn |E_m>><<E_n|
inline ProcessMatrix mle_project(const ProcessMatrix& raw, int max_iter = 5000, double tol = 1e-12) {
  const int d = raw.dim(), d2 = d * d;
  if ((raw.chi - raw.chi.adjoint()).cwiseAbs().maxCoeff() > 1e-8) throw NotHermitianError("mle_project needs a Hermitian chi");
  const auto basis = pauli_basis(raw.n_qubits);
  ComplexMatrix v(d2, d2);
  for (int m = 0; m < d2; ++m) v.col(m) = vec(basis[m]) / std::sqrt(static_cast<double>(d));
  ComplexMatrix j = v * (0.5 * (raw.chi + raw.chi.adjoint())) * v.adjoint();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  // trace over the fast (output) factor must equal I / d in this normalization
  auto tp_project = [&](ComplexMatrix& x) {
    ComplexMatrix pt = ComplexMatrix::Zero(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) pt(a, b) = x.block(a * d, b * d, d, d).trace();
    x -= kron(pt - id / static_cast<double>(d), id) / static_cast<double>(d);
  };
  auto psd_project = [&](ComplexMatrix& x) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (x + x.adjoint()));
    if (es.eigenvalues().minCoeff() >= 0) return 0.0;
    const RealVector w = es.eigenvalues().cwiseMax(0.0);
    const double neg = -es.eigenvalues().minCoeff();
    x = es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    const double tr = x.trace().real();
    if (tr > 0) x *= 1.0 / tr;
    return neg;
  };
  tp_project(j);
  for (int it = 0; it < max_iter; ++it) {
    const double neg = psd_project(j);
    tp_project(j);
    if (neg <= tol) break;
  }
  ProcessMatrix out{raw.n_qubits, v.adjoint() * j * v};
  out.chi = 0.5 * (out.chi + out.chi.adjoint());
  return out;
}

// ---- error analysis ----

struct ErrorBudget {
  double process_fidelity = 0.0;
  double spam_error = 0.0;
  double zz_error = 0.0;
  double decoherence_error = 0.0;
};

// chi_err = T chi T^dag with T_mn = Tr(E_m^dag E_n U^dag) / d
inline ProcessMatrix error_matrix(const ProcessMatrix& chi, const ComplexMatrix& u) {
  if (u.rows() != chi.dim()) throw DimensionError("error_matrix: unitary dimension mismatch");
  if (!is_unitary(u, 1e-9)) throw std::invalid_argument("error_matrix: target is not unitary");
  const auto basis = pauli_basis(chi.n_qubits);
  const int d = chi.dim(), d2 = d * d;
  ComplexMatrix t(d2, d2);
  for (int m = 0; m < d2; ++m)
    for (int k = 0; k < d2; ++k) t(m, k) = (basis[m].adjoint() * basis[k] * u.adjoint()).trace() / static_cast<double>(d);
  return {chi.n_qubits, t * chi.chi * t.adjoint()};
}

inline double decoherence_error(double gate_time_ns, const DeviceModel& d) {
  const double ta = tphi_from_t1_t2star(d.qubit_a.t1_cz, d.qubit_a.t2star_cz);
  const double tb = tphi_from_t1_t2star(d.qubit_b.t1_cz, d.qubit_b.t2star_cz);
  const double rate = 0.5 / us_to_ns(d.qubit_a.t1_cz) + 0.5 / us_to_ns(d.qubit_b.t1_cz) + 0.5 / us_to_ns(ta) + 0.5 / us_to_ns(tb);
  return gate_time_ns * rate;
}

inline double spam_error(const ProcessMatrix& identity_qpt) {
  return 1.0 - std::real(identity_qpt.chi(0, 0));
}

struct ErrorAnalysis {
  ProcessMatrix chi_err;
  ErrorBudget budget;
};

inline ErrorAnalysis analyze_errors(const ProcessMatrix& chi, const ComplexMatrix& u, double gate_time_ns, const DeviceModel& d,
                                    const std::optional<ProcessMatrix>& identity_qpt = std::nullopt) {
  ErrorAnalysis a;
  a.chi_err = error_matrix(chi, u);
  a.budget.process_fidelity = std::clamp(a.chi_err.chi(0, 0).real(), 0.0, 1.0);
  if (chi.n_qubits == 2 && a.budget.process_fidelity > 0) {
    const double im = a.chi_err.chi(0, pauli_index("ZZ")).imag();
    a.budget.zz_error = std::clamp(im * im / a.budget.process_fidelity, 0.0, 1.0);
  }
  a.budget.decoherence_error = std::clamp(decoherence_error(gate_time_ns, d), 0.0, 1.0);
  if (identity_qpt) a.budget.spam_error = std::clamp(spam_error(*identity_qpt), 0.0, 1.0);
  return a;
}

struct BootstrapResult {
  double mean = 0.0;
  double std = 0.0;
};

inline BootstrapResult bootstrap_fidelity(const std::vector<double>& runs, int resamples = 1000, std::uint64_t seed = 0) {
  if (runs.size() < 2) throw std::invalid_argument("bootstrap needs at least two runs");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, runs.size() - 1);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < runs.size(); ++k) s += runs[pick(rng)];
    m = s / static_cast<double>(runs.size());
  }
  BootstrapResult r;
  for (double x : runs) r.mean += x;
  r.mean /= static_cast<double>(runs.size());
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= resamples;
  for (double m : means) r.std += (m - mu) * (m - mu);
  r.std = std::sqrt(r.std / (resamples - 1));
  return r;
}

// ---- export ----

inline void write_chi_csv(std::ostream& os, const ProcessMatrix& p) {
  os << "row,col,re,im\n";
  char buf[128];
  for (int m = 0; m < p.chi.rows(); ++m)
    for (int k = 0; k < p.chi.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.12e,%.12e\n", m, k, p.chi(m, k).real(), p.chi(m, k).imag());
      os << buf;
    }
}

// long format for bar charts: one line per element with Pauli labels
inline void write_chi_bars_csv(std::ostream& os, const ProcessMatrix& p) {
  os << "row_label,col_label,re,im\n";
  char buf[128];
  for (int m = 0; m < p.chi.rows(); ++m)
    for (int k = 0; k < p.chi.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.12e,%.12e\n", pauli_label(m, p.n_qubits).c_str(),
                    pauli_label(k, p.n_qubits).c_str(), p.chi(m, k).real(), p.chi(m, k).imag());
      os << buf;
    }
}

inline nlohmann::json budget_to_json(const ErrorBudget& b) {
  return {{"process_fidelity", b.process_fidelity}, {"spam_error", b.spam_error}, {"zz_error", b.zz_error},
          {"decoherence_error", b.decoherence_error}};
}

}  // namespace geomgate
