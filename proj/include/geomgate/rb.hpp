#pragma once

#include "device.hpp"
#include "evolve.hpp"
#include "parallel.hpp"
#include "pulse.hpp"
#include "qmath.hpp"
#include "tomo.hpp"
#include "twoqubit.hpp"

#include <unsupported/Eigen/NonLinearOptimization>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace geomgate {

// ---- Clifford groups ----

struct NativeOp {
  enum class Kind { VirtualZ, Rotation, CZ };
  Kind kind = Kind::VirtualZ;
  int qubit = 0;
  double angle = 0.0;   // VirtualZ
  GateSpec spec;        // Rotation
};

// a 1q layer (one Clifford per qubit, simultaneous) or a CZ
struct CliffordStep {
  bool cz = false;
  std::array<int, 2> local{0, 0};
};

struct CliffordElement {
  int index = 0;
  ComplexMatrix unitary;
  std::vector<NativeOp> decomposition;   // time order
  std::vector<CliffordStep> steps;       // time order, two-qubit elements only
  int cz_count = 0;
};

namespace detail {

// unitary up to global phase, rounded
inline std::vector<long long> phase_key(const ComplexMatrix& u) {
  cplx ref = 1.0;
  for (Eigen::Index k = 0; k < u.size(); ++k)
    if (std::abs(u.data()[k]) > 1e-3) {
      ref = std::abs(u.data()[k]) / u.data()[k];
      break;
    }
  std::vector<long long> key;
  key.reserve(2 * u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const cplx z = u.data()[k] * ref;
    key.push_back(std::llround(z.real() * 1e6));
    key.push_back(std::llround(z.imag() * 1e6));
  }
  return key;
}

struct KeyHash {
  std::size_t operator()(const std::vector<long long>& k) const {
    std::size_t h = 1469598103934665603ull;
    for (long long x : k) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
    return h;
  }
};

inline ComplexMatrix hadamard() { return (pauli_x() + pauli_z()) / std::sqrt(2.0); }

}  // namespace detail

class CliffordGroup {
 public:
  int n_qubits() const { return n_; }
  std::size_t size() const { return elements_.size(); }
  const CliffordElement& operator[](std::size_t k) const { return elements_[k]; }
  const std::vector<CliffordElement>& elements() const { return elements_; }

  // index of u up to global phase, -1 if u is not in the group
  int find(const ComplexMatrix& u) const {
    const auto it = lookup_.find(detail::phase_key(u));
    return it == lookup_.end() ? -1 : it->second;
  }

  int inverse_of(const ComplexMatrix& u) const {
    const int k = find(u.adjoint());
    if (k < 0) throw std::invalid_argument("operator is not a Clifford");
    return k;
  }

  static CliffordGroup single(Scheme scheme = Scheme::SpNgqc) {
    CliffordGroup g;
    g.n_ = 1;
    const ComplexMatrix h = detail::hadamard();
    const ComplexMatrix s = rz(kPi / 2);
    std::vector<ComplexMatrix> found{ComplexMatrix::Identity(2, 2)};
    g.lookup_.emplace(detail::phase_key(found[0]), 0);
    for (std::size_t k = 0; k < found.size(); ++k)
      for (const ComplexMatrix* gen : {&h, &s}) {
        const ComplexMatrix u = (*gen) * found[k];
        if (g.lookup_.emplace(detail::phase_key(u), static_cast<int>(found.size())).second) found.push_back(u);
      }
    for (std::size_t k = 0; k < found.size(); ++k) {
      CliffordElement e;
      e.index = static_cast<int>(k);
      e.unitary = found[k];
      e.decomposition = single_qubit_decomposition(found[k], 0, scheme);
      g.elements_.push_back(std::move(e));
    }
    return g;
  }

  // classes by CZ count: local layer, CNOT-like, iSWAP-like, SWAP-like
  static CliffordGroup two(Scheme scheme = Scheme::SpNgqc) {
    const CliffordGroup c1 = single(scheme);
    CliffordGroup g;
    g.n_ = 2;
    const int h = c1.find(detail::hadamard());
    const ComplexMatrix r = expm_hermitian((pauli_x() + pauli_y() + pauli_z()) / std::sqrt(3.0), kPi / 3);
    const std::array<int, 3> s1{0, c1.find(r), c1.find(r * r)};
    auto layer = [](int a, int b) { return CliffordStep{false, {a, b}}; };
    const CliffordStep cz{true, {0, 0}};
    auto add_class = [&](const std::vector<std::vector<CliffordStep>>& prefixes) {
      for (const auto& prefix : prefixes)
        for (int a = 0; a < 24; ++a)
          for (int b = 0; b < 24; ++b) {
            auto steps = prefix;
            steps.push_back(layer(a, b));
            g.add_two_qubit(c1, std::move(steps));
          }
    };
    add_class({{}});
    std::vector<std::vector<CliffordStep>> one, two_cz;
    for (int s : s1)
      for (int t : s1) {
        one.push_back({layer(s, t), cz});
        two_cz.push_back({layer(s, t), cz, layer(h, h), cz});
      }
    add_class(one);
    add_class(two_cz);
    add_class({{cz, layer(h, h), cz, layer(h, h), cz}});
    if (g.size() != 11520) throw std::logic_error("two-qubit Clifford synthesis produced duplicates");
    return g;
  }

  static const CliffordGroup& cached(int n_qubits) {
    if (n_qubits == 1) {
      static const CliffordGroup g = single();
      return g;
    }
    if (n_qubits == 2) {
      static const CliffordGroup g = two();
      return g;
    }
    throw std::invalid_argument("Clifford groups are available for 1 or 2 qubits");
  }

  static std::vector<NativeOp> single_qubit_decomposition(const ComplexMatrix& u, int qubit, Scheme scheme) {
    const VirtualZDecomposition d = compose_with_virtual_z(u, scheme);
    std::vector<NativeOp> ops;
    auto z = [&](double a) {
      a = wrap_phase(a);
      if (std::abs(a) > 1e-10) ops.push_back({NativeOp::Kind::VirtualZ, qubit, a, {}});
    };
    if (!d.has_physical) {
      z(d.z_pre + d.z_post);
      return ops;
    }
    z(d.z_pre);
    ops.push_back({NativeOp::Kind::Rotation, qubit, 0.0, d.physical});
    z(d.z_post);
    return ops;
  }

 private:
  void add_two_qubit(const CliffordGroup& c1, std::vector<CliffordStep> steps) {
    ComplexMatrix u = ComplexMatrix::Identity(4, 4);
    CliffordElement e;
    for (const auto& s : steps) {
      if (s.cz) {
        u = cz_matrix() * u;
        ++e.cz_count;
        e.decomposition.push_back({NativeOp::Kind::CZ, 0, 0.0, {}});
        continue;
      }
      u = kron(c1[s.local[0]].unitary, c1[s.local[1]].unitary) * u;
      for (int q = 0; q < 2; ++q)
        for (NativeOp op : c1[s.local[q]].decomposition) {
          op.qubit = q;
          e.decomposition.push_back(op);
        }
    }
    if (!lookup_.emplace(detail::phase_key(u), static_cast<int>(elements_.size())).second) return;
    e.index = static_cast<int>(elements_.size());
    e.unitary = u;
    e.steps = std::move(steps);
    elements_.push_back(std::move(e));
  }

  int n_ = 1;
  std::vector<CliffordElement> elements_;
  std::unordered_map<std::vector<long long>, int, detail::KeyHash> lookup_;
};

inline const CliffordGroup& clifford_group(int n_qubits) { return CliffordGroup::cached(n_qubits); }

// product of the native ops; qubit 0 is the leftmost tensor factor
inline ComplexMatrix decomposition_unitary(const std::vector<NativeOp>& ops, int n_qubits) {
  const int d = 1 << n_qubits;
  ComplexMatrix u = ComplexMatrix::Identity(d, d);
  auto local = [&](const ComplexMatrix& m, int q) {
    return n_qubits == 1 ? m : (q == 0 ? kron(m, pauli_i()) : kron(pauli_i(), m));
  };
  for (const auto& op : ops) {
    switch (op.kind) {
      case NativeOp::Kind::VirtualZ: u = local(rz(op.angle), op.qubit) * u; break;
      case NativeOp::Kind::Rotation: u = local(target_unitary(op.spec), op.qubit) * u; break;
      case NativeOp::Kind::CZ: u = cz_matrix() * u; break;
    }
  }
  return u;
}

// ---- fitting: y = A p^m + B ----

struct ExpFit {
  double a = 0.0, b = 0.0, p = 1.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();   // order a, b, p
  double rss = 0.0;

  double sigma_p() const { return std::sqrt(std::max(0.0, covariance(2, 2))); }
  double at(double m) const { return a * std::pow(p, m) + b; }
};

struct RBFitError : std::runtime_error {
  RBFitError(const std::string& what, std::vector<double> m, std::vector<double> y)
      : std::runtime_error(what), lengths(std::move(m)), values(std::move(y)) {}
  std::vector<double> lengths;
  std::vector<double> values;
};

namespace detail {

// parameters (a, b, p); entries with free[k] == false stay at full[k]
struct ExpDecayFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const std::vector<double>& m;
  const std::vector<double>& y;
  std::array<bool, 3> free{true, true, true};
  Eigen::Vector3d full = Eigen::Vector3d::Zero();

  int inputs() const { return static_cast<int>(std::count(free.begin(), free.end(), true)); }
  int values() const { return static_cast<int>(m.size()); }

  Eigen::Vector3d expand(const Eigen::VectorXd& x) const {
    Eigen::Vector3d v = full;
    for (int k = 0, j = 0; k < 3; ++k)
      if (free[k]) v(k) = x(j++);
    return v;
  }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    const Eigen::Vector3d v = expand(x);
    for (std::size_t i = 0; i < m.size(); ++i) f(i) = v(0) * std::pow(v(2), m[i]) + v(1) - y[i];
    return 0;
  }

  Eigen::MatrixXd jacobian(const Eigen::Vector3d& v) const {
    Eigen::MatrixXd j(m.size(), 3);
    for (std::size_t i = 0; i < m.size(); ++i) {
      j(i, 0) = std::pow(v(2), m[i]);
      j(i, 1) = 1.0;
      j(i, 2) = m[i] == 0.0 ? 0.0 : v(0) * m[i] * std::pow(v(2), m[i] - 1.0);
    }
    return j;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    const Eigen::MatrixXd all = jacobian(expand(x));
    for (int k = 0, c = 0; k < 3; ++k)
      if (free[k]) j.col(c++) = all.col(k);
    return 0;
  }
};

inline constexpr std::array<double, 3> kFitLower{0.0, 0.0, 0.0};
inline constexpr std::array<double, 3> kFitUpper{1.2, 1.2, 1.0};

}  // namespace detail

// bounded Levenberg-Marquardt (A, B in [0, 1.2], p in (0, 1]) from p in {0.9, 0.99, 0.999};
// parameters that leave their box are pinned to the bound and the rest refit
inline ExpFit fit_exponential(const std::vector<double>& m, const std::vector<double>& y) {
  if (m.size() != y.size()) throw DimensionError("fit: lengths and values differ in size");
  if (m.size() < 4) throw RBFitError("fit needs at least four lengths", m, y);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*hi - *lo < 1e-10) {
    ExpFit flat;
    for (double v : y) flat.b += v;
    flat.b /= static_cast<double>(y.size());
    return flat;
  }
  const Eigen::Index n = static_cast<Eigen::Index>(m.size());
  using S = Eigen::LevenbergMarquardtSpace::Status;
  std::optional<ExpFit> best;
  for (double p0 : {0.9, 0.99, 0.999}) {
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = std::pow(p0, m[i]);
      x(i, 1) = 1.0;
      rhs(i) = y[i];
    }
    const Eigen::Vector2d ab = x.colPivHouseholderQr().solve(rhs);
    detail::ExpDecayFunctor f{m, y};
    f.full << std::clamp(ab(0), 0.0, 1.2), std::clamp(ab(1), 0.0, 1.2), p0;
    bool ok = false;
    for (int round = 0; round < 4; ++round) {
      Eigen::VectorXd par(f.inputs());
      for (int k = 0, j = 0; k < 3; ++k)
        if (f.free[k]) par(j++) = f.full(k);
      Eigen::LevenbergMarquardt<detail::ExpDecayFunctor> lm(f);
      lm.parameters.maxfev = 4000;
      lm.parameters.xtol = 1e-14;
      lm.parameters.ftol = 1e-14;
      const auto status = lm.minimize(par);
      if (status == S::ImproperInputParameters || status == S::TooManyFunctionEvaluation || !par.allFinite()) break;
      f.full = f.expand(par);
      bool clamped = false;
      for (int k = 0; k < 3; ++k) {
        const double lo_k = detail::kFitLower[k], hi_k = detail::kFitUpper[k];
        if (f.full(k) < lo_k - 1e-12 || f.full(k) > hi_k + 1e-12) {
          f.full(k) = std::clamp(f.full(k), lo_k, hi_k);
          f.free[k] = false;
          clamped = true;
        }
      }
      if (!clamped) {
        ok = f.full(2) > 0.0;
        break;
      }
      if (f.inputs() == 0) break;
    }
    if (!ok) continue;
    Eigen::VectorXd res(n);
    detail::ExpDecayFunctor all{m, y};
    all.full = f.full;
    all.free = {false, false, false};
    all(Eigen::VectorXd(0), res);
    ExpFit fit;
    fit.a = f.full(0);
    fit.b = f.full(1);
    fit.p = f.full(2);
    fit.rss = res.squaredNorm();
    if (best && best->rss <= fit.rss) continue;
    // covariance over the free parameters, zero for pinned ones
    const Eigen::MatrixXd jac = f.jacobian(f.full);
    std::vector<int> idx;
    for (int k = 0; k < 3; ++k)
      if (f.free[k]) idx.push_back(k);
    const int nf = static_cast<int>(idx.size());
    Eigen::MatrixXd jf(n, nf);
    for (int c = 0; c < nf; ++c) jf.col(c) = jac.col(idx[c]);
    const double s2 = n > nf ? fit.rss / static_cast<double>(n - nf) : 0.0;
    const Eigen::MatrixXd jtj = jf.transpose() * jf;
    const Eigen::MatrixXd cov = s2 * Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(jtj).pseudoInverse();
    for (int r = 0; r < nf; ++r)
      for (int c = 0; c < nf; ++c) fit.covariance(idx[r], idx[c]) = cov(r, c);
    best = fit;
  }
  if (!best) throw RBFitError("exponential fit did not converge within bounds", m, y);
  return *best;
}

// ---- sequence simulation ----

// noisy implementation of the Clifford group on a product of transmons; the first two levels of each are the qubit
struct RBModel {
  int n_qubits = 1;
  std::vector<int> levels{2};
  std::function<void(int, ComplexMatrix&)> clifford;
  std::function<double(int)> clifford_duration;   // ns
  std::optional<ComplexMatrix> interleaved_ideal;  // 2^n unitary, must be Clifford
  std::function<void(ComplexMatrix&)> interleaved;
  double interleaved_duration = 0.0;

  int dim() const {
    int d = 1;
    for (int l : levels) d *= l;
    return d;
  }

  // joint indices of the computational states, in qubit order
  std::vector<int> computational_indices() const {
    std::vector<int> out;
    for (int b = 0; b < (1 << n_qubits); ++b) {
      int idx = 0;
      for (int q = 0; q < n_qubits; ++q) idx = idx * levels[q] + ((b >> (n_qubits - 1 - q)) & 1);
      out.push_back(idx);
    }
    return out;
  }

  double duration(int c) const { return clifford_duration ? clifford_duration(c) : 0.0; }
};

struct RBConfig {
  std::vector<int> lengths;
  int sequences = 30;
  std::uint64_t seed = 0;
  bool interleaved = false;
  long shots = 0;                      // 0: exact populations
  bool purity = false;                 // state tomography after each sequence
  double max_sequence_time = 30000.0;  // ns
  int jobs = 0;

  void validate() const {
    if (lengths.empty()) throw ConfigError("RB needs at least one sequence length");
    for (int m : lengths)
      if (m < 0) throw ConfigError("sequence lengths must be non-negative");
    if (sequences < 1) throw ConfigError("RB needs at least one randomization");
    if (shots < 0) throw ConfigError("shots must be non-negative");
  }
};

struct RBRawData {
  std::vector<int> lengths;
  int sequences = 0;
  bool interleaved = false;
  // [length][sequence]
  std::vector<std::vector<double>> survival, computational, purity;
  double longest_sequence = 0.0;   // ns
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// independent stream per (length, sequence index)
inline std::uint64_t rb_stream_seed(std::uint64_t master, int m, int sequence) {
  const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(m)) << 32) |
                            static_cast<std::uint32_t>(sequence);
  return splitmix64(master ^ splitmix64(key));
}

struct RBSequenceOutcome {
  double survival = 0.0, computational = 0.0, purity = 0.0, duration = 0.0;
};

inline std::vector<int> random_clifford_sequence(const CliffordGroup& g, int m, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(g.size()) - 1);
  std::vector<int> seq(m);
  for (int& c : seq) c = pick(rng);
  return seq;
}

// appends the inverting Clifford; `interleaved` is inserted after every random element
inline int inverting_clifford(const CliffordGroup& g, const std::vector<int>& seq,
                              const std::optional<ComplexMatrix>& interleaved) {
  const int d = 1 << g.n_qubits();
  ComplexMatrix u = ComplexMatrix::Identity(d, d);
  for (int c : seq) {
    u = g[c].unitary * u;
    if (interleaved) u = *interleaved * u;
  }
  return g.inverse_of(u);
}

inline RBSequenceOutcome run_rb_sequence(const RBModel& model, const CliffordGroup& g, int m, bool interleave,
                                         long shots, bool purity, std::mt19937_64& rng) {
  const std::vector<int> seq = random_clifford_sequence(g, m, rng);
  const std::optional<ComplexMatrix> gate = interleave ? model.interleaved_ideal : std::nullopt;
  const int inv = inverting_clifford(g, seq, gate);
  const int dim = model.dim();
  ComplexMatrix rho = ComplexMatrix::Zero(dim, dim);
  rho(0, 0) = 1.0;
  RBSequenceOutcome out;
  for (int c : seq) {
    model.clifford(c, rho);
    out.duration += model.duration(c);
    if (interleave) {
      model.interleaved(rho);
      out.duration += model.interleaved_duration;
    }
  }
  model.clifford(inv, rho);
  out.duration += model.duration(inv);

  const std::vector<int> comp = model.computational_indices();
  out.survival = std::clamp(rho(0, 0).real(), 0.0, 1.0);
  for (int i : comp) out.computational += rho(i, i).real();
  out.computational = std::clamp(out.computational, 0.0, 1.0);
  if (shots > 0) {
    std::binomial_distribution<long> s(shots, out.survival), c(shots, out.computational);
    out.survival = static_cast<double>(s(rng)) / static_cast<double>(shots);
    out.computational = static_cast<double>(c(rng)) / static_cast<double>(shots);
  }
  if (purity) {
    const int k = static_cast<int>(comp.size());
    ComplexMatrix block(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) block(i, j) = rho(comp[i], comp[j]);
    const double tr = block.trace().real();
    if (tr > 1e-12) {
      block /= tr;
      MeasurementOptions o;
      o.shots = shots;
      const ComplexMatrix est = qst(block, model.n_qubits, o, rng);
      out.purity = (est * est).trace().real();
    }
  }
  return out;
}

inline RBRawData simulate_rb(const RBConfig& config, const RBModel& model) {
  config.validate();
  if (!model.clifford) throw ConfigError("RB model has no Clifford implementation");
  if (static_cast<int>(model.levels.size()) != model.n_qubits) throw ConfigError("RB model levels do not match qubits");
  if (config.interleaved && (!model.interleaved_ideal || !model.interleaved))
    throw ConfigError("interleaved RB needs an interleaved gate");
  const CliffordGroup& g = clifford_group(model.n_qubits);
  if (config.interleaved) g.inverse_of(*model.interleaved_ideal);

  const std::size_t nl = config.lengths.size(), k = static_cast<std::size_t>(config.sequences);
  std::vector<RBSequenceOutcome> outcomes(nl * k);
  parallel_for(
      nl * k,
      [&](std::size_t task) {
        const int m = config.lengths[task / k];
        const int j = static_cast<int>(task % k);
        std::mt19937_64 rng(rb_stream_seed(config.seed, m, j));
        outcomes[task] = run_rb_sequence(model, g, m, config.interleaved, config.shots, config.purity, rng);
      },
      config.jobs);

  RBRawData raw;
  raw.lengths = config.lengths;
  raw.sequences = config.sequences;
  raw.interleaved = config.interleaved;
  for (std::size_t l = 0; l < nl; ++l) {
    std::vector<double> s, c, p;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& o = outcomes[l * k + j];
      s.push_back(o.survival);
      c.push_back(o.computational);
      p.push_back(o.purity);
      raw.longest_sequence = std::max(raw.longest_sequence, o.duration);
    }
    raw.survival.push_back(std::move(s));
    raw.computational.push_back(std::move(c));
    raw.purity.push_back(std::move(p));
  }
  if (raw.longest_sequence > config.max_sequence_time)
    throw ConfigError("RB sequence exceeds the maximum driving time of " + std::to_string(config.max_sequence_time) + " ns");
  return raw;
}

// ---- results ----

struct RBResult {
  std::string variant = "reference";
  std::vector<int> lengths;
  std::vector<double> mean, stderr_;
  int sequences = 0;
  double fit_A = 0.0, fit_B = 0.0, fit_p = 1.0;   // A p^m + B
  Eigen::Matrix3d fit_covariance = Eigen::Matrix3d::Zero();

  double p_error() const { return std::sqrt(std::max(0.0, fit_covariance(2, 2))); }
};

inline RBResult summarize_rb(const std::vector<int>& lengths, const std::vector<std::vector<double>>& values,
                             const std::string& variant) {
  RBResult r;
  r.variant = variant;
  r.lengths = lengths;
  r.sequences = values.empty() ? 0 : static_cast<int>(values.front().size());
  std::vector<double> m;
  for (std::size_t l = 0; l < lengths.size(); ++l) {
    const auto& v = values[l];
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mu) * (x - mu);
    const double se = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
    r.mean.push_back(mu);
    r.stderr_.push_back(se);
    m.push_back(static_cast<double>(lengths[l]));
  }
  const ExpFit f = fit_exponential(m, r.mean);
  r.fit_A = f.a;
  r.fit_B = f.b;
  r.fit_p = f.p;
  r.fit_covariance = f.covariance;
  return r;
}

inline RBResult rb_run(const RBConfig& config, const RBModel& model) {
  const RBRawData raw = simulate_rb(config, model);
  return summarize_rb(raw.lengths, raw.survival, config.interleaved ? "interleaved" : "reference");
}

inline double average_gate_fidelity(double p, int n_qubits) {
  const double d = static_cast<double>(1 << n_qubits);
  return 1.0 - (1.0 - p) * (d - 1.0) / d;
}

inline double average_gate_fidelity(const RBResult& r, int n_qubits) { return average_gate_fidelity(r.fit_p, n_qubits); }

inline double interleaved_fidelity(const RBResult& ref, const RBResult& inter, int n_qubits) {
  if (ref.fit_p == 0.0) throw std::invalid_argument("reference decay is zero");
  return average_gate_fidelity(inter.fit_p / ref.fit_p, n_qubits);
}

// the computational population follows A + B lambda^m; here A is the fit offset and lambda the decay
struct LeakageRBResult {
  RBResult reference;
  std::optional<RBResult> interleaved;
  double l1_ref = 0.0, l1_int = 0.0, l1_gate = 0.0;
};

inline double leakage_rate(const RBResult& r) { return (1.0 - r.fit_B) * (1.0 - r.fit_p); }

inline LeakageRBResult leakage_from_raw(const RBRawData& ref, const std::optional<RBRawData>& inter) {
  LeakageRBResult out;
  out.reference = summarize_rb(ref.lengths, ref.computational, "leakage_reference");
  out.l1_ref = leakage_rate(out.reference);
  out.l1_gate = out.l1_ref;
  if (inter) {
    out.interleaved = summarize_rb(inter->lengths, inter->computational, "leakage_interleaved");
    out.l1_int = leakage_rate(*out.interleaved);
    out.l1_gate = 1.0 - (1.0 - out.l1_int) / (1.0 - out.l1_ref);
  }
  return out;
}

// interleaved part runs when the model carries an interleaved gate
inline LeakageRBResult leakage_rb(RBConfig config, const RBModel& model) {
  config.interleaved = false;
  const RBRawData ref = simulate_rb(config, model);
  std::optional<RBRawData> inter;
  if (model.interleaved_ideal) {
    config.interleaved = true;
    inter = simulate_rb(config, model);
  }
  return leakage_from_raw(ref, inter);
}

// purity follows (1 - 1/d) gamma^(2m) + 1/d
struct PurityRBResult {
  RBResult fit;
  double gamma = 1.0, gamma_error = 0.0;
  double incoherent_error = 0.0;   // per gate
};

inline double incoherent_error(double gamma, int n_qubits, double gates_per_clifford) {
  const double d = static_cast<double>(1 << n_qubits);
  return (1.0 - 1.0 / d) * (1.0 - std::pow(gamma, 1.0 / gates_per_clifford));
}

inline PurityRBResult purity_from_raw(const RBRawData& raw, int n_qubits, double gates_per_clifford) {
  PurityRBResult out;
  out.fit = summarize_rb(raw.lengths, raw.purity, raw.interleaved ? "purity_interleaved" : "purity");
  out.gamma = std::sqrt(out.fit.fit_p);
  out.gamma_error = out.fit.fit_p > 0 ? 0.5 * out.fit.p_error() / out.gamma : 0.0;
  out.incoherent_error = incoherent_error(out.gamma, n_qubits, gates_per_clifford);
  return out;
}

// two-qubit Cliffords average 1.5 CZ gates
inline double default_gates_per_clifford(int n_qubits) { return n_qubits == 2 ? 1.5 : 1.0; }

inline PurityRBResult purity_rb(RBConfig config, const RBModel& model, double gates_per_clifford = 0.0) {
  config.purity = true;
  if (gates_per_clifford <= 0) gates_per_clifford = default_gates_per_clifford(model.n_qubits);
  return purity_from_raw(simulate_rb(config, model), model.n_qubits, gates_per_clifford);
}

// lengths spread geometrically up to the driving-time budget
inline std::vector<int> rb_lengths_for_budget(const RBModel& model, bool interleaved, int count, int max_length,
                                              double max_time = 30000.0) {
  const CliffordGroup& g = clifford_group(model.n_qubits);
  double worst = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) worst = std::max(worst, model.duration(static_cast<int>(c)));
  const double per = worst + (interleaved ? model.interleaved_duration : 0.0);
  int top = max_length;
  if (per > 0) top = std::min(top, static_cast<int>(std::floor((max_time - worst) / per)));
  if (top < 1) throw ConfigError("driving-time budget does not fit a single Clifford");
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    const int m = count == 1 ? top : static_cast<int>(std::lround(std::pow(static_cast<double>(top), i / (count - 1.0))));
    if (out.empty() || m > out.back()) out.push_back(m);
  }
  return out;
}

// ---- channel models ----

namespace detail {

inline void apply_superop_inplace(const ComplexMatrix& s, ComplexMatrix& rho) {
  const Eigen::Index d = rho.rows();
  const ComplexVector v = s * Eigen::Map<const ComplexVector>(rho.data(), d * d);
  rho = Eigen::Map<const ComplexMatrix>(v.data(), d, d);
}

// joint index -> per-site digits (site 0 most significant)
inline std::vector<int> digits(int idx, const std::vector<int>& dims) {
  std::vector<int> out(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    out[k] = idx % dims[k];
    idx /= dims[k];
  }
  return out;
}

inline int join(const std::vector<int>& dig, const std::vector<int>& dims) {
  int idx = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) idx = idx * dims[k] + dig[k];
  return idx;
}

}  // namespace detail

// local superoperator acting on one site of a product space
inline ComplexMatrix embed_superop(const ComplexMatrix& s, int site, const std::vector<int>& dims) {
  const int d = dims[site];
  if (s.rows() != d * d) throw DimensionError("embed_superop: local superoperator has the wrong size");
  int total = 1;
  for (int x : dims) total *= x;
  ComplexMatrix out = ComplexMatrix::Zero(total * total, total * total);
  for (int j = 0; j < total; ++j)
    for (int i = 0; i < total; ++i) {
      const auto di = detail::digits(i, dims), dj = detail::digits(j, dims);
      const int col = j * total + i;
      for (int l = 0; l < d; ++l)
        for (int k = 0; k < d; ++k) {
          const cplx v = s(l * d + k, dj[site] * d + di[site]);
          if (v == cplx(0.0)) continue;
          auto ri = di, rj = dj;
          ri[site] = k;
          rj[site] = l;
          out(detail::join(rj, dims) * total + detail::join(ri, dims), col) = v;
        }
    }
  return out;
}

// ideal Cliffords followed by depolarization with parameter p
inline RBModel depolarizing_model(int n_qubits, double p, std::optional<ComplexMatrix> gate = std::nullopt,
                                  double gate_p = 1.0) {
  if (p < 0 || p > 1 || gate_p < 0 || gate_p > 1) throw ConfigError("depolarizing parameter outside [0,1]");
  const CliffordGroup* g = &clifford_group(n_qubits);
  RBModel m;
  m.n_qubits = n_qubits;
  m.levels.assign(n_qubits, 2);
  const double d = static_cast<double>(1 << n_qubits);
  auto depolarize = [d](ComplexMatrix& rho, double q) {
    const cplx tr = rho.trace();
    rho = q * rho + (1.0 - q) * tr / d * ComplexMatrix::Identity(rho.rows(), rho.cols());
  };
  m.clifford = [g, p, depolarize](int c, ComplexMatrix& rho) {
    const ComplexMatrix& u = (*g)[c].unitary;
    rho = u * rho * u.adjoint();
    depolarize(rho, p);
  };
  if (gate) {
    m.interleaved_ideal = *gate;
    m.interleaved = [u = *gate, gate_p, depolarize](ComplexMatrix& rho) {
      rho = u * rho * u.adjoint();
      depolarize(rho, gate_p);
    };
  }
  return m;
}

// ideal Cliffords followed by a fixed coherent error
inline RBModel coherent_error_model(int n_qubits, const ComplexMatrix& error) {
  if (error.rows() != (1 << n_qubits) || !is_unitary(error)) throw ConfigError("coherent error must be a unitary on the qubits");
  const CliffordGroup* g = &clifford_group(n_qubits);
  RBModel m;
  m.n_qubits = n_qubits;
  m.levels.assign(n_qubits, 2);
  m.clifford = [g, error](int c, ComplexMatrix& rho) {
    const ComplexMatrix u = error * (*g)[c].unitary;
    rho = u * rho * u.adjoint();
  };
  return m;
}

// single qutrit: ideal Cliffords, then |1> -> |2> with probability 2*leak and |2> -> |1> with probability seep,
// so the leakage averaged over the qubit subspace is `leak`
inline std::vector<ComplexMatrix> leakage_kraus(double leak, double seep) {
  if (leak < 0 || 2 * leak > 1 || seep < 0 || seep > 1) throw ConfigError("leakage probabilities outside [0,1]");
  ComplexMatrix k0 = ComplexMatrix::Zero(3, 3), k1 = ComplexMatrix::Zero(3, 3), k2 = ComplexMatrix::Zero(3, 3);
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt(1.0 - 2.0 * leak);
  k0(2, 2) = std::sqrt(1.0 - seep);
  k1(2, 1) = std::sqrt(2.0 * leak);
  k2(1, 2) = std::sqrt(seep);
  return {k0, k1, k2};
}

inline RBModel leaky_model(double leak, double seep, std::optional<ComplexMatrix> gate = std::nullopt,
                           double gate_leak = 0.0, double gate_seep = 0.0) {
  const CliffordGroup* g = &clifford_group(1);
  RBModel m;
  m.n_qubits = 1;
  m.levels = {3};
  auto lift = [](const ComplexMatrix& u) {
    ComplexMatrix out = ComplexMatrix::Identity(3, 3);
    out.topLeftCorner(2, 2) = u;
    return out;
  };
  auto channel = [](const std::vector<ComplexMatrix>& ks, ComplexMatrix& rho) {
    ComplexMatrix out = ComplexMatrix::Zero(3, 3);
    for (const auto& k : ks) out += k * rho * k.adjoint();
    rho = out;
  };
  m.clifford = [g, lift, channel, ks = leakage_kraus(leak, seep)](int c, ComplexMatrix& rho) {
    const ComplexMatrix u = lift((*g)[c].unitary);
    rho = u * rho * u.adjoint();
    channel(ks, rho);
  };
  if (gate) {
    m.interleaved_ideal = *gate;
    m.interleaved = [u = lift(*gate), channel, ks = leakage_kraus(gate_leak, gate_seep)](ComplexMatrix& rho) {
      rho = u * rho * u.adjoint();
      channel(ks, rho);
    };
  }
  return m;
}

// pulse-level single-qubit gates: Clifford = virtual Z, one compiled rotation, virtual Z
struct NativeRBOptions {
  Scheme scheme = Scheme::SpNgqc;
  CompileOptions compile = [] {
    CompileOptions c;
    c.virtual_detuning = true;   // three rotations, 90 ns
    return c;
  }();
  double dt = 0.05;
  bool decoherence = true;
};

struct LocalCliffordChannels {
  int levels = 2;
  std::vector<ComplexMatrix> superop;   // per Clifford
  std::vector<double> duration;         // ns
  LindbladModel lindblad;
};

inline LocalCliffordChannels local_clifford_channels(const QubitParams& q, int levels, const NoiseModel& noise,
                                                     const NativeRBOptions& o) {
  const CliffordGroup& g = clifford_group(1);
  LocalCliffordChannels out;
  out.levels = levels;
  if (o.decoherence) out.lindblad = transmon_decoherence(levels, q.t1, q.t2star);
  PropagationOptions prop;
  prop.levels = levels;
  prop.dt = o.dt;
  prop.anharmonicity = q.anharmonicity;
  std::map<std::pair<long long, long long>, std::pair<ComplexMatrix, double>> compiled;
  for (const auto& e : g.elements()) {
    ComplexMatrix s = ComplexMatrix::Identity(levels * levels, levels * levels);
    double t = 0.0;
    for (const auto& op : e.decomposition) {
      if (op.kind == NativeOp::Kind::VirtualZ) {
        s = unitary_superop(frame_rotation(levels, op.angle)) * s;
        continue;
      }
      GateSpec spec = op.spec;
      spec.scheme = o.scheme;
      const auto key = std::make_pair(std::llround(spec.phi * 1e9), std::llround(spec.gamma * 1e9));
      auto it = compiled.find(key);
      if (it == compiled.end()) {
        const PulseSchedule sched = compile(spec, o.compile);
        it = compiled.emplace(key, std::make_pair(channel_superop(sched, noise, out.lindblad, prop), sched.total_duration())).first;
      }
      s = it->second.first * s;
      t += it->second.second;
    }
    out.superop.push_back(std::move(s));
    out.duration.push_back(t);
  }
  return out;
}

inline ComplexMatrix idle_superop(const LindbladModel& lind, int levels, double duration) {
  const LindbladSolver solver(lind);
  const HamiltonianFn zero = [levels](double) { return ComplexMatrix::Zero(levels, levels).eval(); };
  return solver.superop(zero, 0.0, duration, std::max(duration / 50.0, 0.5), levels, true);
}

// single transmon (three levels) driven at its sweet spot
inline RBModel native_single_qubit_model(const DeviceModel& d, const NativeRBOptions& o = {}) {
  auto ch = std::make_shared<const LocalCliffordChannels>(local_clifford_channels(d.qubit_a, 3, d.noise, o));
  RBModel m;
  m.n_qubits = 1;
  m.levels = {3};
  m.clifford = [ch](int c, ComplexMatrix& rho) { detail::apply_superop_inplace(ch->superop[c], rho); };
  m.clifford_duration = [ch](int c) { return ch->duration[c]; };
  return m;
}

// Q_A with three levels, Q_B with two; `cz` acts on that 6-level space (index 2 iA + iB)
inline RBModel native_two_qubit_model(const DeviceModel& d, const ComplexMatrix& cz, double cz_duration,
                                      const NativeRBOptions& o = {}) {
  const std::vector<int> dims{3, 2};
  if (cz.rows() != 36 || cz.cols() != 36) throw DimensionError("CZ channel must act on the 3x2 level space");
  struct Tables {
    std::array<std::vector<ComplexMatrix>, 2> gate;
    std::array<std::vector<double>, 2> duration;
    std::array<std::map<long long, ComplexMatrix>, 2> idle;   // keyed by padding in ps
    ComplexMatrix cz;
    double cz_duration = 0.0;
  };
  auto t = std::make_shared<Tables>();
  const std::array<LocalCliffordChannels, 2> local{local_clifford_channels(d.qubit_a, 3, d.noise, o),
                                                   local_clifford_channels(d.qubit_b, 2, d.noise, o)};
  for (int q = 0; q < 2; ++q) {
    for (const auto& s : local[q].superop) t->gate[q].push_back(embed_superop(s, q, dims));
    t->duration[q] = local[q].duration;
  }
  for (int a = 0; a < 24; ++a)
    for (int b = 0; b < 24; ++b) {
      const double layer = std::max(t->duration[0][a], t->duration[1][b]);
      for (int q = 0; q < 2; ++q) {
        const double pad = layer - t->duration[q][q == 0 ? a : b];
        const long long key = std::llround(pad * 1e3);
        if (t->idle[q].count(key)) continue;
        t->idle[q].emplace(key, embed_superop(idle_superop(local[q].lindblad, local[q].levels, pad), q, dims));
      }
    }
  t->cz = cz;
  t->cz_duration = cz_duration;
  const std::shared_ptr<const Tables> tables = t;
  const CliffordGroup* g = &clifford_group(2);

  auto apply_layer = [tables](const CliffordStep& s, ComplexMatrix& rho) {
    const double layer = std::max(tables->duration[0][s.local[0]], tables->duration[1][s.local[1]]);
    for (int q = 0; q < 2; ++q) {
      const int c = s.local[q];
      detail::apply_superop_inplace(tables->gate[q][c], rho);
      const long long key = std::llround((layer - tables->duration[q][c]) * 1e3);
      if (key != 0) detail::apply_superop_inplace(tables->idle[q].at(key), rho);
    }
  };
  RBModel m;
  m.n_qubits = 2;
  m.levels = dims;
  m.clifford = [g, tables, apply_layer](int c, ComplexMatrix& rho) {
    for (const auto& s : (*g)[c].steps) {
      if (s.cz)
        detail::apply_superop_inplace(tables->cz, rho);
      else
        apply_layer(s, rho);
    }
  };
  m.clifford_duration = [g, tables](int c) {
    double total = 0.0;
    for (const auto& s : (*g)[c].steps)
      total += s.cz ? tables->cz_duration : std::max(tables->duration[0][s.local[0]], tables->duration[1][s.local[1]]);
    return total;
  };
  m.interleaved_ideal = cz_matrix();
  m.interleaved = [tables](ComplexMatrix& rho) { detail::apply_superop_inplace(tables->cz, rho); };
  m.interleaved_duration = cz_duration;
  return m;
}

// ---- export ----

inline void write_rb_csv(std::ostream& os, const std::vector<RBResult>& results) {
  os << "m,mean_survival,stderr,k,variant\n";
  char buf[160];
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.lengths.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%.12f,%.12f,%d,", r.lengths[i], r.mean[i], r.stderr_[i], r.sequences);
      os << buf << r.variant << '\n';
    }
}

inline nlohmann::json rb_fit_to_json(const RBResult& r, int n_qubits) {
  return {{"variant", r.variant},
          {"A", r.fit_A},
          {"B", r.fit_B},
          {"p", r.fit_p},
          {"p_err", r.p_error()},
          {"average_gate_fidelity", average_gate_fidelity(r, n_qubits)}};
}

}  // namespace geomgate
