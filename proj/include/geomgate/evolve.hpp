#pragma once

#include "device.hpp"
#include "pulse.hpp"
#include "qmath.hpp"

#include <array>
#include <functional>
#include <vector>

namespace geomgate {

using HamiltonianFn = std::function<ComplexMatrix(double)>;

struct PropagationOptions {
  int levels = 2;
  double dt = 0.02;                        // ns
  double anharmonicity = mhz(-242.6);      // used when levels == 3
};

struct LindbladModel {
  std::vector<ComplexMatrix> ops;
  std::vector<double> rates;   // 1/ns

  void add(const ComplexMatrix& l, double rate) {
    if (rate < 0) throw std::invalid_argument("Lindblad rate must be non-negative");
    if (rate == 0) return;
    ops.push_back(l);
    rates.push_back(rate);
  }
};

inline ComplexMatrix lowering(int levels) {
  ComplexMatrix a = ComplexMatrix::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline ComplexMatrix number_op(int levels) {
  ComplexMatrix n = ComplexMatrix::Zero(levels, levels);
  for (int k = 0; k < levels; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

// amplitude damping at 1/T1 and pure dephasing sqrt(2) n at 1/Tphi (T1, T2* in us)
inline LindbladModel transmon_decoherence(int levels, double t1_us, double t2star_us) {
  LindbladModel m;
  m.add(lowering(levels), 1.0 / us_to_ns(t1_us));
  const double tphi = tphi_from_t1_t2star(t1_us, t2star_us);
  if (std::isfinite(tphi)) m.add(std::sqrt(2.0) * number_op(levels), 1.0 / us_to_ns(tphi));
  return m;
}

// embed single-site operators into a tensor product space
inline ComplexMatrix embed(const ComplexMatrix& op, int site, const std::vector<int>& dims) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (int k = 0; k < static_cast<int>(dims.size()); ++k)
    out = kron(out, k == site ? op : ComplexMatrix::Identity(dims[k], dims[k]));
  return out;
}

inline LindbladModel embed(const LindbladModel& m, int site, const std::vector<int>& dims) {
  LindbladModel out;
  for (std::size_t k = 0; k < m.ops.size(); ++k) out.add(embed(m.ops[k], site, dims), m.rates[k]);
  return out;
}

inline LindbladModel merge(LindbladModel a, const LindbladModel& b) {
  for (std::size_t k = 0; k < b.ops.size(); ++k) a.add(b.ops[k], b.rates[k]);
  return a;
}

// ---- generic integrators ----

// exp(-i H (t1 - t0)) for constant H, or 4th-order Magnus steps
inline ComplexMatrix magnus4_step(const HamiltonianFn& h, double t, double dt) {
  static const double c = std::sqrt(3.0) / 6.0;
  const ComplexMatrix h1 = h(t + (0.5 - c) * dt);
  const ComplexMatrix h2 = h(t + (0.5 + c) * dt);
  ComplexMatrix k = 0.5 * dt * (h1 + h2);
  const ComplexMatrix comm = h2 * h1 - h1 * h2;
  k += kI * (std::sqrt(3.0) / 12.0) * dt * dt * comm;
  return expm_hermitian(0.5 * (k + k.adjoint()));
}

inline int step_count(double duration, double dt) {
  if (!(dt > 0)) throw std::invalid_argument("time step must be positive");
  return std::max(1, static_cast<int>(std::ceil(duration / dt - 1e-9)));
}

inline ComplexMatrix propagate(const HamiltonianFn& h, double t0, double t1, double dt, const ComplexMatrix& u0,
                               bool constant = false) {
  if (t1 < t0) throw std::invalid_argument("propagate: t1 < t0");
  if (t1 == t0) return u0;
  if (constant) return expm_hermitian(h(0.5 * (t0 + t1)), t1 - t0) * u0;
  const int n = step_count(t1 - t0, dt);
  const double step = (t1 - t0) / n;
  ComplexMatrix u = u0;
  for (int k = 0; k < n; ++k) u = magnus4_step(h, t0 + k * step, step) * u;
  return u;
}

class LindbladSolver {
 public:
  explicit LindbladSolver(const LindbladModel& m) : m_(m) {
    for (const auto& l : m_.ops) ldl_.push_back(l.adjoint() * l);
  }

  ComplexMatrix rhs(const ComplexMatrix& h, const ComplexMatrix& rho) const {
    ComplexMatrix out = -kI * (h * rho - rho * h);
    for (std::size_t k = 0; k < m_.ops.size(); ++k) {
      const auto& l = m_.ops[k];
      out += m_.rates[k] * (l * rho * l.adjoint() - 0.5 * (ldl_[k] * rho + rho * ldl_[k]));
    }
    return out;
  }

  // classical RK4 on rho
  ComplexMatrix evolve(const HamiltonianFn& h, double t0, double t1, double dt, ComplexMatrix rho,
                       bool constant = false) const {
    if (t1 <= t0) return rho;
    const int n = step_count(t1 - t0, dt);
    const double s = (t1 - t0) / n;
    ComplexMatrix hc;
    if (constant) hc = h(0.5 * (t0 + t1));
    for (int k = 0; k < n; ++k) {
      const double t = t0 + k * s;
      const ComplexMatrix ha = constant ? hc : h(t);
      const ComplexMatrix hm = constant ? hc : h(t + 0.5 * s);
      const ComplexMatrix hb = constant ? hc : h(t + s);
      const ComplexMatrix k1 = rhs(ha, rho);
      const ComplexMatrix k2 = rhs(hm, rho + 0.5 * s * k1);
      const ComplexMatrix k3 = rhs(hm, rho + 0.5 * s * k2);
      const ComplexMatrix k4 = rhs(hb, rho + s * k3);
      rho += (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return 0.5 * (rho + rho.adjoint());
  }

  // superoperator (column-stacking) of the evolution
  ComplexMatrix superop(const HamiltonianFn& h, double t0, double t1, double dt, int dim, bool constant = false) const {
    ComplexMatrix s(dim * dim, dim * dim);
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i) {
        ComplexMatrix e = ComplexMatrix::Zero(dim, dim);
        e(i, j) = 1.0;
        ComplexMatrix out = evolve_raw(h, t0, t1, dt, e, constant);
        s.col(j * dim + i) = vec(out);
      }
    return s;
  }

 private:
  ComplexMatrix evolve_raw(const HamiltonianFn& h, double t0, double t1, double dt, ComplexMatrix rho,
                           bool constant) const {
    if (t1 <= t0) return rho;
    const int n = step_count(t1 - t0, dt);
    const double s = (t1 - t0) / n;
    ComplexMatrix hc;
    if (constant) hc = h(0.5 * (t0 + t1));
    for (int k = 0; k < n; ++k) {
      const double t = t0 + k * s;
      const ComplexMatrix ha = constant ? hc : h(t);
      const ComplexMatrix hm = constant ? hc : h(t + 0.5 * s);
      const ComplexMatrix hb = constant ? hc : h(t + s);
      const ComplexMatrix k1 = rhs(ha, rho);
      const ComplexMatrix k2 = rhs(hm, rho + 0.5 * s * k1);
      const ComplexMatrix k3 = rhs(hm, rho + 0.5 * s * k2);
      const ComplexMatrix k4 = rhs(hb, rho + s * k3);
      rho += (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return rho;
  }

  LindbladModel m_;
  std::vector<ComplexMatrix> ldl_;
};

// ---- single-transmon drive model ----

inline ComplexMatrix drive_hamiltonian(int levels, cplx drive, double detuning, double anharmonicity) {
  if (levels != 2 && levels != 3) throw std::invalid_argument("levels must be 2 or 3");
  ComplexMatrix h = ComplexMatrix::Zero(levels, levels);
  h(0, 0) = 0.5 * detuning;
  h(1, 1) = -0.5 * detuning;
  h(1, 0) = 0.5 * drive;
  h(0, 1) = 0.5 * std::conj(drive);
  if (levels == 3) {
    h(2, 2) = -1.5 * detuning + anharmonicity;
    h(2, 1) = std::sqrt(2.0) * 0.5 * drive;
    h(1, 2) = std::sqrt(2.0) * 0.5 * std::conj(drive);
  }
  return h;
}

// virtual frame change exp(-i a sigma_z / 2) extended to the ladder
inline ComplexMatrix frame_rotation(int levels, double a) {
  ComplexMatrix z = ComplexMatrix::Zero(levels, levels);
  for (int n = 0; n < levels; ++n) z(n, n) = std::exp(kI * a * (n - 0.5));
  return z;
}

struct SchedulePiece {
  double start = 0.0;
  double duration = 0.0;
  int segment = -1;
  bool pulse = false;
};

inline std::vector<SchedulePiece> schedule_pieces(const PulseSchedule& p) {
  std::vector<SchedulePiece> out;
  double t = 0.0;
  for (int k = 0; k < static_cast<int>(p.segments.size()); ++k) {
    const auto& s = p.segments[k];
    if (s.buffer_before > 0) out.push_back({t, s.buffer_before, k, false});
    t += s.buffer_before;
    out.push_back({t, s.duration, k, true});
    t += s.duration;
    if (s.buffer_after > 0) out.push_back({t, s.buffer_after, k, false});
    t += s.buffer_after;
  }
  return out;
}

inline HamiltonianFn piece_hamiltonian(const PulseSchedule& p, const SchedulePiece& piece, const NoiseModel& noise,
                                       const PropagationOptions& o) {
  const int levels = o.levels;
  const double alpha = o.anharmonicity;
  if (!piece.pulse) {
    const double d = noise.detuning_error;
    return [=](double) { return drive_hamiltonian(levels, 0.0, d, alpha); };
  }
  const PulseSegment seg = p.segments[piece.segment];
  const double start = piece.start;
  const double scale = 1.0 + noise.rabi_error;
  const double det = seg.detuning + noise.detuning_error;
  const cplx ph = std::exp(kI * seg.drive_phase);
  return [=](double t) {
    const EnvelopeSample e = sample_envelope(seg, t - start, alpha);
    const double q = levels == 3 ? e.quadrature : 0.0;
    return drive_hamiltonian(levels, scale * cplx(e.in_phase, q) * ph, det, alpha);
  };
}

inline bool piece_is_constant(const PulseSchedule& p, const SchedulePiece& piece) {
  return !piece.pulse || p.segments[piece.segment].envelope == Envelope::Constant;
}

inline ComplexMatrix propagate_unitary(const PulseSchedule& p, const NoiseModel& noise = {},
                                       const PropagationOptions& o = {}) {
  ComplexMatrix u = frame_rotation(o.levels, p.virtual_z_pre);
  for (const auto& piece : schedule_pieces(p)) {
    const auto h = piece_hamiltonian(p, piece, noise, o);
    u = propagate(h, piece.start, piece.start + piece.duration, o.dt, u, piece_is_constant(p, piece));
  }
  return frame_rotation(o.levels, p.virtual_z_post) * u;
}

// qubit block of a (possibly 3-level) propagator
inline ComplexMatrix qubit_block(const ComplexMatrix& u) { return u.topLeftCorner(2, 2); }

inline double leakage(const ComplexMatrix& u) {
  if (u.rows() <= 2) return 0.0;
  double l = 0.0;
  for (int j = 0; j < 2; ++j)
    for (Eigen::Index i = 2; i < u.rows(); ++i) l += std::norm(u(i, j));
  return 0.5 * l;
}

struct EvolutionResult {
  ComplexMatrix final_state;
  std::vector<double> times;
  std::vector<ComplexMatrix> states;
};

inline EvolutionResult propagate_lindblad(const PulseSchedule& p, const NoiseModel& noise, const LindbladModel& lind,
                                          const ComplexMatrix& rho0, const PropagationOptions& o = {},
                                          int sample_every = 0) {
  validate_density(rho0);
  if (rho0.rows() != o.levels) throw DimensionError("initial state dimension does not match levels");
  const LindbladSolver solver(lind);
  EvolutionResult r;
  ComplexMatrix z = frame_rotation(o.levels, p.virtual_z_pre);
  ComplexMatrix rho = z * rho0 * z.adjoint();
  if (sample_every > 0) {
    r.times.push_back(0.0);
    r.states.push_back(rho);
  }
  for (const auto& piece : schedule_pieces(p)) {
    const auto h = piece_hamiltonian(p, piece, noise, o);
    const bool c = piece_is_constant(p, piece);
    if (sample_every <= 0) {
      rho = solver.evolve(h, piece.start, piece.start + piece.duration, o.dt, rho, c);
      continue;
    }
    const int n = step_count(piece.duration, o.dt);
    const double s = piece.duration / n;
    for (int k = 0; k < n; k += sample_every) {
      const int m = std::min(sample_every, n - k);
      const double a = piece.start + k * s;
      rho = solver.evolve(h, a, a + m * s, s, rho, c);
      r.times.push_back(a + m * s);
      r.states.push_back(rho);
    }
  }
  z = frame_rotation(o.levels, p.virtual_z_post);
  r.final_state = z * rho * z.adjoint();
  return r;
}

inline ComplexMatrix channel_superop(const PulseSchedule& p, const NoiseModel& noise, const LindbladModel& lind,
                                     const PropagationOptions& o = {}) {
  const LindbladSolver solver(lind);
  const int d = o.levels;
  ComplexMatrix s = unitary_superop(frame_rotation(d, p.virtual_z_pre));
  for (const auto& piece : schedule_pieces(p)) {
    const auto h = piece_hamiltonian(p, piece, noise, o);
    s = solver.superop(h, piece.start, piece.start + piece.duration, o.dt, d, piece_is_constant(p, piece)) * s;
  }
  return unitary_superop(frame_rotation(d, p.virtual_z_post)) * s;
}

inline ComplexMatrix apply_superop(const ComplexMatrix& s, const ComplexMatrix& rho) {
  return unvec(s * vec(rho), rho.rows());
}

// pure-state trajectory sampled every `sample_every` integration steps
inline EvolutionResult propagate_state(const PulseSchedule& p, const NoiseModel& noise, const ComplexVector& psi0,
                                       const PropagationOptions& o = {}, int sample_every = 1) {
  if (psi0.size() != o.levels) throw DimensionError("initial state dimension does not match levels");
  if (std::abs(psi0.norm() - 1.0) > 1e-9) throw InvalidStateError("initial state is not normalised");
  EvolutionResult r;
  ComplexVector psi = frame_rotation(o.levels, p.virtual_z_pre) * psi0;
  r.times.push_back(0.0);
  r.states.push_back(projector(psi));
  for (const auto& piece : schedule_pieces(p)) {
    const auto h = piece_hamiltonian(p, piece, noise, o);
    const int n = step_count(piece.duration, o.dt);
    const double s = piece.duration / n;
    for (int k = 0; k < n; ++k) {
      psi = magnus4_step(h, piece.start + k * s, s) * psi;
      if (sample_every > 0 && ((k + 1) % sample_every == 0 || k + 1 == n)) {
        r.times.push_back(piece.start + (k + 1) * s);
        r.states.push_back(projector(psi));
      }
    }
  }
  psi = frame_rotation(o.levels, p.virtual_z_post) * psi;
  r.final_state = projector(psi);
  return r;
}

// integral of <psi|H|psi> over each segment (including its buffers), noiseless drive
inline std::vector<double> dynamical_phases(const PulseSchedule& p, const ComplexVector& psi0,
                                            const PropagationOptions& o = {}) {
  if (psi0.size() != o.levels) throw DimensionError("initial state dimension does not match levels");
  std::vector<double> out(p.segments.size(), 0.0);
  ComplexVector psi = frame_rotation(o.levels, p.virtual_z_pre) * psi0;
  const NoiseModel clean;
  for (const auto& piece : schedule_pieces(p)) {
    const auto h = piece_hamiltonian(p, piece, clean, o);
    const int n = step_count(piece.duration, o.dt);
    const double s = piece.duration / n;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double t = piece.start + k * s;
      const double e0 = (psi.adjoint() * h(t) * psi)(0, 0).real();
      const ComplexMatrix u = magnus4_step(h, t, s);
      const ComplexVector mid = propagate(h, t, t + 0.5 * s, 0.5 * s, ComplexMatrix::Identity(o.levels, o.levels)) * psi;
      const double em = (mid.adjoint() * h(t + 0.5 * s) * mid)(0, 0).real();
      psi = u * psi;
      const double e1 = (psi.adjoint() * h(t + s) * psi)(0, 0).real();
      acc += s / 6.0 * (e0 + 4.0 * em + e1);
    }
    out[piece.segment] -= acc;
  }
  return out;
}

using BlochVector = std::array<double, 3>;

inline BlochVector bloch_vector(const ComplexMatrix& rho, int i = 0, int j = 1) {
  if (i >= rho.rows() || j >= rho.rows()) throw DimensionError("bloch_vector: level out of range");
  const cplx c = rho(i, j);
  return {2.0 * c.real(), -2.0 * c.imag(), (rho(i, i) - rho(j, j)).real()};
}

inline std::vector<BlochVector> bloch_trajectory(const EvolutionResult& r, int i = 0, int j = 1) {
  std::vector<BlochVector> out;
  out.reserve(r.states.size());
  for (const auto& s : r.states) out.push_back(bloch_vector(s, i, j));
  return out;
}

}  // namespace geomgate
