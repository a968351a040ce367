#pragma once

#include "device.hpp"
#include "evolve.hpp"
#include "pulse.hpp"
#include "qmath.hpp"

#include <array>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

namespace geomgate {

struct CalibrationError : std::runtime_error {
  double residual;
  CalibrationError(const std::string& what, double r) : std::runtime_error(what), residual(r) {}
};

// omega_A(t) = mean + eps * env(t) * cos(2 nu t + 2 Phi), t global
struct ParametricDrive {
  double mean_freq = 0.0;
  double amp_eps = 0.0;
  double mod_freq = mhz(80.0);
  double mod_phase = 0.0;
  double duration = 0.0;
  double rise = 20.0;

  void validate() const {
    if (!(mod_freq > 0)) throw std::invalid_argument("modulation frequency must be positive");
    if (amp_eps < 0) throw std::invalid_argument("modulation amplitude must be non-negative");
    if (duration < 0) throw std::invalid_argument("stage duration must be non-negative");
  }
  double amplitude(double tau) const { return amp_eps * flat_top_erf(tau, duration, rise); }
};

struct EffectiveParams {
  double g_eff = 0.0;
  double delta_prime = 0.0;
  double beta = 0.0;
};

inline double bessel_coupling(double eps, double nu, double g) { return 2.0 * std::sqrt(2.0) * g * bessel_j1(eps / (2.0 * nu)); }

// detuning of |20> from |11> plus two modulation quanta (positive when the mean sits above resonance)
inline double sideband_detuning(double mean, double nu, const DeviceModel& d) {
  return (mean - d.qubit_b.freq) + d.qubit_a.anharmonicity - 2.0 * nu;
}

inline double mean_for_detuning(double detuning, double nu, const DeviceModel& d) {
  return detuning + d.qubit_b.freq - d.qubit_a.anharmonicity + 2.0 * nu;
}

inline double beta_from_phase(double phi) { return 2.0 * phi + kPi; }
inline double phase_from_beta(double beta) { return 0.5 * (beta - kPi); }

inline EffectiveParams effective_params(const ParametricDrive& p, const DeviceModel& d) {
  p.validate();
  return {bessel_coupling(p.amp_eps, p.mod_freq, d.coupling), sideband_detuning(p.mean_freq, p.mod_freq, d),
          beta_from_phase(p.mod_phase)};
}

struct CZSchedule {
  std::array<ParametricDrive, 3> stages;
  double target_gamma_prime = kTwoPi;

  double start(int s) const {
    double t = 0.0;
    for (int k = 0; k < s; ++k) t += stages[k].duration;
    return t;
  }
  double total_duration(int n = 3) const { return start(n); }
};

enum class CZModel { Effective, Full };

struct CZOptions {
  CZModel model = CZModel::Effective;
  double dt = 0.02;
  int stages = 3;          // run only the first `stages` stages
  int sample_every = 0;    // trajectory sampling in integration steps
};

struct CZSample {
  double time = 0.0;
  cplx c11, c20;
  double phase = 0.0;      // unwrapped arg of the |11> amplitude
};

struct CZResult {
  ComplexMatrix propagator;       // 2x2 on {|11>,|20>} or 9x9
  ComplexMatrix computational;    // 4x4, order 00,01,10,11
  double conditional_phase = 0.0;
  double leakage = 0.0;           // population leaving the computational space from |11>
  std::vector<CZSample> trajectory;
};

namespace detail {

// {|11>,|20>} model; |11> phases referenced to the computational frame, |20> carries the detuning
inline HamiltonianFn effective_hamiltonian(const CZSchedule& s, const DeviceModel& d, int k) {
  const ParametricDrive& p = s.stages[k];
  const double t0 = s.start(k);
  const double beta = beta_from_phase(p.mod_phase);
  const double det = sideband_detuning(p.mean_freq, p.mod_freq, d) - sideband_detuning(s.stages[0].mean_freq, s.stages[0].mod_freq, d);
  return [&p, &d, t0, beta, det](double t) {
    const double g = bessel_coupling(p.amplitude(t - t0), p.mod_freq, d.coupling);
    ComplexMatrix h = ComplexMatrix::Zero(2, 2);
    h(0, 1) = 0.5 * g * std::exp(kI * beta);
    h(1, 0) = std::conj(h(0, 1));
    h(1, 1) = det;
    return h;
  };
}

struct FullOperators {
  ComplexMatrix na, anh, adag_b;
  explicit FullOperators(const DeviceModel& d) {
    const ComplexMatrix i3 = ComplexMatrix::Identity(3, 3);
    const ComplexMatrix a = lowering(3), n = number_op(3);
    na = kron(n, i3);
    const ComplexMatrix nn = n * (n - i3);
    anh = 0.5 * d.qubit_a.anharmonicity * kron(nn, i3) + 0.5 * d.qubit_b.anharmonicity * kron(i3, nn);
    adag_b = kron(a.adjoint(), a);
  }
};

// two transmons, frame rotating A at the first stage mean and B at its own frequency
inline HamiltonianFn full_hamiltonian(const CZSchedule& s, const DeviceModel& d, int k, const FullOperators& ops) {
  const ParametricDrive& p = s.stages[k];
  const double ref = s.stages[0].mean_freq;
  const double dab = ref - d.qubit_b.freq;
  const double t0 = s.start(k);
  const double g = d.coupling;
  return [&p, &ops, ref, dab, t0, g](double t) {
    const double da = (p.mean_freq - ref) + p.amplitude(t - t0) * std::cos(2.0 * p.mod_freq * t + 2.0 * p.mod_phase);
    ComplexMatrix h = da * ops.na + ops.anh;
    const ComplexMatrix c = g * std::exp(kI * dab * t) * ops.adag_b;
    h += c + c.adjoint();
    return h;
  };
}

inline constexpr std::array<int, 4> kComputational{0, 1, 3, 4};

}  // namespace detail

inline double conditional_phase_of(const ComplexMatrix& u4) {
  return wrap_phase(std::arg(u4(0, 0)) + std::arg(u4(3, 3)) - std::arg(u4(1, 1)) - std::arg(u4(2, 2)));
}

// remove single-qubit Z frames analytically from the diagonal
inline ComplexMatrix remove_local_phases(const ComplexMatrix& u4) {
  const double p00 = std::arg(u4(0, 0)), p01 = std::arg(u4(1, 1)), p10 = std::arg(u4(2, 2));
  ComplexVector c(4);
  c << std::exp(-kI * p00), std::exp(-kI * p01), std::exp(-kI * p10), std::exp(-kI * (p01 + p10 - p00));
  return c.asDiagonal() * u4;
}

inline ComplexMatrix cz_matrix() {
  ComplexMatrix m = ComplexMatrix::Identity(4, 4);
  m(3, 3) = -1.0;
  return m;
}

// |Tr(CZ^dag V)|^2 / 16 after local frame removal
inline double cz_process_fidelity(const ComplexMatrix& u4) {
  const cplx t = (cz_matrix().adjoint() * remove_local_phases(u4)).trace();
  return std::norm(t) / 16.0;
}

inline int cz_dim(CZModel m) { return m == CZModel::Effective ? 2 : 9; }

// propagator of one stage; stages compose by left multiplication
inline ComplexMatrix stage_propagator(const CZSchedule& s, const DeviceModel& d, CZModel m, int k, double dt = 0.02) {
  s.stages[k].validate();
  const double a = s.start(k), b = s.start(k + 1);
  const int dim = cz_dim(m);
  if (b <= a) return ComplexMatrix::Identity(dim, dim);
  if (m == CZModel::Effective) return propagate(detail::effective_hamiltonian(s, d, k), a, b, dt, ComplexMatrix::Identity(dim, dim));
  const detail::FullOperators ops(d);
  return propagate(detail::full_hamiltonian(s, d, k, ops), a, b, dt, ComplexMatrix::Identity(dim, dim));
}

inline CZResult cz_result(const ComplexMatrix& u, CZModel m) {
  CZResult r;
  r.propagator = u;
  if (m == CZModel::Effective) {
    r.computational = ComplexMatrix::Identity(4, 4);
    r.computational(3, 3) = u(0, 0);
    r.leakage = std::norm(u(1, 0));
  } else {
    r.computational.resize(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) r.computational(i, j) = u(detail::kComputational[i], detail::kComputational[j]);
    double kept = 0.0;
    for (int c : detail::kComputational) kept += std::norm(u(c, 4));
    r.leakage = 1.0 - kept;
  }
  r.conditional_phase = conditional_phase_of(r.computational);
  return r;
}

inline CZResult simulate_cz(const CZSchedule& s, const DeviceModel& d, const CZOptions& o = {}) {
  for (const auto& p : s.stages) p.validate();
  const int n = std::clamp(o.stages, 1, 3);
  if (o.sample_every <= 0) {
    ComplexMatrix u = ComplexMatrix::Identity(cz_dim(o.model), cz_dim(o.model));
    for (int k = 0; k < n; ++k) u = stage_propagator(s, d, o.model, k, o.dt) * u;
    return cz_result(u, o.model);
  }
  const bool eff = o.model == CZModel::Effective;
  const detail::FullOperators ops(d);
  const int i11 = eff ? 0 : 4, i20 = eff ? 1 : 6;
  ComplexMatrix u = ComplexMatrix::Identity(cz_dim(o.model), cz_dim(o.model));
  std::vector<CZSample> traj;
  double unwrapped = 0.0, last = 0.0;
  auto record = [&](double t) {
    CZSample smp{t, u(i11, i11), u(i20, i11), 0.0};
    const double a = std::arg(smp.c11);
    unwrapped = traj.empty() ? a : unwrapped + wrap_phase(a - last);
    last = a;
    smp.phase = unwrapped;
    traj.push_back(smp);
  };
  record(0.0);
  for (int k = 0; k < n; ++k) {
    const double a = s.start(k), b = s.start(k + 1);
    if (b <= a) continue;
    const HamiltonianFn h = eff ? detail::effective_hamiltonian(s, d, k) : detail::full_hamiltonian(s, d, k, ops);
    const int steps = step_count(b - a, o.dt);
    const double dt = (b - a) / steps;
    for (int j = 0; j < steps; ++j) {
      u = magnus4_step(h, a + j * dt, dt) * u;
      if ((j + 1) % o.sample_every == 0 || j + 1 == steps) record(a + (j + 1) * dt);
    }
  }
  CZResult r = cz_result(u, o.model);
  r.trajectory = std::move(traj);
  return r;
}

// Ramsey phase of Q_A (prepared by an ideal half-pi pulse) with Q_B in |control>
inline double ramsey_phase(const CZSchedule& s, const DeviceModel& d, int control, const CZOptions& o = {}) {
  if (control != 0 && control != 1) throw std::invalid_argument("control state must be 0 or 1");
  const CZResult r = simulate_cz(s, d, o);
  ComplexVector psi;
  if (o.model == CZModel::Effective) {
    // basis 00,01,10,11,20
    psi = ComplexVector::Zero(5);
    psi(control) = 1.0 / std::sqrt(2.0);
    psi(2 + control) = 1.0 / std::sqrt(2.0);
    if (control == 1) {
      const cplx c11 = psi(3);
      psi(3) = r.propagator(0, 0) * c11;
      psi(4) = r.propagator(1, 0) * c11;
    }
    return std::arg(psi(2 + control) * std::conj(psi(control)));
  }
  ComplexVector in = ComplexVector::Zero(9);
  in(control) = 1.0 / std::sqrt(2.0);
  in(3 + control) = 1.0 / std::sqrt(2.0);
  psi = r.propagator * in;
  // reduced coherence rho_A(1,0)
  cplx c = 0.0;
  for (int b = 0; b < 3; ++b) c += psi(3 + b) * std::conj(psi(b));
  return std::arg(c);
}

inline double conditional_phase_experiment(const CZSchedule& s, const DeviceModel& d, const CZOptions& o = {}) {
  return wrap_phase(ramsey_phase(s, d, 1, o) - ramsey_phase(s, d, 0, o));
}

// area of g(t) over a stage of the given duration
inline double stage_area(ParametricDrive p, const DeviceModel& d, double duration) {
  p.duration = duration;
  const int n = std::max(200, static_cast<int>(duration * 20));
  const double h = duration / n;
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += w * bessel_coupling(p.amplitude(k * h), p.mod_freq, d.coupling);
  }
  return sum * h / 3.0;
}

inline double duration_for_area(const ParametricDrive& p, const DeviceModel& d, double area) {
  double lo = 0.0, hi = std::max(4.0 * p.rise, 40.0);
  while (stage_area(p, d, hi) < area) {
    hi *= 2.0;
    if (hi > 1e5) throw CalibrationError("stage area unreachable", area);
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (stage_area(p, d, mid) < area ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::pair<double, double> golden_minimize(const std::function<double(double)>& f, double a, double b, double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), e = a + r * (b - a);
  double fc = f(c), fe = f(e);
  while (b - a > tol) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + r * (b - a);
      fe = f(e);
    }
  }
  return fc < fe ? std::pair{c, fc} : std::pair{e, fe};
}

struct CZCalibrationOptions {
  CZModel model = CZModel::Effective;
  double mod_freq = mhz(80.0);
  double eps_resonant = mhz(107.8);
  double eps_detuned = mhz(100.0);
  double stage2_detuning = mhz(7.0);
  double phase = 0.0;
  double rise = 20.0;
  double dt = 0.02;
  double tolerance = 0.01;
  double max_stage2 = 400.0;
  double scan_step = 1.0;   // stage-2 grid, ns
};

struct CZCalibration {
  CZSchedule schedule;
  CZModel model = CZModel::Effective;
  double residual = 0.0;
  double leakage = 0.0;
  double conditional_phase = 0.0;
  double stage12_phase = 0.0;
  std::array<double, 2> resonance_shift{0.0, 0.0};        // dressed minus bare resonance, stages 1 and 2
  std::vector<std::pair<double, double>> stage2_sweep;   // (duration, stages 1-2 phase in (0, 2pi])
};

// dressed sideband resonance of the full model: maximize |20> population after a pi-area stage
inline double full_resonance_shift(const DeviceModel& d, double eps, double nu, double rise, double dt = 0.02) {
  CZSchedule s;
  ParametricDrive p;
  p.amp_eps = eps;
  p.mod_freq = nu;
  p.rise = rise;
  p.duration = duration_for_area(p, d, kPi);
  auto loss = [&](double off) {
    s.stages[0] = p;
    s.stages[0].mean_freq = mean_for_detuning(off, nu, d);
    const ComplexMatrix u = stage_propagator(s, d, CZModel::Full, 0, dt);
    return -std::norm(u(6, 4));
  };
  const double w = 0.5 * bessel_coupling(eps, nu, d.coupling);
  return golden_minimize(loss, -w, w, 1e-6).first;
}

inline CZSchedule cz_base_schedule(const DeviceModel& d, const CZCalibrationOptions& c = {},
                                   std::array<double, 2> shift = {0.0, 0.0}) {
  CZSchedule s;
  ParametricDrive p;
  p.mod_freq = c.mod_freq;
  p.mod_phase = c.phase;
  p.rise = c.rise;
  p.amp_eps = c.eps_resonant;
  p.mean_freq = mean_for_detuning(shift[0], c.mod_freq, d);
  p.duration = duration_for_area(p, d, kPi / 2);
  s.stages[0] = p;
  ParametricDrive q = p;
  q.amp_eps = c.eps_detuned;
  q.mean_freq = mean_for_detuning(shift[1] + c.stage2_detuning, c.mod_freq, d);
  const double g2 = bessel_coupling(c.eps_detuned, c.mod_freq, d.coupling);
  q.duration = kTwoPi / std::hypot(g2, c.stage2_detuning) + c.rise;
  s.stages[1] = q;
  s.stages[2] = p;
  return s;
}

namespace detail {

// analytic geodesic back to |11> from the effective state after stages 1-2
inline void close_stage3_effective(CZSchedule& s, const DeviceModel& d, const ComplexMatrix& u12) {
  ComplexVector psi(2);
  psi << u12(0, 0), u12(1, 0);
  const BlochVector b = bloch_vector(projector(psi));
  const double polar = std::acos(std::clamp(b[2], -1.0, 1.0));
  const double azim = std::atan2(b[1], b[0]);
  ParametricDrive& p3 = s.stages[2];
  p3 = s.stages[0];
  p3.mod_phase = phase_from_beta(kPi / 2 - azim);
  p3.duration = polar < 1e-9 ? 0.0 : duration_for_area(p3, d, polar);
}

// full model: alternate golden-section searches over stage-3 phase and duration for maximal |11> return
inline void close_stage3_full(CZSchedule& s, const DeviceModel& d, const ComplexMatrix& u12, double dt) {
  ParametricDrive& p3 = s.stages[2];
  p3 = s.stages[0];
  auto leak = [&]() {
    const ComplexMatrix u = stage_propagator(s, d, CZModel::Full, 2, dt) * u12;
    return cz_result(u, CZModel::Full).leakage;
  };
  const double t_half = s.stages[0].duration;
  // coarse grid, then alternating golden-section refinement (beta has period pi in the modulation phase)
  double phase = 0.0, dur = t_half, best = 2.0;
  for (int k = 0; k < 24; ++k)
    for (int j = 1; j <= 9; ++j) {
      p3.mod_phase = -kPi / 2 + kPi * k / 24;
      p3.duration = t_half * 0.2 * j;
      const double l = leak();
      if (l < best) {
        best = l;
        phase = p3.mod_phase;
        dur = p3.duration;
      }
    }
  double pw = kPi / 24, dw = 0.2 * t_half;
  for (int round = 0; round < 4; ++round) {
    p3.duration = dur;
    phase = golden_minimize([&](double x) { p3.mod_phase = x; return leak(); }, phase - pw, phase + pw, 1e-5).first;
    p3.mod_phase = phase;
    dur = golden_minimize([&](double x) { p3.duration = x; return leak(); }, std::max(0.0, dur - dw), dur + dw, 1e-4).first;
    pw *= 0.5;
    dw *= 0.5;
  }
  p3.mod_phase = phase;
  p3.duration = dur;
}

}  // namespace detail

// stage-2 duration set so the stages 1-2 conditional phase is pi; stage 3 then returns to |11>
inline CZCalibration calibrate_cz(const DeviceModel& d, const CZCalibrationOptions& c = {}) {
  CZCalibration out;
  out.model = c.model;
  if (c.model == CZModel::Full) {
    out.resonance_shift[0] = full_resonance_shift(d, c.eps_resonant, c.mod_freq, c.rise, c.dt);
    out.resonance_shift[1] = full_resonance_shift(d, c.eps_detuned, c.mod_freq, c.rise, c.dt);
  }
  CZSchedule s = cz_base_schedule(d, c, out.resonance_shift);
  const ComplexMatrix u1 = stage_propagator(s, d, c.model, 0, c.dt);
  auto u12_at = [&](double t2) {
    s.stages[1].duration = t2;
    return ComplexMatrix(stage_propagator(s, d, c.model, 1, c.dt) * u1);
  };
  auto phase12 = [&](double t2) { return wrap_phase(cz_result(u12_at(t2), c.model).conditional_phase - kPi); };
  double prev_t = c.rise, prev = phase12(prev_t);
  out.stage2_sweep.push_back({prev_t, prev + kPi});
  double lo = -1, hi = -1;
  for (double t = c.rise + c.scan_step; t <= c.max_stage2 + 1e-9; t += c.scan_step) {
    const double v = phase12(t);
    out.stage2_sweep.push_back({t, v + kPi});
    if (lo < 0 && prev < 0 && v >= 0 && v - prev < 1.0) {
      lo = prev_t;
      hi = t;
    }
    prev = v;
    prev_t = t;
  }
  if (lo < 0) throw CalibrationError("no stage-2 duration reaches a conditional phase of pi", prev);
  auto solve = [&](double target, double a, double b) {
    auto f = [&](double t) { return wrap_phase(phase12(t) + kPi - target); };
    for (int it = 0; it < 40 && b - a > 1e-5; ++it) {
      const double mid = 0.5 * (a + b);
      (f(mid) < 0 ? a : b) = mid;
    }
    return 0.5 * (a + b);
  };
  const ComplexMatrix u12 = u12_at(solve(kPi, lo, hi));
  out.stage12_phase = cz_result(u12, c.model).conditional_phase;
  if (c.model == CZModel::Effective) detail::close_stage3_effective(s, d, u12);
  else detail::close_stage3_full(s, d, u12, c.dt);
  const CZResult r = cz_result(stage_propagator(s, d, c.model, 2, c.dt) * u12, c.model);
  out.schedule = s;
  out.conditional_phase = r.conditional_phase;
  out.residual = wrap_phase(r.conditional_phase - kPi);
  out.leakage = r.leakage;
  if (std::abs(out.residual) > c.tolerance)
    throw CalibrationError("CZ calibration residual phase " + std::to_string(out.residual) + " rad", out.residual);
  return out;
}

inline CZSchedule cz_schedule(const DeviceModel& d) { return calibrate_cz(d).schedule; }

// |11> <-> |20> exchange frequency from the full model under a constant resonant drive
struct RabiFit {
  double frequency = 0.0;   // angular
  double max_population = 0.0;
};

inline RabiFit fit_oscillation(const std::vector<double>& t, const std::vector<double>& y, double f_lo, double f_hi) {
  const std::size_t n = t.size();
  auto residual = [&](double w) {
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (std::size_t k = 0; k < n; ++k) {
      a(k, 0) = 1.0;
      a(k, 1) = std::cos(w * t[k]);
      a(k, 2) = std::sin(w * t[k]);
      b(k) = y[k];
    }
    const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
    return (a * x - b).squaredNorm();
  };
  double best = f_lo, best_r = residual(f_lo);
  const int grid = 400;
  for (int k = 1; k <= grid; ++k) {
    const double w = f_lo + (f_hi - f_lo) * k / grid;
    const double r = residual(w);
    if (r < best_r) {
      best_r = r;
      best = w;
    }
  }
  double a = best - (f_hi - f_lo) / grid, b = best + (f_hi - f_lo) / grid;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80; ++it) {
    const double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    (residual(c1) < residual(c2) ? b : a) = (residual(c1) < residual(c2) ? c2 : c1);
  }
  RabiFit f;
  f.frequency = 0.5 * (a + b);
  f.max_population = *std::max_element(y.begin(), y.end());
  return f;
}

inline RabiFit full_model_exchange(const DeviceModel& d, double eps, double nu, double duration, double dt = 0.02) {
  CZSchedule s;
  ParametricDrive p;
  p.amp_eps = eps;
  p.mod_freq = nu;
  p.mean_freq = mean_for_detuning(0.0, nu, d);
  p.duration = duration;
  p.rise = 0.0;
  s.stages[0] = p;
  s.stages[1] = p;
  s.stages[1].duration = 0.0;
  s.stages[2] = s.stages[1];
  CZOptions o;
  o.model = CZModel::Full;
  o.dt = dt;
  o.stages = 1;
  o.sample_every = std::max(1, static_cast<int>(std::lround(1.0 / dt)));
  const CZResult r = simulate_cz(s, d, o);
  std::vector<double> t, y;
  for (const auto& smp : r.trajectory) {
    t.push_back(smp.time);
    y.push_back(std::norm(smp.c20));
  }
  const double g = bessel_coupling(eps, nu, d.coupling);
  return fit_oscillation(t, y, 0.5 * g, 1.5 * g);
}

// ---- erf-pulse alternative ----

struct ErfCZParams {
  double delta0 = mhz(10.0);
  double a0 = 1.0;
  double offset = 0.09;
  double t_b = 30.0;
  double t_c = 100.0;
  double t_b1 = 80.0;
  double t_c1 = 200.0;
  double sigma = 3.0;

  double on_off_ratio() const {
    const double off = bessel_j1(offset);
    return off == 0.0 ? std::numeric_limits<double>::infinity() : bessel_j1(a0 + offset) / off;
  }
  void validate() const {
    if (!(sigma > 0) || t_b < 0 || t_c < 0 || t_c1 < 0) throw std::invalid_argument("erf CZ timings must be non-negative");
    if (a0 != 0.0 && on_off_ratio() < 10.0 - 1e-9) throw std::invalid_argument("erf CZ on-off coupling ratio below 10");
  }
  double total_duration() const { return 2.0 * t_b + t_c; }
};

struct ErfCZSample {
  double time, detuning, index, beta;
};

inline double erf_window(double t, double start, double width, double sigma) {
  const double s = std::sqrt(2.0) * sigma;
  return 0.5 * (std::erf((t - start) / s) - std::erf((t - start - width) / s));
}

inline ErfCZSample erf_cz_sample(const ErfCZParams& p, double t) {
  const double w = erf_window(t, p.t_b, p.t_c, p.sigma);
  return {t, p.delta0 * w, p.a0 * (1.0 - w) + p.offset, kPi * erf_window(t, p.t_b1, p.t_c1, p.sigma)};
}

inline std::vector<ErfCZSample> erf_cz_waveform(const ErfCZParams& p, double step = 1.0) {
  std::vector<ErfCZSample> out;
  const int n = static_cast<int>(std::floor(p.total_duration() / step + 1e-9));
  for (int k = 0; k <= n; ++k) out.push_back(erf_cz_sample(p, k * step));
  return out;
}

struct ErfCZResult {
  ComplexMatrix rotating_block;     // {|11>,|20>} propagator in the detuning frame
  ComplexMatrix computational;      // 4x4 after returning to the qubit frame
  double rotating_frame_fidelity = 0.0;
  double fidelity = 0.0;
  double conditional_phase = 0.0;
  double leakage = 0.0;
  double detuning_area = 0.0;
};

inline ErfCZResult simulate_erf_cz(const ErfCZParams& p, const DeviceModel& d, double dt = 0.02) {
  p.validate();
  const double g0 = 2.0 * std::sqrt(2.0) * d.coupling;
  auto h = [&](double t) {
    const ErfCZSample s = erf_cz_sample(p, t);
    const double g = g0 * bessel_j1(s.index);
    ComplexMatrix m(2, 2);
    m(0, 0) = 0.5 * s.detuning;
    m(1, 1) = -0.5 * s.detuning;
    m(0, 1) = 0.5 * g * std::exp(-kI * s.beta);
    m(1, 0) = std::conj(m(0, 1));
    return m;
  };
  ErfCZResult r;
  const double T = p.total_duration();
  r.rotating_block = propagate(h, 0.0, T, dt, ComplexMatrix::Identity(2, 2));
  // integral of the detuning gives the accumulated frame angle
  const int n = std::max(2000, static_cast<int>(T / dt));
  double area = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    area += w * erf_cz_sample(p, T * k / n).detuning;
  }
  r.detuning_area = area * T / n / 3.0;
  ComplexMatrix rot = ComplexMatrix::Identity(4, 4);
  rot(3, 3) = r.rotating_block(0, 0);
  r.rotating_frame_fidelity = cz_process_fidelity(rot);
  // undo exp(-i (int D) sigma_z / 2) on |11>
  const cplx back = std::exp(kI * 0.5 * r.detuning_area);
  r.computational = ComplexMatrix::Identity(4, 4);
  r.computational(3, 3) = back * r.rotating_block(0, 0);
  r.fidelity = cz_process_fidelity(r.computational);
  r.conditional_phase = conditional_phase_of(r.computational);
  r.leakage = std::norm(r.rotating_block(1, 0));
  return r;
}

}  // namespace geomgate

namespace geomgate {

// offset giving J1(a0 + offset) / J1(offset) = ratio
inline double erf_cz_offset_for_ratio(double a0, double ratio) {
  auto f = [&](double off) { return bessel_j1(a0 + off) / bessel_j1(off) - ratio; };
  double lo = 1e-6, hi = 1.0;
  if (f(hi) > 0) throw std::invalid_argument("on-off ratio unreachable");
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return lo;
}

// 2 pi detuning window, half-pi rotations tuned for minimal |20> residue, phase flip centred in the window
inline ErfCZParams tune_erf_cz(const DeviceModel& d, double delta0 = mhz(10.0), double a0 = 1.0, double sigma = 3.0,
                               double dt = 0.02) {
  ErfCZParams p;
  p.delta0 = delta0;
  p.a0 = a0;
  p.sigma = sigma;
  p.offset = erf_cz_offset_for_ratio(a0, 10.0);
  p.t_c = kTwoPi / delta0;
  const double g_on = 2.0 * std::sqrt(2.0) * d.coupling * bessel_j1(a0 + p.offset);
  auto place = [&](double tb) {
    p.t_b = tb;
    p.t_b1 = tb + 0.5 * p.t_c;
    p.t_c1 = p.total_duration() - p.t_b1 + 6.0 * sigma;
  };
  const double guess = kPi / (2.0 * g_on);
  const double tb = golden_minimize([&](double x) { place(x); return simulate_erf_cz(p, d, dt).leakage; }, 0.6 * guess, 1.4 * guess, 1e-4).first;
  place(tb);
  return p;
}

}  // namespace geomgate

namespace geomgate {

inline void write_cz_trajectory_csv(std::ostream& os, const std::vector<CZSample>& t) {
  os << "time_ns,re_c11,im_c11,re_c20,im_c20,phase_rad\n";
  char buf[200];
  for (const auto& s : t) {
    std::snprintf(buf, sizeof buf, "%.6f,%.12e,%.12e,%.12e,%.12e,%.12f\n", s.time, s.c11.real(), s.c11.imag(),
                  s.c20.real(), s.c20.imag(), s.phase);
    os << buf;
  }
}

inline nlohmann::json drive_to_json(const ParametricDrive& p) {
  return {{"duration_ns", p.duration}, {"mean_freq_ghz", p.mean_freq / kTwoPi}, {"amp_eps_mhz", to_mhz(p.amp_eps)},
          {"mod_freq_mhz", to_mhz(p.mod_freq)}, {"mod_phase_rad", p.mod_phase}, {"rise_ns", p.rise}};
}

inline nlohmann::json calibration_to_json(const CZCalibration& c, const DeviceModel& d) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& p : c.schedule.stages) {
    nlohmann::json j = drive_to_json(p);
    const EffectiveParams e = effective_params(p, d);
    j["g_eff_mhz"] = to_mhz(e.g_eff);
    j["delta_prime_mhz"] = to_mhz(e.delta_prime);
    j["beta_rad"] = e.beta;
    stages.push_back(j);
  }
  return {{"model", c.model == CZModel::Effective ? "effective" : "full"},
          {"stages", stages},
          {"total_duration_ns", c.schedule.total_duration()},
          {"conditional_phase_rad", c.conditional_phase},
          {"stage12_phase_rad", c.stage12_phase},
          {"residual_phase_rad", c.residual},
          {"leakage", c.leakage},
          {"resonance_shift_mhz", {to_mhz(c.resonance_shift[0]), to_mhz(c.resonance_shift[1])}}};
}

inline void write_erf_cz_csv(std::ostream& os, const std::vector<ErfCZSample>& w) {
  os << "time_ns,detuning_MHz,modulation_index,beta_rad\n";
  char buf[160];
  for (const auto& s : w) {
    std::snprintf(buf, sizeof buf, "%.6f,%.12e,%.12e,%.12f\n", s.time, to_mhz(s.detuning), s.index, s.beta);
    os << buf;
  }
}

}  // namespace geomgate

namespace geomgate {

// basis 2*iA + iB over A in {0,1,2}, B in {0,1}; indices 0..3 are computational
struct CZChannel {
  ComplexMatrix superop;         // 36x36
  ComplexMatrix computational;   // 16x16, trace decreasing by the leaked population
};

inline LindbladModel cz_decoherence(const DeviceModel& d) {
  const std::vector<int> dims{3, 2};
  return merge(embed(transmon_decoherence(3, d.qubit_a.t1_cz, d.qubit_a.t2star_cz), 0, dims),
               embed(transmon_decoherence(2, d.qubit_b.t1_cz, d.qubit_b.t2star_cz), 1, dims));
}

inline ComplexMatrix computational_block_superop(const ComplexMatrix& s, int dim, const std::vector<int>& keep) {
  const int k = static_cast<int>(keep.size());
  ComplexMatrix out(k * k, k * k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      for (int l = 0; l < k; ++l)
        for (int m = 0; m < k; ++m) out(j * k + i, l * k + m) = s(keep[j] * dim + keep[i], keep[l] * dim + keep[m]);
  return out;
}

// effective-model CZ with CZ-point decoherence on both transmons
inline CZChannel cz_lindblad_channel(const CZSchedule& s, const DeviceModel& d, double dt = 0.1,
                                     const std::optional<LindbladModel>& lind = std::nullopt) {
  const LindbladSolver solver(lind ? *lind : cz_decoherence(d));
  ComplexMatrix total = ComplexMatrix::Identity(36, 36);
  for (int k = 0; k < 3; ++k) {
    const double a = s.start(k), b = s.start(k + 1);
    if (b <= a) continue;
    const HamiltonianFn block = detail::effective_hamiltonian(s, d, k);
    const HamiltonianFn h = [&block](double t) {
      ComplexMatrix m = ComplexMatrix::Zero(6, 6);
      m.block(3, 3, 2, 2) = block(t);
      return m;
    };
    total = solver.superop(h, a, b, dt, 6) * total;
  }
  CZChannel c;
  c.superop = total;
  c.computational = computational_block_superop(total, 6, {0, 1, 2, 3});
  return c;
}

}  // namespace geomgate
