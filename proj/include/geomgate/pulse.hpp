#pragma once

#include "device.hpp"
#include "qmath.hpp"

#include <algorithm>
#include <cstdio>
#include <array>
#include <ostream>
#include <string>
#include <vector>

namespace geomgate {

enum class Scheme { SpNgqc, Ngqc, Dynamical };
enum class Envelope { Constant, Cosine, FlatTopErf };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::SpNgqc: return "SP_NGQC";
    case Scheme::Ngqc: return "NGQC";
    case Scheme::Dynamical: return "DYNAMICAL";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "SP_NGQC" || s == "sp" || s == "sp-ngqc") return Scheme::SpNgqc;
  if (s == "NGQC" || s == "ngqc") return Scheme::Ngqc;
  if (s == "DYNAMICAL" || s == "dyn" || s == "dynamical") return Scheme::Dynamical;
  throw ConfigError("unknown scheme: " + s);
}

inline std::string to_string(Envelope e) {
  switch (e) {
    case Envelope::Constant: return "CONSTANT";
    case Envelope::Cosine: return "COSINE";
    case Envelope::FlatTopErf: return "FLAT_TOP_ERF";
  }
  return "?";
}

inline Envelope envelope_from_string(const std::string& s) {
  if (s == "CONSTANT" || s == "constant") return Envelope::Constant;
  if (s == "COSINE" || s == "cosine") return Envelope::Cosine;
  if (s == "FLAT_TOP_ERF" || s == "erf") return Envelope::FlatTopErf;
  throw ConfigError("unknown envelope: " + s);
}

// rotation exp(-i gamma/2 n.sigma), n = (sin th cos ph, sin th sin ph, cos th)
struct GateSpec {
  double theta = 0.0;
  double phi = 0.0;
  double gamma = 0.0;
  Scheme scheme = Scheme::SpNgqc;

  void validate() const {
    if (!std::isfinite(theta) || !std::isfinite(phi) || !std::isfinite(gamma))
      throw std::invalid_argument("gate parameters must be finite");
    if (theta < -1e-12 || theta > kPi + 1e-12) throw std::invalid_argument("theta must lie in [0, pi]");
    if (gamma <= -kTwoPi - 1e-12 || gamma > kTwoPi + 1e-12) throw std::invalid_argument("gamma must lie in (-2pi, 2pi]");
  }
};

inline ComplexMatrix rotation(double theta, double phi, double gamma) {
  const ComplexMatrix ns = std::sin(theta) * std::cos(phi) * pauli_x() + std::sin(theta) * std::sin(phi) * pauli_y() +
                           std::cos(theta) * pauli_z();
  return std::cos(gamma / 2) * pauli_i() - kI * std::sin(gamma / 2) * ns;
}

inline ComplexMatrix target_unitary(const GateSpec& g) { return rotation(g.theta, g.phi, g.gamma); }

// X, Y, Z, H, X2, Y2, S, T and their inverses (suffix "m", e.g. X2m)
inline GateSpec named_gate(const std::string& name, Scheme scheme = Scheme::SpNgqc) {
  std::string base = name;
  double sign = 1.0;
  if (base.size() > 1 && base.back() == 'm') {
    base.pop_back();
    sign = -1.0;
  }
  GateSpec g;
  if (base == "X") g = {kPi / 2, 0.0, kPi, scheme};
  else if (base == "Y") g = {kPi / 2, kPi / 2, kPi, scheme};
  else if (base == "Z") g = {0.0, 0.0, kPi, scheme};
  else if (base == "H") g = {kPi / 4, 0.0, kPi, scheme};
  else if (base == "X2") g = {kPi / 2, 0.0, kPi / 2, scheme};
  else if (base == "Y2") g = {kPi / 2, kPi / 2, kPi / 2, scheme};
  else if (base == "S") g = {0.0, 0.0, kPi / 2, scheme};
  else if (base == "T") g = {0.0, 0.0, kPi / 4, scheme};
  else throw std::invalid_argument("unknown gate name: " + name);
  g.gamma *= sign;
  return g;
}

inline ComplexMatrix rz(double a) {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = std::exp(-kI * a / 2.0);
  m(1, 1) = std::exp(kI * a / 2.0);
  return m;
}

// rotation about an equatorial axis at angle phase
inline ComplexMatrix rxy(double area, double phase) { return rotation(kPi / 2, phase, area); }

struct PulseSegment {
  double duration = 20.0;   // ns, excluding buffers
  Envelope envelope = Envelope::Cosine;
  double peak_rabi = 0.0;   // rad/ns
  double detuning = 0.0;    // rad/ns
  double drive_phase = 0.0;
  double drag = 0.0;        // DRAG coefficient, quadrature = -drag * dOmega/dt / alpha
  double rise = 20.0;       // ns, flat-top erf edge
  double buffer_before = 0.0;
  double buffer_after = 0.0;

  double total_duration() const { return buffer_before + duration + buffer_after; }
  double area() const;
};

// 0.5 [erf((t - r/2)/(sqrt2 s)) - erf((t - T + r/2)/(sqrt2 s))], s = r/4
inline double flat_top_erf(double t, double total, double rise) {
  if (rise <= 0) return (t >= 0 && t <= total) ? 1.0 : 0.0;
  const double s = std::sqrt(2.0) * rise / 4.0;
  return 0.5 * (std::erf((t - rise / 2) / s) - std::erf((t - total + rise / 2) / s));
}

inline double flat_top_erf_derivative(double t, double total, double rise) {
  if (rise <= 0) return 0.0;
  const double s = std::sqrt(2.0) * rise / 4.0;
  const double c = 1.0 / (std::sqrt(kPi) * s);
  const double u1 = (t - rise / 2) / s;
  const double u2 = (t - total + rise / 2) / s;
  return c * (std::exp(-u1 * u1) - std::exp(-u2 * u2));
}

// integral of flat_top_erf over [0, total]
inline double flat_top_erf_area(double total, double rise) {
  if (rise <= 0) return total;
  const double s = std::sqrt(2.0) * rise / 4.0;
  auto F = [&](double u) { return u * std::erf(u) + std::exp(-u * u) / std::sqrt(kPi); };
  auto G = [&](double c) { return s * (F((total - c) / s) - F((0 - c) / s)); };
  return 0.5 * (G(rise / 2) - G(total - rise / 2));
}

inline double envelope_area_factor(const PulseSegment& s) {
  switch (s.envelope) {
    case Envelope::Constant: return s.duration;
    case Envelope::Cosine: return 0.5 * s.duration;
    case Envelope::FlatTopErf: return flat_top_erf_area(s.duration, s.rise);
  }
  return 0.0;
}

inline double PulseSegment::area() const { return peak_rabi * envelope_area_factor(*this); }

struct EnvelopeSample {
  double in_phase = 0.0;     // Omega(t)
  double quadrature = 0.0;   // DRAG term
  double derivative = 0.0;
};

// t is measured from the start of the pulse proper (after buffer_before)
inline EnvelopeSample sample_envelope(const PulseSegment& s, double t, double anharmonicity = 0.0) {
  if (t < -1e-9 || t > s.duration + 1e-9) throw std::out_of_range("sample_envelope: time outside segment");
  t = std::clamp(t, 0.0, s.duration);
  EnvelopeSample e;
  switch (s.envelope) {
    case Envelope::Constant:
      e.in_phase = s.peak_rabi;
      break;
    case Envelope::Cosine: {
      const double w = kTwoPi / s.duration;
      e.in_phase = 0.5 * s.peak_rabi * (1.0 - std::cos(w * t));
      e.derivative = 0.5 * s.peak_rabi * w * std::sin(w * t);
      break;
    }
    case Envelope::FlatTopErf:
      e.in_phase = s.peak_rabi * flat_top_erf(t, s.duration, s.rise);
      e.derivative = s.peak_rabi * flat_top_erf_derivative(t, s.duration, s.rise);
      break;
  }
  if (s.drag != 0.0 && anharmonicity != 0.0) e.quadrature = -s.drag * e.derivative / anharmonicity;
  return e;
}

struct PulseSchedule {
  std::vector<PulseSegment> segments;
  double virtual_z_pre = 0.0;
  double virtual_z_post = 0.0;

  double total_duration() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.total_duration();
    return t;
  }
};

struct CompileOptions {
  double segment_duration = 20.0;
  double buffer = 5.0;
  Envelope envelope = Envelope::Cosine;
  double drag = 1.0;
  double rise = 20.0;
  bool virtual_detuning = false;   // SP-NGQC: replace the detuned segment by a frame change
  bool drop_empty = false;         // omit zero-area resonant segments
};

inline PulseSegment resonant_segment(double area, double phase, const CompileOptions& o) {
  PulseSegment s;
  s.duration = o.segment_duration;
  s.envelope = o.envelope;
  s.rise = o.rise;
  s.drag = o.drag;
  s.buffer_before = s.buffer_after = o.buffer;
  if (area < 0) {
    area = -area;
    phase += kPi;
  }
  s.drive_phase = phase;
  s.peak_rabi = area / envelope_area_factor(s);
  return s;
}

inline PulseSegment detuned_segment(double rotation, const CompileOptions& o) {
  PulseSegment s;
  s.duration = o.segment_duration;
  s.envelope = Envelope::Constant;
  s.peak_rabi = 0.0;
  s.detuning = rotation / o.segment_duration;
  s.buffer_before = s.buffer_after = o.buffer;
  return s;
}

inline void push_resonant(PulseSchedule& p, double area, double phase, const CompileOptions& o) {
  if (o.drop_empty && std::abs(area) < 1e-12) return;
  p.segments.push_back(resonant_segment(area, phase, o));
}

inline PulseSchedule sp_ngqc_schedule(GateSpec g, const CompileOptions& o = {}) {
  g.validate();
  if (g.theta > kPi / 2) {
    // same rotation about the antipodal axis
    g.theta = kPi - g.theta;
    g.phi += kPi;
    g.gamma = -g.gamma;
  }
  PulseSchedule p;
  push_resonant(p, kPi / 2 - g.theta, g.phi + kPi / 2, o);
  if (o.virtual_detuning) {
    push_resonant(p, kPi / 2, g.phi - kPi / 2, o);
    push_resonant(p, g.theta, g.phi + kPi / 2 - g.gamma, o);
    p.virtual_z_post = g.gamma;
  } else {
    p.segments.push_back(detuned_segment(g.gamma, o));
    push_resonant(p, kPi / 2, g.phi + g.gamma - kPi / 2, o);
    push_resonant(p, g.theta, g.phi + kPi / 2, o);
  }
  return p;
}

// loop parameter gamma_e: ideal propagator exp(i gamma_e n.sigma)
inline PulseSchedule ngqc_loop_schedule(double theta, double phi, double gamma_e, const CompileOptions& o = {}) {
  if (theta < -1e-12 || theta > kPi + 1e-12) throw std::invalid_argument("theta must lie in [0, pi]");
  PulseSchedule p;
  push_resonant(p, theta, phi - kPi / 2, o);
  push_resonant(p, kPi, phi + gamma_e + kPi / 2, o);
  push_resonant(p, kPi - theta, phi - kPi / 2, o);
  return p;
}

inline PulseSchedule ngqc_schedule(const GateSpec& g, const CompileOptions& o = {}) {
  g.validate();
  return ngqc_loop_schedule(g.theta, g.phi, -g.gamma / 2, o);
}

struct EulerAngles {
  double a = 0.0, b = 0.0, c = 0.0;   // U ~ Rz(a) Ry(b) Rz(c)
};

inline EulerAngles euler_zyz(const ComplexMatrix& u) {
  if (u.rows() != 2 || u.cols() != 2) throw DimensionError("euler_zyz: expected 2x2");
  const cplx det = u.determinant();
  const ComplexMatrix v = u / std::sqrt(det);
  EulerAngles e;
  const double c = std::abs(v(0, 0)), s = std::abs(v(1, 0));
  e.b = 2.0 * std::atan2(s, c);
  double sum = 2.0 * std::arg(v(1, 1));
  double diff = 2.0 * std::arg(v(1, 0));
  if (s < 1e-12) diff = 0.0;
  if (c < 1e-12) sum = 0.0;
  e.a = 0.5 * (sum + diff);
  e.c = 0.5 * (sum - diff);
  ComplexMatrix ry = rotation(kPi / 2, kPi / 2, e.b);
  const ComplexMatrix rec = rz(e.a) * ry * rz(e.c);
  if (unitary_fidelity(rec, u) < 1.0 - 1e-9) {
    // sqrt(det) branch flips the sign of v; retry with the other half-angle choice
    e.a += kPi;
    e.c -= kPi;
  }
  return e;
}

// Y-X-Y Euler angles: U ~ Ry(a) Rx(b) Ry(c)
inline EulerAngles euler_yxy(const ComplexMatrix& u) {
  // cyclic frame change X->Y->Z->X
  const ComplexMatrix r = rotation(std::acos(1.0 / std::sqrt(3.0)), kPi / 4, kTwoPi / 3);
  return euler_zyz(r * u * r.adjoint());
}

inline bool is_hadamard_like(const GateSpec& g) {
  return std::abs(g.theta - kPi / 4) < 1e-12 && std::abs(wrap_phase(g.phi)) < 1e-12 &&
         std::abs(std::abs(g.gamma) - kPi) < 1e-12;
}

inline PulseSchedule dynamical_schedule(const GateSpec& g, const CompileOptions& o = {}) {
  g.validate();
  PulseSchedule p;
  CompileOptions keep = o;
  keep.drop_empty = true;
  if (std::abs(g.theta - kPi / 2) < 1e-12) {
    push_resonant(p, g.gamma, g.phi, o);
    return p;
  }
  if (is_hadamard_like(g)) {
    push_resonant(p, kPi / 2, kPi / 2, o);
    push_resonant(p, kPi, 0.0, o);
    return p;
  }
  // composite Y-X-Y about the axis rotated back to phi = 0, phi restored by frame changes
  const EulerAngles e = euler_yxy(rotation(g.theta, 0.0, g.gamma));
  push_resonant(p, wrap_phase(e.c), kPi / 2, keep);
  push_resonant(p, wrap_phase(e.b), 0.0, keep);
  push_resonant(p, wrap_phase(e.a), kPi / 2, keep);
  p.virtual_z_pre = -g.phi;
  p.virtual_z_post = g.phi;
  return p;
}

inline PulseSchedule compile(const GateSpec& g, const CompileOptions& o = {}) {
  switch (g.scheme) {
    case Scheme::SpNgqc: return sp_ngqc_schedule(g, o);
    case Scheme::Ngqc: return ngqc_schedule(g, o);
    case Scheme::Dynamical: return dynamical_schedule(g, o);
  }
  throw std::invalid_argument("unknown scheme");
}

// ideal propagator of a schedule built from the pulse areas alone
inline ComplexMatrix ideal_schedule_unitary(const PulseSchedule& p) {
  ComplexMatrix u = rz(p.virtual_z_pre);
  for (const auto& s : p.segments) {
    const double area = s.area();
    const double z = s.detuning * s.duration;
    const ComplexMatrix h = 0.5 * (area * (std::cos(s.drive_phase) * pauli_x() + std::sin(s.drive_phase) * pauli_y()) +
                                   z * pauli_z());
    u = expm_hermitian(h) * u;
  }
  return rz(p.virtual_z_post) * u;
}

struct VirtualZDecomposition {
  double z_pre = 0.0;
  double z_post = 0.0;
  GateSpec physical;        // rotation about the y axis, gamma in [0, pi]
  bool has_physical = false;
};

inline VirtualZDecomposition compose_with_virtual_z(const ComplexMatrix& target, Scheme scheme = Scheme::SpNgqc) {
  const EulerAngles e = euler_zyz(target);
  VirtualZDecomposition d;
  d.z_pre = wrap_phase(e.c);
  d.z_post = wrap_phase(e.a);
  d.physical = GateSpec{kPi / 2, kPi / 2, e.b, scheme};
  d.has_physical = std::abs(e.b) > 1e-10;
  return d;
}

class VirtualFrame {
 public:
  void rotate(double angle) { angle_ += angle; }
  double angle() const { return angle_; }
  // drive phase as seen in the rotated frame
  double apply(double drive_phase) const { return drive_phase - angle_; }

 private:
  double angle_ = 0.0;
};

struct WaveformSample {
  double time = 0.0;
  double drive_i = 0.0;
  double drive_q = 0.0;
  double detuning = 0.0;
  double phase = 0.0;
};

inline std::vector<WaveformSample> sample_waveform(const PulseSchedule& p, double rate_gsps = 1.0,
                                                   double anharmonicity = 0.0) {
  if (!(rate_gsps > 0)) throw std::invalid_argument("sample rate must be positive");
  std::vector<WaveformSample> out;
  const double dt = 1.0 / rate_gsps;
  const double total = p.total_duration();
  const auto n = static_cast<long>(std::floor(total / dt + 1e-9));
  for (long k = 0; k <= n; ++k) {
    const double t = k * dt;
    WaveformSample w;
    w.time = t;
    double start = 0.0;
    for (const auto& s : p.segments) {
      const double local = t - start - s.buffer_before;
      if (t >= start - 1e-12 && t < start + s.total_duration() - 1e-12) {
        if (local >= 0 && local <= s.duration) {
          const EnvelopeSample e = sample_envelope(s, local, anharmonicity);
          w.drive_i = e.in_phase;
          w.drive_q = e.quadrature;
          w.detuning = s.detuning;
        }
        w.phase = s.drive_phase;
        break;
      }
      start += s.total_duration();
    }
    out.push_back(w);
  }
  return out;
}

inline void write_waveform_csv(std::ostream& os, const std::vector<WaveformSample>& w) {
  os << "time_ns,drive_I,drive_Q,detuning_MHz,phase_rad\n";
  char buf[160];
  for (const auto& s : w) {
    std::snprintf(buf, sizeof buf, "%.6f,%.12e,%.12e,%.12e,%.12f\n", s.time, to_mhz(s.drive_i), to_mhz(s.drive_q),
                  to_mhz(s.detuning), s.phase);
    os << buf;
  }
}

}  // namespace geomgate
