#pragma once

#include "qmath.hpp"

#include <json.hpp>

#include <array>
#include <limits>
#include <string>
#include <vector>

namespace geomgate {

// unit helpers: angular frequency in rad/ns, times in ns
inline constexpr double ghz(double f) { return kTwoPi * f; }
inline constexpr double mhz(double f) { return kTwoPi * f * 1e-3; }
inline constexpr double to_mhz(double w) { return w / kTwoPi * 1e3; }
inline constexpr double us_to_ns(double t) { return t * 1e3; }

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct QubitParams {
  double freq = ghz(5.5114);            // rad/ns
  double anharmonicity = mhz(-242.6);   // rad/ns
  double t1 = 11.5;                     // us, sweet spot
  double t2star = 7.5;                  // us, sweet spot
  double t1_cz = 10.6;                  // us, CZ working point
  double t2star_cz = 5.9;               // us
  double readout_f0 = 0.97;
  double readout_f1 = 0.91;
  double readout_f2 = 0.85;
  double readout_freq = ghz(6.5455);
  double dispersive_shift = mhz(0.55);
};

struct NoiseModel {
  double rabi_error = 0.0;        // relative error on the drive amplitude
  double detuning_error = 0.0;    // rad/ns
  bool decoherence = false;
  bool readout = false;
};

struct DeviceModel {
  QubitParams qubit_a;
  QubitParams qubit_b;
  double coupling = mhz(9.5);
  Eigen::Matrix2d dc_crosstalk;
  Eigen::Matrix2d parametric_crosstalk;
  double parametric_phase_offset = 3.3681;
  NoiseModel noise;

  DeviceModel() {
    qubit_b.freq = ghz(5.0010);
    qubit_b.anharmonicity = mhz(-250.0);
    qubit_b.t1 = qubit_b.t1_cz = 22.3;
    qubit_b.t2star = qubit_b.t2star_cz = 27.8;
    qubit_b.readout_f0 = 0.96;
    qubit_b.readout_f1 = 0.90;
    qubit_b.readout_f2 = 0.0;
    qubit_b.readout_freq = ghz(6.4005);
    qubit_b.dispersive_shift = mhz(0.3);
    dc_crosstalk << 1.0, -0.1001, 0.1546, 1.0;
    parametric_crosstalk << 1.0, -0.0974, -0.1572, 1.0;
  }

  void validate() const {
    for (const QubitParams* q : {&qubit_a, &qubit_b}) {
      if (!(q->freq > 0)) throw ConfigError("qubit frequency must be positive");
      if (!(q->anharmonicity < 0)) throw ConfigError("anharmonicity must be negative for a transmon");
      if (!(q->t1 > 0) || !(q->t2star > 0) || !(q->t1_cz > 0) || !(q->t2star_cz > 0))
        throw ConfigError("coherence times must be positive");
      if (q->t2star > 2.0 * q->t1 + 1e-9 || q->t2star_cz > 2.0 * q->t1_cz + 1e-9)
        throw ConfigError("T2* must not exceed 2*T1");
      for (double f : {q->readout_f0, q->readout_f1})
        if (f < 0 || f > 1) throw ConfigError("readout fidelity outside [0,1]");
    }
    if (!(coupling > 0)) throw ConfigError("coupling must be positive");
    if (std::abs(dc_crosstalk.determinant()) < 1e-9 || std::abs(parametric_crosstalk.determinant()) < 1e-9)
      throw ConfigError("crosstalk matrix is singular");
  }
};

inline DeviceModel default_device() { return DeviceModel{}; }

// 1/T2* = 1/(2 T1) + 1/Tphi
inline double tphi_from_t1_t2star(double t1, double t2star) {
  if (!(t1 > 0) || !(t2star > 0)) throw ConfigError("coherence times must be positive");
  if (t2star > 2.0 * t1 + 1e-9) throw ConfigError("T2* exceeds 2*T1");
  const double inv = 1.0 / t2star - 1.0 / (2.0 * t1);
  if (inv <= 1e-15) return std::numeric_limits<double>::infinity();
  return 1.0 / inv;
}

// requested bias -> applied bias
inline Eigen::Vector2d crosstalk_compensate(const Eigen::Matrix2d& m, const Eigen::Vector2d& request) {
  if (std::abs(m.determinant()) < 1e-12) throw ConfigError("crosstalk matrix is singular");
  return m.inverse() * request;
}

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(RealMatrix m, double tol = 1e-9) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) throw DimensionError("confusion matrix must be square");
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
      if (m_.col(j).minCoeff() < 0) throw ConfigError("confusion matrix has negative entries");
      if (std::abs(m_.col(j).sum() - 1.0) > tol) throw ConfigError("confusion matrix column does not sum to 1");
    }
  }

  const RealMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

  RealVector apply(const RealVector& p) const {
    if (p.size() != dim()) throw DimensionError("confusion apply: size mismatch");
    return m_ * p;
  }

  RealVector correct(const RealVector& measured, bool clip = false) const {
    if (measured.size() != dim()) throw DimensionError("readout correction: size mismatch");
    if (std::abs(measured.sum() - 1.0) > 1e-6) throw ConfigError("measured probabilities do not sum to 1");
    Eigen::FullPivLU<RealMatrix> lu(m_);
    if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12) throw ConfigError("confusion matrix is singular");
    RealVector p = lu.solve(measured);
    if (clip) {
      p = p.cwiseMax(0.0);
      p /= p.sum();
    }
    return p;
  }

  ConfusionMatrix tensor(const ConfusionMatrix& other) const {
    RealMatrix out(dim() * other.dim(), dim() * other.dim());
    for (Eigen::Index i = 0; i < dim(); ++i)
      for (Eigen::Index j = 0; j < dim(); ++j)
        out.block(i * other.dim(), j * other.dim(), other.dim(), other.dim()) = m_(i, j) * other.m_;
    return ConfusionMatrix(out, 1e-9);
  }

 private:
  RealMatrix m_ = RealMatrix::Identity(2, 2);
};

inline ConfusionMatrix qubit_confusion(double f0, double f1) {
  RealMatrix m(2, 2);
  m << f0, 1.0 - f1, 1.0 - f0, f1;
  return ConfusionMatrix(m);
}

inline ConfusionMatrix qubit_confusion(const QubitParams& q) { return qubit_confusion(q.readout_f0, q.readout_f1); }

inline ConfusionMatrix qutrit_confusion(double f0, double f1, double f2) {
  RealMatrix m = RealMatrix::Zero(3, 3);
  m(0, 0) = f0;
  m(1, 0) = 1.0 - f0;
  m(1, 1) = f1;
  m(0, 1) = 1.0 - f1;
  m(2, 2) = f2;
  m(1, 2) = 1.0 - f2;
  return ConfusionMatrix(m);
}

// two-qubit readout including |2> of qubit A; order 00,01,10,11,20,21
inline const RealMatrix& leakage_confusion_raw() {
  static const RealMatrix m = [] {
    RealMatrix r(6, 6);
    r << 0.912, 0.085, 0.088, 0.008, 0.035, 0.005,
         0.059, 0.888, 0.005, 0.085, 0.002, 0.049,
         0.026, 0.002, 0.834, 0.077, 0.107, 0.008,
         0.001, 0.023, 0.057, 0.812, 0.004, 0.023,
         0.001, 0.000, 0.013, 0.003, 0.819, 0.145,
         0.000, 0.002, 0.001, 0.014, 0.031, 0.769;
    return r;
  }();
  return m;
}

// published entries are rounded to 1e-3, so columns are renormalised
inline ConfusionMatrix leakage_confusion() {
  RealMatrix m = leakage_confusion_raw();
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j) /= m.col(j).sum();
  return ConfusionMatrix(m);
}

// ---- JSON configuration ----

inline void read_qubit(const nlohmann::json& j, QubitParams& q) {
  if (j.contains("freq_ghz")) q.freq = ghz(j.at("freq_ghz").get<double>());
  if (j.contains("anharmonicity_mhz")) q.anharmonicity = mhz(j.at("anharmonicity_mhz").get<double>());
  if (j.contains("t1_us")) q.t1 = j.at("t1_us").get<double>();
  if (j.contains("t2star_us")) q.t2star = j.at("t2star_us").get<double>();
  if (j.contains("t1_cz_us")) q.t1_cz = j.at("t1_cz_us").get<double>();
  if (j.contains("t2star_cz_us")) q.t2star_cz = j.at("t2star_cz_us").get<double>();
  if (j.contains("readout_f0")) q.readout_f0 = j.at("readout_f0").get<double>();
  if (j.contains("readout_f1")) q.readout_f1 = j.at("readout_f1").get<double>();
  if (j.contains("readout_f2")) q.readout_f2 = j.at("readout_f2").get<double>();
  if (j.contains("readout_freq_ghz")) q.readout_freq = ghz(j.at("readout_freq_ghz").get<double>());
  if (j.contains("dispersive_shift_mhz")) q.dispersive_shift = mhz(j.at("dispersive_shift_mhz").get<double>());
}

inline nlohmann::json qubit_json(const QubitParams& q) {
  return {{"freq_ghz", q.freq / kTwoPi},
          {"anharmonicity_mhz", to_mhz(q.anharmonicity)},
          {"t1_us", q.t1},
          {"t2star_us", q.t2star},
          {"t1_cz_us", q.t1_cz},
          {"t2star_cz_us", q.t2star_cz},
          {"readout_f0", q.readout_f0},
          {"readout_f1", q.readout_f1},
          {"readout_f2", q.readout_f2},
          {"readout_freq_ghz", q.readout_freq / kTwoPi},
          {"dispersive_shift_mhz", to_mhz(q.dispersive_shift)}};
}

inline Eigen::Matrix2d read_matrix2(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || j[0].size() != 2 || j[1].size() != 2)
    throw ConfigError("crosstalk matrix must be 2x2");
  Eigen::Matrix2d m;
  m << j[0][0].get<double>(), j[0][1].get<double>(), j[1][0].get<double>(), j[1][1].get<double>();
  return m;
}

inline DeviceModel device_from_json(const nlohmann::json& j) {
  DeviceModel d;
  try {
    if (j.contains("qubit_a")) read_qubit(j.at("qubit_a"), d.qubit_a);
    if (j.contains("qubit_b")) read_qubit(j.at("qubit_b"), d.qubit_b);
    if (j.contains("coupling_mhz")) d.coupling = mhz(j.at("coupling_mhz").get<double>());
    if (j.contains("dc_crosstalk")) d.dc_crosstalk = read_matrix2(j.at("dc_crosstalk"));
    if (j.contains("parametric_crosstalk")) d.parametric_crosstalk = read_matrix2(j.at("parametric_crosstalk"));
    if (j.contains("parametric_phase_offset_rad"))
      d.parametric_phase_offset = j.at("parametric_phase_offset_rad").get<double>();
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      if (n.contains("rabi_error")) d.noise.rabi_error = n.at("rabi_error").get<double>();
      if (n.contains("detuning_error_mhz")) d.noise.detuning_error = mhz(n.at("detuning_error_mhz").get<double>());
      if (n.contains("decoherence")) d.noise.decoherence = n.at("decoherence").get<bool>();
      if (n.contains("readout")) d.noise.readout = n.at("readout").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("device config: ") + e.what());
  }
  d.validate();
  return d;
}

inline nlohmann::json device_to_json(const DeviceModel& d) {
  auto m2 = [](const Eigen::Matrix2d& m) {
    return nlohmann::json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}});
  };
  return {{"qubit_a", qubit_json(d.qubit_a)},
          {"qubit_b", qubit_json(d.qubit_b)},
          {"coupling_mhz", to_mhz(d.coupling)},
          {"dc_crosstalk", m2(d.dc_crosstalk)},
          {"parametric_crosstalk", m2(d.parametric_crosstalk)},
          {"parametric_phase_offset_rad", d.parametric_phase_offset},
          {"noise",
           {{"rabi_error", d.noise.rabi_error},
            {"detuning_error_mhz", to_mhz(d.noise.detuning_error)},
            {"decoherence", d.noise.decoherence},
            {"readout", d.noise.readout}}}};
}

}  // namespace geomgate
