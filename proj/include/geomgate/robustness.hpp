#pragma once

#include "device.hpp"
#include "evolve.hpp"
#include "parallel.hpp"
#include "pulse.hpp"
#include "qmath.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace geomgate {

enum class ErrorAxis { RabiEps, Detuning };
enum class Engine { Analytic, UnitarySim, LindbladSim };
enum class LandscapePair { SpVsNgqc, SpVsDyn };

inline std::string to_string(ErrorAxis a) { return a == ErrorAxis::RabiEps ? "rabi_eps" : "detuning"; }

inline ErrorAxis error_axis_from_string(const std::string& s) {
  if (s == "rabi_eps" || s == "rabi" || s == "amplitude") return ErrorAxis::RabiEps;
  if (s == "detuning") return ErrorAxis::Detuning;
  throw ConfigError("unknown error axis: " + s);
}

inline std::string to_string(Engine e) {
  switch (e) {
    case Engine::Analytic: return "analytic";
    case Engine::UnitarySim: return "unitary_sim";
    case Engine::LindbladSim: return "lindblad_sim";
  }
  return "?";
}

inline Engine engine_from_string(const std::string& s) {
  if (s == "analytic") return Engine::Analytic;
  if (s == "unitary_sim" || s == "unitary") return Engine::UnitarySim;
  if (s == "lindblad_sim" || s == "lindblad") return Engine::LindbladSim;
  throw ConfigError("unknown engine: " + s);
}

inline std::string to_string(LandscapePair p) { return p == LandscapePair::SpVsNgqc ? "sp_vs_ngqc" : "sp_vs_dyn"; }

inline LandscapePair landscape_pair_from_string(const std::string& s) {
  if (s == "sp_vs_ngqc") return LandscapePair::SpVsNgqc;
  if (s == "sp_vs_dyn") return LandscapePair::SpVsDyn;
  throw ConfigError("unknown landscape pair: " + s);
}

// simulation settings shared by sweeps, landscapes and Z-rotation comparisons
struct RobustnessOptions {
  CompileOptions compile;
  PropagationOptions propagation;
  QubitParams qubit;   // decoherence for LindbladSim
  int jobs = 0;
};

// constant drive at the same pulse area, as assumed by the closed forms
inline RobustnessOptions constant_envelope_options() {
  RobustnessOptions o;
  o.compile.envelope = Envelope::Constant;
  return o;
}

inline NoiseModel error_noise(ErrorAxis axis, double value) {
  NoiseModel n;
  if (axis == ErrorAxis::RabiEps)
    n.rabi_error = value;
  else
    n.detuning_error = value;
  return n;
}

inline double simulated_fidelity(const GateSpec& g, const NoiseModel& noise, Engine engine,
                                 const RobustnessOptions& o = {}) {
  const PulseSchedule p = compile(g, o.compile);
  const ComplexMatrix target = target_unitary(g);
  if (engine == Engine::LindbladSim) {
    const LindbladModel lind = transmon_decoherence(o.propagation.levels, o.qubit.t1, o.qubit.t2star);
    ComplexMatrix s = channel_superop(p, noise, lind, o.propagation);
    if (o.propagation.levels > 2) {
      // restrict to the computational block
      const int d = o.propagation.levels;
      ComplexMatrix r(4, 4);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) r(a, b) = s((a / 2) * d + a % 2, (b / 2) * d + b % 2);
      s = r;
    }
    return std::sqrt(std::max(0.0, process_fidelity(s, target)));
  }
  return unitary_fidelity(qubit_block(propagate_unitary(p, noise, o.propagation)), target);
}

struct AnalyticFidelity {
  double value = 1.0;
  bool closed_form = true;   // false when evaluated by constant-envelope simulation
};

inline bool is_equatorial(double theta) { return std::abs(theta - kPi / 2) < 1e-12; }

inline double sp_ngqc_closed_form(double theta, double gamma, double eps) {
  return 0.5 * (1.0 + std::cos(gamma) - (std::cos(gamma) - 1.0) * std::cos(eps * theta));
}

inline double ngqc_closed_form(double theta, double gamma, double eps) {
  const double s = std::sin(gamma / 2);
  return 1.0 - (kPi * kPi / 4 * (1.0 - std::cos(gamma / 2)) - theta * (kPi - theta) / 2 * s * s) * eps * eps;
}

inline double dyn_hadamard_closed_form(double eps) {
  if (eps == 0.0) return 1.0;
  return std::abs(std::sin(kPi * eps) / (4.0 * std::sin(kPi * eps / 4)));
}

inline AnalyticFidelity analytic_fidelity(Scheme scheme, double theta, double gamma, double eps, double phi = 0.0) {
  if (!(std::abs(eps) < 1.0)) throw std::invalid_argument("|eps| must be below 1");
  switch (scheme) {
    case Scheme::SpNgqc: return {sp_ngqc_closed_form(theta, gamma, eps), true};
    case Scheme::Ngqc: return {ngqc_closed_form(theta, gamma, eps), true};
    case Scheme::Dynamical: break;
  }
  if (is_equatorial(theta)) return {std::abs(std::cos(gamma * eps / 2)), true};
  GateSpec g{theta, phi, gamma, Scheme::Dynamical};
  if (is_hadamard_like(g)) return {dyn_hadamard_closed_form(eps), true};
  return {simulated_fidelity(g, error_noise(ErrorAxis::RabiEps, eps), Engine::UnitarySim, constant_envelope_options()),
          false};
}

struct SweepSpec {
  GateSpec gate;
  ErrorAxis error_axis = ErrorAxis::RabiEps;
  std::vector<double> values;   // relative amplitude error, or detuning in rad/ns
  std::vector<Scheme> schemes{Scheme::SpNgqc, Scheme::Ngqc, Scheme::Dynamical};
  Engine engine = Engine::UnitarySim;
  RobustnessOptions options;

  void validate() const {
    gate.validate();
    if (values.empty()) throw ConfigError("sweep needs at least one error value");
    for (double v : values)
      if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
    if (schemes.empty()) throw ConfigError("sweep needs at least one scheme");
    if (engine == Engine::Analytic && error_axis == ErrorAxis::RabiEps)
      for (double v : values)
        if (!(std::abs(v) < 1.0)) throw ConfigError("analytic sweep needs |eps| < 1");
  }
};

struct SweepRow {
  std::string scheme;
  double theta = 0.0;
  double gamma = 0.0;
  ErrorAxis error_kind = ErrorAxis::RabiEps;
  double error_value = 0.0;
  double fidelity = 1.0;
  Engine engine = Engine::UnitarySim;   // engine actually used
};

inline std::vector<SweepRow> sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<Scheme> schemes = spec.schemes;
  std::sort(schemes.begin(), schemes.end());
  schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());
  std::vector<double> values = spec.values;
  std::sort(values.begin(), values.end());

  std::vector<SweepRow> rows(schemes.size() * values.size());
  parallel_for(
      rows.size(),
      [&](std::size_t i) {
        const Scheme s = schemes[i / values.size()];
        const double v = values[i % values.size()];
        GateSpec g = spec.gate;
        g.scheme = s;
        SweepRow& r = rows[i];
        r.scheme = to_string(s);
        r.theta = g.theta;
        r.gamma = g.gamma;
        r.error_kind = spec.error_axis;
        r.error_value = v;
        r.engine = spec.engine;
        if (spec.engine == Engine::Analytic && spec.error_axis == ErrorAxis::RabiEps) {
          const AnalyticFidelity a = analytic_fidelity(s, g.theta, g.gamma, v, g.phi);
          r.fidelity = a.value;
          if (!a.closed_form) r.engine = Engine::UnitarySim;
          return;
        }
        // detuning has no closed form
        if (spec.engine == Engine::Analytic) r.engine = Engine::UnitarySim;
        r.fidelity = simulated_fidelity(g, error_noise(spec.error_axis, v), r.engine, spec.options);
      },
      spec.options.jobs);
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "scheme,theta,gamma,error_kind,error_value,fidelity,engine\n";
  os << std::setprecision(12);
  for (const auto& r : rows) {
    const bool det = r.error_kind == ErrorAxis::Detuning;
    os << r.scheme << ',' << r.theta << ',' << r.gamma << ',' << (det ? "detuning_mhz" : "rabi_eps") << ','
       << (det ? to_mhz(r.error_value) : r.error_value) << ',' << r.fidelity << ',' << to_string(r.engine) << '\n';
  }
}

struct Landscape {
  LandscapePair pair = LandscapePair::SpVsNgqc;
  double eps = 0.0;
  std::vector<double> thetas;
  std::vector<double> gammas;
  RealMatrix difference;   // rows: theta, cols: gamma
};

inline std::vector<double> linspace(double a, double b, int n) {
  if (n < 1) throw std::invalid_argument("linspace needs n >= 1");
  std::vector<double> v(n);
  for (int k = 0; k < n; ++k) v[k] = n == 1 ? a : a + (b - a) * k / (n - 1);
  return v;
}

inline Landscape landscape(double eps, const std::vector<double>& thetas, const std::vector<double>& gammas,
                           LandscapePair pair, int jobs = 0) {
  if (!(std::abs(eps) < 1.0)) throw ConfigError("landscape needs |eps| < 1");
  if (thetas.empty() || gammas.empty()) throw ConfigError("landscape grids must be nonempty");
  for (double t : thetas)
    if (t < -1e-12 || t > kPi / 2 + 1e-12) throw ConfigError("landscape theta must lie in [0, pi/2]");
  for (double g : gammas)
    if (g <= 0 || g > kTwoPi + 1e-12) throw ConfigError("landscape gamma must lie in (0, 2pi]");
  Landscape l{pair, eps, thetas, gammas, RealMatrix::Zero(thetas.size(), gammas.size())};
  const Scheme other = pair == LandscapePair::SpVsNgqc ? Scheme::Ngqc : Scheme::Dynamical;
  const std::size_t nt = thetas.size(), ng = gammas.size();
  parallel_for(
      nt * ng,
      [&](std::size_t i) {
        const double th = thetas[i / ng], ga = gammas[i % ng];
        l.difference(i / ng, i % ng) =
            analytic_fidelity(Scheme::SpNgqc, th, ga, eps).value - analytic_fidelity(other, th, ga, eps).value;
      },
      jobs);
  return l;
}

inline void write_landscape_csv(std::ostream& os, const Landscape& l) {
  os << std::setprecision(12) << "theta\\gamma";
  for (double g : l.gammas) os << ',' << g;
  os << '\n';
  for (std::size_t i = 0; i < l.thetas.size(); ++i) {
    os << l.thetas[i];
    for (std::size_t j = 0; j < l.gammas.size(); ++j) os << ',' << l.difference(i, j);
    os << '\n';
  }
}

struct ZRotationRow {
  std::string variant;   // scheme name, or DYNAMICAL_COMPOSITE / DYNAMICAL_VIRTUAL
  double gamma = 0.0;
  double fidelity = 1.0;
};

inline std::vector<ZRotationRow> z_rotation_comparison(ErrorAxis axis, double value, const std::vector<double>& gammas,
                                                       const RobustnessOptions& o = {}) {
  for (double g : gammas)
    if (g <= 0 || g > kTwoPi + 1e-12) throw ConfigError("Z-rotation gamma must lie in (0, 2pi]");
  const NoiseModel noise = error_noise(axis, value);
  const std::vector<Scheme> schemes{Scheme::SpNgqc, Scheme::Ngqc, Scheme::Dynamical};
  const std::size_t ng = gammas.size();
  std::vector<ZRotationRow> rows(4 * ng);
  parallel_for(
      3 * ng,
      [&](std::size_t i) {
        const Scheme s = schemes[i / ng];
        const GateSpec g{0.0, 0.0, gammas[i % ng], s};
        rows[i] = {s == Scheme::Dynamical ? "DYNAMICAL_COMPOSITE" : to_string(s), g.gamma,
                   simulated_fidelity(g, noise, Engine::UnitarySim, o)};
      },
      o.jobs);
  for (std::size_t j = 0; j < ng; ++j) rows[3 * ng + j] = {"DYNAMICAL_VIRTUAL", gammas[j], 1.0};
  return rows;
}

inline void write_z_rotation_csv(std::ostream& os, const std::vector<ZRotationRow>& rows) {
  os << std::setprecision(12) << "variant,gamma,fidelity\n";
  for (const auto& r : rows) os << r.variant << ',' << r.gamma << ',' << r.fidelity << '\n';
}

}  // namespace geomgate
