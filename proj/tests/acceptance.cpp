// Prints one PASS/FAIL line per acceptance criterion. Usage: acceptance <path-to-geomgate-cli>
#include <geomgate/geomgate.hpp>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace geomgate;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string verdict(bool ok) { return ok ? "ok" : "FAIL"; }

// ---- 1 ----
Outcome gate_exactness() {
  double worst = 0.0;
  int count = 0;
  for (Scheme s : {Scheme::SpNgqc, Scheme::Ngqc, Scheme::Dynamical})
    for (double th : linspace(0.0, kPi / 2, 8))
      for (double ga : linspace(kTwoPi / 8, kTwoPi, 8)) {
        const GateSpec g{th, 0.0, ga, s};
        worst = std::max(worst, 1.0 - unitary_fidelity(propagate_unitary(compile(g)), target_unitary(g)));
        ++count;
      }
  return {worst < 1e-9, fmt("%d gates, max infidelity %.2e", count, worst)};
}

// ---- 2 ----
ComplexVector axis_state(double theta, double phi, bool plus) {
  ComplexVector v(2);
  if (plus)
    v << std::cos(theta / 2), std::exp(kI * phi) * std::sin(theta / 2);
  else
    v << std::sin(theta / 2), -std::exp(kI * phi) * std::cos(theta / 2);
  return v;
}

Outcome geometric_phases() {
  double phase_err = 0.0, dyn = 0.0;
  for (double th : linspace(0.0, kPi / 2, 5))
    for (double ga : {0.5, kPi / 2, kPi, 4.0, kTwoPi})
      for (double ph : {0.0, 0.7}) {
        const PulseSchedule p = sp_ngqc_schedule(GateSpec{th, ph, ga});
        const ComplexMatrix u = propagate_unitary(p);
        for (bool plus : {true, false}) {
          const ComplexVector psi = axis_state(th, ph, plus);
          const cplx amp = (psi.adjoint() * u * psi)(0, 0);
          phase_err = std::max(phase_err, std::abs(wrap_phase(std::arg(amp) - (plus ? -ga / 2 : ga / 2))));
          for (double d : dynamical_phases(p, psi)) dyn = std::max(dyn, std::abs(d));
        }
      }
  return {phase_err < 1e-8 && dyn < 1e-8,
          fmt("max phase error %.2e rad, max segment dynamical phase %.2e rad", phase_err, dyn)};
}

// ---- 3 ----
Outcome closed_forms() {
  const auto opts = constant_envelope_options();
  double worst[3] = {0, 0, 0};
  const std::vector<double> eps{-0.2, -0.1, 0.1, 0.2};
  for (double e : eps)
    for (double th : linspace(0.0, kPi / 2, 16))
      for (double ga : linspace(kTwoPi / 16, kTwoPi, 16))
        for (Scheme s : {Scheme::SpNgqc, Scheme::Ngqc, Scheme::Dynamical}) {
          const auto a = analytic_fidelity(s, th, ga, e);
          if (!a.closed_form) continue;
          const double sim = simulated_fidelity(GateSpec{th, 0.0, ga, s}, error_noise(ErrorAxis::RabiEps, e),
                                                Engine::UnitarySim, opts);
          worst[static_cast<int>(s)] = std::max(worst[static_cast<int>(s)], std::abs(sim - a.value));
        }
  for (double e : eps) {
    const double sim = simulated_fidelity(GateSpec{kPi / 4, 0.0, kPi, Scheme::Dynamical},
                                          error_noise(ErrorAxis::RabiEps, e), Engine::UnitarySim, opts);
    worst[2] = std::max(worst[2], std::abs(sim - analytic_fidelity(Scheme::Dynamical, kPi / 4, kPi, e).value));
  }
  const double fsp = analytic_fidelity(Scheme::SpNgqc, kPi / 4, kPi, 0.2).value;
  const double fdyn = analytic_fidelity(Scheme::Dynamical, kPi / 4, kPi, 0.2).value;
  const bool sp_ok = worst[0] < 1e-4, ngqc_ok = worst[1] < 1e-4, dyn_ok = worst[2] < 1e-4;
  const bool v1 = std::abs(fsp - 0.98769) < 1e-4, v2 = std::abs(fdyn - 0.9394) < 1e-4;
  return {sp_ok && ngqc_ok && dyn_ok && v1 && v2,
          fmt("max|analytic-sim| SP %.1e %s, NGQC %.1e %s, Dyn %.1e %s; F_SP(H,0.2)=%.5f %s; F_Dyn(H,0.2)=%.5f %s",
              worst[0], verdict(sp_ok).c_str(), worst[1], verdict(ngqc_ok).c_str(), worst[2], verdict(dyn_ok).c_str(),
              fsp, verdict(v1).c_str(), fdyn, verdict(v2).c_str())};
}

// ---- 4 ----
Outcome orderings() {
  const GateSpec h{kPi / 4, 0.0, kPi};
  auto fid = [](const std::vector<SweepRow>& rows, Scheme s, double v) {
    for (const auto& r : rows)
      if (r.scheme == to_string(s) && r.error_value == v) return r.fidelity;
    return -1.0;
  };
  SweepSpec a{h, ErrorAxis::RabiEps, linspace(-0.2, 0.2, 41)};
  const auto ra = sweep(a);
  bool amp_ok = true;
  int checked = 0;
  for (double v : a.values)
    if (std::abs(v) >= 0.15 - 1e-12) {
      const double sp = fid(ra, Scheme::SpNgqc, v);
      amp_ok = amp_ok && sp > fid(ra, Scheme::Ngqc, v) && sp > fid(ra, Scheme::Dynamical, v);
      ++checked;
    }
  const double d = mhz(2.0);
  const auto rd = sweep(SweepSpec{h, ErrorAxis::Detuning, {-d, d}});
  bool det_ok = true;
  for (double v : {-d, d}) {
    const double sp = fid(rd, Scheme::SpNgqc, v);
    det_ok = det_ok && sp < fid(rd, Scheme::Ngqc, v) && sp < fid(rd, Scheme::Dynamical, v);
  }
  const Landscape l =
      landscape(0.2, linspace(0.0, kPi / 2, 32), linspace(kTwoPi / 32, kTwoPi, 32), LandscapePair::SpVsNgqc);
  bool land_ok = l.difference.row(0).minCoeff() > 0 && l.difference.col(31).minCoeff() > 0 && l.difference.minCoeff() < 0;
  land_ok = land_ok && landscape(0.2, {kPi / 4}, {kPi}, LandscapePair::SpVsNgqc).difference(0, 0) > 0;
  return {amp_ok && det_ok && land_ok,
          fmt("dA: SP highest at %d points with |dA/A|>=0.15 %s; dDelta=2 MHz: SP %.4f vs NGQC %.4f, Dyn %.4f %s; "
              "landscape signs %s",
              checked, verdict(amp_ok).c_str(), fid(rd, Scheme::SpNgqc, d), fid(rd, Scheme::Ngqc, d),
              fid(rd, Scheme::Dynamical, d), verdict(det_ok).c_str(), verdict(land_ok).c_str())};
}

// ---- 5 ----
Outcome bessel() {
  const DeviceModel d = default_device();
  const RabiFit f = full_model_exchange(d, mhz(107.8), mhz(80.0), 300.0);
  const double expect = bessel_coupling(mhz(107.8), mhz(80.0), d.coupling);
  const double rel = std::abs(f.frequency - expect) / expect;
  return {rel < 0.05, fmt("9-level %.3f MHz vs 2*sqrt(2)*g*J1 %.3f MHz (%.1f%%)", to_mhz(f.frequency), to_mhz(expect),
                          100 * rel)};
}

// ---- 6 ----
Outcome cz_calibration() {
  const DeviceModel d = default_device();
  const CZCalibration c = calibrate_cz(d);
  const CZResult r = simulate_cz(c.schedule, d);
  CZOptions two;
  two.stages = 2;
  const double inv = wrap_phase(conditional_phase_experiment(c.schedule, d, two) - conditional_phase_experiment(c.schedule, d));
  const double dphi = wrap_phase(r.conditional_phase - kPi);
  const bool ok = std::abs(dphi) < 0.01 && r.leakage < 1e-3 && std::abs(inv) < 0.02;
  return {ok, fmt("CP-pi %.2e rad, leakage %.2e, half-pi invariance %.2e rad, total %.1f ns", dphi, r.leakage, inv,
                  c.schedule.total_duration())};
}

// ---- 7 ----
Outcome fidelity_bands() {
  const DeviceModel d = default_device();
  RBConfig c;
  c.sequences = 30;
  c.seed = 0;

  const RBModel m1 = native_single_qubit_model(d);
  c.lengths = rb_lengths_for_budget(m1, false, 10, 300);
  const double f1 = average_gate_fidelity(rb_run(c, m1), 1);
  const bool b1 = f1 >= 0.997 && f1 <= 0.9995;

  const CZSchedule s = calibrate_cz(d).schedule;
  const CZChannel ch = cz_lindblad_channel(s, d);
  const RBModel m2 = native_two_qubit_model(d, ch.superop, s.total_duration());
  c.lengths = rb_lengths_for_budget(m2, true, 8, 100);
  c.purity = true;
  const RBRawData ref = simulate_rb(c, m2);
  c.interleaved = true;
  const RBRawData inter = simulate_rb(c, m2);
  const RBResult rr = summarize_rb(ref.lengths, ref.survival, "reference");
  const RBResult ri = summarize_rb(inter.lengths, inter.survival, "interleaved");
  const double fcz = interleaved_fidelity(rr, ri, 2);
  const bool b2 = fcz >= 0.965 && fcz <= 0.99;
  const PurityRBResult pu = purity_from_raw(ref, 2, default_gates_per_clifford(2));
  const bool b3 = pu.incoherent_error >= 0.037 / 2 && pu.incoherent_error <= 0.037 * 2;
  const LeakageRBResult lk = leakage_from_raw(ref, inter);
  const bool b4 = lk.l1_gate >= 0.0013 / 2 && lk.l1_gate <= 0.0013 * 2;
  return {b1 && b2 && b3 && b4,
          fmt("1q RB %.3f%% %s [99.7, 99.95]; CZ %.2f%% %s [96.5, 99]; purity eps %.2f%% %s [1.85, 7.4]; "
              "L1 %.3f%% %s [0.065, 0.26]",
              100 * f1, verdict(b1).c_str(), 100 * fcz, verdict(b2).c_str(), 100 * pu.incoherent_error,
              verdict(b3).c_str(), 100 * lk.l1_gate, verdict(b4).c_str())};
}

// ---- 8 ----
Outcome erf_cz() {
  const DeviceModel d = default_device();
  const ErfCZResult r = simulate_erf_cz(tune_erf_cz(d), d);
  return {r.fidelity > 0.99, fmt("computational-frame fidelity %.4f (rotating-frame %.4f), CP %.3f rad, leakage %.1e",
                                 r.fidelity, r.rotating_frame_fidelity, r.conditional_phase, r.leakage)};
}

// ---- 9 ----
ComplexMatrix random_unitary(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ComplexMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<ComplexMatrix> qr(a);
  return qr.householderQ();
}

ComplexMatrix random_state(int d, std::mt19937_64& rng) {
  const ComplexMatrix u = random_unitary(d, rng);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  RealVector p(d);
  for (int i = 0; i < d; ++i) p(i) = w(rng);
  p /= p.sum();
  return u * p.cast<cplx>().asDiagonal() * u.adjoint();
}

Outcome protocol_oracles() {
  RBConfig c;
  c.lengths = {1, 10, 25, 50, 100, 150, 200, 300};
  c.sequences = 30;
  c.shots = 1000;
  c.seed = 0;
  const RBResult r = rb_run(c, depolarizing_model(1, 0.99));
  const double z = std::abs(r.fit_p - 0.99) / r.p_error();
  const bool rb_ok = z <= 2.0;

  RBConfig lc;
  lc.lengths = {1, 20, 50, 100, 200, 400, 700, 1000};
  lc.sequences = 10;
  const LeakageRBResult l = leakage_rb(lc, leaky_model(0.001, 0.002));
  const double lrel = std::abs(l.l1_ref - 0.001) / 0.001;
  const bool leak_ok = lrel <= 0.2;

  std::mt19937_64 rng(9);
  double td = 0.0;
  for (int n : {1, 2}) {
    const int d = 1 << n;
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<ComplexMatrix> ks;
      std::uniform_real_distribution<double> u(0.1, 1.0);
      std::vector<double> w(3);
      double sum = 0;
      for (auto& x : w) sum += (x = u(rng));
      for (double x : w) ks.push_back(std::sqrt(x / sum) * random_unitary(d, rng));
      auto apply = [&](const ComplexMatrix& rho) {
        ComplexMatrix out = ComplexMatrix::Zero(d, d);
        for (const auto& k : ks) out += k * rho * k.adjoint();
        return out;
      };
      const ProcessMatrix p = qpt(apply, n);
      for (int k = 0; k < 10; ++k) {
        const ComplexMatrix s = random_state(d, rng);
        td = std::max(td, trace_distance(apply_chi(p, s), apply(s)));
      }
    }
  }
  const bool qpt_ok = td < 1e-8;

  double min_eig = 1.0, tp = 0.0;
  for (int n : {1, 2}) {
    MeasurementOptions mo;
    mo.shots = 200;
    mo.seed = 4;
    const ComplexMatrix u = n == 1 ? rotation(kPi / 4, 0.0, kPi) : cz_matrix();
    const ProcessMatrix m = mle_project(qpt([&](const ComplexMatrix& r) { return ComplexMatrix(u * r * u.adjoint()); }, n, mo));
    min_eig = std::min(min_eig, m.min_eigenvalue());
    tp = std::max(tp, m.tp_error());
  }
  const bool mle_ok = min_eig > -1e-9 && tp < 1e-6;
  return {rb_ok && leak_ok && qpt_ok && mle_ok,
          fmt("RB p %.5f +- %.5f (%.2f sigma) %s; leakage L1 %.5f%% (%.1f%% off) %s; QPT trace distance %.1e %s; "
              "MLE min eig %.1e, TP error %.1e %s",
              r.fit_p, r.p_error(), z, verdict(rb_ok).c_str(), 100 * l.l1_ref, 100 * lrel, verdict(leak_ok).c_str(),
              td, verdict(qpt_ok).c_str(), min_eig, tp, verdict(mle_ok).c_str())};
}

// ---- 10 ----
std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  const fs::path root = fs::temp_directory_path() / ("geomgate_acceptance_" + std::to_string(::getpid()));
  const std::vector<std::pair<std::string, std::string>> runs{
      {"gate", "gate --scheme sp-ngqc --target H --levels 3 --decoherence"},
      {"sweep", "sweep --error detuning --engine lindblad --points 9"},
      {"landscape", "landscape --theta-points 8 --gamma-points 8 --z-rotation --z-points 8"},
      {"rb", "rb --variant interleaved --interleave X2 --lengths 1,4,8,16,32,64 --k 10 --shots 200 --seed 7"},
      {"rbp", "rb --variant purity --model depolarizing --p 0.98 --lengths 1..40:5 --k 10 --shots 300 --seed 3"},
      {"qpt", "qpt --target H --shots 500 --mle --seed 5"},
      {"erf", "erf-cz"}};
  int files = 0;
  std::string bad;
  for (const auto& [name, args] : runs) {
    std::string out[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (name + std::to_string(rep));
      const std::string cmd = "GEOMGATE_JOBS=" + std::to_string(rep + 1) + " \"" + cli + "\" " + args + " --out \"" + dir.string() + "\" > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        bad += " " + name + "(exit)";
        break;
      }
      for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") {
          out[rep] += e.path().filename().string() + "\n" + slurp(e.path());
          if (rep == 0) ++files;
        }
    }
    if (out[0].empty() || out[0] != out[1]) bad += " " + name;
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return {bad.empty(), fmt("%zu commands run twice (1 and 2 jobs), %d CSV files byte-identical%s%s", runs.size(), files, bad.empty() ? "" : "; differ:",
                           bad.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gate construction exactness", 5, gate_exactness},
      {2, "geometric phases", 2, geometric_phases},
      {3, "closed-form fidelities", 30, closed_forms},
      {4, "robustness orderings", 60, orderings},
      {5, "Bessel coupling", 60, bessel},
      {6, "CZ calibration", 120, cz_calibration},
      {7, "device-scale fidelity bands", 1200, fidelity_bands},
      {8, "erf-pulse CZ", 120, erf_cz},
      {9, "protocol oracles", 300, protocol_oracles},
      {10, "CLI determinism", 0, [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s <= 0 || t < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail;
    if (c.budget_s > 0)
      std::cout << fmt(" [%.1f s, budget %.0f s%s]", t, c.budget_s, in_time ? "" : ", OVER");
    else
      std::cout << fmt(" [%.1f s]", t);
    std::cout << std::endl;
  }
  std::cout << (10 - failed) << "/10 criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
