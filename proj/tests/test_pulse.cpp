#include <catch_amalgamated.hpp>

#include <geomgate/pulse.hpp>

#include <random>
#include <sstream>

using namespace geomgate;
using Catch::Matchers::WithinAbs;

TEST_CASE("target unitaries") {
  REQUIRE(unitary_fidelity(target_unitary({kPi / 2, 0, kPi}), pauli_x()) > 1 - 1e-15);
  const ComplexMatrix h = (pauli_x() + pauli_z()) / std::sqrt(2.0);
  REQUIRE(unitary_fidelity(target_unitary({kPi / 4, 0, kPi}), h) > 1 - 1e-15);
}

TEST_CASE("gate parameter validation") {
  REQUIRE_THROWS(GateSpec{-0.1, 0, 1}.validate());
  REQUIRE_THROWS(GateSpec{kPi + 0.1, 0, 1}.validate());
  REQUIRE_THROWS(GateSpec{0.3, 0, 7.0}.validate());
  REQUIRE_THROWS(GateSpec{std::nan(""), 0, 1}.validate());
  REQUIRE_NOTHROW(GateSpec{kPi, 0, kTwoPi}.validate());
}

TEST_CASE("SP-NGQC Hadamard schedule") {
  const PulseSchedule p = sp_ngqc_schedule({kPi / 4, 0, kPi});
  REQUIRE(p.segments.size() == 4);
  REQUIRE_THAT(p.segments[0].area(), WithinAbs(kPi / 4, 1e-12));
  REQUIRE_THAT(p.segments[0].drive_phase, WithinAbs(kPi / 2, 1e-12));
  REQUIRE_THAT(p.segments[1].detuning * p.segments[1].duration, WithinAbs(kPi, 1e-12));
  REQUIRE_THAT(p.segments[2].area(), WithinAbs(kPi / 2, 1e-12));
  REQUIRE_THAT(p.segments[3].area(), WithinAbs(kPi / 4, 1e-12));
  REQUIRE(unitary_fidelity(ideal_schedule_unitary(p), target_unitary({kPi / 4, 0, kPi})) > 1 - 1e-14);
}

TEST_CASE("SP-NGQC Z rotation has empty outer pulse") {
  const PulseSchedule p = sp_ngqc_schedule({0, 0, kPi / 3});
  REQUIRE_THAT(p.segments[3].area(), WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(p.segments[0].area(), WithinAbs(kPi / 2, 1e-12));
}

TEST_CASE("ideal pulse products reproduce every target") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> th(0, kPi), ph(-kPi, kPi), ga(-kTwoPi + 1e-6, kTwoPi);
  for (int trial = 0; trial < 200; ++trial) {
    const double theta = th(rng), phi = ph(rng), gamma = ga(rng);
    const ComplexMatrix target = rotation(theta, phi, gamma);
    for (Scheme s : {Scheme::SpNgqc, Scheme::Ngqc, Scheme::Dynamical}) {
      const PulseSchedule p = compile({theta, phi, gamma, s});
      INFO(to_string(s) << " theta=" << theta << " phi=" << phi << " gamma=" << gamma);
      REQUIRE(unitary_fidelity(ideal_schedule_unitary(p), target) > 1 - 1e-12);
    }
    CompileOptions v;
    v.virtual_detuning = true;
    REQUIRE(unitary_fidelity(ideal_schedule_unitary(sp_ngqc_schedule({theta, phi, gamma}, v)), target) > 1 - 1e-12);
  }
}

TEST_CASE("NGQC loop parameter convention") {
  const double g = 0.7;
  const ComplexMatrix expected = (kI * g * pauli_z()).exp();
  const PulseSchedule p = ngqc_loop_schedule(0.0, 0.0, g);
  REQUIRE((ideal_schedule_unitary(p) - expected).norm() < 1e-12);
}

TEST_CASE("dynamical schedules") {
  const PulseSchedule x = dynamical_schedule({kPi / 2, 0, kPi});
  REQUIRE(x.segments.size() == 1);
  REQUIRE_THAT(x.segments[0].area(), WithinAbs(kPi, 1e-12));
  const PulseSchedule h = dynamical_schedule({kPi / 4, 0, kPi});
  REQUIRE(h.segments.size() == 2);
  REQUIRE_THAT(h.segments[0].area(), WithinAbs(kPi / 2, 1e-12));
  REQUIRE_THAT(h.segments[0].drive_phase, WithinAbs(kPi / 2, 1e-12));
  REQUIRE_THAT(h.segments[1].area(), WithinAbs(kPi, 1e-12));
  REQUIRE_THAT(h.segments[1].drive_phase, WithinAbs(0.0, 1e-12));
}

TEST_CASE("virtual Z decomposition") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int trial = 0; trial < 100; ++trial) {
    const ComplexMatrix target = rz(u(rng)) * rotation(kPi / 2, kPi / 2, std::abs(u(rng))) * rz(u(rng));
    const VirtualZDecomposition d = compose_with_virtual_z(target);
    REQUIRE(d.physical.gamma >= 0.0);
    REQUIRE(d.physical.gamma <= kPi + 1e-12);
    const ComplexMatrix rec = rz(d.z_post) * target_unitary(d.physical) * rz(d.z_pre);
    REQUIRE(unitary_fidelity(rec, target) > 1 - 1e-12);
  }
  const VirtualZDecomposition z = compose_with_virtual_z(rz(0.4));
  REQUIRE_FALSE(z.has_physical);
  REQUIRE_THAT(z.z_pre + z.z_post, WithinAbs(0.4, 1e-12));
}

TEST_CASE("virtual frames are additive") {
  VirtualFrame f;
  f.rotate(0.3);
  f.rotate(0.5);
  REQUIRE_THAT(f.angle(), WithinAbs(0.8, 1e-15));
  REQUIRE((rz(0.3) * rz(0.5) - rz(0.8)).norm() < 1e-15);
  REQUIRE_THAT(f.apply(1.0), WithinAbs(0.2, 1e-15));
}

TEST_CASE("envelopes") {
  PulseSegment s;
  s.envelope = Envelope::Cosine;
  s.peak_rabi = 0.1;
  s.duration = 20;
  REQUIRE_THAT(sample_envelope(s, 0.0).in_phase, WithinAbs(0.0, 1e-15));
  REQUIRE_THAT(sample_envelope(s, 10.0).in_phase, WithinAbs(0.1, 1e-15));
  REQUIRE_THROWS_AS(sample_envelope(s, 25.0), std::out_of_range);
  // numerical areas
  for (Envelope e : {Envelope::Constant, Envelope::Cosine, Envelope::FlatTopErf}) {
    s.envelope = e;
    s.duration = 60;
    double sum = 0;
    const int n = 60000;
    for (int k = 0; k < n; ++k) sum += sample_envelope(s, (k + 0.5) * s.duration / n).in_phase;
    REQUIRE_THAT(sum * s.duration / n, WithinAbs(s.area(), 1e-8));
  }
  s.drag = 1.0;
  const EnvelopeSample e = sample_envelope(s, 5.0, -1.5);
  REQUIRE(e.derivative > 0.0);
  REQUIRE_THAT(e.quadrature, WithinAbs(e.derivative / 1.5, 1e-15));
}

TEST_CASE("waveform export") {
  const PulseSchedule p = sp_ngqc_schedule({kPi / 4, 0, kPi});
  REQUIRE_THAT(p.total_duration(), WithinAbs(120.0, 1e-12));
  const auto w = sample_waveform(p, 1.0);
  REQUIRE(w.size() == 121);
  std::ostringstream os;
  write_waveform_csv(os, w);
  REQUIRE(os.str().rfind("time_ns,drive_I,drive_Q,detuning_MHz,phase_rad\n", 0) == 0);
}
