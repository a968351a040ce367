#include <catch_amalgamated.hpp>

#include <geomgate/evolve.hpp>

#include <random>

using namespace geomgate;
using Catch::Matchers::WithinAbs;

namespace {

ComplexVector axis_state(double theta, double phi, bool plus) {
  ComplexVector v(2);
  if (plus) {
    v << std::cos(theta / 2), std::exp(kI * phi) * std::sin(theta / 2);
  } else {
    v << std::sin(theta / 2), -std::exp(kI * phi) * std::cos(theta / 2);
  }
  return v;
}

}  // namespace

TEST_CASE("noiseless propagation reproduces targets") {
  for (Scheme s : {Scheme::SpNgqc, Scheme::Ngqc, Scheme::Dynamical})
    for (double theta : {0.0, 0.4, kPi / 4, kPi / 2, 2.5})
      for (double gamma : {-1.0, kPi / 2, kPi, 5.0}) {
        const GateSpec g{theta, 0.3, gamma, s};
        const ComplexMatrix u = propagate_unitary(compile(g));
        INFO(to_string(s) << " " << theta << " " << gamma);
        REQUIRE(1.0 - unitary_fidelity(u, target_unitary(g)) < 1e-10);
        REQUIRE(is_unitary(u, 1e-10));
      }
}

TEST_CASE("SP-NGQC eigenstates pick up -+gamma/2 with no dynamical phase") {
  for (double theta : {0.0, 0.3, kPi / 4, 1.2, kPi / 2})
    for (double gamma : {0.5, kPi / 2, kPi, 3.0}) {
      const GateSpec g{theta, 0.7, gamma};
      const PulseSchedule p = sp_ngqc_schedule(g);
      const ComplexMatrix u = propagate_unitary(p);
      for (bool plus : {true, false}) {
        const ComplexVector psi = axis_state(theta, 0.7, plus);
        const cplx amp = (psi.adjoint() * u * psi)(0, 0);
        REQUIRE_THAT(std::abs(amp), WithinAbs(1.0, 1e-10));
        const double expected = plus ? -gamma / 2 : gamma / 2;
        REQUIRE_THAT(wrap_phase(std::arg(amp) - expected), WithinAbs(0.0, 1e-9));
        for (double d : dynamical_phases(p, psi)) REQUIRE(std::abs(d) < 1e-9);
      }
    }
}

TEST_CASE("Rabi error closed forms at constant envelope") {
  CompileOptions c;
  c.envelope = Envelope::Constant;
  NoiseModel n;
  n.rabi_error = 0.2;
  const GateSpec h{kPi / 4, 0, kPi};
  const double fsp = unitary_fidelity(propagate_unitary(sp_ngqc_schedule(h, c), n), target_unitary(h));
  REQUIRE_THAT(fsp, WithinAbs(0.98769, 1e-5));
  const double fdyn = unitary_fidelity(propagate_unitary(dynamical_schedule(h, c), n), target_unitary(h));
  REQUIRE_THAT(fdyn, WithinAbs(0.93935, 1e-5));
}

TEST_CASE("three-level propagation stays in the qubit block without anharmonic leakage") {
  PropagationOptions o;
  o.levels = 3;
  const GateSpec x{kPi / 2, 0, kPi};
  CompileOptions c;
  c.drag = 0.0;
  const ComplexMatrix u0 = propagate_unitary(sp_ngqc_schedule(x, c), {}, o);
  c.drag = 1.0;
  const ComplexMatrix u1 = propagate_unitary(sp_ngqc_schedule(x, c), {}, o);
  REQUIRE(is_unitary(u0, 1e-9));
  REQUIRE(leakage(u1) < leakage(u0));
  REQUIRE(leakage(u1) < 1e-4);
  REQUIRE(unitary_fidelity(qubit_block(u1), target_unitary(x)) > 0.999);
}

TEST_CASE("Lindblad evolution without dissipation matches unitary evolution") {
  const PulseSchedule p = sp_ngqc_schedule({0.6, 0.2, 1.3});
  const ComplexMatrix rho0 = projector(axis_state(1.0, 0.4, true));
  const ComplexMatrix u = propagate_unitary(p);
  const EvolutionResult r = propagate_lindblad(p, {}, {}, rho0);
  REQUIRE((r.final_state - u * rho0 * u.adjoint()).norm() < 1e-9);
  const ComplexMatrix s = channel_superop(p, {}, {});
  REQUIRE_THAT(process_fidelity(s, u), WithinAbs(1.0, 1e-9));
}

TEST_CASE("amplitude damping and dephasing rates") {
  PulseSchedule idle;
  PulseSegment s;
  s.peak_rabi = 0;
  s.duration = 2000.0;
  s.envelope = Envelope::Constant;
  idle.segments.push_back(s);
  PropagationOptions o;
  o.dt = 1.0;
  const LindbladModel l = transmon_decoherence(2, 10.0, 8.0);
  const EvolutionResult r1 = propagate_lindblad(idle, {}, l, projector(basis_ket(2, 1)), o);
  REQUIRE_THAT(r1.final_state(1, 1).real(), WithinAbs(std::exp(-2000.0 / 10000.0), 1e-9));
  const EvolutionResult r2 = propagate_lindblad(idle, {}, l, projector(axis_state(kPi / 2, 0, true)), o);
  REQUIRE_THAT(2 * std::abs(r2.final_state(0, 1)), WithinAbs(std::exp(-2000.0 / 8000.0), 1e-9));
  REQUIRE_THAT(r2.final_state.trace().real(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("Lindblad trajectories preserve trace and positivity and converge in dt") {
  const PulseSchedule p = ngqc_schedule({kPi / 3, 0, kPi / 2});
  const LindbladModel l = transmon_decoherence(3, 11.5, 7.5);
  PropagationOptions o;
  o.levels = 3;
  const ComplexMatrix rho0 = projector(basis_ket(3, 0));
  const EvolutionResult r = propagate_lindblad(p, {}, l, rho0, o, 10);
  for (const auto& rho : r.states) {
    REQUIRE_THAT(rho.trace().real(), WithinAbs(1.0, 1e-12));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho);
    REQUIRE(es.eigenvalues().minCoeff() > -1e-10);
  }
  PropagationOptions half = o;
  half.dt = o.dt / 2;
  const EvolutionResult r2 = propagate_lindblad(p, {}, l, rho0, half);
  REQUIRE((r.final_state - r2.final_state).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("invalid initial states are rejected") {
  const PulseSchedule p = sp_ngqc_schedule({0.1, 0, 0.1});
  REQUIRE_THROWS_AS(propagate_lindblad(p, {}, {}, ComplexMatrix::Identity(2, 2)), InvalidStateError);
  REQUIRE_THROWS_AS(propagate_lindblad(p, {}, {}, projector(basis_ket(3, 0))), DimensionError);
}

TEST_CASE("Bloch trajectory of a pi pulse runs pole to pole") {
  const PulseSchedule p = dynamical_schedule({kPi / 2, 0, kPi});
  const EvolutionResult r = propagate_state(p, {}, basis_ket(2, 0), {}, 50);
  const auto b = bloch_trajectory(r);
  REQUIRE_THAT(b.front()[2], WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(b.back()[2], WithinAbs(-1.0, 1e-9));
  for (const auto& v : b) REQUIRE_THAT(v[0] * v[0] + v[1] * v[1] + v[2] * v[2], WithinAbs(1.0, 1e-9));
}
