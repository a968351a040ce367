#include <catch_amalgamated.hpp>

#include <geomgate/tomo.hpp>
#include <geomgate/twoqubit.hpp>

#include <random>
#include <sstream>

using namespace geomgate;
using Catch::Matchers::WithinAbs;

namespace {

ComplexMatrix random_unitary(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ComplexMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<ComplexMatrix> qr(a);
  return qr.householderQ();
}

ComplexMatrix random_state(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ComplexMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = cplx(g(rng), g(rng));
  const ComplexMatrix r = a * a.adjoint();
  return r / r.trace();
}

// K_k = sqrt(p_k) U_k, a valid Kraus set
std::vector<ComplexMatrix> random_kraus(int d, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(count);
  double s = 0;
  for (auto& x : w) s += (x = u(rng));
  std::vector<ComplexMatrix> ks;
  for (int k = 0; k < count; ++k) ks.push_back(std::sqrt(w[k] / s) * random_unitary(d, rng));
  return ks;
}

ComplexMatrix apply_kraus(const std::vector<ComplexMatrix>& ks, const ComplexMatrix& rho) {
  ComplexMatrix out = ComplexMatrix::Zero(rho.rows(), rho.cols());
  for (const auto& k : ks) out += k * rho * k.adjoint();
  return out;
}

ComplexMatrix cz() { return cz_matrix(); }

}  // namespace

TEST_CASE("Pauli basis ordering") {
  const auto b = pauli_basis(2);
  REQUIRE(b.size() == 16);
  REQUIRE((b[pauli_index("XZ")] - kron(pauli_x(), pauli_z())).norm() == 0.0);
  REQUIRE(pauli_label(7, 2) == "XZ");
  REQUIRE(pauli_label(15, 2) == "ZZ");
}

TEST_CASE("exact state tomography") {
  const ComplexMatrix rho0 = projector(basis_ket(2, 0));
  REQUIRE((qst(rho0, 1) - rho0).norm() < 1e-12);
  ComplexVector plus(2);
  plus << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  const ComplexMatrix r = qst(projector(plus), 1);
  REQUIRE_THAT((r * pauli_x()).trace().real(), WithinAbs(1.0, 1e-12));
  std::mt19937_64 rng(8);
  for (int n : {1, 2}) {
    const ComplexMatrix s = random_state(1 << n, rng);
    REQUIRE((qst(s, n) - s).norm() < 1e-12);
  }
}

TEST_CASE("finite-shot tomography concentrates") {
  const ComplexMatrix rho0 = projector(basis_ket(2, 0));
  int good = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    MeasurementOptions o;
    o.shots = 10000;
    o.seed = static_cast<std::uint64_t>(s);
    if (trace_distance(qst(rho0, 1, o), rho0) < 0.03) ++good;
  }
  REQUIRE(good >= static_cast<int>(0.99 * seeds));
}

TEST_CASE("readout correction removes the confusion bias") {
  const DeviceModel d;
  MeasurementOptions o;
  o.shots = 2000000;
  o.readout = qubit_confusion(d.qubit_a);
  const ComplexMatrix rho1 = projector(basis_ket(2, 1));
  REQUIRE(trace_distance(qst(rho1, 1, o), rho1) < 0.01);
  o.project = true;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(qst(rho1, 1, o));
  REQUIRE(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("process tomography of standard channels") {
  const ProcessMatrix id = qpt([](const ComplexMatrix& r) { return r; }, 1);
  REQUIRE_THAT(id.chi(0, 0).real(), WithinAbs(1.0, 1e-12));
  REQUIRE((id.chi.cwiseAbs().sum() - 1.0) < 1e-12);
  const ProcessMatrix c = qpt([](const ComplexMatrix& r) { return ComplexMatrix(cz() * r * cz()); }, 2);
  REQUIRE_THAT(process_fidelity(c, chi_from_unitary(cz())), WithinAbs(1.0, 1e-10));
  REQUIRE_NOTHROW(c.validate());
}

TEST_CASE("QPT round trip on random Kraus channels") {
  std::mt19937_64 rng(21);
  for (int n : {1, 2}) {
    const int d = 1 << n;
    for (int trial = 0; trial < 3; ++trial) {
      const auto ks = random_kraus(d, 3, rng);
      const ProcessMatrix p = qpt([&](const ComplexMatrix& r) { return apply_kraus(ks, r); }, n);
      REQUIRE_NOTHROW(p.validate());
      REQUIRE((p.chi - chi_from_kraus(ks).chi).cwiseAbs().maxCoeff() < 1e-10);
      for (int k = 0; k < 20; ++k) {
        const ComplexMatrix s = random_state(d, rng);
        REQUIRE(trace_distance(apply_chi(p, s), apply_kraus(ks, s)) < 1e-8);
      }
    }
  }
}

TEST_CASE("process fidelity of a unitary channel is the squared trace fidelity") {
  std::mt19937_64 rng(3);
  for (int n : {1, 2}) {
    const ComplexMatrix u = random_unitary(1 << n, rng), v = random_unitary(1 << n, rng);
    const double f = unitary_fidelity(u, v);
    REQUIRE_THAT(process_fidelity(chi_from_unitary(u), chi_from_unitary(v)), WithinAbs(f * f, 1e-9));
  }
}

TEST_CASE("MLE projection") {
  std::mt19937_64 rng(5);
  const ProcessMatrix valid = chi_from_kraus(random_kraus(4, 2, rng));
  REQUIRE((mle_project(valid).chi - valid.chi).cwiseAbs().maxCoeff() < 1e-10);
  ProcessMatrix mixed{1, ComplexMatrix::Identity(4, 4) / 4.0};
  REQUIRE((mle_project(mixed).chi - mixed.chi).cwiseAbs().maxCoeff() < 1e-12);
  // push one eigenvalue to -1e-3
  const ProcessMatrix base = chi_from_kraus(random_kraus(2, 2, rng));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(base.chi);
  RealVector w = es.eigenvalues();
  w(0) = -1e-3;
  w(3) += 1e-3;
  ProcessMatrix bad{1, es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint()};
  const ProcessMatrix fixed = mle_project(bad);
  REQUIRE(fixed.min_eigenvalue() > -1e-9);
  REQUIRE(fixed.tp_error() < 1e-6);
  REQUIRE_NOTHROW(fixed.validate());
  REQUIRE(process_fidelity(fixed, bad) >= process_fidelity(bad, bad) - 1e-2);
  // random Hermitian noise on a 2-qubit chi
  ComplexMatrix noise = ComplexMatrix::Random(16, 16) * 0.01;
  ProcessMatrix noisy{2, chi_from_unitary(cz()).chi + 0.5 * (noise + noise.adjoint())};
  const ProcessMatrix out = mle_project(noisy);
  REQUIRE(out.min_eigenvalue() > -1e-9);
  REQUIRE(out.tp_error() < 1e-6);
}

TEST_CASE("error matrix of an ideal gate") {
  const DeviceModel d;
  const ErrorAnalysis a = analyze_errors(chi_from_unitary(cz()), cz(), 189.375, d);
  REQUIRE_THAT(a.chi_err.chi(0, 0).real(), WithinAbs(1.0, 1e-12));
  REQUIRE(a.chi_err.chi.cwiseAbs().sum() - 1.0 < 1e-12);
  REQUIRE_THAT(a.budget.process_fidelity, WithinAbs(1.0, 1e-9));
  REQUIRE_THAT(a.budget.zz_error, WithinAbs(0.0, 1e-9));
  REQUIRE_THAT(a.budget.spam_error, WithinAbs(0.0, 1e-9));
}

TEST_CASE("decoherence budget at the CZ working point") {
  const DeviceModel d;
  const double tpa = tphi_from_t1_t2star(10.6, 5.9), tpb = tphi_from_t1_t2star(22.3, 27.8);
  const double expected = 0.189375 * (0.5 / 10.6 + 0.5 / 22.3 + 0.5 / tpa + 0.5 / tpb);
  REQUIRE_THAT(decoherence_error(189.375, d), WithinAbs(expected, 1e-12));
  REQUIRE_THAT(decoherence_error(189.375, d), WithinAbs(0.026, 1e-3));
}

TEST_CASE("ZZ error of an injected ZZ rotation") {
  const DeviceModel d;
  const ComplexMatrix zz = kron(pauli_z(), pauli_z());
  for (double phi : {0.0, 0.05, 0.2, 0.7, 1.5}) {
    const ComplexMatrix v = expm_hermitian(0.5 * zz, phi) * cz();
    const ErrorAnalysis a = analyze_errors(chi_from_unitary(v), cz(), 0.0, d);
    REQUIRE_THAT(a.budget.zz_error, WithinAbs(std::pow(std::sin(phi / 2), 2), 1e-12));
    REQUIRE_THAT(a.budget.process_fidelity, WithinAbs(std::pow(std::cos(phi / 2), 2), 1e-12));
  }
}

TEST_CASE("SPAM error from an identity QPT") {
  const DeviceModel d;
  const ComplexMatrix x = expm_hermitian(0.5 * pauli_x(), 0.1);
  const ProcessMatrix idq = qpt([&](const ComplexMatrix& r) { return ComplexMatrix(x * r * x.adjoint()); }, 1);
  REQUIRE_THAT(spam_error(idq), WithinAbs(std::pow(std::sin(0.05), 2), 1e-12));
}

TEST_CASE("bootstrap statistics") {
  const BootstrapResult same = bootstrap_fidelity({0.97, 0.97, 0.97, 0.97});
  REQUIRE(same.std < 1e-12);
  REQUIRE_THAT(same.mean, WithinAbs(0.97, 1e-15));
  const BootstrapResult b = bootstrap_fidelity({0.99, 0.99, 0.99, 0.995}, 20000, 7);
  REQUIRE_THAT(b.mean, WithinAbs(0.99125, 1e-12));
  REQUIRE(b.std > 0.0);
  // sample std / sqrt(n) * sqrt((n-1)/n) for resampled means
  const double pop = std::sqrt((3 * std::pow(0.00125, 2) + std::pow(0.00375, 2)) / 4.0);
  REQUIRE_THAT(b.std, WithinAbs(pop / 2.0, 1e-4));
  REQUIRE_THROWS(bootstrap_fidelity({0.9}));
}

TEST_CASE("noisy CZ process fidelity near the measured value") {
  const DeviceModel d = default_device();
  const CZSchedule s = calibrate_cz(d).schedule;
  const CZChannel ch = cz_lindblad_channel(s, d);
  const ProcessMatrix p = qpt([&](const ComplexMatrix& r) { return unvec(ch.computational * vec(r), 4); }, 2);
  const double f = process_fidelity(p, chi_from_unitary(cz()));
  INFO("F_p = " << f);
  REQUIRE(std::abs(f - 0.942) < 0.03);
  const ProcessMatrix m = mle_project(p);
  REQUIRE(m.tp_error() < 1e-6);
}

TEST_CASE("chi export") {
  std::ostringstream a, b;
  const ProcessMatrix p = chi_from_unitary(cz());
  write_chi_csv(a, p);
  write_chi_bars_csv(b, p);
  REQUIRE(a.str().rfind("row,col,re,im\n", 0) == 0);
  REQUIRE(b.str().find("ZZ,ZZ,") != std::string::npos);
  REQUIRE(budget_to_json(ErrorBudget{}).contains("zz_error"));
}
