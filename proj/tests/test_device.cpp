#include <catch_amalgamated.hpp>

#include <geomgate/device.hpp>

using namespace geomgate;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("device defaults mirror the measured parameters") {
  const DeviceModel d = default_device();
  REQUIRE_NOTHROW(d.validate());
  REQUIRE_THAT(d.qubit_a.freq / kTwoPi, WithinAbs(5.5114, 1e-12));
  REQUIRE_THAT(d.qubit_b.freq / kTwoPi, WithinAbs(5.0010, 1e-12));
  REQUIRE_THAT(to_mhz(d.qubit_a.anharmonicity), WithinAbs(-242.6, 1e-9));
  REQUIRE_THAT(to_mhz(d.coupling), WithinAbs(9.5, 1e-12));
  REQUIRE(d.qubit_a.t1_cz == 10.6);
  REQUIRE(d.qubit_a.t2star_cz == 5.9);
}

TEST_CASE("pure dephasing time") {
  REQUIRE_THAT(tphi_from_t1_t2star(10.6, 5.9), WithinAbs(8.175, 1e-3));
  REQUIRE_THAT(tphi_from_t1_t2star(22.3, 27.8), WithinAbs(73.80, 1e-2));
  REQUIRE(std::isinf(tphi_from_t1_t2star(10.0, 20.0)));
  REQUIRE_THROWS_AS(tphi_from_t1_t2star(10.0, 25.0), ConfigError);
}

TEST_CASE("invalid devices are rejected") {
  DeviceModel d;
  d.qubit_a.t2star = 30.0;
  REQUIRE_THROWS_AS(d.validate(), ConfigError);
  d = DeviceModel{};
  d.qubit_b.anharmonicity = mhz(10);
  REQUIRE_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("crosstalk compensation") {
  const DeviceModel d;
  const Eigen::Vector2d req(0.0, 1.0);
  const Eigen::Vector2d applied = crosstalk_compensate(d.dc_crosstalk, req);
  REQUIRE((d.dc_crosstalk * applied - req).norm() < 1e-12);
  REQUIRE(std::abs(applied(0)) > 0.0);
  REQUIRE((crosstalk_compensate(Eigen::Matrix2d::Identity(), req) - req).norm() == 0.0);
  Eigen::Matrix2d sing;
  sing << 1, 1, 1, 1;
  REQUIRE_THROWS_AS(crosstalk_compensate(sing, req), ConfigError);
}

TEST_CASE("qubit readout confusion") {
  const ConfusionMatrix f = qubit_confusion(0.97, 0.91);
  RealVector p(2);
  p << 1.0, 0.0;
  const RealVector m = f.apply(p);
  REQUIRE_THAT(m(0), WithinAbs(0.97, 1e-15));
  REQUIRE_THAT(m(1), WithinAbs(0.03, 1e-15));
  RealVector q(2);
  q << 0.3, 0.7;
  REQUIRE((f.correct(f.apply(q)) - q).norm() < 1e-12);
  RealVector bad(2);
  bad << 0.5, 0.6;
  REQUIRE_THROWS_AS(f.correct(bad), ConfigError);
  REQUIRE_THROWS_AS(qubit_confusion(0.5, 0.5).correct(q), ConfigError);
}

TEST_CASE("two-qubit confusion is a tensor product with unit column sums") {
  const DeviceModel d;
  const ConfusionMatrix f = qubit_confusion(d.qubit_a).tensor(qubit_confusion(d.qubit_b));
  REQUIRE(f.dim() == 4);
  for (int j = 0; j < 4; ++j) REQUIRE_THAT(f.matrix().col(j).sum(), WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(f.matrix()(0, 0), WithinAbs(0.97 * 0.96, 1e-15));
}

TEST_CASE("leakage confusion matrix") {
  const RealMatrix& raw = leakage_confusion_raw();
  REQUIRE(raw(0, 0) == 0.912);
  REQUIRE(raw(5, 5) == 0.769);
  REQUIRE(raw(4, 5) == 0.145);
  for (int j = 0; j < 6; ++j) REQUIRE_THAT(raw.col(j).sum(), WithinAbs(1.0, 2.5e-3));
  const ConfusionMatrix f = leakage_confusion();
  for (int j = 0; j < 6; ++j) REQUIRE_THAT(f.matrix().col(j).sum(), WithinAbs(1.0, 1e-12));
  RealVector p = RealVector::Zero(6);
  p(3) = 0.9;
  p(4) = 0.1;
  REQUIRE((f.correct(f.apply(p)) - p).norm() < 1e-12);
}

TEST_CASE("device JSON round trip") {
  DeviceModel d;
  d.noise.rabi_error = 0.1;
  const auto j = device_to_json(d);
  const DeviceModel e = device_from_json(j);
  REQUIRE_THAT(e.qubit_a.freq, WithinRel(d.qubit_a.freq, 1e-14));
  REQUIRE_THAT(e.coupling, WithinRel(d.coupling, 1e-14));
  REQUIRE(e.noise.rabi_error == 0.1);
  REQUIRE((e.dc_crosstalk - d.dc_crosstalk).norm() == 0.0);
  nlohmann::json partial = {{"qubit_a", {{"t1_us", 20.0}}}};
  REQUIRE(device_from_json(partial).qubit_a.t1 == 20.0);
  nlohmann::json bad = {{"qubit_a", {{"t1_us", "x"}}}};
  REQUIRE_THROWS_AS(device_from_json(bad), ConfigError);
}
