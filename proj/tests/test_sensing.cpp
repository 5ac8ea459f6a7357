#include <doctest.h>

#include "caed/error.hpp"
#include "caed/sensing.hpp"
#include "support.hpp"

using namespace caed;
using caed::test::dot;
using caed::test::random_ca;
using caed::test::random_vector;

namespace {

Measurement stacked(std::vector<double> v, std::size_t shots) {
  const std::size_t per = v.size() / shots;
  return Measurement{std::move(v), shots, per};
}

}  // namespace

TEST_SUITE("sensing") {

TEST_CASE("spc forward is an inner product per shot") {
  CodedApertureSet ca(CaShape{1, 2, 2, 1}, std::vector<double>{0.5, 1, 0, 1});
  const std::vector<double> f{1, 2, 3, 4};
  const auto g = spc_forward(ca, f);
  REQUIRE(g.stacked.size() == 1);
  CHECK(g.stacked[0] == doctest::Approx(6.5));
  CHECK(spc_forward(CodedApertureSet(CaShape{3, 2, 2, 1}, 0.0), f).stacked == std::vector<double>(3, 0.0));
}

TEST_CASE("one-hot spc shots permute the scene") {
  CodedApertureSet ca(CaShape{4, 2, 2, 1}, 0.0);
  const std::size_t perm[] = {2, 0, 3, 1};
  for (std::size_t s = 0; s < 4; ++s) ca.data()[s * 4 + perm[s]] = 1.0;
  const std::vector<double> f{1, 2, 3, 4};
  const auto g = spc_forward(ca, f);
  for (std::size_t s = 0; s < 4; ++s) CHECK(g.stacked[s] == f[perm[s]]);
}

TEST_CASE("spc adjoint examples") {
  CodedApertureSet ca(CaShape{1, 1, 2, 1}, std::vector<double>{1, 0});
  CHECK(spc_adjoint(ca, stacked({2}, 1)) == std::vector<double>{2, 0});
  CHECK(spc_adjoint(ca, stacked({0}, 1)) == std::vector<double>{0, 0});
}

TEST_CASE("cassi forward shears each band by one column") {
  CodedApertureSet ca(CaShape{1, 1, 2, 1}, std::vector<double>{1, 0});
  const std::vector<double> f{1, 3, 2, 4};
  const auto y = cassi_forward(ca, f, 2);
  CHECK(y.per_shot == 3);
  CHECK(y.stacked == std::vector<double>{1, 3, 0});
  CHECK(cassi_forward(CodedApertureSet(CaShape{1, 1, 2, 1}, 0.0), f, 2).stacked == std::vector<double>(3, 0.0));
}

TEST_CASE("single-band cassi is the elementwise product") {
  Rng rng(2);
  const auto ca = random_ca(CaShape{1, 3, 4, 1}, rng);
  const auto f = random_vector(12, rng);
  const auto y = cassi_forward(ca, f, 1);
  REQUIRE(y.per_shot == 12);
  for (std::size_t k = 0; k < 12; ++k) CHECK(y.stacked[k] == doctest::Approx(ca.data()[k] * f[k]));
}

TEST_CASE("cassi adjoint examples") {
  CodedApertureSet ca(CaShape{1, 1, 2, 1}, std::vector<double>{1, 0});
  CHECK(cassi_adjoint(ca, stacked({1, 0, 0}, 1), 2) == std::vector<double>{1, 0, 0, 0});
  CHECK(cassi_adjoint(ca, stacked({0, 0, 0}, 1), 2) == std::vector<double>(4, 0.0));
}

TEST_CASE("gradient with respect to the aperture") {
  CodedApertureSet ca(CaShape{1, 2, 2, 1}, 0.3);
  const auto spc = SensingModel::spc(1, 2, 2);
  const std::vector<double> f{1, 2, 3, 4};
  CHECK(forward_grad_wrt_ca(spc, ca.shape(), f, std::vector<double>{1}) == f);
  CHECK(forward_grad_wrt_ca(spc, ca.shape(), f, std::vector<double>{0}) == std::vector<double>(4, 0.0));

  const auto cassi = SensingModel::cassi(1, 1, 2, 2);
  const std::vector<double> cube{1, 3, 2, 4};
  const auto g = forward_grad_wrt_ca(cassi, CaShape{1, 1, 2, 1}, cube, std::vector<double>{1, 1, 1});
  CHECK(g == std::vector<double>{4, 6});
}

TEST_CASE("adjointness on random pairs") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const auto spc = SensingModel::spc(5, 3, 4);
    const auto ca = random_ca(CaShape{5, 3, 4, 1}, rng, -1, 1);
    const auto f = random_vector(12, rng);
    const auto g = stacked(random_vector(5, rng), 5);
    const auto hf = forward(spc, ca, f);
    const double err = std::abs(dot(hf.stacked, g.stacked) - dot(f, adjoint(spc, ca, g)));
    CHECK(err <= 1e-10 * caed::test::norm(hf.stacked) * caed::test::norm(g.stacked));

    const std::size_t planes = trial % 2 == 0 ? 1 : 4;
    const auto cassi = SensingModel::cassi(2, 3, 5, 4);
    const auto cca = random_ca(CaShape{2, 3, 5, planes}, rng, -1, 1);
    const auto cube = random_vector(60, rng);
    const auto y = stacked(random_vector(cassi.measurement_size(), rng), 2);
    const auto hc = forward(cassi, cca, cube);
    const double cerr = std::abs(dot(hc.stacked, y.stacked) - dot(cube, adjoint(cassi, cca, y)));
    CHECK(cerr <= 1e-10 * caed::test::norm(hc.stacked) * caed::test::norm(y.stacked));
  }
}

TEST_CASE("aperture gradients match central differences") {
  Rng rng(43);
  struct Case {
    SensingModel model;
    CaShape shape;
  };
  const std::vector<Case> cases{{SensingModel::spc(3, 2, 3), CaShape{3, 2, 3, 1}},
                                {SensingModel::cassi(2, 2, 3, 3), CaShape{2, 2, 3, 1}},
                                {SensingModel::cassi(2, 2, 3, 3), CaShape{2, 2, 3, 3}}};
  for (const auto& c : cases) {
    const auto ca = random_ca(c.shape, rng, -1, 1);
    const auto f = random_vector(c.model.scene_size(), rng);
    const auto up = random_vector(c.model.measurement_size(), rng);
    auto probe = ca;
    const auto fwd = [&](const std::vector<double>& x) {
      probe.data() = x;
      return dot(up, forward(c.model, probe, f).stacked);
    };
    CHECK(caed::test::relative_error(forward_grad_wrt_ca(c.model, c.shape, f, up),
                                     caed::test::numeric_gradient(fwd, ca.data())) < 1e-8);

    const auto g = stacked(random_vector(c.model.measurement_size(), rng), c.model.shots());
    const auto up_scene = random_vector(c.model.scene_size(), rng);
    const auto adj = [&](const std::vector<double>& x) {
      probe.data() = x;
      return dot(up_scene, adjoint(c.model, probe, g));
    };
    CHECK(caed::test::relative_error(adjoint_grad_wrt_ca(c.model, c.shape, g.stacked, up_scene),
                                     caed::test::numeric_gradient(adj, ca.data())) < 1e-8);
  }
}

TEST_CASE("batched forward and gradient agree with the per-scene versions") {
  Rng rng(47);
  for (const auto& model : {SensingModel::spc(4, 3, 3), SensingModel::cassi(2, 3, 3, 2)}) {
    const auto ca = random_ca(CaShape{model.shots(), 3, 3, 1}, rng);
    const Eigen::MatrixXd scenes = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(model.scene_size()), 5);
    const Eigen::MatrixXd up = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(model.measurement_size()), 5);
    const auto batch = forward_batch(model, ca, scenes);
    std::vector<double> sum(ca.size(), 0.0);
    for (Eigen::Index b = 0; b < 5; ++b) {
      const Eigen::VectorXd f = scenes.col(b);
      const Eigen::VectorXd u = up.col(b);
      const auto single = forward(model, ca, {f.data(), static_cast<std::size_t>(f.size())});
      for (std::size_t k = 0; k < single.stacked.size(); ++k) {
        CHECK(batch(static_cast<Eigen::Index>(k), b) == doctest::Approx(single.stacked[k]).epsilon(1e-12));
      }
      const auto g = forward_grad_wrt_ca(model, ca.shape(), {f.data(), static_cast<std::size_t>(f.size())},
                                         {u.data(), static_cast<std::size_t>(u.size())});
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g[k];
    }
    const auto bg = forward_grad_wrt_ca_batch(model, ca.shape(), scenes, up);
    CHECK(caed::test::relative_error(bg, sum) < 1e-12);
  }
}

TEST_CASE("shape checks") {
  const auto spc = SensingModel::spc(2, 3, 3);
  CHECK_NOTHROW(spc.check_ca(CodedApertureSet(CaShape{2, 3, 3, 1})));
  CHECK_THROWS_AS(spc.check_ca(CodedApertureSet(CaShape{2, 3, 3, 2})), ShapeError);
  CHECK_THROWS_AS(spc.check_ca(CodedApertureSet(CaShape{3, 3, 3, 1})), ShapeError);
  const auto cassi = SensingModel::cassi(1, 3, 3, 4);
  CHECK_NOTHROW(cassi.check_ca(CodedApertureSet(CaShape{1, 3, 3, 1})));
  CHECK_NOTHROW(cassi.check_ca(CodedApertureSet(CaShape{1, 3, 3, 4})));
  CHECK_THROWS_AS(cassi.check_ca(CodedApertureSet(CaShape{1, 3, 3, 2})), ShapeError);
  CHECK_THROWS_AS(forward(spc, CodedApertureSet(CaShape{2, 3, 3, 1}), std::vector<double>(8)), ShapeError);
  CHECK_THROWS_AS(SensingModel::spc(0, 3, 3), ShapeError);
  CHECK(cassi.detector_cols() == 6);
  CHECK(cassi.measurement_size() == 18);
}

TEST_CASE("measurement noise") {
  Rng rng(1);
  const auto g = random_vector(100, rng);
  CHECK(add_measurement_noise(g, std::nullopt, rng) == g);

  const std::vector<double> unit(10000, 1.0);
  Rng a(5);
  const auto noisy = add_measurement_noise(unit, 20.0, a);
  double power = 0.0;
  for (std::size_t k = 0; k < unit.size(); ++k) power += (noisy[k] - 1.0) * (noisy[k] - 1.0);
  power /= static_cast<double>(unit.size());
  CHECK(power == doctest::Approx(0.01).epsilon(0.2));

  Rng b(5);
  CHECK(add_measurement_noise(unit, 20.0, b) == noisy);
  CHECK_THROWS_AS(add_measurement_noise(unit, INFINITY, b), DomainError);
}

TEST_CASE("compression ratio") {
  CHECK(compression_ratio(SensingModel::spc(392, 28, 28)) == doctest::Approx(0.5));
  CHECK(compression_ratio(SensingModel::spc(196, 28, 28)) == doctest::Approx(0.25));
  CHECK(compression_ratio(SensingModel::cassi(1, 482, 512, 31)) == doctest::Approx(0.0341).epsilon(0.003));
}

}  // TEST_SUITE
