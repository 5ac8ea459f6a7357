#include <doctest.h>

#include <cmath>

#include "caed/error.hpp"
#include "caed/regularizers.hpp"
#include "support.hpp"

using namespace caed;
using caed::test::random_ca;

namespace {

CodedApertureSet single(double v) { return CodedApertureSet(CaShape{1, 1, 1, 1}, v); }

using Evaluator = std::function<RegValue(const CodedApertureSet&)>;

double fd_error(const Evaluator& r, const CodedApertureSet& ca) {
  const auto analytic = r(ca).grad;
  CodedApertureSet probe = ca;
  const auto f = [&](const std::vector<double>& x) {
    probe.data() = x;
    return r(probe).value;
  };
  const auto numeric = caed::test::numeric_gradient(f, ca.data());
  return caed::test::relative_error(analytic, numeric);
}

}  // namespace

TEST_SUITE("regularizers") {

TEST_CASE("binary01 examples") {
  CHECK(r_binary01(single(0.0), 1.0, 1.0).value == 0.0);
  CHECK(r_binary01(single(0.0), 2.3, 1.7).value == 0.0);
  const auto half = r_binary01(single(0.5), 1.0, 1.0);
  CHECK(half.value == doctest::Approx(0.0625));
  CHECK(half.grad[0] == doctest::Approx(0.0));
  CHECK(r_binary01(single(0.25), 1.0, 1.0).grad[0] == doctest::Approx(0.1875));
}

TEST_CASE("binary_pm1 examples") {
  CHECK(r_binary_pm1(single(1.0), 1.0, 1.0).value == 0.0);
  CHECK(r_binary_pm1(single(-1.0), 1.0, 1.0).value == 0.0);
  CHECK(r_binary_pm1(single(0.0), 1.0, 1.0).value == doctest::Approx(1.0));
  CHECK(r_binary_pm1(single(0.5), 1.0, 1.0).value == doctest::Approx(0.5625));
}

TEST_CASE("multilevel examples") {
  const std::vector<double> levels{0, 0.5, 1};
  const std::vector<double> ones{1, 1, 1};
  CHECK(r_multilevel(single(0.5), levels, ones).value == 0.0);
  CHECK(r_multilevel(single(0.25), levels, ones).value == doctest::Approx(0.002197265625));
}

TEST_CASE("binary families are multilevel specializations bit for bit") {
  Rng rng(12);
  const std::vector<double> ones{1.0, 1.0};
  const std::vector<double> p{1.3, 1.0};
  const std::vector<double> zero_one{0.0, 1.0};
  const std::vector<double> pm{-1.0, 1.0};
  for (int trial = 0; trial < 20; ++trial) {
    const auto ca = random_ca(CaShape{3, 4, 4, 1}, rng, -1.5, 1.5);
    const auto a = r_binary01(ca, 1.0, 1.0);
    const auto b = r_multilevel(ca, zero_one, ones);
    CHECK(a.value == b.value);
    CHECK(a.grad == b.grad);
    const auto c = r_binary01(ca, 1.3, 1.0);
    const auto d = r_multilevel(ca, zero_one, p);
    CHECK(c.value == d.value);
    CHECK(c.grad == d.grad);
    const auto e = r_binary_pm1(ca, 1.3, 1.0);
    const auto g = r_multilevel(ca, pm, p);
    CHECK(e.value == g.value);
    CHECK(e.grad == g.grad);
  }
}

TEST_CASE("level regularizers reject bad arguments") {
  const auto ca = single(0.3);
  CHECK_THROWS_AS(r_binary01(ca, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(r_binary_pm1(ca, 1.0, -1.0), DomainError);
  CHECK_THROWS_AS(r_multilevel(ca, std::vector<double>{0.0}, std::vector<double>{1.0}), DomainError);
  CHECK_THROWS_AS(r_multilevel(ca, std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(r_multilevel(ca, std::vector<double>{0.0, 1.0}, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("level regularizers carry the 1/S factor") {
  Rng rng(3);
  const auto one = random_ca(CaShape{1, 3, 3, 1}, rng);
  CodedApertureSet twice(CaShape{2, 3, 3, 1});
  std::copy(one.data().begin(), one.data().end(), twice.data().begin());
  std::copy(one.data().begin(), one.data().end(), twice.data().begin() + 9);
  CHECK(r_binary01(twice, 1, 1).value == doctest::Approx(r_binary01(one, 1, 1).value));
}

TEST_CASE("transmittance examples") {
  CodedApertureSet eye(CaShape{1, 2, 2, 1}, std::vector<double>{1, 0, 0, 1});
  CHECK(r_transmittance(eye, 0.5).value == 0.0);
  CHECK(r_transmittance(eye, 0.25).value == doctest::Approx(0.0625));
  CHECK(r_transmittance(CodedApertureSet(CaShape{1, 2, 2, 1}, 0.0), 0.0).value == 0.0);
  CHECK_THROWS_AS(r_transmittance(eye, 1.5), DomainError);
}

TEST_CASE("snapshot group examples") {
  CHECK(r_snapshot_group(CodedApertureSet(CaShape{1, 2, 2, 1}, 0.5)).value == doctest::Approx(1.0));
  const auto zero = r_snapshot_group(CodedApertureSet(CaShape{1, 2, 2, 1}, 0.0));
  CHECK(zero.value == 0.0);
  CHECK(zero.grad == std::vector<double>(4, 0.0));
  CodedApertureSet two(CaShape{2, 1, 2, 1}, std::vector<double>{3, 0, 0, 4});
  CHECK(r_snapshot_group(two).value == doctest::Approx(7.0));
}

TEST_CASE("correlation examples") {
  CodedApertureSet disjoint(CaShape{2, 2, 2, 1}, 0.0);
  for (std::size_t k = 0; k < 4; ++k) disjoint.data()[k] = 1.0;
  CHECK(r_correlation(disjoint).value == 0.0);
  CHECK(r_correlation(CodedApertureSet(CaShape{2, 2, 2, 1}, 1.0)).value == doctest::Approx(1.0));
  CHECK(r_correlation(CodedApertureSet(CaShape{3, 1, 1, 1}, 0.5)).value == doctest::Approx(0.125));
  CHECK_THROWS_AS(r_correlation(CodedApertureSet(CaShape{1, 2, 2, 1}, 1.0)), DomainError);
}

TEST_CASE("conditionality examples") {
  // Two one-hot shots over a two-pixel scene: H^T H = I.
  const auto spc = SensingModel::spc(2, 1, 2);
  CodedApertureSet eye(CaShape{2, 1, 2, 1}, std::vector<double>{1, 0, 0, 1});
  Rng rng(4);
  Eigen::MatrixXd batch = Eigen::MatrixXd::Random(2, 5);
  CHECK(r_conditionality(eye, spc, batch).value == doctest::Approx(0.0));

  const auto row = SensingModel::spc(1, 1, 2);
  Eigen::MatrixXd e1(2, 1);
  e1 << 1, 0;
  CHECK(r_conditionality(CodedApertureSet(CaShape{1, 1, 2, 1}, 1.0), row, e1).value == doctest::Approx(1.0));

  const double mean_sq = batch.colwise().squaredNorm().sum() / 5.0;
  CHECK(r_conditionality(CodedApertureSet(CaShape{2, 1, 2, 1}, 0.0), spc, batch).value ==
        doctest::Approx(mean_sq));

  CHECK_THROWS_AS(r_conditionality(eye, spc, Eigen::MatrixXd(2, 0)), DomainError);
  CHECK_THROWS_AS(r_conditionality(eye, spc, Eigen::MatrixXd::Zero(3, 1)), ShapeError);
  CHECK_THROWS_AS(evaluate_term(Conditionality{}, eye, nullptr, nullptr), DomainError);
}

TEST_CASE("alpha from endpoints") {
  auto sched = RhoSchedule::dynamic(1e-11, 1e-5, 60, 10);
  CHECK(sched.update_count() == 6);
  CHECK(sched.alpha == 10.0);
  CHECK(alpha_from_endpoints(sched) == 10.0);
  const auto ten = RhoSchedule::dynamic(1e-15, 1e-5, 100, 10);
  CHECK(ten.alpha == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(rho_step(ten, 100) == doctest::Approx(1e-5).epsilon(1e-9));
}

TEST_CASE("degenerate or reversed endpoints need a static schedule") {
  CHECK_THROWS_AS(RhoSchedule::dynamic(1e-5, 1e-5, 100, 10), DomainError);
  CHECK_THROWS_AS(RhoSchedule::dynamic(1e-5, 1e-9, 100, 10), DomainError);
  CHECK_THROWS_AS(RhoSchedule::dynamic(1e-9, 1e-5, 100, 0), DomainError);
  CHECK_THROWS_AS(RhoSchedule::dynamic(1e-9, 1e-5, 100, 101), DomainError);
  CHECK_THROWS_AS(RhoSchedule::dynamic(0.0, 1e-5, 100, 10), DomainError);
  CHECK_THROWS_AS(RhoSchedule::constant(0.0), DomainError);
  CHECK_NOTHROW(RhoSchedule::constant(1e-5));
}

TEST_CASE("rho step examples") {
  const auto sched = RhoSchedule::dynamic(1e-9, 1e-5, 40, 10);
  REQUIRE(sched.alpha == doctest::Approx(10.0));
  CHECK(rho_step(sched, 0) == 1e-9);
  CHECK(rho_step(sched, 9) == 1e-9);
  CHECK(rho_step(sched, 25) == doctest::Approx(1e-7).epsilon(1e-12));
  const auto flat = RhoSchedule::constant(1e-5);
  for (std::size_t e : {0u, 7u, 1000u}) CHECK(rho_step(flat, e) == 1e-5);
}

TEST_CASE("schedule algebra holds at every epoch") {
  for (std::size_t T : {10u, 37u, 100u, 250u}) {
    for (std::size_t beta : {1u, 3u, 10u}) {
      if (beta > T) continue;
      const auto sched = RhoSchedule::dynamic(1e-9, 1e-5, T, beta);
      for (std::size_t e = 0; e < T; ++e) {
        const double lhs = std::log(rho_step(sched, e) / sched.rho0);
        const double rhs = static_cast<double>(e / beta) * std::log(sched.alpha);
        CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
      }
      CHECK(rho_step(sched, T) == doctest::Approx(1e-5).epsilon(1e-9));
    }
  }
}

TEST_CASE("aggregate is a weighted sum of terms") {
  Rng rng(6);
  const auto ca = random_ca(CaShape{2, 3, 3, 1}, rng);
  const auto empty = aggregate({}, ca, nullptr, nullptr, 0);
  CHECK(empty.value == 0.0);
  CHECK(empty.grad == std::vector<double>(ca.size(), 0.0));

  const std::vector<RegularizerSpec> one{{Binary01{}, RhoSchedule::constant(1.0)}};
  const auto r1 = r_binary01(ca, 1, 1);
  const auto a1 = aggregate(one, ca, nullptr, nullptr, 3);
  CHECK(a1.value == r1.value);
  CHECK(a1.grad == r1.grad);

  const std::vector<RegularizerSpec> two{{Binary01{}, RhoSchedule::constant(2.0)},
                                         {Transmittance{0.3}, RhoSchedule::constant(3.0)}};
  const auto r4 = r_transmittance(ca, 0.3);
  const auto a2 = aggregate(two, ca, nullptr, nullptr, 0);
  CHECK(a2.value == doctest::Approx(2.0 * r1.value + 3.0 * r4.value));
  for (std::size_t k = 0; k < ca.size(); ++k) CHECK(a2.grad[k] == doctest::Approx(2.0 * r1.grad[k] + 3.0 * r4.grad[k]));
}

TEST_CASE("aggregate uses each term's own schedule") {
  const auto ca = CodedApertureSet(CaShape{1, 2, 2, 1}, 0.5);
  const std::vector<RegularizerSpec> specs{{Binary01{}, RhoSchedule::dynamic(1e-9, 1e-5, 40, 10)},
                                           {SnapshotGroup{}, RhoSchedule::dynamic(1e-7, 1e-3, 40, 10)}};
  const double want = 1e-7 * r_binary01(ca, 1, 1).value + 1e-5 * r_snapshot_group(ca).value;
  CHECK(aggregate(specs, ca, nullptr, nullptr, 20).value == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("names and levels") {
  CHECK(term_name(Binary01{}) == "binary01");
  CHECK(term_name(BinaryPM1{}) == "binary_pm1");
  CHECK(term_name(MultiLevel{}) == "multilevel");
  CHECK(term_name(Transmittance{}) == "transmittance");
  CHECK(term_name(SnapshotGroup{}) == "snapshots");
  CHECK(term_name(Correlation{}) == "correlation");
  CHECK(term_name(Conditionality{}) == "conditionality");
  CHECK(term_levels(BinaryPM1{}) == std::vector<double>{-1, 1});
  CHECK(term_levels(MultiLevel{{0, 0.5, 1}, {1, 1, 1}}) == std::vector<double>{0, 0.5, 1});
  CHECK(term_levels(Correlation{}).empty());
}

TEST_CASE("zero sets of the level families") {
  Rng rng(17);
  const std::vector<std::pair<std::vector<double>, Evaluator>> families{
      {{0, 1}, [](const CodedApertureSet& c) { return r_binary01(c, 1.8, 1.0); }},
      {{-1, 1}, [](const CodedApertureSet& c) { return r_binary_pm1(c, 1.0, 1.0); }},
      {{0, 0.25, 0.5, 0.75, 1},
       [](const CodedApertureSet& c) {
         const std::vector<double> lv{0, 0.25, 0.5, 0.75, 1};
         const std::vector<double> p{1, 1.5, 1, 0.7, 1};
         return r_multilevel(c, lv, p);
       }},
  };
  for (const auto& [levels, r] : families) {
    CodedApertureSet exact(CaShape{3, 4, 4, 1});
    std::uniform_int_distribution<std::size_t> pick(0, levels.size() - 1);
    for (double& v : exact.data()) v = levels[pick(rng)];
    CHECK(r(exact).value <= 1e-12);
    for (int trial = 0; trial < 200; ++trial) {
      auto off = exact;
      std::uniform_int_distribution<std::size_t> at(0, off.size() - 1);
      off.data()[at(rng)] += std::uniform_real_distribution<double>(0.01, 0.2)(rng);
      CHECK(r(off).value > 0.0);
    }
  }
}

TEST_CASE("values are never negative") {
  Rng rng(23);
  const auto spc = SensingModel::spc(3, 3, 3);
  const Eigen::MatrixXd scenes = Eigen::MatrixXd::Random(9, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ca = random_ca(CaShape{3, 3, 3, 1}, rng, -2.0, 2.0);
    CHECK(r_binary01(ca, 1.3, 1).value >= 0.0);
    CHECK(r_binary_pm1(ca, 1, 2.5).value >= 0.0);
    CHECK(r_multilevel(ca, std::vector<double>{0, 0.5, 1}, std::vector<double>{1, 1, 1}).value >= 0.0);
    CHECK(r_transmittance(ca, 0.4).value >= 0.0);
    CHECK(r_snapshot_group(ca).value >= 0.0);
    CHECK(r_conditionality(ca, spc, scenes).value >= 0.0);
    const auto pos = random_ca(CaShape{3, 3, 3, 1}, rng);
    CHECK(r_correlation(pos).value >= 0.0);
  }
}

TEST_CASE("binary01 with p2 > p1 pulls harder toward one") {
  for (double p2 : {1.2, 1.5, 2.0}) {
    for (double eps : {1e-3, 1e-2, 0.05}) {
      const double up = std::abs(r_binary01(single(0.5 + eps), 1.0, p2).grad[0]);
      const double down = std::abs(r_binary01(single(0.5 - eps), 1.0, p2).grad[0]);
      CHECK(up > down);
    }
  }
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(31);
  const auto spc = SensingModel::spc(3, 2, 3);
  const auto cassi = SensingModel::cassi(2, 2, 3, 3);
  const Eigen::MatrixXd spc_scenes = Eigen::MatrixXd::Random(6, 3);
  const Eigen::MatrixXd cassi_scenes = Eigen::MatrixXd::Random(18, 2);
  const std::vector<std::pair<const char*, Evaluator>> terms{
      {"binary01", [](const CodedApertureSet& c) { return r_binary01(c, 1.0, 1.0); }},
      {"binary01 p", [](const CodedApertureSet& c) { return r_binary01(c, 1.8, 1.3); }},
      {"binary_pm1", [](const CodedApertureSet& c) { return r_binary_pm1(c, 1.0, 1.5); }},
      {"multilevel",
       [](const CodedApertureSet& c) {
         return r_multilevel(c, std::vector<double>{0, 0.5, 1}, std::vector<double>{1, 2, 1.5});
       }},
      {"transmittance", [](const CodedApertureSet& c) { return r_transmittance(c, 0.3); }},
      {"snapshots", [](const CodedApertureSet& c) { return r_snapshot_group(c); }},
      {"correlation", [](const CodedApertureSet& c) { return r_correlation(c); }},
      {"conditionality spc", [&](const CodedApertureSet& c) { return r_conditionality(c, spc, spc_scenes); }},
  };
  for (const auto& [name, r] : terms) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto ca = random_ca(CaShape{3, 2, 3, 1}, rng, -0.5, 1.5);
      worst = std::max(worst, fd_error(r, ca));
    }
    INFO(name);
    CHECK(worst < 1e-6);
  }
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto ca = random_ca(CaShape{2, 2, 3, trial % 2 == 0 ? 1u : 3u}, rng, -0.5, 1.5);
    worst = std::max(worst, fd_error([&](const CodedApertureSet& c) { return r_conditionality(c, cassi, cassi_scenes); },
                                     ca));
  }
  CHECK(worst < 1e-6);
}

}  // TEST_SUITE
