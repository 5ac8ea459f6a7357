#include <doctest.h>

#include <set>

#include "caed/ca_model.hpp"
#include "caed/error.hpp"
#include "support.hpp"

using namespace caed;
using caed::test::random_ca;

TEST_SUITE("ca_model") {

TEST_CASE("storage index is shot-major with plane fastest") {
  CodedApertureSet ca(CaShape{2, 3, 4, 5});
  CHECK(ca.index(0, 0, 0, 1) == 1);
  CHECK(ca.index(0, 0, 1, 0) == 5);
  CHECK(ca.index(0, 1, 0, 0) == 20);
  CHECK(ca.index(1, 0, 0, 0) == 60);
  CHECK(ca.shot(1).size() == 60);
  CHECK(ca.shot(1).data() == ca.data().data() + 60);
}

TEST_CASE("constructor rejects zero dimensions and size mismatches") {
  CHECK_THROWS_AS(CodedApertureSet(CaShape{0, 1, 1, 1}), ShapeError);
  CHECK_THROWS_AS(CodedApertureSet(CaShape{1, 2, 2, 1}, std::vector<double>(3)), ShapeError);
}

TEST_CASE("check_finite flags NaN and infinity") {
  CodedApertureSet ca(CaShape{1, 2, 2, 1}, 0.5);
  CHECK_NOTHROW(ca.check_finite());
  ca.at(0, 1, 1) = std::nan("");
  CHECK_THROWS_AS(ca.check_finite(), DomainError);
  ca.at(0, 1, 1) = INFINITY;
  CHECK_THROWS_AS(ca.check_finite(), DomainError);
}

TEST_CASE("kronecker identity kernel tiles into a checkerboard") {
  CodedApertureSet q(CaShape{1, 2, 2, 1}, std::vector<double>{1, 0, 0, 1});
  const auto full = expand(CaParameterization::kronecker(q, 4, 4));
  const std::vector<double> want{1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1};
  CHECK(full.shape() == CaShape{1, 4, 4, 1});
  CHECK(full.data() == want);
}

TEST_CASE("dense expand is the identity") {
  Rng rng(3);
  const auto v = random_ca(CaShape{3, 4, 5, 2}, rng);
  CHECK(expand(CaParameterization::dense(v)) == v);
}

TEST_CASE("colored single cell contracts the filter bank") {
  CodedApertureSet a(CaShape{1, 1, 1, 2}, std::vector<double>{1, 0});
  FilterBank w{2, 2, {0.2, 0.8, 0.5, 0.5}};
  const auto param = CaParameterization::colored(a, w, 1, 1);
  const auto full = expand(param);
  CHECK(full.shape() == CaShape{1, 1, 1, 2});
  CHECK(full.data()[0] == doctest::Approx(0.2));
  CHECK(full.data()[1] == doctest::Approx(0.8));

  const std::vector<double> up{1, 1};
  const auto grad = expand_backward(param, up);
  REQUIRE(grad.size() == 2);
  CHECK(grad[0] == doctest::Approx(1.0));
  CHECK(grad[1] == doctest::Approx(1.0));
}

TEST_CASE("kronecker backward counts tile copies") {
  CodedApertureSet q(CaShape{1, 2, 2, 1}, 0.3);
  const auto param = CaParameterization::kronecker(q, 4, 4);
  const std::vector<double> up(16, 1.0);
  const auto grad = expand_backward(param, up);
  CHECK(grad == std::vector<double>(4, 4.0));
}

TEST_CASE("dense backward passes the upstream gradient through") {
  Rng rng(5);
  const auto v = random_ca(CaShape{2, 3, 3, 1}, rng);
  const auto up = caed::test::random_vector(v.size(), rng);
  CHECK(expand_backward(CaParameterization::dense(v), up) == up);
}

TEST_CASE("expand_backward rejects a wrongly sized upstream") {
  CodedApertureSet q(CaShape{1, 2, 2, 1}, 0.3);
  const auto param = CaParameterization::kronecker(q, 4, 4);
  CHECK_THROWS_AS(expand_backward(param, std::vector<double>(15)), ShapeError);
}

TEST_CASE("kernel that does not divide the aperture names the axis") {
  CodedApertureSet q(CaShape{1, 3, 2, 1}, 0.5);
  try {
    (void)CaParameterization::kronecker(q, 4, 4);
    FAIL("expected a ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("rows") != std::string::npos);
  }
  CodedApertureSet r(CaShape{1, 2, 3, 1}, 0.5);
  try {
    (void)CaParameterization::kronecker(r, 4, 4);
    FAIL("expected a ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("cols") != std::string::npos);
  }
}

TEST_CASE("colored parameterization validates the filter bank") {
  CodedApertureSet a(CaShape{1, 1, 1, 3}, 0.5);
  CHECK_THROWS_AS(CaParameterization::colored(a, FilterBank{3, 2, std::vector<double>(6, 0.5)}, 1, 1),
                  DomainError);
  CHECK_THROWS_AS(CaParameterization::colored(a, FilterBank{3, 4, std::vector<double>(11, 0.5)}, 1, 1),
                  ShapeError);
  CHECK_THROWS_AS(CaParameterization::colored(a, FilterBank{2, 4, std::vector<double>(8, 0.5)}, 1, 1),
                  ShapeError);
  auto bad = std::vector<double>(12, 0.5);
  bad[4] = 1.5;
  CHECK_THROWS_AS(CaParameterization::colored(a, FilterBank{3, 4, bad}, 1, 1), DomainError);
}

TEST_CASE("gaussian filter bank peaks at one inside [0, 1]") {
  const auto bank = gaussian_filter_bank(5, 31);
  CHECK(bank.weights.size() == 5 * 31);
  for (std::size_t v = 0; v < bank.filters; ++v) {
    double peak = 0.0;
    for (std::size_t l = 0; l < bank.bands; ++l) {
      CHECK(bank.at(v, l) >= 0.0);
      CHECK(bank.at(v, l) <= 1.0);
      peak = std::max(peak, bank.at(v, l));
    }
    CHECK(peak == doctest::Approx(1.0).epsilon(0.05));
  }
  CHECK_THROWS_AS(gaussian_filter_bank(0, 3), DomainError);
}

TEST_CASE("trainable parameter counts") {
  Rng rng(1);
  CHECK(trainable_parameter_count(CaParameterization::dense(CodedApertureSet(CaShape{4, 28, 28, 1}))) == 3136);
  CHECK(trainable_parameter_count(CaParameterization::kronecker(CodedApertureSet(CaShape{4, 14, 14, 1}), 28, 28)) ==
        784);
  const auto colored = CaParameterization::colored(CodedApertureSet(CaShape{1, 8, 8, 5}, 0.5),
                                                   gaussian_filter_bank(5, 8), 16, 16);
  CHECK(trainable_parameter_count(colored) == 320);
  CHECK(colored.output_shape() == CaShape{1, 16, 16, 8});
}

TEST_CASE("kronecker output is periodic with the kernel size") {
  Rng rng(11);
  const auto q = random_ca(CaShape{2, 3, 2, 2}, rng);
  const auto full = expand(CaParameterization::kronecker(q, 9, 8));
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        for (std::size_t l = 0; l < 2; ++l) CHECK(full.at(s, i, j, l) == q.at(s, i % 3, j % 2, l));
}

TEST_CASE("expand_backward is the adjoint of expand for every parameterization") {
  Rng rng(21);
  std::vector<CaParameterization> params{
      CaParameterization::dense(random_ca(CaShape{2, 4, 6, 3}, rng)),
      CaParameterization::kronecker(random_ca(CaShape{2, 2, 3, 3}, rng), 4, 6),
      CaParameterization::colored(random_ca(CaShape{2, 2, 3, 2}, rng), gaussian_filter_bank(2, 3), 4, 6),
  };
  for (const auto& p : params) {
    const auto full = expand(p);
    const auto up = caed::test::random_vector(full.size(), rng);
    const auto back = expand_backward(p, up);
    const double lhs = caed::test::dot(up, full.data());
    const double rhs = caed::test::dot(back, p.trainables());
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));

    auto copy = p;
    const auto f = [&](const std::vector<double>& x) {
      copy.trainables() = x;
      return caed::test::dot(up, expand(copy).data());
    };
    const auto numeric = caed::test::numeric_gradient(f, p.trainables());
    CHECK(caed::test::relative_error(back, numeric) < 1e-8);
  }
}

TEST_CASE("zero noise returns the input") {
  Rng rng(2);
  const auto ca = random_ca(CaShape{2, 3, 3, 1}, rng);
  NoiseSpec spec;
  spec.ca_noise = UniformNoise{0.0, 0.0};
  CHECK(inject_ca_noise(ca, spec, rng) == ca);
  CHECK(inject_ca_noise(ca, NoiseSpec{}, rng) == ca);
}

TEST_CASE("uniform manufacturing noise stays in its interval") {
  CodedApertureSet ca(CaShape{3, 8, 8, 1}, 0.5);
  NoiseSpec spec;
  spec.ca_noise = UniformNoise{0.0, 0.2};
  Rng rng(7);
  const auto noisy = inject_ca_noise(ca, spec, rng);
  for (double v : noisy.data()) {
    CHECK(v >= 0.5);
    CHECK(v <= 0.7);
  }
  CHECK(ca.data() == std::vector<double>(ca.size(), 0.5));
}

TEST_CASE("noise is deterministic under a fixed seed") {
  CodedApertureSet ca(CaShape{2, 5, 5, 1}, 0.5);
  NoiseSpec spec;
  spec.ca_noise = GaussianNoise{0.0, 0.05, 0.15};
  Rng a(99);
  Rng b(99);
  const auto x = inject_ca_noise(ca, spec, a);
  const auto y = inject_ca_noise(ca, spec, b);
  CHECK(x == y);
  for (double v : x.data()) CHECK(std::abs(v - 0.5) <= 0.15 + 1e-12);
}

TEST_CASE("noise at or above the aperture peak is rejected") {
  CodedApertureSet ca(CaShape{1, 2, 2, 1}, 0.1);
  NoiseSpec spec;
  spec.ca_noise = UniformNoise{0.0, 0.2};
  Rng rng(1);
  CHECK_THROWS_AS(inject_ca_noise(ca, spec, rng), DomainError);
  spec.ca_noise = UniformNoise{-0.1, 0.0};
  CHECK_THROWS_AS(inject_ca_noise(ca, spec, rng), DomainError);
  CHECK(noise_amplitude(UniformNoise{-0.3, 0.1}) == doctest::Approx(0.3));
}

TEST_CASE("transmittance is the shot mean") {
  CHECK(transmittance_of(CodedApertureSet(CaShape{1, 2, 2, 1}, 1.0), 0) == 1.0);
  CHECK(transmittance_of(CodedApertureSet(CaShape{1, 2, 2, 1}, std::vector<double>{1, 0, 0, 1}), 0) == 0.5);
  CHECK(transmittance_of(CodedApertureSet(CaShape{1, 2, 2, 1}, 0.0), 0) == 0.0);
  CodedApertureSet two(CaShape{2, 1, 2, 1}, std::vector<double>{1, 1, 0, 1});
  CHECK(transmittance_of(two, 1) == 0.5);
  CHECK_THROWS_AS(two.shot(2), ShapeError);
}

TEST_CASE("quantization snaps to the nearest level with ties going down") {
  const std::vector<double> binary{0, 1};
  const std::vector<double> five{0, 0.25, 0.5, 0.75, 1};
  CodedApertureSet ca(CaShape{1, 1, 3, 1}, std::vector<double>{0.49, 0.5, 0.51});
  CHECK(quantize_for_export(ca, binary).data() == std::vector<double>{0, 0, 1});
  CodedApertureSet one(CaShape{1, 1, 1, 1}, 0.6);
  CHECK(quantize_for_export(one, five).data()[0] == 0.5);
  CHECK_THROWS_AS(quantize_for_export(one, std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(quantize_for_export(one, std::vector<double>{1, 0}), DomainError);
}

TEST_CASE("quantized output only holds levels and is idempotent") {
  Rng rng(8);
  const auto ca = random_ca(CaShape{3, 6, 6, 2}, rng, -0.5, 1.5);
  const std::vector<double> levels{0, 0.5, 1};
  const auto q = quantize_for_export(ca, levels);
  const std::set<double> allowed(levels.begin(), levels.end());
  for (double v : q.data()) CHECK(allowed.count(v) == 1);
  CHECK(quantize_for_export(q, levels) == q);
}

TEST_CASE("initializers respect their ranges") {
  Rng rng(4);
  const CaShape shape{2, 10, 10, 1};
  const auto b01 = initial_block(shape, CaInit::Binary01, rng);
  for (double v : b01.data()) {
    CHECK(v >= 0.4);
    CHECK(v <= 0.6);
  }
  const auto pm1 = initial_block(shape, CaInit::BinaryPM1, rng);
  for (double v : pm1.data()) {
    CHECK(v >= -0.1);
    CHECK(v <= 0.1);
  }
  const auto bern = initial_block(shape, CaInit::Bernoulli, rng);
  std::size_t ones = 0;
  for (double v : bern.data()) {
    CHECK((v == 0.0 || v == 1.0));
    ones += v == 1.0;
  }
  CHECK(ones > 60);
  CHECK(ones < 140);
}

}  // TEST_SUITE
