#include "doctest_torch.hpp"

#include <cmath>

#include <torch/torch.h>

#include "test_util.hpp"
#include "tryon/adversary.hpp"
#include "tryon/errors.hpp"

using namespace tryon;

TEST_CASE("critic produces a patch map at 1/32 resolution") {
  torch::manual_seed(1);
  Discriminator d;
  d->eval();
  auto x = torch::rand({1, 3, 256, 192}) * 2 - 1;
  auto scores = d->forward(x);
  CHECK(scores.sizes() == torch::IntArrayRef({1, 1, 8, 6}));
  CHECK(torch::equal(scores, d->forward(x)));
  CHECK_THROWS_AS(d->forward(torch::zeros({1, 3, 40, 64})), ContractViolation);
}

TEST_CASE("critic is finite on extreme constant images") {
  Discriminator d;
  for (float v : {-1.0f, 1.0f}) {
    CHECK(torch::isfinite(d->forward(torch::full({2, 3, 64, 64}, v))).all().item<bool>());
  }
}

TEST_CASE("relativistic losses at score parity equal ln 2") {
  torch::manual_seed(2);
  auto s = torch::randn({4, 1, 2, 2});
  CHECK(relativistic_d_loss(s, s).item<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(relativistic_g_loss(s, s).item<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  // The averaged variant compares against batch means, so parity needs equal scores everywhere.
  auto flat = torch::full({4, 1, 2, 2}, 0.3);
  CHECK(relativistic_d_loss(flat, flat, RelativisticVariant::kAverage).item<double>() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(relativistic_g_loss(flat, flat, RelativisticVariant::kAverage).item<double>() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));
  auto zero = torch::zeros({1, 1, 8, 6}, torch::kFloat64);
  CHECK(std::abs(relativistic_d_loss(zero, zero).item<double>() - 0.6931471805599453) <= 1e-6);
}

TEST_CASE("relativistic losses have the log-sigmoid asymptotes") {
  auto base = torch::zeros({1, 1, 2, 2}, torch::kFloat64);
  auto high = base + 20.0;
  CHECK(relativistic_d_loss(high, base).item<double>() <= 1e-8);
  CHECK(relativistic_d_loss(base, high).item<double>() == doctest::Approx(20.0).epsilon(1e-8));
  CHECK(relativistic_g_loss(base, high).item<double>() <= 1e-8);
  CHECK(relativistic_g_loss(high, base).item<double>() == doctest::Approx(20.0).epsilon(1e-8));
}

TEST_CASE("relativistic losses are strictly decreasing in the score gap") {
  auto fake = torch::zeros({1, 1, 1, 1}, torch::kFloat64);
  double previous_d = 1e9;
  double previous_g = 1e9;
  for (double gap = -5.0; gap <= 5.0; gap += 0.5) {
    // d_loss falls as real - fake grows; g_loss falls as fake - real grows.
    const double d = relativistic_d_loss(fake + gap, fake).item<double>();
    const double g = relativistic_g_loss(fake, fake + gap).item<double>();
    CHECK(d < previous_d);
    CHECK(g < previous_g);
    previous_d = d;
    previous_g = g;
  }
}

TEST_CASE("generator loss does not propagate into real scores") {
  auto real = torch::randn({1, 1, 2, 2}).requires_grad_(true);
  auto fake = torch::randn({1, 1, 2, 2}).requires_grad_(true);
  relativistic_g_loss(real, fake).backward();
  CHECK(!real.grad().defined());
  CHECK(fake.grad().norm().item<double>() > 0.0);
}

TEST_CASE("gradient penalty closed forms") {
  torch::manual_seed(3);
  auto real = torch::rand({2, 3, 8, 6}, torch::kFloat64);
  auto fake = torch::rand({2, 3, 8, 6}, torch::kFloat64);

  SUBCASE("zero critic") {
    Discriminator d;
    d->to(torch::kFloat64);
    {
      torch::NoGradGuard no_grad;
      for (auto& p : d->parameters()) p.zero_();
    }
    auto real64 = torch::rand({2, 3, 64, 64}, torch::kFloat64);
    auto fake64 = torch::rand({2, 3, 64, 64}, torch::kFloat64);
    auto gp = gradient_penalty([&](const torch::Tensor& x) { return d->forward(x); }, real64, fake64);
    CHECK(gp.item<double>() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("sum-of-pixels critic") {
    auto gp = gradient_penalty([](const torch::Tensor& x) { return x.sum({1, 2, 3}); }, real, fake);
    const double expected = std::pow(std::sqrt(8.0 * 6.0 * 3.0) - 1.0, 2);
    CHECK(gp.item<double>() == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("random critic is nonnegative and differentiable") {
    torch::manual_seed(4);
    Discriminator d;
    auto r = torch::rand({2, 3, 64, 64});
    auto f = torch::rand({2, 3, 64, 64});
    auto gp = gradient_penalty([&](const torch::Tensor& x) { return d->forward(x); }, r, f);
    CHECK(gp.item<double>() >= 0.0);
    gp.backward();
    double total = 0.0;
    for (auto& p : d->parameters()) {
      if (p.grad().defined()) total += p.grad().abs().sum().item<double>();
    }
    CHECK(total > 0.0);
  }
}

TEST_CASE("discriminator has exactly five downsampling blocks") {
  DiscriminatorOptions options;
  options.depths = {8, 8, 8, 8};
  CHECK_THROWS_AS(Discriminator{options}, ContractViolation);
}
