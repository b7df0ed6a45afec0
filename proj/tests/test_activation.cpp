#include "doctest.h"

#include <cmath>

#include "adact/activation.hpp"
#include "adact/gradcheck.hpp"
#include "adact/training.hpp"

using namespace adact;
using Tag = ActivationKind::Tag;

namespace {

TensorXd vec(std::initializer_list<double> v) { return TensorXd({static_cast<Index>(v.size())}, v); }
double at(const ActivationKind& k, double x) { return fixed_forward(k, vec({x}))[0]; }
double grad_at(const ActivationKind& k, double x) { return fixed_grad(k, vec({x}))[0]; }
TensorXd ones_like(const TensorXd& t) { return TensorXd::constant(t.shape(), 1.0); }

}  // namespace

TEST_CASE("fixed forward examples") {
  CHECK(at(ActivationKind::sigmoid(), 0.0) == 0.5);
  CHECK(at(ActivationKind::tanh(), 0.0) == 0.0);
  CHECK(fixed_forward(ActivationKind::relu(), vec({-2, 0, 3})) == vec({0, 0, 3}));
  CHECK(at(ActivationKind::lrelu(0.01), -1.0) == doctest::Approx(-0.01).epsilon(1e-15));
}

TEST_CASE("fixed grad examples") {
  CHECK(grad_at(ActivationKind::sigmoid(), 0.0) == 0.25);
  CHECK(grad_at(ActivationKind::tanh(), 0.0) == 1.0);
  const auto swish = ActivationKind::swish();
  const auto numeric =
      finite_diff_grad([&](std::span<const double> x) { return at(swish, x[0]); }, std::vector<double>{1.5}, 1e-4);
  CHECK(std::abs(grad_at(swish, 1.5) - numeric[0]) < 1e-6);
}

TEST_CASE("kink derivatives use the negative-side slope") {
  CHECK(grad_at(ActivationKind::relu(), 0.0) == 0.0);
  CHECK(grad_at(ActivationKind::lrelu(0.01), 0.0) == 0.01);
  CHECK(grad_at(ActivationKind::relu(), 1e-300) == 1.0);
}

TEST_CASE("fixed functions reject learnable kinds") {
  CHECK_THROWS_AS(fixed_forward(ActivationKind::arelu(), vec({1})), ContractError);
  CHECK_THROWS_AS(fixed_grad(ActivationKind::prelu(), vec({1})), ContractError);
  CHECK_THROWS_AS(adaptive_forward(ActivationKind::relu(), AdaptiveParams<double>{}, vec({1})), ContractError);
}

TEST_CASE("kind parameters must be positive") {
  CHECK_THROWS_AS(ActivationKind::lrelu(0.0), ArgumentError);
  CHECK_THROWS_AS(ActivationKind::swish(-1.0), ArgumentError);
  CHECK(ActivationKind::parse("arelu") == ActivationKind::arelu());
  CHECK_FALSE(ActivationKind::parse("ARelu").has_value());
}

TEST_CASE("stable at large magnitudes") {
  for (double x : {-1e3, -745.0, -50.0, 50.0, 1e3}) {
    for (auto k : {ActivationKind::sigmoid(), ActivationKind::tanh(), ActivationKind::swish()}) {
      CHECK(std::isfinite(at(k, x)));
      CHECK(std::isfinite(grad_at(k, x)));
    }
  }
  CHECK(at(ActivationKind::sigmoid(), -1e3) >= 0.0);
  CHECK(at(ActivationKind::sigmoid(), 1e3) == 1.0);
}

TEST_CASE("tanh sigmoid identity") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double x = -20.0 + 40.0 * rng.uniform();
    CHECK(std::abs(at(ActivationKind::tanh(), x) - (2.0 * at(ActivationKind::sigmoid(), 2.0 * x) - 1.0)) < 1e-12);
  }
}

TEST_CASE("adaptive forward examples") {
  const auto arelu = ActivationKind::arelu();
  CHECK(adaptive_forward(arelu, AdaptiveParams<double>{1, 0, 0, 0}, vec({-2, 3})) == vec({0, 3}));
  CHECK(adaptive_forward(arelu, AdaptiveParams<double>{1.5, 0.2, 0.1, -0.1}, vec({2}))[0] == 3.1);
  CHECK(adaptive_forward(ActivationKind::asigmoid(), AdaptiveParams<double>{1, 1, 0, 0}, vec({0}))[0] == 0.5);
  CHECK(adaptive_forward(ActivationKind::atanh(), AdaptiveParams<double>{2, 3, 0, 1}, vec({0}))[0] == 1.0);
}

TEST_CASE("adaptive backward examples") {
  const auto r = adaptive_backward(ActivationKind::arelu(), AdaptiveParams<double>{1, 0, 0, 0}, vec({3}), vec({1}));
  CHECK(r.dz[0] == 1.0);
  CHECK(r.dp == AdaptiveParams<double>{3, 0, 1, 0});

  const auto s = adaptive_backward(ActivationKind::asigmoid(), AdaptiveParams<double>{1, 1, 0, 0}, vec({0}), vec({1}));
  CHECK(s.dz[0] == 0.25);
  CHECK(s.dp == AdaptiveParams<double>{0, 0.5, 0.25, 1});
  // the same values against central differences
  const auto numeric = finite_diff_grad(
      [](std::span<const double> x) {
        return adaptive_forward(ActivationKind::asigmoid(), AdaptiveParams<double>{x[1], x[2], x[3], x[4]},
                                vec({x[0]}))[0];
      },
      std::vector<double>{0, 1, 1, 0, 0}, 1e-4);
  const double expected[] = {0.25, 0, 0.5, 0.25, 1};
  for (int i = 0; i < 5; ++i) CHECK(std::abs(numeric[static_cast<std::size_t>(i)] - expected[i]) < 1e-6);
}

TEST_CASE("adaptive backward sums parameter gradients over elements") {
  const AdaptiveParams<double> p{1.3, 0.7, 0.2, -0.4};
  const auto z = vec({-1.0, 0.5, 2.0});
  const auto up = vec({0.3, -1.1, 0.8});
  const auto all = adaptive_backward(ActivationKind::atanh(), p, z, up);
  AdaptiveParams<double> acc{0, 0, 0, 0};
  for (Index i = 0; i < 3; ++i) {
    const auto one = adaptive_backward(ActivationKind::atanh(), p, vec({z[i]}), vec({up[i]}));
    CHECK(one.dz[0] == all.dz[i]);
    acc.a += one.dp.a;
    acc.b += one.dp.b;
    acc.c += one.dp.c;
    acc.d += one.dp.d;
  }
  CHECK(acc == all.dp);
  CHECK_THROWS_AS(adaptive_backward(ActivationKind::atanh(), p, z, vec({1, 2})), DimensionError);
}

TEST_CASE("AReLU routes gradient through the active branch only") {
  const AdaptiveParams<double> p{0.5, 2.0, 1.0, -1.0};  // lines cross at z = 4/3
  const auto below = adaptive_backward(ActivationKind::arelu(), p, vec({0.0}), vec({1}));
  CHECK(below.dz[0] == 0.5);
  CHECK(below.dp == AdaptiveParams<double>{0, 0, 1, 0});
  const auto above = adaptive_backward(ActivationKind::arelu(), p, vec({3.0}), vec({1}));
  CHECK(above.dz[0] == 2.0);
  CHECK(above.dp == AdaptiveParams<double>{0, 3, 0, 1});
}

TEST_CASE("AReLU tie goes to the line that is larger just below the crossing") {
  // a <= b: branch 1 (a z + c) dominates to the left of the tie
  const auto t1 = adaptive_backward(ActivationKind::arelu(), AdaptiveParams<double>{0.5, 2.0, 0.0, 0.0}, vec({0.0}),
                                    vec({1}));
  CHECK(t1.dz[0] == 0.5);
  CHECK(t1.dp.c == 1.0);
  const auto t2 = adaptive_backward(ActivationKind::arelu(), AdaptiveParams<double>{2.0, 0.5, 0.0, 0.0}, vec({0.0}),
                                    vec({1}));
  CHECK(t2.dz[0] == 0.5);
  CHECK(t2.dp.d == 1.0);
}

TEST_CASE("classify special cases") {
  CHECK(classify_special_case(AdaptiveParams<double>{1, 0, 0, 0}).kind == SpecialCase::Kind::ReLU);
  const auto pr = classify_special_case(AdaptiveParams<double>{0.25, 1, 0, 0});
  CHECK(pr.kind == SpecialCase::Kind::PReLU);
  CHECK(pr.slope == 0.25);
  CHECK(classify_special_case(AdaptiveParams<double>{2, 3, 0.5, 1}).kind == SpecialCase::Kind::General);
  CHECK(classify_special_case(AdaptiveParams<double>{1, 1e-300, 0, 0}).kind == SpecialCase::Kind::General);
}

TEST_CASE("AReLU(1,0,0,0) is ReLU exactly, values and subgradients") {
  const Index n = 100001;
  TensorXd z({n});
  for (Index i = 0; i < n; ++i) z[i] = -50.0 + 100.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  z[n / 2] = 0.0;
  const AdaptiveParams<double> p{1, 0, 0, 0};
  CHECK(adaptive_forward(ActivationKind::arelu(), p, z) == fixed_forward(ActivationKind::relu(), z));
  CHECK(adaptive_backward(ActivationKind::arelu(), p, z, ones_like(z)).dz == fixed_grad(ActivationKind::relu(), z));
}

TEST_CASE("AReLU(s,1,0,0) is max(s z, z) exactly") {
  Rng rng(4);
  for (double s : {0.0, 0.01, 0.25, 0.9, 1.0, 1.5, -0.3}) {
    auto z = rand_uniform(rng, {2000}, -10.0, 10.0);
    z[0] = 0.0;
    const auto a = adaptive_forward(ActivationKind::arelu(), AdaptiveParams<double>{s, 1, 0, 0}, z);
    const auto pr = prelu_forward(s, z);
    CHECK(a == pr);
    for (Index i = 0; i < z.size(); ++i) REQUIRE(a[i] == std::max(s * z[i], z[i]));
    const auto up = rand_uniform(rng, z.shape(), -1.0, 1.0);
    CHECK(adaptive_backward(ActivationKind::arelu(), AdaptiveParams<double>{s, 1, 0, 0}, z, up).dz ==
          prelu_backward(s, z, up).dz);
  }
}

TEST_CASE("smooth adaptive kinds at (1,1,0,0) reduce to their base") {
  for (int i = -500; i <= 500; ++i) {
    const double z = i * 0.1;
    const AdaptiveParams<double> p{1, 1, 0, 0};
    CHECK(std::abs(adaptive_forward(ActivationKind::asigmoid(), p, vec({z}))[0] - at(ActivationKind::sigmoid(), z)) <=
          1e-15);
    CHECK(std::abs(adaptive_forward(ActivationKind::atanh(), p, vec({z}))[0] - at(ActivationKind::tanh(), z)) <= 1e-15);
  }
}

TEST_CASE("every kind passes the finite-difference oracle away from kinks") {
  GradcheckOptions opts;
  opts.seed = 2024;
  for (const auto& line : gradcheck_activations(opts)) {
    INFO(line.subject);
    CHECK(line.samples == 100);
    CHECK(line.max_relative_error < 1e-5);
  }
}

TEST_CASE("initial parameters and learnable counts") {
  CHECK(AdaptiveParams<double>::initial(ActivationKind::arelu()) == AdaptiveParams<double>{1, 0, 0, 0});
  CHECK(AdaptiveParams<double>::initial(ActivationKind::atanh()) == AdaptiveParams<double>{1, 1, 0, 0});
  CHECK(ActivationKind::asigmoid().learnable_count() == 4);
  CHECK(ActivationKind::prelu().learnable_count() == 1);
  CHECK(ActivationKind::swish().learnable_count() == 0);
  CHECK(kPReLUInitialSlope == 0.25);
}
