#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glad/routing.hpp"
#include "glad/rng.hpp"
#include "test_util.hpp"

using namespace glad;

namespace {

RouterParams random_router(std::size_t d_h, std::size_t n, Rng& rng,
                           bool with_global = true) {
  RouterParams p;
  const double s = 1.0 / std::sqrt(static_cast<double>(d_h));
  if (with_global) p.w_global = Matrix::random_uniform(d_h, n, -s, s, rng);
  p.w_local = Matrix::random_uniform(d_h, n, -s, s, rng);
  p.w_fusion = Matrix::random_uniform(d_h, 2, -s, s, rng);
  return p;
}

ExpertDistribution random_distribution(std::size_t t, std::size_t n, Rng& rng) {
  return ExpertDistribution(
      softmax_rows(Matrix::random_uniform(t, n, -3, 3, rng)));
}

}  // namespace

TEST_CASE("global_route on zero input is uniform") {
  Rng rng(1);
  const RouterParams p = random_router(8, 4, rng);
  const ExpertDistribution d = global_route(Matrix(5, 8), p);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(d.probs(t, i) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("global_route matches the reference configuration shape") {
  // 3 experts over 256-dim features, the configuration the encoder defaults
  // mirror at full scale.
  Rng rng(2);
  const RouterParams p = random_router(256, 3, rng);
  const Matrix x_s = Matrix::random_uniform(7, 256, -1, 1, rng);
  const ExpertDistribution d = global_route(x_s, p);
  CHECK(d.probs.rows() == 7);
  CHECK(d.probs.cols() == 3);
}

TEST_CASE("global_route closed-form logits") {
  RouterParams p;
  // Identity-ish router so the single frame's logits are exactly the input.
  p.w_global = Matrix::identity(3);
  p.w_local = Matrix::identity(3);
  p.w_fusion = Matrix(3, 2);
  const Matrix x(1, 3, {std::log(6.0), std::log(3.0), 0.0});
  const ExpertDistribution d = global_route(x, p);
  CHECK(d.probs(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(d.probs(0, 1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(d.probs(0, 2) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("global_route depends only on x_s") {
  Rng rng(3);
  const RouterParams p = random_router(6, 3, rng);
  const Matrix x_s = Matrix::random_uniform(4, 6, -1, 1, rng);
  const ExpertDistribution first = global_route(x_s, p);
  // Anything resembling a layer input is irrelevant to the global route.
  const ExpertDistribution second = global_route(x_s, p);
  CHECK(first.probs == second.probs);
}

TEST_CASE("local_route on zero input is uniform") {
  Rng rng(12);
  const RouterParams p = random_router(8, 5, rng);
  const ExpertDistribution d = local_route(Matrix(3, 8), p);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(d.probs(t, i) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("local_route equals global_route when weights coincide") {
  Rng rng(4);
  RouterParams p = random_router(6, 3, rng);
  p.w_local = p.w_global;
  const Matrix x = Matrix::random_uniform(4, 6, -1, 1, rng);
  CHECK(local_route(x, p).probs == global_route(x, p).probs);
}

TEST_CASE("local_route one-hot row selects a router row") {
  Rng rng(5);
  const RouterParams p = random_router(6, 3, rng);
  Matrix x(1, 6);
  x(0, 2) = 1.0;
  const ExpertDistribution d = local_route(x, p);
  Matrix row(1, 3, {p.w_local(2, 0), p.w_local(2, 1), p.w_local(2, 2)});
  CHECK(test::max_abs_diff(d.probs, softmax_rows(row)) == 0.0);
}

TEST_CASE("fusion_weights zero input splits evenly") {
  Rng rng(6);
  const RouterParams p = random_router(5, 3, rng);
  const FusionWeights w = fusion_weights(Matrix(3, 5), p);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(w.alpha(t, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.alpha(t, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("fusion_weights closed form and saturation") {
  RouterParams p;
  p.w_local = Matrix::identity(2);
  p.w_fusion = Matrix::identity(2);
  const FusionWeights w =
      fusion_weights(Matrix(1, 2, {0.0, std::log(3.0)}), p);
  CHECK(w.alpha(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(w.alpha(0, 1) == doctest::Approx(0.75).epsilon(1e-12));

  const FusionWeights sat = fusion_weights(Matrix(1, 2, {50.0, -50.0}), p);
  CHECK(test::approx_eq(sat.alpha(0, 0), 1.0, 1e-12));
  CHECK(test::approx_eq(sat.alpha(0, 1), 0.0, 1e-12));
}

TEST_CASE("fuse of identical distributions is that distribution") {
  Rng rng(7);
  const ExpertDistribution d = random_distribution(6, 4, rng);
  const FusionWeights alpha(
      softmax_rows(Matrix::random_uniform(6, 2, -2, 2, rng)));
  const ExpertDistribution fused = fuse(d, d, alpha);
  CHECK(test::max_abs_diff(fused.probs, d.probs) < 1e-15);
}

TEST_CASE("fuse hand arithmetic") {
  ExpertDistribution g(Matrix(1, 3, {1, 0, 0}));
  ExpertDistribution l(Matrix(1, 3, {0, 1, 0}));
  FusionWeights alpha(Matrix(1, 2, {0.25, 0.75}));
  const ExpertDistribution fused = fuse(g, l, alpha);
  CHECK(fused.probs(0, 0) == 0.25);
  CHECK(fused.probs(0, 1) == 0.75);
  CHECK(fused.probs(0, 2) == 0.0);
}

TEST_CASE("fuse endpoint alpha=[1,0] reproduces the global side bit-exactly") {
  Rng rng(8);
  const ExpertDistribution g = random_distribution(5, 3, rng);
  const ExpertDistribution l = random_distribution(5, 3, rng);
  const FusionWeights endpoint(
      Matrix(5, 2, {1, 0, 1, 0, 1, 0, 1, 0, 1, 0}));
  CHECK(fuse(g, l, endpoint).probs == g.probs);
}

TEST_CASE("fuse stays row-stochastic and inside the parent envelope") {
  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    const ExpertDistribution g = random_distribution(3, 4, rng);
    const ExpertDistribution l = random_distribution(3, 4, rng);
    const FusionWeights alpha(
        softmax_rows(Matrix::random_uniform(3, 2, -4, 4, rng)));
    const ExpertDistribution fused = fuse(g, l, alpha);
    for (std::size_t t = 0; t < 3; ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        const double lo = std::min(g.probs(t, i), l.probs(t, i));
        const double hi = std::max(g.probs(t, i), l.probs(t, i));
        CHECK(fused.probs(t, i) >= lo - 1e-15);
        CHECK(fused.probs(t, i) <= hi + 1e-15);
        sum += fused.probs(t, i);
      }
      CHECK(test::approx_eq(sum, 1.0, 1e-9));
    }
  }
}

TEST_CASE("static_fuse sums without renormalizing") {
  ExpertDistribution u(Matrix(2, 2, {0.5, 0.5, 0.5, 0.5}));
  const Matrix sum = static_fuse(u, u);
  for (double v : sum.data()) CHECK(v == 1.0);

  ExpertDistribution g(Matrix(1, 3, {1, 0, 0}));
  ExpertDistribution l(Matrix(1, 3, {0, 1, 0}));
  const Matrix s = static_fuse(g, l);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == 1.0);
  CHECK(s(0, 2) == 0.0);
}

TEST_CASE("static_fuse rows sum to two for random inputs") {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix s = static_fuse(random_distribution(4, 5, rng),
                                 random_distribution(4, 5, rng));
    for (std::size_t t = 0; t < s.rows(); ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < s.cols(); ++i) sum += s(t, i);
      CHECK(test::approx_eq(sum, 2.0, 1e-9));
    }
  }
}

TEST_CASE("routing shape errors") {
  Rng rng(11);
  const RouterParams p = random_router(6, 3, rng);
  CHECK_THROWS_AS(global_route(Matrix(4, 5), p), ShapeError);
  CHECK_THROWS_AS(local_route(Matrix(4, 7), p), ShapeError);
  CHECK_THROWS_AS(fusion_weights(Matrix(4, 7), p), ShapeError);

  const ExpertDistribution a = random_distribution(4, 3, rng);
  const ExpertDistribution b = random_distribution(4, 2, rng);
  const FusionWeights alpha(softmax_rows(Matrix::random_uniform(4, 2, -1, 1, rng)));
  CHECK_THROWS_AS(fuse(a, b, alpha), ShapeError);
  CHECK_THROWS_AS(static_fuse(a, b), ShapeError);
  const FusionWeights short_alpha(
      softmax_rows(Matrix::random_uniform(3, 2, -1, 1, rng)));
  CHECK_THROWS_AS(fuse(a, a, short_alpha), ShapeError);
}

TEST_CASE("expert distribution construction validates stochasticity") {
  CHECK_THROWS_AS(ExpertDistribution(Matrix(1, 2, {0.7, 0.7})),
                  InvalidInputError);
  CHECK_THROWS_AS(ExpertDistribution(Matrix(1, 2, {1.5, -0.5})),
                  InvalidInputError);
  CHECK_NOTHROW(ExpertDistribution(Matrix(1, 2, {0.25, 0.75})));
}

TEST_CASE("router params validation") {
  RouterParams p;
  p.w_local = Matrix(4, 3);
  p.w_fusion = Matrix(4, 2);
  CHECK_NOTHROW(p.validate());
  p.w_fusion = Matrix(4, 3);
  CHECK_THROWS_AS(p.validate(), ShapeError);
  p.w_fusion = Matrix(5, 2);
  CHECK_THROWS_AS(p.validate(), ShapeError);
  p.w_fusion = Matrix(4, 2);
  p.w_global = Matrix(4, 2);
  CHECK_THROWS_AS(p.validate(), ShapeError);
}
