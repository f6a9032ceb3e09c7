#include <doctest.h>

#include <cmath>

#include "chatclf/error.hpp"
#include "chatclf/gbt.hpp"
#include "chatclf/rng.hpp"
#include "helpers.hpp"

using namespace chatclf;

TEST_CASE("training log-loss is non-increasing per round") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto d = testing::blobs(300, 12, 0.3, seed);
    // some label noise so the ensemble keeps working for many rounds
    Rng rng(seed);
    for (auto& y : d.y) {
      if (rng.bernoulli(0.1)) y = 1 - y;
    }
    GBTConfig c;
    c.rounds = 60;
    const auto model = GradientBoostedTrees::fit(d.x, d.y, c);
    const auto& loss = model.training_loss();
    REQUIRE(loss.size() == 61);
    CHECK(loss.front() == doctest::Approx(std::log(2.0)));
    for (std::size_t r = 1; r < loss.size(); ++r) {
      CAPTURE(r);
      CHECK(loss[r] <= loss[r - 1] + 1e-12);
    }
    CHECK(loss.back() < 0.5 * loss.front());
  }
}

TEST_CASE("single split on a step function") {
  Matrix x(8, 1);
  Labels y;
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = i;
    y.push_back(i >= 4);
  }
  GBTConfig c;
  c.rounds = 1;
  c.max_depth = 1;
  c.learning_rate = 1.0;
  const auto m = GradientBoostedTrees::fit(x, y, c);
  const auto& nodes = m.trees().at(0).nodes;
  REQUIRE(nodes.size() == 3);
  CHECK(nodes[0].feature == 0);
  CHECK(nodes[0].threshold == doctest::Approx(3.5));
  // g = p - y = +-0.5 with p = 0.5, h = 0.25. Leaf = -G / (H + lambda).
  CHECK(nodes[nodes[0].left].value == doctest::Approx(-(4 * 0.5) / (4 * 0.25 + 1.0)));
  CHECK(nodes[nodes[0].right].value == doctest::Approx((4 * 0.5) / (4 * 0.25 + 1.0)));
  // Gain = GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l) with G = 0.
  CHECK(nodes[0].gain == doctest::Approx(2 * 4.0 / 2.0));
  CHECK(m.gain_importance()[0] == doctest::Approx(4.0));
  CHECK(m.split_counts()[0] == 1);
}

TEST_CASE("gain importance ignores pure noise features on an easy problem") {
  auto d = testing::blobs(200, 1, 2.0, 4);
  Matrix x(200, 3);
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = d.x(i, 0);
    x(i, 2) = rng.normal();
  }
  GBTConfig c;
  c.rounds = 20;
  const auto m = GradientBoostedTrees::fit(x, d.y, c);
  const auto imp = m.gain_importance();
  CHECK(imp[1] > 10 * (imp[0] + imp[2]));
}

TEST_CASE("fit is deterministic and config is validated") {
  auto d = testing::blobs(100, 5, 0.5, 5);
  GBTConfig c;
  c.rounds = 10;
  const auto a = GradientBoostedTrees::fit(d.x, d.y, c);
  const auto b = GradientBoostedTrees::fit(d.x, d.y, c);
  CHECK(a.margin(d.x) == b.margin(d.x));
  c.max_depth = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
