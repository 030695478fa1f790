#include <cmath>

#include "doctest.h"
#include "grnn/ghost.hpp"
#include "grnn/metrics.hpp"
#include "test_util.hpp"

using namespace grnn;
using namespace grnn::test;

namespace {

GhostBlockConfig make_cfg(int64_t in, int64_t n, int64_t s, int64_t k = 3,
                          int64_t kc = 3) {
  GhostBlockConfig c;
  c.in_channels = in;
  c.out_channels = n;
  c.ratio = s;
  c.primary_kernel = k;
  c.cheap_kernel = kc;
  return c;
}

GhostBlockWeightsT<float> random_weights(const GhostBlockConfig& cfg,
                                         std::mt19937_64& rng) {
  const int64_t m = cfg.intrinsic();
  GhostBlockWeightsT<float> w;
  w.primary_w =
      random_tensor<float>(rng, m, cfg.in_channels, cfg.primary_kernel,
                           cfg.primary_kernel, -0.3f, 0.3f);
  w.primary_b = random_tensor<float>(rng, 1, m, 1, 1, -0.1f, 0.1f);
  if (cfg.ratio > 1) {
    w.cheap_w = random_tensor<float>(rng, m * (cfg.ratio - 1), 1,
                                     cfg.cheap_kernel, cfg.cheap_kernel,
                                     -0.3f, 0.3f);
    w.cheap_b =
        random_tensor<float>(rng, 1, m * (cfg.ratio - 1), 1, 1, -0.1f, 0.1f);
  }
  return w;
}

}  // namespace

TEST_CASE("ghost_forward produces N channels, intrinsic maps first") {
  std::mt19937_64 rng(51);
  GhostBlockConfig cfg = make_cfg(3, 16, 2);
  CHECK(cfg.intrinsic() == 8);
  GhostBlockWeightsT<float> w = random_weights(cfg, rng);
  Tensor4 x = random_tensor<float>(rng, 2, 3, 8, 8);
  Tensor4 y = ghost_forward(x, w, cfg);
  CHECK(y.shape() == Shape4{2, 16, 8, 8});

  // intrinsic maps occupy indices 0..M-1: they equal the primary conv alone
  Tensor4 primary = conv2d(x, w.primary_w, &w.primary_b,
                           ConvSpec::same(3, 8, 3));
  CHECK(bit_equal(slice_channels(y, 0, 8), primary));
}

TEST_CASE("ratio 1 is bit-identical to a plain convolution") {
  std::mt19937_64 rng(53);
  GhostBlockConfig cfg = make_cfg(4, 6, 1);
  GhostBlockWeightsT<float> w = random_weights(cfg, rng);
  Tensor4 x = random_tensor<float>(rng, 1, 4, 10, 10);
  Tensor4 a = ghost_forward(x, w, cfg);
  Tensor4 b = conv2d(x, w.primary_w, &w.primary_b, ConvSpec::same(4, 6, 3));
  CHECK(bit_equal(a, b));
}

TEST_CASE("identity cheap kernels duplicate their intrinsic sources") {
  std::mt19937_64 rng(57);
  GhostBlockConfig cfg = make_cfg(3, 12, 3);  // M=4, two ghost groups
  GhostBlockWeightsT<float> w = random_weights(cfg, rng);
  w.cheap_w = Tensor4::zeros(8, 1, 3, 3);
  for (int64_t c = 0; c < 8; ++c) w.cheap_w.at(c, 0, 1, 1) = 1.0f;
  w.cheap_b = Tensor4::zeros(1, 8, 1, 1);

  Tensor4 x = random_tensor<float>(rng, 1, 3, 8, 8);
  Tensor4 y = ghost_forward(x, w, cfg);
  CHECK(y.channels() == 12);
  Tensor4 intrinsic = slice_channels(y, 0, 4);
  CHECK(bit_equal(slice_channels(y, 4, 8), intrinsic));
  CHECK(bit_equal(slice_channels(y, 8, 12), intrinsic));

  // the similarity analyzer must score those duplicates at 1.0
  SimilarityReport r = feature_similarity(y);
  for (int64_t m = 0; m < 4; ++m) {
    CHECK(r.at(m, m + 4) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.at(m, m + 8) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("N not divisible by S truncates deterministically") {
  std::mt19937_64 rng(59);
  GhostBlockConfig cfg = make_cfg(4, 7, 2);  // M = ceil(7/2) = 4, 8 -> 7
  CHECK(cfg.intrinsic() == 4);
  GhostBlockWeightsT<float> w = random_weights(cfg, rng);
  Tensor4 x = random_tensor<float>(rng, 1, 4, 6, 6);
  Tensor4 y = ghost_forward(x, w, cfg);
  CHECK(y.channels() == 7);
}

TEST_CASE("ghost_forward validates input channels") {
  std::mt19937_64 rng(61);
  GhostBlockConfig cfg = make_cfg(3, 8, 2);
  GhostBlockWeightsT<float> w = random_weights(cfg, rng);
  CHECK_THROWS_AS(ghost_forward(Tensor4::zeros(1, 5, 4, 4), w, cfg),
                  ShapeError);
}

TEST_CASE("ghost_param_count worked example") {
  GhostParamCount c = ghost_param_count(make_cfg(16, 16, 2));
  CHECK(c.ghost == 1240);   // 8*16*9+8 + 8*(9+1)
  CHECK(c.plain == 2320);   // 16*16*9+16
  CHECK(c.ratio == doctest::Approx(1240.0 / 2320.0).epsilon(1e-12));

  CHECK(ghost_param_count(make_cfg(16, 16, 1)).ratio == 1.0);
}

TEST_CASE("param ratio approaches the closed-form limit") {
  GhostBlockConfig cfg = make_cfg(128, 1024, 2);
  const double limit = ghost_ratio_limit(cfg);  // 1/S + k'^2/(in k^2)
  const double got = ghost_param_count(cfg).ratio;
  CHECK(std::abs(got - limit) / limit <= 0.05);
}

TEST_CASE("param count strictly decreasing in S") {
  // holds when in*k^2 > k'^2
  for (int64_t in : {8, 16, 64}) {
    uint64_t prev = ghost_param_count(make_cfg(in, 32, 1)).ghost;
    for (int64_t s = 2; s <= 4; ++s) {
      uint64_t cur = ghost_param_count(make_cfg(in, 32, s)).ghost;
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("ghost_flop_count worked example and linearity") {
  GhostMacCount m = ghost_flop_count(make_cfg(16, 16, 2), 8, 8);
  CHECK(m.ghost == 78336);    // 64*(8*16*9 + 8*9)
  CHECK(m.plain == 147456);   // 64*16*16*9

  GhostMacCount eq = ghost_flop_count(make_cfg(16, 16, 1), 8, 8);
  CHECK(eq.ghost == eq.plain);

  GhostMacCount dbl = ghost_flop_count(make_cfg(16, 16, 2), 16, 8);
  CHECK(dbl.ghost == 2 * m.ghost);
  CHECK(dbl.plain == 2 * m.plain);
}

TEST_CASE("ghost block is differentiable") {
  std::mt19937_64 rng(63);
  GhostBlockConfig cfg = make_cfg(2, 8, 2);
  const int64_t m = cfg.intrinsic();
  Tensor4d x = random_tensor<double>(rng, 1, 2, 5, 5);
  Tensor4d target = random_tensor<double>(rng, 1, 8, 5, 5);
  ParamMapD params{
      {"g.primary.weight", random_tensor<double>(rng, m, 2, 3, 3)},
      {"g.primary.bias", random_tensor<double>(rng, 1, m, 1, 1)},
      {"g.cheap.weight", random_tensor<double>(rng, m, 1, 3, 3)},
      {"g.cheap.bias", random_tensor<double>(rng, 1, m, 1, 1)},
  };
  auto build = [&](Tape<double>& t, const std::map<std::string, NodeId>& ids) {
    NodeId y = ghost_forward_tape(t, t.constant(x), ids, "g", cfg);
    return t.l1_loss(y, t.constant(target));
  };
  auto report = grad_check(build, params, 1e-5, 1e-4);
  INFO(report.str());
  CHECK(report.pass);
}
