#include <cmath>

#include "doctest.h"
#include "grnn/ops.hpp"
#include "grnn/threading.hpp"
#include "test_util.hpp"

using namespace grnn;
using namespace grnn::test;

TEST_CASE("conv2d single multiply") {
  Tensor4 x = Tensor4::from(1, 1, 1, 1, {2.0f});
  Tensor4 w = Tensor4::from(1, 1, 1, 1, {3.0f});
  Tensor4 b = bias_tensor<float>({0.0f});
  Tensor4 y = conv2d(x, w, &b, ConvSpec::same(1, 1, 1));
  CHECK(y.at(0, 0, 0, 0) == 6.0f);
}

TEST_CASE("conv2d identity kernel preserves input") {
  std::mt19937_64 rng(7);
  Tensor4 x = random_tensor<float>(rng, 2, 3, 5, 6);
  Tensor4 w = Tensor4::zeros(3, 3, 3, 3);
  for (int64_t o = 0; o < 3; ++o) w.at(o, o, 1, 1) = 1.0f;
  Tensor4 y = conv2d<float>(x, w, nullptr, ConvSpec::same(3, 3, 3, false));
  CHECK(bit_equal(x, y));
}

TEST_CASE("conv2d all-ones 3x3 kernel on 1..9") {
  Tensor4 x = Tensor4::from(1, 1, 3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor4 w = Tensor4::full(1, 1, 3, 3, 1.0f);
  Tensor4 y = conv2d<float>(x, w, nullptr, ConvSpec::same(1, 1, 3, false));
  CHECK(y.at(0, 0, 1, 1) == 45.0f);
  CHECK(y.at(0, 0, 0, 0) == 12.0f);
  // whole output against the padded-buffer oracle
  Tensor4 want = conv2d_oracle<float>(x, w, nullptr);
  CHECK(max_rel_err(y, want) == 0.0);
}

TEST_CASE("conv2d matches oracle on random instances") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 25; ++iter) {
    const int64_t b = 1 + next_index(rng, 2);
    const int64_t c = 1 + next_index(rng, 8);
    const int64_t o = 1 + next_index(rng, 8);
    const int64_t h = 1 + next_index(rng, 16);
    const int64_t w = 1 + next_index(rng, 16);
    const int64_t k = 1 + 2 * next_index(rng, 3);  // 1, 3, 5
    Tensor4 x = random_tensor<float>(rng, b, c, h, w);
    Tensor4 ker = random_tensor<float>(rng, o, c, k, k);
    std::vector<float> bias(static_cast<size_t>(o));
    for (auto& v : bias) v = static_cast<float>(next_uniform(rng, -1, 1));
    Tensor4 bt = bias_tensor<float>(bias);

    Tensor4 got = conv2d(x, ker, &bt, ConvSpec::same(c, o, k));
    Tensor4 want = conv2d_oracle(x, ker, &bias);
    CHECK(max_rel_err(got, want) <= 1e-5);
  }
}

TEST_CASE("conv2d errors name the offending axis") {
  Tensor4 x = Tensor4::zeros(1, 2, 4, 4);
  Tensor4 w = Tensor4::zeros(1, 3, 3, 3);
  CHECK_THROWS_WITH_AS(conv2d<float>(x, w, nullptr, ConvSpec::same(3, 1, 3, false)),
                       doctest::Contains("channel axis"), ShapeError);
  CHECK_THROWS_AS(conv2d<float>(x, w, nullptr, ConvSpec::same(2, 1, 3, false)),
                  ShapeError);
  CHECK_THROWS_AS(conv2d<float>(x, Tensor4::zeros(1, 2, 2, 2), nullptr,
                                ConvSpec{2, 1, 2, 2, false}),
                  ValueError);
}

TEST_CASE("conv2d parallel result is bit-identical to serial") {
  std::mt19937_64 rng(13);
  Tensor4 x = random_tensor<float>(rng, 2, 6, 12, 12);
  Tensor4 w = random_tensor<float>(rng, 8, 6, 3, 3);
  set_max_threads(1);
  Tensor4 serial = conv2d<float>(x, w, nullptr, ConvSpec::same(6, 8, 3, false));
  set_max_threads(4);
  Tensor4 parallel = conv2d<float>(x, w, nullptr, ConvSpec::same(6, 8, 3, false));
  set_max_threads(0);
  CHECK(bit_equal(serial, parallel));
}

TEST_CASE("depthwise identity and zero kernels") {
  std::mt19937_64 rng(17);
  Tensor4 x = random_tensor<float>(rng, 1, 4, 6, 6);
  Tensor4 id = Tensor4::zeros(4, 1, 3, 3);
  for (int64_t c = 0; c < 4; ++c) id.at(c, 0, 1, 1) = 1.0f;
  CHECK(bit_equal(depthwise_conv2d<float>(x, id, nullptr), x));

  Tensor4 zero = Tensor4::zeros(4, 1, 3, 3);
  Tensor4 y = depthwise_conv2d<float>(x, zero, nullptr);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.0f);
}

TEST_CASE("depthwise channels do not mix") {
  // two channels, distinct all-ones kernels: each output channel is its own
  // neighborhood sum
  Tensor4 x = Tensor4::zeros(1, 2, 4, 4);
  for (int64_t y = 0; y < 4; ++y)
    for (int64_t xx = 0; xx < 4; ++xx) {
      x.at(0, 0, y, xx) = static_cast<float>(y * 4 + xx);
      x.at(0, 1, y, xx) = static_cast<float>(100 + y * 4 + xx);
    }
  Tensor4 w = Tensor4::full(2, 1, 3, 3, 1.0f);
  Tensor4 got = depthwise_conv2d<float>(x, w, nullptr);
  Tensor4 want = depthwise_oracle<float>(x, w, nullptr);
  CHECK(max_rel_err(got, want) == 0.0);
}

TEST_CASE("depthwise equals conv2d with block-diagonal weights") {
  std::mt19937_64 rng(19);
  Tensor4 x = random_tensor<float>(rng, 2, 5, 8, 8);
  Tensor4 dw = random_tensor<float>(rng, 5, 1, 3, 3);
  Tensor4 block = Tensor4::zeros(5, 5, 3, 3);
  for (int64_t c = 0; c < 5; ++c)
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 3; ++j) block.at(c, c, i, j) = dw.at(c, 0, i, j);
  Tensor4 a = depthwise_conv2d<float>(x, dw, nullptr);
  Tensor4 b = conv2d<float>(x, block, nullptr, ConvSpec::same(5, 5, 3, false));
  CHECK(max_rel_err(a, b) <= 1e-6);
}

TEST_CASE("depthwise channel-count mismatch") {
  Tensor4 x = Tensor4::zeros(1, 3, 4, 4);
  Tensor4 w = Tensor4::zeros(4, 1, 3, 3);
  CHECK_THROWS_AS(depthwise_conv2d<float>(x, w, nullptr), ShapeError);
}

TEST_CASE("relu") {
  Tensor4 x = Tensor4::from(1, 1, 1, 3, {-1.0f, 0.0f, 2.0f});
  Tensor4 y = relu(x);
  CHECK(y.at(0, 0, 0, 0) == 0.0f);
  CHECK(y.at(0, 0, 0, 1) == 0.0f);
  CHECK(y.at(0, 0, 0, 2) == 2.0f);

  std::mt19937_64 rng(23);
  Tensor4 nonneg = random_tensor<float>(rng, 1, 2, 3, 3, 0.0f, 1.0f);
  CHECK(bit_equal(relu(nonneg), nonneg));
  Tensor4 r = random_tensor<float>(rng, 1, 2, 3, 3);
  CHECK(bit_equal(relu(relu(r)), relu(r)));
}

TEST_CASE("concat_channels and slice round trip") {
  std::mt19937_64 rng(29);
  Tensor4 a = random_tensor<float>(rng, 1, 8, 4, 4);
  Tensor4 b = random_tensor<float>(rng, 1, 8, 4, 4);
  Tensor4 c = concat_channels(a, b);
  CHECK(c.channels() == 16);
  CHECK(bit_equal(slice_channels(c, 0, 8), a));
  CHECK(bit_equal(slice_channels(c, 8, 16), b));

  CHECK_THROWS_AS(concat_channels(a, Tensor4::zeros(1, 8, 5, 4)), ShapeError);
  CHECK_THROWS_AS(concat_channels(a, Tensor4::zeros(2, 8, 4, 4)), ShapeError);
  // zero-channel tensors cannot even be constructed
  CHECK_THROWS_AS(Tensor4::zeros(1, 0, 4, 4), ShapeError);
}

TEST_CASE("add basics") {
  std::mt19937_64 rng(31);
  Tensor4 x = random_tensor<float>(rng, 1, 3, 4, 4);
  Tensor4 zero = Tensor4::zeros(1, 3, 4, 4);
  CHECK(bit_equal(add(x, zero), x));
  Tensor4 neg = scale(x, -1.0f);
  Tensor4 s = add(x, neg);
  for (int64_t i = 0; i < s.numel(); ++i) CHECK(s.data()[i] == 0.0f);
  Tensor4 y = random_tensor<float>(rng, 1, 3, 4, 4);
  CHECK(bit_equal(add(x, y), add(y, x)));
  CHECK_THROWS_AS(add(x, Tensor4::zeros(1, 3, 4, 5)), ShapeError);
}

TEST_CASE("pixel_shuffle index mapping") {
  CHECK(bit_equal(pixel_shuffle(Tensor4::from(1, 1, 2, 2, {1, 2, 3, 4}), 1),
                  Tensor4::from(1, 1, 2, 2, {1, 2, 3, 4})));

  Tensor4 x = Tensor4::from(1, 4, 1, 1, {10, 20, 30, 40});
  Tensor4 y = pixel_shuffle(x, 2);
  CHECK(y.shape() == Shape4{1, 1, 2, 2});
  CHECK(y.at(0, 0, 0, 0) == 10.0f);
  CHECK(y.at(0, 0, 0, 1) == 20.0f);
  CHECK(y.at(0, 0, 1, 0) == 30.0f);
  CHECK(y.at(0, 0, 1, 1) == 40.0f);

  CHECK_THROWS_AS(pixel_shuffle(Tensor4::zeros(1, 3, 2, 2), 2), ShapeError);
}

TEST_CASE("space_to_depth index mapping and inverses") {
  Tensor4 x = Tensor4::from(1, 1, 2, 2, {1, 2, 3, 4});
  Tensor4 y = space_to_depth(x, 2);
  CHECK(y.shape() == Shape4{1, 4, 1, 1});
  for (int64_t c = 0; c < 4; ++c)
    CHECK(y.at(0, c, 0, 0) == static_cast<float>(c + 1));

  std::mt19937_64 rng(37);
  Tensor4 t = random_tensor<float>(rng, 2, 8, 6, 4);
  CHECK(bit_equal(space_to_depth(pixel_shuffle(t, 2), 2), t));
  Tensor4 u = random_tensor<float>(rng, 1, 3, 4, 8);
  CHECK(bit_equal(pixel_shuffle(space_to_depth(u, 2), 2), u));

  CHECK_THROWS_AS(space_to_depth(Tensor4::zeros(1, 1, 3, 4), 2), ShapeError);
}

TEST_CASE("gaussian kernel normalization and center tap") {
  auto k = gaussian_kernel(1.6);
  CHECK(k.size() == 11);  // radius ceil(3*1.6) = 5
  double s = 0.0;
  for (double v : k) s += v;
  CHECK(std::abs(s - 1.0) <= 1e-6);

  // center tap = exp(0)/Z with Z the radius-5 Gaussian sum
  double z = 0.0;
  for (int i = -5; i <= 5; ++i) z += std::exp(-0.5 * i * i / (1.6 * 1.6));
  CHECK(k[5] == doctest::Approx(1.0 / z).epsilon(1e-12));

  CHECK_THROWS_AS(gaussian_kernel(0.0), ValueError);
  CHECK_THROWS_AS(gaussian_blur(Tensor4::zeros(1, 1, 4, 4), -1.0), ValueError);
}

TEST_CASE("gaussian blur preserves constants exactly and means approximately") {
  Tensor4 c = Tensor4::full(1, 3, 8, 8, 0.37f);
  Tensor4 b = gaussian_blur(c, 1.6);
  CHECK(bit_equal(b, c));

  std::mt19937_64 rng(41);
  Tensor4 img = random_tensor<float>(rng, 1, 3, 16, 16, 0.0f, 1.0f);
  Tensor4 blurred = gaussian_blur(img, 1.6);
  double m0 = 0.0, m1 = 0.0;
  for (int64_t i = 0; i < img.numel(); ++i) {
    m0 += img.data()[i];
    m1 += blurred.data()[i];
  }
  CHECK(std::abs(m1 - m0) / std::abs(m0) <= 1e-4);
}

TEST_CASE("catmull-rom weights at half-pixel offset") {
  auto w = catmull_rom_weights(0.5);
  CHECK(w[0] == doctest::Approx(-0.0625).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.5625).epsilon(1e-12));
  CHECK(w[2] == doctest::Approx(0.5625).epsilon(1e-12));
  CHECK(w[3] == doctest::Approx(-0.0625).epsilon(1e-12));
}

TEST_CASE("bicubic resize identity, constants, errors") {
  std::mt19937_64 rng(43);
  Tensor4 x = random_tensor<float>(rng, 1, 3, 7, 9, 0.0f, 1.0f);
  CHECK(bit_equal(bicubic_resize(x, 1.0), x));

  Tensor4 c = Tensor4::full(1, 3, 8, 8, 0.42f);
  for (double s : {0.5, 2.0, 4.0, 1.75}) {
    Tensor4 r = bicubic_resize(c, s);
    for (int64_t i = 0; i < r.numel(); ++i)
      CHECK(r.data()[i] == doctest::Approx(0.42f).epsilon(1e-6));
  }

  Tensor4 up = bicubic_resize(x, 4.0);
  CHECK(up.shape() == Shape4{1, 3, 28, 36});

  CHECK_THROWS_AS(bicubic_resize(Tensor4::zeros(1, 1, 2, 2), 0.1), ValueError);
  CHECK_THROWS_AS(bicubic_resize(x, -1.0), ValueError);
}

TEST_CASE("kernels are deterministic across runs") {
  std::mt19937_64 rng(47);
  Tensor4 x = random_tensor<float>(rng, 1, 4, 10, 10);
  Tensor4 w = random_tensor<float>(rng, 4, 4, 3, 3);
  Tensor4 a = conv2d<float>(x, w, nullptr, ConvSpec::same(4, 4, 3, false));
  Tensor4 b = conv2d<float>(x, w, nullptr, ConvSpec::same(4, 4, 3, false));
  CHECK(bit_equal(a, b));
  CHECK(bit_equal(gaussian_blur(x, 1.6), gaussian_blur(x, 1.6)));
  CHECK(bit_equal(bicubic_resize(x, 2.0), bicubic_resize(x, 2.0)));
}
