#ifndef GRNN_TESTS_TEST_UTIL_HPP
#define GRNN_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "grnn/ops.hpp"
#include "grnn/rng.hpp"
#include "grnn/tensor.hpp"

namespace grnn::test {

template <typename T>
Tensor4T<T> random_tensor(std::mt19937_64& rng, int64_t b, int64_t c,
                          int64_t h, int64_t w, T lo = T(-1), T hi = T(1)) {
  Tensor4T<T> t = Tensor4T<T>::zeros(b, c, h, w);
  for (auto& v : t.vec())
    v = static_cast<T>(next_uniform(rng, static_cast<double>(lo),
                                    static_cast<double>(hi)));
  return t;
}

// Independent direct-formula convolution: materializes the zero-padded
// input, then one quadruple loop per output element. Deliberately written
// differently from the production kernel.
template <typename T>
Tensor4T<T> conv2d_oracle(const Tensor4T<T>& in, const Tensor4T<T>& w,
                          const std::vector<T>* bias) {
  const int64_t B = in.batch(), C = in.channels(), H = in.height(),
                W = in.width();
  const int64_t O = w.batch(), KH = w.height(), KW = w.width();
  const int64_t ph = (KH - 1) / 2, pw = (KW - 1) / 2;

  Tensor4T<T> padded = Tensor4T<T>::zeros(B, C, H + 2 * ph, W + 2 * pw);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
          padded.at(b, c, y + ph, x + pw) = in.at(b, c, y, x);

  Tensor4T<T> out = Tensor4T<T>::zeros(B, O, H, W);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t o = 0; o < O; ++o)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
          T acc = bias ? (*bias)[static_cast<size_t>(o)] : T(0);
          for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < KH; ++i)
              for (int64_t j = 0; j < KW; ++j)
                acc += padded.at(b, c, y + i, x + j) * w.at(o, c, i, j);
          out.at(b, o, y, x) = acc;
        }
  return out;
}

// per-channel oracle loop; channel c uses kernel row c only
template <typename T>
Tensor4T<T> depthwise_oracle(const Tensor4T<T>& in, const Tensor4T<T>& w,
                             const std::vector<T>* bias) {
  const int64_t B = in.batch(), C = in.channels(), H = in.height(),
                W = in.width();
  const int64_t KH = w.height(), KW = w.width();
  const int64_t ph = (KH - 1) / 2, pw = (KW - 1) / 2;
  Tensor4T<T> out = Tensor4T<T>::zeros(B, C, H, W);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
          T acc = bias ? (*bias)[static_cast<size_t>(c)] : T(0);
          for (int64_t i = 0; i < KH; ++i)
            for (int64_t j = 0; j < KW; ++j) {
              const int64_t yy = y + i - ph, xx = x + j - pw;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              acc += in.at(b, c, yy, xx) * w.at(c, 0, i, j);
            }
          out.at(b, c, y, x) = acc;
        }
  return out;
}

template <typename T>
double max_rel_err(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    const double rel =
        std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

template <typename T>
double max_abs_diff(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    worst = std::max(
        worst, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return worst;
}

template <typename T>
bool bit_equal(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  if (!(a.shape() == b.shape())) return false;
  return std::memcmp(a.data(), b.data(),
                     sizeof(T) * static_cast<size_t>(a.numel())) == 0;
}

template <typename T>
Tensor4T<T> bias_tensor(std::vector<T> v) {
  const int64_t c = static_cast<int64_t>(v.size());
  return Tensor4T<T>({1, c, 1, 1}, std::move(v));
}

}  // namespace grnn::test

#endif  // GRNN_TESTS_TEST_UTIL_HPP
