#ifndef GRNN_OPS_HPP
#define GRNN_OPS_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "grnn/tensor.hpp"

namespace grnn {

// Stride-1 "same" convolution: output spatial size equals input spatial
// size, zero padding of (k-1)/2 on each side, odd kernels only.
struct ConvSpec {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t kh = 3;
  int64_t kw = 3;
  bool has_bias = true;

  static ConvSpec same(int64_t in_c, int64_t out_c, int64_t k,
                       bool bias = true) {
    return ConvSpec{in_c, out_c, k, k, bias};
  }
};

// out[b,o,y,x] = bias[o] + sum_{c,i,j} in_pad[b,c,y+i,x+j] * w[o,c,i,j]
// Weights are [outC, inC, kh, kw]; bias, when present, is (1, outC, 1, 1).
// Summation order within each output element is fixed: c, then i, then j.
template <typename T>
Tensor4T<T> conv2d(const Tensor4T<T>& input, const Tensor4T<T>& weights,
                   const Tensor4T<T>* bias, const ConvSpec& spec);

// Per-channel convolution: weights [C, 1, kh, kw], channel c is convolved
// only with kernel c. Channels never mix.
template <typename T>
Tensor4T<T> depthwise_conv2d(const Tensor4T<T>& input,
                             const Tensor4T<T>& weights,
                             const Tensor4T<T>* bias);

template <typename T>
Tensor4T<T> relu(const Tensor4T<T>& input);

// Channel concatenation; a's channels come first.
template <typename T>
Tensor4T<T> concat_channels(const Tensor4T<T>& a, const Tensor4T<T>& b);

// Channels [begin, end) of the input.
template <typename T>
Tensor4T<T> slice_channels(const Tensor4T<T>& input, int64_t begin,
                           int64_t end);

template <typename T>
Tensor4T<T> add(const Tensor4T<T>& a, const Tensor4T<T>& b);

template <typename T>
Tensor4T<T> sub(const Tensor4T<T>& a, const Tensor4T<T>& b);

template <typename T>
Tensor4T<T> mul(const Tensor4T<T>& a, const Tensor4T<T>& b);

template <typename T>
Tensor4T<T> scale(const Tensor4T<T>& a, T s);

template <typename T>
T sum(const Tensor4T<T>& a);

// (B, C, H, W) -> (B, C/r^2, H*r, W*r) with
// out[b,c,h*r+i,w*r+j] = in[b, c*r*r + i*r + j, h, w].
template <typename T>
Tensor4T<T> pixel_shuffle(const Tensor4T<T>& input, int64_t r);

// Exact inverse of pixel_shuffle: (B, C, H, W) -> (B, C*r^2, H/r, W/r).
template <typename T>
Tensor4T<T> space_to_depth(const Tensor4T<T>& input, int64_t r);

// Normalized 1-D Gaussian taps of radius ceil(3*sigma); length 2*radius+1.
std::vector<double> gaussian_kernel(double sigma);

// Separable Gaussian blur, per channel, symmetric border reflection
// (edge pixel included: -1 -> 0, -2 -> 1, ...).
template <typename T>
Tensor4T<T> gaussian_blur(const Tensor4T<T>& input, double sigma);

// Catmull-Rom (a = -0.5) tap weights for taps floor-1..floor+2 at
// fractional offset f in [0, 1).
std::array<double, 4> catmull_rom_weights(double f);

// Bicubic resize, Catmull-Rom kernel, half-pixel-center mapping
// src = (dst + 0.5) / scale - 0.5, edge-clamped taps.
// Output dims are round(dim * scale) and must be >= 1.
template <typename T>
Tensor4T<T> bicubic_resize(const Tensor4T<T>& input, double scale);

}  // namespace grnn

#endif  // GRNN_OPS_HPP
