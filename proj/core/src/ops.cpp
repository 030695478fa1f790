#include "grnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grnn/threading.hpp"

namespace grnn {

namespace {

void check_odd_kernel(int64_t kh, int64_t kw, const char* op) {
  if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0)
    throw ValueError(std::string(op) + ": kernel must be odd and positive, got " +
                     std::to_string(kh) + "x" + std::to_string(kw));
}

template <typename T>
void check_bias(const Tensor4T<T>* bias, int64_t out_c, const char* op) {
  if (!bias) return;
  const Shape4& s = bias->shape();
  if (s.b != 1 || s.c != out_c || s.h != 1 || s.w != 1)
    throw ShapeError(std::string(op) + ": bias must be (1," +
                     std::to_string(out_c) + ",1,1), got " + s.str());
}

// sample index with symmetric reflection (edge pixel repeated)
int64_t reflect(int64_t i, int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

double cubic_a_half(double t) {
  t = std::abs(t);
  if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

struct ResampleAxis {
  std::vector<int64_t> base;                 // per output coord, first tap - 1
  std::vector<std::array<double, 4>> taps;   // per output coord
};

ResampleAxis make_axis(int64_t in_n, int64_t out_n, double scl) {
  ResampleAxis ax;
  ax.base.resize(out_n);
  ax.taps.resize(out_n);
  for (int64_t o = 0; o < out_n; ++o) {
    double src = (static_cast<double>(o) + 0.5) / scl - 0.5;
    double fl = std::floor(src);
    double f = src - fl;
    ax.base[o] = static_cast<int64_t>(fl) - 1;
    ax.taps[o] = catmull_rom_weights(f);
  }
  (void)in_n;
  return ax;
}

}  // namespace

template <typename T>
Tensor4T<T> conv2d(const Tensor4T<T>& input, const Tensor4T<T>& weights,
                   const Tensor4T<T>* bias, const ConvSpec& spec) {
  const Shape4& is = input.shape();
  const Shape4& ws = weights.shape();
  check_odd_kernel(spec.kh, spec.kw, "conv2d");
  if (is.c != spec.in_channels)
    throw ShapeError("conv2d: input channel axis is " + std::to_string(is.c) +
                     ", spec expects " + std::to_string(spec.in_channels));
  if (ws.b != spec.out_channels || ws.c != spec.in_channels ||
      ws.h != spec.kh || ws.w != spec.kw)
    throw ShapeError("conv2d: weight shape " + ws.str() + " does not match spec (" +
                     std::to_string(spec.out_channels) + "," +
                     std::to_string(spec.in_channels) + "," +
                     std::to_string(spec.kh) + "," + std::to_string(spec.kw) + ")");
  if (spec.has_bias && !bias)
    throw ShapeError("conv2d: spec declares bias but none was given");
  if (!spec.has_bias && bias)
    throw ShapeError("conv2d: spec declares no bias but one was given");
  check_bias(bias, spec.out_channels, "conv2d");

  const int64_t B = is.b, C = is.c, H = is.h, W = is.w;
  const int64_t O = spec.out_channels, KH = spec.kh, KW = spec.kw;
  const int64_t ph = (KH - 1) / 2, pw = (KW - 1) / 2;

  Tensor4T<T> out = Tensor4T<T>::zeros(B, O, H, W);
  const T* in_p = input.data();
  const T* w_p = weights.data();
  T* out_p = out.data();

  parallel_for(B * O, [&](int64_t lo, int64_t hi) {
    for (int64_t idx = lo; idx < hi; ++idx) {
      const int64_t b = idx / O, o = idx % O;
      T* dst = out_p + (b * O + o) * H * W;
      const T init = bias ? bias->data()[o] : T(0);
      for (int64_t p = 0; p < H * W; ++p) dst[p] = init;
      // accumulation order per output element: c, then i, then j
      for (int64_t c = 0; c < C; ++c) {
        const T* src_c = in_p + (b * C + c) * H * W;
        const T* w_c = w_p + (o * C + c) * KH * KW;
        for (int64_t i = 0; i < KH; ++i) {
          const int64_t dy = i - ph;
          const int64_t y0 = std::max<int64_t>(0, -dy);
          const int64_t y1 = std::min<int64_t>(H, H - dy);
          for (int64_t j = 0; j < KW; ++j) {
            const int64_t dx = j - pw;
            const int64_t x0 = std::max<int64_t>(0, -dx);
            const int64_t x1 = std::min<int64_t>(W, W - dx);
            const T wv = w_c[i * KW + j];
            for (int64_t y = y0; y < y1; ++y) {
              const T* src_row = src_c + (y + dy) * W + dx;
              T* dst_row = dst + y * W;
              for (int64_t x = x0; x < x1; ++x)
                dst_row[x] += src_row[x] * wv;
            }
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor4T<T> depthwise_conv2d(const Tensor4T<T>& input,
                             const Tensor4T<T>& weights,
                             const Tensor4T<T>* bias) {
  const Shape4& is = input.shape();
  const Shape4& ws = weights.shape();
  check_odd_kernel(ws.h, ws.w, "depthwise_conv2d");
  if (ws.b != is.c)
    throw ShapeError("depthwise_conv2d: weight channel axis is " +
                     std::to_string(ws.b) + ", input has " +
                     std::to_string(is.c) + " channels");
  if (ws.c != 1)
    throw ShapeError("depthwise_conv2d: weights must be (C,1,kh,kw), got " +
                     ws.str());
  check_bias(bias, is.c, "depthwise_conv2d");

  const int64_t B = is.b, C = is.c, H = is.h, W = is.w;
  const int64_t KH = ws.h, KW = ws.w;
  const int64_t ph = (KH - 1) / 2, pw = (KW - 1) / 2;

  Tensor4T<T> out = Tensor4T<T>::zeros(B, C, H, W);
  const T* in_p = input.data();
  const T* w_p = weights.data();
  T* out_p = out.data();

  parallel_for(B * C, [&](int64_t lo, int64_t hi) {
    for (int64_t idx = lo; idx < hi; ++idx) {
      const int64_t b = idx / C, c = idx % C;
      const T* src_c = in_p + (b * C + c) * H * W;
      const T* w_c = w_p + c * KH * KW;
      T* dst = out_p + (b * C + c) * H * W;
      const T init = bias ? bias->data()[c] : T(0);
      for (int64_t p = 0; p < H * W; ++p) dst[p] = init;
      for (int64_t i = 0; i < KH; ++i) {
        const int64_t dy = i - ph;
        const int64_t y0 = std::max<int64_t>(0, -dy);
        const int64_t y1 = std::min<int64_t>(H, H - dy);
        for (int64_t j = 0; j < KW; ++j) {
          const int64_t dx = j - pw;
          const int64_t x0 = std::max<int64_t>(0, -dx);
          const int64_t x1 = std::min<int64_t>(W, W - dx);
          const T wv = w_c[i * KW + j];
          for (int64_t y = y0; y < y1; ++y) {
            const T* src_row = src_c + (y + dy) * W + dx;
            T* dst_row = dst + y * W;
            for (int64_t x = x0; x < x1; ++x) dst_row[x] += src_row[x] * wv;
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor4T<T> relu(const Tensor4T<T>& input) {
  Tensor4T<T> out = input;
  for (auto& v : out.vec()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor4T<T> concat_channels(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  const Shape4& as = a.shape();
  const Shape4& bs = b.shape();
  if (as.b != bs.b)
    throw ShapeError("concat_channels: batch axis mismatch " + as.str() +
                     " vs " + bs.str());
  if (as.h != bs.h || as.w != bs.w)
    throw ShapeError("concat_channels: spatial axes mismatch " + as.str() +
                     " vs " + bs.str());
  Tensor4T<T> out = Tensor4T<T>::zeros(as.b, as.c + bs.c, as.h, as.w);
  const int64_t plane = as.h * as.w;
  for (int64_t bat = 0; bat < as.b; ++bat) {
    std::copy_n(a.data() + bat * as.c * plane, as.c * plane,
                out.data() + bat * (as.c + bs.c) * plane);
    std::copy_n(b.data() + bat * bs.c * plane, bs.c * plane,
                out.data() + (bat * (as.c + bs.c) + as.c) * plane);
  }
  return out;
}

template <typename T>
Tensor4T<T> slice_channels(const Tensor4T<T>& input, int64_t begin,
                           int64_t end) {
  const Shape4& is = input.shape();
  if (begin < 0 || end > is.c || begin >= end)
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for channel axis of " +
                     std::to_string(is.c));
  Tensor4T<T> out = Tensor4T<T>::zeros(is.b, end - begin, is.h, is.w);
  const int64_t plane = is.h * is.w;
  for (int64_t b = 0; b < is.b; ++b)
    std::copy_n(input.data() + (b * is.c + begin) * plane,
                (end - begin) * plane, out.data() + b * (end - begin) * plane);
  return out;
}

namespace {
template <typename T, typename F>
Tensor4T<T> zip(const Tensor4T<T>& a, const Tensor4T<T>& b, F f,
                const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() +
                     " vs " + b.shape().str());
  Tensor4T<T> out = a;
  const T* bp = b.data();
  T* op_ = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) op_[i] = f(op_[i], bp[i]);
  return out;
}
}  // namespace

template <typename T>
Tensor4T<T> add(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  return zip(a, b, [](T x, T y) { return x + y; }, "add");
}

template <typename T>
Tensor4T<T> sub(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  return zip(a, b, [](T x, T y) { return x - y; }, "sub");
}

template <typename T>
Tensor4T<T> mul(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  return zip(a, b, [](T x, T y) { return x * y; }, "mul");
}

template <typename T>
Tensor4T<T> scale(const Tensor4T<T>& a, T s) {
  Tensor4T<T> out = a;
  for (auto& v : out.vec()) v *= s;
  return out;
}

template <typename T>
T sum(const Tensor4T<T>& a) {
  T acc = T(0);
  for (const auto& v : a.vec()) acc += v;
  return acc;
}

template <typename T>
Tensor4T<T> pixel_shuffle(const Tensor4T<T>& input, int64_t r) {
  if (r < 1) throw ValueError("pixel_shuffle: r must be >= 1");
  const Shape4& is = input.shape();
  if (is.c % (r * r) != 0)
    throw ShapeError("pixel_shuffle: channel axis " + std::to_string(is.c) +
                     " not divisible by r^2 = " + std::to_string(r * r));
  const int64_t B = is.b, C = is.c / (r * r), H = is.h, W = is.w;
  Tensor4T<T> out = Tensor4T<T>::zeros(B, C, H * r, W * r);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < r; ++j) {
          const T* src = input.data() +
                         ((b * is.c + (c * r * r + i * r + j)) * H) * W;
          for (int64_t h = 0; h < H; ++h) {
            T* dst = out.data() +
                     ((b * C + c) * H * r + (h * r + i)) * W * r + j;
            for (int64_t w = 0; w < W; ++w) dst[w * r] = src[h * W + w];
          }
        }
  return out;
}

template <typename T>
Tensor4T<T> space_to_depth(const Tensor4T<T>& input, int64_t r) {
  if (r < 1) throw ValueError("space_to_depth: r must be >= 1");
  const Shape4& is = input.shape();
  if (is.h % r != 0 || is.w % r != 0)
    throw ShapeError("space_to_depth: spatial axes " + std::to_string(is.h) +
                     "x" + std::to_string(is.w) + " not divisible by r = " +
                     std::to_string(r));
  const int64_t B = is.b, C = is.c, H = is.h / r, W = is.w / r;
  Tensor4T<T> out = Tensor4T<T>::zeros(B, C * r * r, H, W);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < r; ++j) {
          T* dst = out.data() + ((b * C * r * r + (c * r * r + i * r + j)) * H) * W;
          for (int64_t h = 0; h < H; ++h) {
            const T* src = input.data() +
                           ((b * C + c) * is.h + (h * r + i)) * is.w + j;
            for (int64_t w = 0; w < W; ++w) dst[h * W + w] = src[w * r];
          }
        }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0))
    throw ValueError("gaussian_kernel: sigma must be positive, got " +
                     std::to_string(sigma));
  const int64_t radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double z = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * (static_cast<double>(i) * i) / (sigma * sigma));
    k[i + radius] = v;
    z += v;
  }
  for (auto& v : k) v /= z;
  return k;
}

template <typename T>
Tensor4T<T> gaussian_blur(const Tensor4T<T>& input, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const int64_t radius = (static_cast<int64_t>(k.size()) - 1) / 2;
  const Shape4& is = input.shape();
  const int64_t B = is.b, C = is.c, H = is.h, W = is.w;

  // horizontal then vertical pass, accumulation in double
  Tensor4T<T> tmp = Tensor4T<T>::zeros(B, C, H, W);
  parallel_for(B * C, [&](int64_t lo, int64_t hi) {
    for (int64_t idx = lo; idx < hi; ++idx) {
      const T* src = input.data() + idx * H * W;
      T* dst = tmp.data() + idx * H * W;
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int64_t t = -radius; t <= radius; ++t)
            acc += k[t + radius] * src[y * W + reflect(x + t, W)];
          dst[y * W + x] = static_cast<T>(acc);
        }
    }
  });
  Tensor4T<T> out = Tensor4T<T>::zeros(B, C, H, W);
  parallel_for(B * C, [&](int64_t lo, int64_t hi) {
    for (int64_t idx = lo; idx < hi; ++idx) {
      const T* src = tmp.data() + idx * H * W;
      T* dst = out.data() + idx * H * W;
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int64_t t = -radius; t <= radius; ++t)
            acc += k[t + radius] * src[reflect(y + t, H) * W + x];
          dst[y * W + x] = static_cast<T>(acc);
        }
    }
  });
  return out;
}

std::array<double, 4> catmull_rom_weights(double f) {
  return {cubic_a_half(1.0 + f), cubic_a_half(f), cubic_a_half(1.0 - f),
          cubic_a_half(2.0 - f)};
}

template <typename T>
Tensor4T<T> bicubic_resize(const Tensor4T<T>& input, double scl) {
  if (!(scl > 0.0))
    throw ValueError("bicubic_resize: scale must be positive");
  const Shape4& is = input.shape();
  const int64_t OH = std::llround(static_cast<double>(is.h) * scl);
  const int64_t OW = std::llround(static_cast<double>(is.w) * scl);
  if (OH < 1 || OW < 1)
    throw ValueError("bicubic_resize: degenerate output size " +
                     std::to_string(OH) + "x" + std::to_string(OW));

  const ResampleAxis ax = make_axis(is.w, OW, scl);
  const ResampleAxis ay = make_axis(is.h, OH, scl);
  const int64_t B = is.b, C = is.c, H = is.h, W = is.w;

  // horizontal pass (H x OW), then vertical (OH x OW)
  Tensor4T<T> tmp = Tensor4T<T>::zeros(B, C, H, OW);
  parallel_for(B * C, [&](int64_t lo, int64_t hi) {
    for (int64_t idx = lo; idx < hi; ++idx) {
      const T* src = input.data() + idx * H * W;
      T* dst = tmp.data() + idx * H * OW;
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < OW; ++x) {
          const auto& wts = ax.taps[x];
          const int64_t b0 = ax.base[x];
          double acc = 0.0;
          for (int64_t t = 0; t < 4; ++t) {
            int64_t xi = std::clamp<int64_t>(b0 + t, 0, W - 1);
            acc += wts[t] * src[y * W + xi];
          }
          dst[y * OW + x] = static_cast<T>(acc);
        }
    }
  });
  Tensor4T<T> out = Tensor4T<T>::zeros(B, C, OH, OW);
  parallel_for(B * C, [&](int64_t lo, int64_t hi) {
    for (int64_t idx = lo; idx < hi; ++idx) {
      const T* src = tmp.data() + idx * H * OW;
      T* dst = out.data() + idx * OH * OW;
      for (int64_t y = 0; y < OH; ++y) {
        const auto& wts = ay.taps[y];
        const int64_t b0 = ay.base[y];
        for (int64_t x = 0; x < OW; ++x) {
          double acc = 0.0;
          for (int64_t t = 0; t < 4; ++t) {
            int64_t yi = std::clamp<int64_t>(b0 + t, 0, H - 1);
            acc += wts[t] * src[yi * OW + x];
          }
          dst[y * OW + x] = static_cast<T>(acc);
        }
      }
    }
  });
  return out;
}

#define GRNN_INSTANTIATE_OPS(T)                                               \
  template Tensor4T<T> conv2d<T>(const Tensor4T<T>&, const Tensor4T<T>&,      \
                                 const Tensor4T<T>*, const ConvSpec&);        \
  template Tensor4T<T> depthwise_conv2d<T>(const Tensor4T<T>&,               \
                                           const Tensor4T<T>&,               \
                                           const Tensor4T<T>*);              \
  template Tensor4T<T> relu<T>(const Tensor4T<T>&);                          \
  template Tensor4T<T> concat_channels<T>(const Tensor4T<T>&,               \
                                          const Tensor4T<T>&);              \
  template Tensor4T<T> slice_channels<T>(const Tensor4T<T>&, int64_t,        \
                                         int64_t);                           \
  template Tensor4T<T> add<T>(const Tensor4T<T>&, const Tensor4T<T>&);       \
  template Tensor4T<T> sub<T>(const Tensor4T<T>&, const Tensor4T<T>&);       \
  template Tensor4T<T> mul<T>(const Tensor4T<T>&, const Tensor4T<T>&);       \
  template Tensor4T<T> scale<T>(const Tensor4T<T>&, T);                      \
  template T sum<T>(const Tensor4T<T>&);                                     \
  template Tensor4T<T> pixel_shuffle<T>(const Tensor4T<T>&, int64_t);        \
  template Tensor4T<T> space_to_depth<T>(const Tensor4T<T>&, int64_t);       \
  template Tensor4T<T> gaussian_blur<T>(const Tensor4T<T>&, double);         \
  template Tensor4T<T> bicubic_resize<T>(const Tensor4T<T>&, double);

GRNN_INSTANTIATE_OPS(float)
GRNN_INSTANTIATE_OPS(double)

#undef GRNN_INSTANTIATE_OPS

}  // namespace grnn
