#ifndef GRNN_SRC_WIRING_HPP
#define GRNN_SRC_WIRING_HPP

// Shared forward wiring for the ghost block and the recurrent cell,
// instantiated over two executors: EagerExec computes tensors directly,
// TapeExec records the same graph on an autodiff tape. Keeping one wiring
// guarantees the inference path and the gradient path cannot diverge.

#include <cmath>
#include <string>
#include <vector>

#include "grnn/autodiff.hpp"
#include "grnn/ghost.hpp"
#include "grnn/model.hpp"
#include "grnn/ops.hpp"

namespace grnn::detail {

template <typename T>
void ensure_finite(const std::string& layer, const Tensor4T<T>& v) {
  for (int64_t i = 0; i < v.numel(); ++i)
    if (!std::isfinite(v.data()[i]))
      throw NumericError("non-finite activation at layer '" + layer + "'");
}

template <typename T>
struct EagerExec {
  using V = Tensor4T<T>;
  using W = const Tensor4T<T>*;
  static constexpr W kNoWeight = nullptr;
  static bool has(W w) { return w != nullptr; }

  const ProbeFnT<T>* probe_fn = nullptr;
  bool finite_checks = false;

  V conv2d(const V& x, W w, W b, const ConvSpec& s) {
    return grnn::conv2d(x, *w, b, s);
  }
  V depthwise(const V& x, W w, W b) {
    return grnn::depthwise_conv2d(x, *w, b);
  }
  V relu(const V& x) { return grnn::relu(x); }
  V add(const V& a, const V& b) { return grnn::add(a, b); }
  V concat(const V& a, const V& b) { return grnn::concat_channels(a, b); }
  V slice(const V& x, int64_t b0, int64_t b1) {
    return grnn::slice_channels(x, b0, b1);
  }
  V pixel_shuffle(const V& x, int64_t r) { return grnn::pixel_shuffle(x, r); }
  V space_to_depth(const V& x, int64_t r) {
    return grnn::space_to_depth(x, r);
  }
  V constant(Tensor4T<T> v) { return v; }
  V bicubic_up(const V& x, int64_t r) {
    return grnn::bicubic_resize(x, static_cast<double>(r));
  }
  void probe(const std::string& name, const V& v) {
    if (probe_fn && *probe_fn) (*probe_fn)(name, v);
  }
  void check_finite(const std::string& layer, const V& v) {
    if (finite_checks) ensure_finite(layer, v);
  }
};

template <typename T>
struct TapeExec {
  using V = NodeId;
  using W = NodeId;
  static constexpr W kNoWeight = kNoNode;
  static bool has(W w) { return w != kNoNode; }

  Tape<T>* tape = nullptr;

  V conv2d(V x, W w, W b, const ConvSpec& s) { return tape->conv2d(x, w, b, s); }
  V depthwise(V x, W w, W b) { return tape->depthwise_conv2d(x, w, b); }
  V relu(V x) { return tape->relu(x); }
  V add(V a, V b) { return tape->add(a, b); }
  V concat(V a, V b) { return tape->concat_channels(a, b); }
  V slice(V x, int64_t b0, int64_t b1) {
    return tape->slice_channels(x, b0, b1);
  }
  V pixel_shuffle(V x, int64_t r) { return tape->pixel_shuffle(x, r); }
  V space_to_depth(V x, int64_t r) { return tape->space_to_depth(x, r); }
  V constant(Tensor4T<T> v) { return tape->constant(std::move(v)); }
  V bicubic_up(V x, int64_t r) {
    // inputs carry no gradient; the upscaled frame is a constant leaf
    return tape->constant(
        grnn::bicubic_resize(tape->value(x), static_cast<double>(r)));
  }
  void probe(const std::string&, V) {}
  void check_finite(const std::string&, V) {}
};

template <typename E>
struct GhostRefs {
  typename E::W primary_w = E::kNoWeight;
  typename E::W primary_b = E::kNoWeight;
  typename E::W cheap_w = E::kNoWeight;
  typename E::W cheap_b = E::kNoWeight;
};

template <typename E>
typename E::V ghost_forward_wired(E& ex, const typename E::V& x,
                                  const GhostRefs<E>& w,
                                  const GhostBlockConfig& cfg) {
  cfg.validate();
  const int64_t m = cfg.intrinsic();
  const int64_t s = cfg.ratio;
  const int64_t n = cfg.out_channels;

  ConvSpec primary = ConvSpec::same(cfg.in_channels, m, cfg.primary_kernel,
                                    E::has(w.primary_b));
  auto intrinsic = ex.conv2d(x, w.primary_w, w.primary_b, primary);
  if (s == 1) return intrinsic;  // plain convolution, M == N

  // one depthwise pass over S-1 stacked copies of the intrinsic maps
  // produces every ghost map; kernel row m + (j-2)*M serves y'_{m,j}
  auto stacked = intrinsic;
  for (int64_t j = 3; j <= s; ++j) stacked = ex.concat(stacked, intrinsic);
  auto ghosts = ex.depthwise(stacked, w.cheap_w, w.cheap_b);
  auto out = ex.concat(intrinsic, ghosts);
  if (m * s > n) out = ex.slice(out, 0, n);
  return out;
}

template <typename E>
struct GrnnRefs {
  struct Block {
    GhostRefs<E> conv1;
    GhostRefs<E> conv2;
  };
  GhostRefs<E> fusion;
  std::vector<Block> blocks;
  GhostRefs<E> state_head;
  GhostRefs<E> recon_head;
};

template <typename E>
struct CellOut {
  typename E::V output;
  typename E::V hidden;
};

// x = concat(F_t, F_{t-1}, space_to_depth(O_{t-1}), h_{t-1})
// feat = ghost_fusion(x); trunk = long-skip residual stack over feat
// h_t = relu(conv_state(trunk)); O_t = shuffle(conv_recon(trunk)) + bicubic
template <typename E>
CellOut<E> cell_forward_wired(E& ex, const typename E::V& frame,
                              const typename E::V& prev_frame,
                              const typename E::V& prev_output,
                              const typename E::V& prev_hidden,
                              const GrnnRefs<E>& w, const GrnnConfig& cfg) {
  auto x = ex.concat(ex.concat(frame, prev_frame),
                     ex.concat(ex.space_to_depth(prev_output, cfg.scale),
                               prev_hidden));
  auto feat = ghost_forward_wired(ex, x, w.fusion, fusion_cfg(cfg));
  ex.check_finite("fusion", feat);
  ex.probe("fusion", feat);

  const GhostBlockConfig tc = trunk_cfg(cfg);
  auto cur = feat;
  for (size_t k = 0; k < w.blocks.size(); ++k) {
    auto t = ghost_forward_wired(ex, cur, w.blocks[k].conv1, tc);
    t = ex.relu(t);
    t = ghost_forward_wired(ex, t, w.blocks[k].conv2, tc);
    cur = ex.add(t, cur);
    const std::string name = "trunk." + std::to_string(k);
    ex.check_finite(name, cur);
    ex.probe(name, cur);
  }
  auto trunk = ex.add(cur, feat);
  ex.probe("trunk", trunk);

  auto hidden = ex.relu(
      ghost_forward_wired(ex, trunk, w.state_head, state_head_cfg(cfg)));
  ex.check_finite("state", hidden);
  ex.probe("state", hidden);

  auto recon = ghost_forward_wired(ex, trunk, w.recon_head, recon_head_cfg(cfg));
  auto out = ex.add(ex.pixel_shuffle(recon, cfg.scale),
                    ex.bicubic_up(frame, cfg.scale));
  ex.check_finite("output", out);
  ex.probe("output", out);
  return {out, hidden};
}

}  // namespace grnn::detail

#endif  // GRNN_SRC_WIRING_HPP
