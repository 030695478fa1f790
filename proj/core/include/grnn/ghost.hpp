#ifndef GRNN_GHOST_HPP
#define GRNN_GHOST_HPP

#include <cstdint>
#include <map>
#include <string>

#include "grnn/autodiff.hpp"
#include "grnn/tensor.hpp"

namespace grnn {

// A Ghost block: a primary convolution produces M intrinsic maps, one cheap
// per-channel operation (3x3 depthwise by default) derives ghost maps from
// them, and the concatenation is truncated to exactly N output channels,
// intrinsic maps first. ratio == 1 degenerates to a plain convolution.
struct GhostBlockConfig {
  int64_t in_channels = 0;
  int64_t out_channels = 0;  // N
  int64_t ratio = 2;         // S
  int64_t primary_kernel = 3;
  int64_t cheap_kernel = 3;

  // M = ceil(N / S); M*S >= N, surplus channels are truncated
  int64_t intrinsic() const { return (out_channels + ratio - 1) / ratio; }
  void validate() const;
};

template <typename T>
struct GhostBlockWeightsT {
  Tensor4T<T> primary_w;  // [M, in, k, k]
  Tensor4T<T> primary_b;  // (1, M, 1, 1)
  Tensor4T<T> cheap_w;    // [M*(S-1), 1, k', k']; empty when S == 1
  Tensor4T<T> cheap_b;    // (1, M*(S-1), 1, 1); empty when S == 1

  bool has_cheap() const { return cheap_w.numel() > 0; }
};

using GhostBlockWeights = GhostBlockWeightsT<float>;

template <typename T>
Tensor4T<T> ghost_forward(const Tensor4T<T>& input,
                          const GhostBlockWeightsT<T>& w,
                          const GhostBlockConfig& cfg);

// Tape version; weight node ids under `prefix` follow the same naming as
// ghost_weight_names (primary.weight / primary.bias / cheap.weight /
// cheap.bias, or weight / bias when ratio == 1).
template <typename T>
NodeId ghost_forward_tape(Tape<T>& tape, NodeId input,
                          const std::map<std::string, NodeId>& weight_ids,
                          const std::string& prefix,
                          const GhostBlockConfig& cfg);

struct GhostParamCount {
  uint64_t ghost = 0;  // M*in*k^2 + M + M*(S-1)*(k'^2 + 1)
  uint64_t plain = 0;  // N*in*k^2 + N
  double ratio = 0.0;  // ghost / plain
};
GhostParamCount ghost_param_count(const GhostBlockConfig& cfg);

struct GhostMacCount {
  uint64_t ghost = 0;  // H*W*(M*in*k^2 + M*(S-1)*k'^2)
  uint64_t plain = 0;  // H*W*N*in*k^2
};
GhostMacCount ghost_flop_count(const GhostBlockConfig& cfg, int64_t h,
                               int64_t w);

// ghost/plain MAC ratio approaches 1/S + k'^2/(in*k^2) for large N
double ghost_ratio_limit(const GhostBlockConfig& cfg);

}  // namespace grnn

#endif  // GRNN_GHOST_HPP
