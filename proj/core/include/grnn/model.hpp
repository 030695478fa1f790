#ifndef GRNN_MODEL_HPP
#define GRNN_MODEL_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "grnn/autodiff.hpp"
#include "grnn/data.hpp"
#include "grnn/ghost.hpp"
#include "grnn/tensor.hpp"

namespace grnn {

// Frame-recurrent VSR cell: a Ghost fusion block over the concatenated
// inputs (F_t, F_{t-1}, space_to_depth(O_{t-1}), h_{t-1}), a residual conv
// trunk with a long skip, and two heads emitting the next hidden state and
// the SR frame on top of the bicubic-upscaled input.
struct GrnnConfig {
  int64_t scale = 4;
  int64_t channels = 128;
  int64_t num_res_blocks = 10;
  int64_t color_channels = 3;
  int64_t ghost_ratio = 2;
  int64_t primary_kernel = 3;
  int64_t cheap_kernel = 3;
  bool ghost_trunk = false;  // replace trunk convs with ghost blocks too

  void validate() const;
};

// Per-layer ghost configs implied by a GrnnConfig. Heads and (by default)
// trunk convolutions are ratio-1 blocks, i.e. plain convolutions.
GhostBlockConfig fusion_cfg(const GrnnConfig& c);
GhostBlockConfig trunk_cfg(const GrnnConfig& c);
GhostBlockConfig state_head_cfg(const GrnnConfig& c);
GhostBlockConfig recon_head_cfg(const GrnnConfig& c);

template <typename T>
struct GrnnWeightsT {
  struct Block {
    GhostBlockWeightsT<T> conv1;
    GhostBlockWeightsT<T> conv2;
  };
  GhostBlockWeightsT<T> fusion;
  std::vector<Block> blocks;
  GhostBlockWeightsT<T> state_head;
  GhostBlockWeightsT<T> recon_head;
};

using GrnnWeights = GrnnWeightsT<float>;

template <typename T>
struct RecurrentStateT {
  Tensor4T<T> hidden;       // (B, channels, H, W), LR resolution
  Tensor4T<T> prev_output;  // (B, 3, H*scale, W*scale)
};

using RecurrentState = RecurrentStateT<float>;

// Kaiming-uniform fan-in conv weights, zero biases, zero reconstruction
// head (so the step-0 output is exactly the bicubic baseline).
template <typename T>
GrnnWeightsT<T> init_weights(const GrnnConfig& cfg, uint64_t seed);

template <typename T>
GrnnWeightsT<T> zero_weights(const GrnnConfig& cfg);

// Flat named view of every weight tensor; names match the archive layout
// (fusion.primary.weight, trunk.0.conv1.weight, recon_head.bias, ...).
template <typename T>
std::map<std::string, Tensor4T<T>> weights_to_map(const GrnnWeightsT<T>& w,
                                                  const GrnnConfig& cfg);
template <typename T>
GrnnWeightsT<T> weights_from_map(const std::map<std::string, Tensor4T<T>>& m,
                                 const GrnnConfig& cfg);

// All-zero state; at t0 the previous estimates are blank.
template <typename T>
RecurrentStateT<T> init_state_t(const GrnnConfig& cfg, int64_t batch,
                                int64_t h, int64_t w);
RecurrentState init_state(const GrnnConfig& cfg, int64_t batch, int64_t h,
                          int64_t w);

// Observation hook for intermediate activations. Layers: "fusion",
// "trunk.<k>", "trunk", "state", "output".
template <typename T>
using ProbeFnT = std::function<void(const std::string&, const Tensor4T<T>&)>;
using ProbeFn = ProbeFnT<float>;

template <typename T>
std::pair<Tensor4T<T>, RecurrentStateT<T>> cell_forward(
    const Tensor4T<T>& frame, const Tensor4T<T>& prev_frame,
    const RecurrentStateT<T>& state, const GrnnWeightsT<T>& w,
    const GrnnConfig& cfg, const ProbeFnT<T>* probe = nullptr);

// Full recurrence over a clip; at t=0 the previous frame is all-zero.
// reset_state re-initializes the state before every frame (forced t0
// behavior, for ablation).
template <typename T>
std::vector<Tensor4T<T>> sequence_forward_frames(
    const std::vector<Tensor4T<T>>& lr_frames, const GrnnWeightsT<T>& w,
    const GrnnConfig& cfg, bool reset_state = false,
    const ProbeFnT<T>* probe = nullptr);

VideoSequence sequence_forward(const VideoSequence& lr, const GrnnWeights& w,
                               const GrnnConfig& cfg, bool reset_state = false,
                               const ProbeFn* probe = nullptr);

// --- tape (training / gradient) path -------------------------------------

// Registers every weight tensor as a named param node.
template <typename T>
std::map<std::string, NodeId> register_weights(Tape<T>& tape,
                                               const GrnnWeightsT<T>& w,
                                               const GrnnConfig& cfg);

// Unrolls the whole clip on the tape (weights shared across steps) and
// returns the per-frame SR output nodes.
template <typename T>
std::vector<NodeId> sequence_forward_tape(
    Tape<T>& tape, const std::vector<Tensor4T<T>>& lr_frames,
    const std::map<std::string, NodeId>& weight_ids, const GrnnConfig& cfg);

}  // namespace grnn

#endif  // GRNN_MODEL_HPP
