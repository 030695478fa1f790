#ifndef GRNN_AUTODIFF_HPP
#define GRNN_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grnn/ops.hpp"
#include "grnn/tensor.hpp"

namespace grnn {

using NodeId = int32_t;
inline constexpr NodeId kNoNode = -1;

// Reverse-mode tape over the closed op set the model needs. Values are
// computed eagerly as nodes are recorded; backward walks the node list in
// reverse creation order (reverse topological order by construction) and
// accumulates gradients additively, so a parameter used at several time
// steps receives the sum over all uses.
//
// A tape is confined to one thread; independent tapes may run concurrently.
template <typename T>
class Tape {
 public:
  // Leaves. Constants receive no gradient entry; params do.
  NodeId constant(Tensor4T<T> value);
  NodeId param(const std::string& name, Tensor4T<T> value);

  NodeId conv2d(NodeId input, NodeId weights, NodeId bias, const ConvSpec& spec);
  NodeId depthwise_conv2d(NodeId input, NodeId weights, NodeId bias);
  NodeId relu(NodeId input);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, T s);
  NodeId concat_channels(NodeId a, NodeId b);
  NodeId slice_channels(NodeId a, int64_t begin, int64_t end);
  NodeId pixel_shuffle(NodeId a, int64_t r);
  NodeId space_to_depth(NodeId a, int64_t r);
  NodeId sum(NodeId a);                        // scalar (1,1,1,1)
  NodeId l1_loss(NodeId pred, NodeId target);  // mean |pred - target|, scalar

  // Copies the node's value into a fresh constant: gradient stops here.
  NodeId detach(NodeId a);

  const Tensor4T<T>& value(NodeId id) const;
  size_t size() const { return nodes_.size(); }

  // Reverse accumulation from a scalar loss node. Returns dLoss/dParam for
  // every param node reachable from the loss, keyed by param name.
  // Forward values are left untouched; may be called once per tape.
  std::map<std::string, Tensor4T<T>> backward(NodeId loss);

  // Gradient of an individual node after backward() (null if none reached it).
  const Tensor4T<T>* grad(NodeId id) const;

 private:
  enum class Op {
    kConstant, kParam, kConv2d, kDepthwise, kRelu, kAdd, kSub, kMul, kScale,
    kConcat, kSlice, kPixelShuffle, kSpaceToDepth, kSum, kL1,
  };

  struct Node {
    Op op = Op::kConstant;
    NodeId a = kNoNode;
    NodeId b = kNoNode;
    NodeId c = kNoNode;  // bias input of conv ops
    Tensor4T<T> value;
    ConvSpec spec;
    int64_t i0 = 0, i1 = 0;
    T scalar = T(0);
    std::string name;
  };

  static Node make(Op op, NodeId a, NodeId b, NodeId c, Tensor4T<T> value);
  NodeId push(Node n);
  NodeId check(NodeId id) const;
  void accumulate(NodeId id, Tensor4T<T> g);

  std::vector<Node> nodes_;
  std::vector<Tensor4T<T>> grads_;
  std::vector<bool> has_grad_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

// Result of comparing analytic gradients against central finite differences.
struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  double tol = 0.0;
  int64_t samples = 0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string str() const;
};

using ParamMapD = std::map<std::string, Tensor4d>;

// Builds the scalar loss node on the given tape from named param nodes.
using LossBuilder =
    std::function<NodeId(Tape<double>&, const std::map<std::string, NodeId>&)>;

// For every parameter element (all of them when a tensor has at most
// `max_samples_per_param` elements, otherwise a seeded random sample of that
// many), compares the analytic gradient against (L(p+h) - L(p-h)) / (2h),
// all in double. Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const LossBuilder& build, const ParamMapD& params,
                           double h, double tol,
                           uint64_t seed = 0x6b9fb0c3a91ULL,
                           int64_t max_samples_per_param = 64);

}  // namespace grnn

#endif  // GRNN_AUTODIFF_HPP
