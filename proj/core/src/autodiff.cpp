#include "grnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "grnn/threading.hpp"

namespace grnn {

namespace {

// weights [O,C,kh,kw] -> [C,O,kh,kw] spatially flipped; the kernel of the
// adjoint convolution under stride-1 same padding
template <typename T>
Tensor4T<T> transpose_flip(const Tensor4T<T>& w) {
  const Shape4& s = w.shape();
  Tensor4T<T> out = Tensor4T<T>::zeros(s.c, s.b, s.h, s.w);
  for (int64_t o = 0; o < s.b; ++o)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t i = 0; i < s.h; ++i)
        for (int64_t j = 0; j < s.w; ++j)
          out.at(c, o, i, j) = w.at(o, c, s.h - 1 - i, s.w - 1 - j);
  return out;
}

template <typename T>
Tensor4T<T> flip_depthwise(const Tensor4T<T>& w) {
  const Shape4& s = w.shape();
  Tensor4T<T> out = Tensor4T<T>::zeros(s.b, 1, s.h, s.w);
  for (int64_t c = 0; c < s.b; ++c)
    for (int64_t i = 0; i < s.h; ++i)
      for (int64_t j = 0; j < s.w; ++j)
        out.at(c, 0, i, j) = w.at(c, 0, s.h - 1 - i, s.w - 1 - j);
  return out;
}

// dW[o,c,i,j] = sum_{b,y,x} g[b,o,y,x] * in_pad[b,c,y+i,x+j]
template <typename T>
Tensor4T<T> conv2d_weight_grad(const Tensor4T<T>& input, const Tensor4T<T>& g,
                               int64_t kh, int64_t kw) {
  const Shape4& is = input.shape();
  const int64_t B = is.b, C = is.c, H = is.h, W = is.w;
  const int64_t O = g.shape().c;
  const int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  Tensor4T<T> dw = Tensor4T<T>::zeros(O, C, kh, kw);
  parallel_for(O * C, [&](int64_t lo, int64_t hi) {
    for (int64_t idx = lo; idx < hi; ++idx) {
      const int64_t o = idx / C, c = idx % C;
      for (int64_t i = 0; i < kh; ++i) {
        const int64_t dy = i - ph;
        const int64_t y0 = std::max<int64_t>(0, -dy);
        const int64_t y1 = std::min<int64_t>(H, H - dy);
        for (int64_t j = 0; j < kw; ++j) {
          const int64_t dx = j - pw;
          const int64_t x0 = std::max<int64_t>(0, -dx);
          const int64_t x1 = std::min<int64_t>(W, W - dx);
          T acc = T(0);
          for (int64_t b = 0; b < B; ++b) {
            const T* gp = g.data() + (b * O + o) * H * W;
            const T* ip = input.data() + (b * C + c) * H * W;
            for (int64_t y = y0; y < y1; ++y) {
              const T* grow = gp + y * W;
              const T* irow = ip + (y + dy) * W + dx;
              for (int64_t x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            }
          }
          dw.at(o, c, i, j) = acc;
        }
      }
    }
  });
  return dw;
}

template <typename T>
Tensor4T<T> depthwise_weight_grad(const Tensor4T<T>& input,
                                  const Tensor4T<T>& g, int64_t kh,
                                  int64_t kw) {
  const Shape4& is = input.shape();
  const int64_t B = is.b, C = is.c, H = is.h, W = is.w;
  const int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  Tensor4T<T> dw = Tensor4T<T>::zeros(C, 1, kh, kw);
  parallel_for(C, [&](int64_t lo, int64_t hi) {
    for (int64_t c = lo; c < hi; ++c) {
      for (int64_t i = 0; i < kh; ++i) {
        const int64_t dy = i - ph;
        const int64_t y0 = std::max<int64_t>(0, -dy);
        const int64_t y1 = std::min<int64_t>(H, H - dy);
        for (int64_t j = 0; j < kw; ++j) {
          const int64_t dx = j - pw;
          const int64_t x0 = std::max<int64_t>(0, -dx);
          const int64_t x1 = std::min<int64_t>(W, W - dx);
          T acc = T(0);
          for (int64_t b = 0; b < B; ++b) {
            const T* gp = g.data() + (b * C + c) * H * W;
            const T* ip = input.data() + (b * C + c) * H * W;
            for (int64_t y = y0; y < y1; ++y) {
              const T* grow = gp + y * W;
              const T* irow = ip + (y + dy) * W + dx;
              for (int64_t x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            }
          }
          dw.at(c, 0, i, j) = acc;
        }
      }
    }
  });
  return dw;
}

// dB[o] = sum over batch and space of g[:,o,:,:], shaped (1,O,1,1)
template <typename T>
Tensor4T<T> bias_grad(const Tensor4T<T>& g) {
  const Shape4& s = g.shape();
  Tensor4T<T> db = Tensor4T<T>::zeros(1, s.c, 1, 1);
  for (int64_t b = 0; b < s.b; ++b)
    for (int64_t c = 0; c < s.c; ++c) {
      T acc = T(0);
      const T* p = g.data() + (b * s.c + c) * s.h * s.w;
      for (int64_t i = 0; i < s.h * s.w; ++i) acc += p[i];
      db.at(0, c, 0, 0) += acc;
    }
  return db;
}

}  // namespace

template <typename T>
typename Tape<T>::Node Tape<T>::make(Op op, NodeId a, NodeId b, NodeId c,
                                     Tensor4T<T> value) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.value = std::move(value);
  return n;
}

template <typename T>
NodeId Tape<T>::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
NodeId Tape<T>::check(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw ValueError("tape: node id " + std::to_string(id) +
                     " does not reference an earlier node");
  return id;
}

template <typename T>
NodeId Tape<T>::constant(Tensor4T<T> value) {
  return push(make(Op::kConstant, kNoNode, kNoNode, kNoNode, std::move(value)));
}

template <typename T>
NodeId Tape<T>::param(const std::string& name, Tensor4T<T> value) {
  for (const auto& n : nodes_)
    if (n.op == Op::kParam && n.name == name)
      throw ValueError("tape: duplicate param name '" + name + "'");
  Node n = make(Op::kParam, kNoNode, kNoNode, kNoNode,
         std::move(value));
  n.name = name;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::conv2d(NodeId input, NodeId weights, NodeId bias,
                       const ConvSpec& spec) {
  check(input);
  check(weights);
  const Tensor4T<T>* b =
      bias == kNoNode ? nullptr : &nodes_[check(bias)].value;
  Node n = make(Op::kConv2d, input, weights, bias,
         grnn::conv2d(nodes_[input].value, nodes_[weights].value, b, spec));
  n.spec = spec;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::depthwise_conv2d(NodeId input, NodeId weights, NodeId bias) {
  check(input);
  check(weights);
  const Tensor4T<T>* b =
      bias == kNoNode ? nullptr : &nodes_[check(bias)].value;
  Node n = make(Op::kDepthwise, input, weights, bias,
         grnn::depthwise_conv2d(nodes_[input].value, nodes_[weights].value, b));
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::relu(NodeId input) {
  check(input);
  return push(make(Op::kRelu, input, kNoNode, kNoNode,
                   grnn::relu(nodes_[input].value)));
}

template <typename T>
NodeId Tape<T>::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  return push(make(Op::kAdd, a, b, kNoNode,
                   grnn::add(nodes_[a].value, nodes_[b].value)));
}

template <typename T>
NodeId Tape<T>::sub(NodeId a, NodeId b) {
  check(a);
  check(b);
  return push(make(Op::kSub, a, b, kNoNode,
                   grnn::sub(nodes_[a].value, nodes_[b].value)));
}

template <typename T>
NodeId Tape<T>::mul(NodeId a, NodeId b) {
  check(a);
  check(b);
  return push(make(Op::kMul, a, b, kNoNode,
                   grnn::mul(nodes_[a].value, nodes_[b].value)));
}

template <typename T>
NodeId Tape<T>::scale(NodeId a, T s) {
  check(a);
  Node n = make(Op::kScale, a, kNoNode, kNoNode,
         grnn::scale(nodes_[a].value, s));
  n.scalar = s;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::concat_channels(NodeId a, NodeId b) {
  check(a);
  check(b);
  return push(make(Op::kConcat, a, b, kNoNode,
                   grnn::concat_channels(nodes_[a].value, nodes_[b].value)));
}

template <typename T>
NodeId Tape<T>::slice_channels(NodeId a, int64_t begin, int64_t end) {
  check(a);
  Node n = make(Op::kSlice, a, kNoNode, kNoNode,
         grnn::slice_channels(nodes_[a].value, begin, end));
  n.i0 = begin;
  n.i1 = end;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::pixel_shuffle(NodeId a, int64_t r) {
  check(a);
  Node n = make(Op::kPixelShuffle, a, kNoNode, kNoNode,
         grnn::pixel_shuffle(nodes_[a].value, r));
  n.i0 = r;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::space_to_depth(NodeId a, int64_t r) {
  check(a);
  Node n = make(Op::kSpaceToDepth, a, kNoNode, kNoNode,
         grnn::space_to_depth(nodes_[a].value, r));
  n.i0 = r;
  return push(std::move(n));
}

template <typename T>
NodeId Tape<T>::sum(NodeId a) {
  check(a);
  Tensor4T<T> v = Tensor4T<T>::zeros(1, 1, 1, 1);
  v.data()[0] = grnn::sum(nodes_[a].value);
  return push(make(Op::kSum, a, kNoNode, kNoNode, std::move(v)));
}

template <typename T>
NodeId Tape<T>::l1_loss(NodeId pred, NodeId target) {
  check(pred);
  check(target);
  const Tensor4T<T>& p = nodes_[pred].value;
  const Tensor4T<T>& t = nodes_[target].value;
  if (!p.same_shape(t))
    throw ShapeError("l1_loss: shape mismatch " + p.shape().str() + " vs " +
                     t.shape().str());
  T acc = T(0);
  for (int64_t i = 0; i < p.numel(); ++i)
    acc += std::abs(p.data()[i] - t.data()[i]);
  Tensor4T<T> v = Tensor4T<T>::zeros(1, 1, 1, 1);
  v.data()[0] = acc / static_cast<T>(p.numel());
  return push(make(Op::kL1, pred, target, kNoNode, std::move(v)));
}

template <typename T>
NodeId Tape<T>::detach(NodeId a) {
  check(a);
  return constant(nodes_[a].value);
}

template <typename T>
const Tensor4T<T>& Tape<T>::value(NodeId id) const {
  check(id);
  return nodes_[id].value;
}

template <typename T>
void Tape<T>::accumulate(NodeId id, Tensor4T<T> g) {
  if (!has_grad_[id]) {
    grads_[id] = std::move(g);
    has_grad_[id] = true;
  } else {
    grads_[id] = grnn::add(grads_[id], g);
  }
}

template <typename T>
const Tensor4T<T>* Tape<T>::grad(NodeId id) const {
  check(id);
  if (grads_.empty() || !has_grad_[id]) return nullptr;
  return &grads_[id];
}

template <typename T>
std::map<std::string, Tensor4T<T>> Tape<T>::backward(NodeId loss) {
  check(loss);
  const Shape4& ls = nodes_[loss].value.shape();
  if (ls.numel() != 1)
    throw ShapeError("backward: loss must be scalar (1,1,1,1), got " +
                     ls.str());

  grads_.assign(nodes_.size(), Tensor4T<T>());
  has_grad_.assign(nodes_.size(), false);
  accumulate(loss, Tensor4T<T>::full(1, 1, 1, 1, T(1)));

  for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
    if (!has_grad_[id]) continue;
    const Node& n = nodes_[id];
    const Tensor4T<T>& g = grads_[id];
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kConv2d: {
        const Tensor4T<T>& x = nodes_[n.a].value;
        const Tensor4T<T>& w = nodes_[n.b].value;
        ConvSpec adj = ConvSpec{n.spec.out_channels, n.spec.in_channels,
                                n.spec.kh, n.spec.kw, false};
        accumulate(n.a, grnn::conv2d<T>(g, transpose_flip(w), nullptr, adj));
        accumulate(n.b, conv2d_weight_grad(x, g, n.spec.kh, n.spec.kw));
        if (n.c != kNoNode) accumulate(n.c, bias_grad(g));
        break;
      }
      case Op::kDepthwise: {
        const Tensor4T<T>& x = nodes_[n.a].value;
        const Tensor4T<T>& w = nodes_[n.b].value;
        accumulate(n.a, grnn::depthwise_conv2d<T>(g, flip_depthwise(w), nullptr));
        accumulate(n.b, depthwise_weight_grad(x, g, w.shape().h, w.shape().w));
        if (n.c != kNoNode) accumulate(n.c, bias_grad(g));
        break;
      }
      case Op::kRelu: {
        const Tensor4T<T>& x = nodes_[n.a].value;
        Tensor4T<T> gx = g;
        for (int64_t i = 0; i < gx.numel(); ++i)
          if (!(x.data()[i] > T(0))) gx.data()[i] = T(0);
        accumulate(n.a, std::move(gx));
        break;
      }
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        accumulate(n.b, grnn::scale(g, T(-1)));
        break;
      case Op::kMul:
        accumulate(n.a, grnn::mul(g, nodes_[n.b].value));
        accumulate(n.b, grnn::mul(g, nodes_[n.a].value));
        break;
      case Op::kScale:
        accumulate(n.a, grnn::scale(g, n.scalar));
        break;
      case Op::kConcat: {
        const int64_t ca = nodes_[n.a].value.channels();
        const int64_t cb = nodes_[n.b].value.channels();
        accumulate(n.a, grnn::slice_channels(g, 0, ca));
        accumulate(n.b, grnn::slice_channels(g, ca, ca + cb));
        break;
      }
      case Op::kSlice: {
        const Shape4& xs = nodes_[n.a].value.shape();
        Tensor4T<T> gx = Tensor4T<T>::zeros(xs.b, xs.c, xs.h, xs.w);
        const int64_t plane = xs.h * xs.w;
        const int64_t gc = n.i1 - n.i0;
        for (int64_t b = 0; b < xs.b; ++b)
          std::copy_n(g.data() + b * gc * plane, gc * plane,
                      gx.data() + (b * xs.c + n.i0) * plane);
        accumulate(n.a, std::move(gx));
        break;
      }
      case Op::kPixelShuffle:
        accumulate(n.a, grnn::space_to_depth(g, n.i0));
        break;
      case Op::kSpaceToDepth:
        accumulate(n.a, grnn::pixel_shuffle(g, n.i0));
        break;
      case Op::kSum: {
        const Shape4& xs = nodes_[n.a].value.shape();
        accumulate(n.a, Tensor4T<T>::full(xs.b, xs.c, xs.h, xs.w,
                                          g.data()[0]));
        break;
      }
      case Op::kL1: {
        const Tensor4T<T>& p = nodes_[n.a].value;
        const Tensor4T<T>& t = nodes_[n.b].value;
        const T s = g.data()[0] / static_cast<T>(p.numel());
        Tensor4T<T> gp = Tensor4T<T>::zeros(p.shape().b, p.shape().c,
                                            p.shape().h, p.shape().w);
        for (int64_t i = 0; i < p.numel(); ++i) {
          const T d = p.data()[i] - t.data()[i];
          gp.data()[i] = d > T(0) ? s : (d < T(0) ? -s : T(0));
        }
        accumulate(n.b, grnn::scale(gp, T(-1)));
        accumulate(n.a, std::move(gp));
        break;
      }
    }
  }

  std::map<std::string, Tensor4T<T>> out;
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id)
    if (nodes_[id].op == Op::kParam && has_grad_[id])
      out.emplace(nodes_[id].name, grads_[id]);
  return out;
}

template class Tape<float>;
template class Tape<double>;

std::string GradCheckReport::str() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_err
     << " tol=" << tol << " samples=" << samples;
  if (!worst_param.empty())
    os << " worst=" << worst_param << "[" << worst_index
       << "] analytic=" << worst_analytic << " numeric=" << worst_numeric;
  return os.str();
}

GradCheckReport grad_check(const LossBuilder& build, const ParamMapD& params,
                           double h, double tol, uint64_t seed,
                           int64_t max_samples_per_param) {
  if (!(h > 0))
    throw ValueError("grad_check: step h must be positive");

  auto eval_loss = [&](const ParamMapD& p) {
    Tape<double> tape;
    std::map<std::string, NodeId> ids;
    for (const auto& [name, value] : p) ids[name] = tape.param(name, value);
    NodeId loss = build(tape, ids);
    return tape.value(loss).data()[0];
  };

  // analytic gradients
  Tape<double> tape;
  std::map<std::string, NodeId> ids;
  for (const auto& [name, value] : params) ids[name] = tape.param(name, value);
  NodeId loss = build(tape, ids);
  auto grads = tape.backward(loss);

  GradCheckReport report;
  report.tol = tol;
  std::mt19937_64 rng(seed);

  ParamMapD work = params;
  for (const auto& [name, value] : params) {
    std::vector<int64_t> indices;
    const int64_t n = value.numel();
    if (n <= max_samples_per_param) {
      indices.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) indices[static_cast<size_t>(i)] = i;
    } else {
      std::set<int64_t> picked;
      while (static_cast<int64_t>(picked.size()) < max_samples_per_param)
        picked.insert(static_cast<int64_t>(rng() % static_cast<uint64_t>(n)));
      indices.assign(picked.begin(), picked.end());
    }

    const auto git = grads.find(name);
    for (int64_t idx : indices) {
      double* slot = work[name].data() + idx;
      const double orig = *slot;
      *slot = orig + h;
      const double lp = eval_loss(work);
      *slot = orig - h;
      const double lm = eval_loss(work);
      *slot = orig;

      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = git == grads.end() ? 0.0 : git->second.data()[idx];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      ++report.samples;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_index = idx;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace grnn
