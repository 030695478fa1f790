#include "grnn/model.hpp"

#include <cmath>

#include "grnn/rng.hpp"
#include "wiring.hpp"

namespace grnn {

void GrnnConfig::validate() const {
  if (scale < 1) throw ValueError("model: scale must be >= 1");
  if (channels < 8) throw ValueError("model: channels must be >= 8");
  if (num_res_blocks < 1)
    throw ValueError("model: num_res_blocks must be >= 1");
  if (color_channels != 3)
    throw ValueError("model: only 3 color channels are supported");
  GhostBlockConfig g = fusion_cfg(*this);
  g.validate();
}

GhostBlockConfig fusion_cfg(const GrnnConfig& c) {
  GhostBlockConfig g;
  g.in_channels =
      c.color_channels * 2 + c.color_channels * c.scale * c.scale + c.channels;
  g.out_channels = c.channels;
  g.ratio = c.ghost_ratio;
  g.primary_kernel = c.primary_kernel;
  g.cheap_kernel = c.cheap_kernel;
  return g;
}

GhostBlockConfig trunk_cfg(const GrnnConfig& c) {
  GhostBlockConfig g;
  g.in_channels = c.channels;
  g.out_channels = c.channels;
  g.ratio = c.ghost_trunk ? c.ghost_ratio : 1;
  g.primary_kernel = c.ghost_trunk ? c.primary_kernel : 3;
  g.cheap_kernel = c.cheap_kernel;
  return g;
}

GhostBlockConfig state_head_cfg(const GrnnConfig& c) {
  GhostBlockConfig g;
  g.in_channels = c.channels;
  g.out_channels = c.channels;
  g.ratio = 1;
  g.primary_kernel = 3;
  g.cheap_kernel = 3;
  return g;
}

GhostBlockConfig recon_head_cfg(const GrnnConfig& c) {
  GhostBlockConfig g;
  g.in_channels = c.channels;
  g.out_channels = c.color_channels * c.scale * c.scale;
  g.ratio = 1;
  g.primary_kernel = 3;
  g.cheap_kernel = 3;
  return g;
}

namespace {

template <typename T>
GhostBlockWeightsT<T> zero_ghost(const GhostBlockConfig& cfg) {
  cfg.validate();
  const int64_t m = cfg.intrinsic();
  GhostBlockWeightsT<T> w;
  w.primary_w = Tensor4T<T>::zeros(m, cfg.in_channels, cfg.primary_kernel,
                                   cfg.primary_kernel);
  w.primary_b = Tensor4T<T>::zeros(1, m, 1, 1);
  if (cfg.ratio > 1) {
    w.cheap_w = Tensor4T<T>::zeros(m * (cfg.ratio - 1), 1, cfg.cheap_kernel,
                                   cfg.cheap_kernel);
    w.cheap_b = Tensor4T<T>::zeros(1, m * (cfg.ratio - 1), 1, 1);
  }
  return w;
}

// Kaiming-uniform, fan-in mode with ReLU gain: U(-b, b), b = sqrt(6/fan_in)
template <typename T>
void kaiming_fill(Tensor4T<T>& w, std::mt19937_64& rng) {
  const Shape4& s = w.shape();
  const double fan_in = static_cast<double>(s.c * s.h * s.w);
  const double bound = std::sqrt(6.0 / fan_in);
  for (auto& v : w.vec())
    v = static_cast<T>(next_uniform(rng, -bound, bound));
}

template <typename T>
void init_ghost(GhostBlockWeightsT<T>& w, std::mt19937_64& rng) {
  kaiming_fill(w.primary_w, rng);
  if (w.has_cheap()) kaiming_fill(w.cheap_w, rng);
}

template <typename T, typename Fn>
void ghost_visit(const std::string& prefix, GhostBlockWeightsT<T>& w,
                 Fn&& fn) {
  const bool plain = !w.has_cheap();
  fn(plain ? prefix + ".weight" : prefix + ".primary.weight", w.primary_w);
  fn(plain ? prefix + ".bias" : prefix + ".primary.bias", w.primary_b);
  if (!plain) {
    fn(prefix + ".cheap.weight", w.cheap_w);
    fn(prefix + ".cheap.bias", w.cheap_b);
  }
}

template <typename T, typename Fn>
void visit_weights(GrnnWeightsT<T>& w, Fn&& fn) {
  ghost_visit("fusion", w.fusion, fn);
  for (size_t k = 0; k < w.blocks.size(); ++k) {
    ghost_visit("trunk." + std::to_string(k) + ".conv1", w.blocks[k].conv1, fn);
    ghost_visit("trunk." + std::to_string(k) + ".conv2", w.blocks[k].conv2, fn);
  }
  ghost_visit("state_head", w.state_head, fn);
  ghost_visit("recon_head", w.recon_head, fn);
}

template <typename T>
detail::GhostRefs<detail::EagerExec<T>> eager_ghost_refs(
    const GhostBlockWeightsT<T>& w) {
  detail::GhostRefs<detail::EagerExec<T>> r;
  r.primary_w = &w.primary_w;
  r.primary_b = w.primary_b.numel() > 0 ? &w.primary_b : nullptr;
  r.cheap_w = w.has_cheap() ? &w.cheap_w : nullptr;
  r.cheap_b = w.cheap_b.numel() > 0 ? &w.cheap_b : nullptr;
  return r;
}

template <typename T>
detail::GrnnRefs<detail::EagerExec<T>> eager_refs(const GrnnWeightsT<T>& w) {
  detail::GrnnRefs<detail::EagerExec<T>> r;
  r.fusion = eager_ghost_refs(w.fusion);
  r.blocks.resize(w.blocks.size());
  for (size_t k = 0; k < w.blocks.size(); ++k) {
    r.blocks[k].conv1 = eager_ghost_refs(w.blocks[k].conv1);
    r.blocks[k].conv2 = eager_ghost_refs(w.blocks[k].conv2);
  }
  r.state_head = eager_ghost_refs(w.state_head);
  r.recon_head = eager_ghost_refs(w.recon_head);
  return r;
}

template <typename T>
detail::GhostRefs<detail::TapeExec<T>> tape_ghost_refs(
    const std::map<std::string, NodeId>& ids, const std::string& prefix,
    bool plain) {
  auto get = [&](const std::string& name, bool required) {
    auto it = ids.find(name);
    if (it == ids.end()) {
      if (required) throw ValueError("missing weight node '" + name + "'");
      return kNoNode;
    }
    return it->second;
  };
  detail::GhostRefs<detail::TapeExec<T>> r;
  if (plain) {
    r.primary_w = get(prefix + ".weight", true);
    r.primary_b = get(prefix + ".bias", false);
  } else {
    r.primary_w = get(prefix + ".primary.weight", true);
    r.primary_b = get(prefix + ".primary.bias", false);
    r.cheap_w = get(prefix + ".cheap.weight", true);
    r.cheap_b = get(prefix + ".cheap.bias", false);
  }
  return r;
}

template <typename T>
detail::GrnnRefs<detail::TapeExec<T>> tape_refs(
    const std::map<std::string, NodeId>& ids, const GrnnConfig& cfg) {
  detail::GrnnRefs<detail::TapeExec<T>> r;
  r.fusion = tape_ghost_refs<T>(ids, "fusion", cfg.ghost_ratio == 1);
  r.blocks.resize(static_cast<size_t>(cfg.num_res_blocks));
  const bool plain_trunk = !cfg.ghost_trunk || cfg.ghost_ratio == 1;
  for (int64_t k = 0; k < cfg.num_res_blocks; ++k) {
    const std::string p = "trunk." + std::to_string(k);
    r.blocks[static_cast<size_t>(k)].conv1 =
        tape_ghost_refs<T>(ids, p + ".conv1", plain_trunk);
    r.blocks[static_cast<size_t>(k)].conv2 =
        tape_ghost_refs<T>(ids, p + ".conv2", plain_trunk);
  }
  r.state_head = tape_ghost_refs<T>(ids, "state_head", true);
  r.recon_head = tape_ghost_refs<T>(ids, "recon_head", true);
  return r;
}

template <typename T>
void check_lr_frame(const Tensor4T<T>& f, const GrnnConfig& cfg,
                    const char* which) {
  if (f.channels() != cfg.color_channels)
    throw ShapeError(std::string(which) + ": expected " +
                     std::to_string(cfg.color_channels) + " channels, got " +
                     std::to_string(f.channels()));
}

}  // namespace

template <typename T>
GrnnWeightsT<T> zero_weights(const GrnnConfig& cfg) {
  cfg.validate();
  GrnnWeightsT<T> w;
  w.fusion = zero_ghost<T>(fusion_cfg(cfg));
  w.blocks.resize(static_cast<size_t>(cfg.num_res_blocks));
  for (auto& b : w.blocks) {
    b.conv1 = zero_ghost<T>(trunk_cfg(cfg));
    b.conv2 = zero_ghost<T>(trunk_cfg(cfg));
  }
  w.state_head = zero_ghost<T>(state_head_cfg(cfg));
  w.recon_head = zero_ghost<T>(recon_head_cfg(cfg));
  return w;
}

template <typename T>
GrnnWeightsT<T> init_weights(const GrnnConfig& cfg, uint64_t seed) {
  GrnnWeightsT<T> w = zero_weights<T>(cfg);
  std::mt19937_64 rng(seed);
  init_ghost(w.fusion, rng);
  for (auto& b : w.blocks) {
    init_ghost(b.conv1, rng);
    init_ghost(b.conv2, rng);
  }
  init_ghost(w.state_head, rng);
  // reconstruction head stays zero: step-0 output equals the bicubic baseline
  return w;
}

template <typename T>
std::map<std::string, Tensor4T<T>> weights_to_map(const GrnnWeightsT<T>& w,
                                                  const GrnnConfig& cfg) {
  (void)cfg;
  std::map<std::string, Tensor4T<T>> out;
  visit_weights(const_cast<GrnnWeightsT<T>&>(w),
                [&](const std::string& name, Tensor4T<T>& t) {
                  out.emplace(name, t);
                });
  return out;
}

template <typename T>
GrnnWeightsT<T> weights_from_map(const std::map<std::string, Tensor4T<T>>& m,
                                 const GrnnConfig& cfg) {
  GrnnWeightsT<T> w = zero_weights<T>(cfg);
  size_t used = 0;
  visit_weights(w, [&](const std::string& name, Tensor4T<T>& t) {
    auto it = m.find(name);
    if (it == m.end())
      throw ValueError("weights: missing tensor '" + name + "'");
    if (!(it->second.shape() == t.shape()))
      throw ShapeError("weights: tensor '" + name + "' has shape " +
                       it->second.shape().str() + ", expected " +
                       t.shape().str());
    t = it->second;
    ++used;
  });
  if (used != m.size())
    throw ValueError("weights: map holds " + std::to_string(m.size()) +
                     " tensors, model expects " + std::to_string(used));
  return w;
}

template <typename T>
RecurrentStateT<T> init_state_t(const GrnnConfig& cfg, int64_t batch,
                                int64_t h, int64_t w) {
  cfg.validate();
  if (batch < 1 || h < 1 || w < 1)
    throw ValueError("init_state: dimensions must be >= 1");
  RecurrentStateT<T> s;
  s.hidden = Tensor4T<T>::zeros(batch, cfg.channels, h, w);
  s.prev_output = Tensor4T<T>::zeros(batch, cfg.color_channels, h * cfg.scale,
                                     w * cfg.scale);
  return s;
}

RecurrentState init_state(const GrnnConfig& cfg, int64_t batch, int64_t h,
                          int64_t w) {
  return init_state_t<float>(cfg, batch, h, w);
}

template <typename T>
std::pair<Tensor4T<T>, RecurrentStateT<T>> cell_forward(
    const Tensor4T<T>& frame, const Tensor4T<T>& prev_frame,
    const RecurrentStateT<T>& state, const GrnnWeightsT<T>& w,
    const GrnnConfig& cfg, const ProbeFnT<T>* probe) {
  cfg.validate();
  check_lr_frame(frame, cfg, "cell_forward: current frame");
  check_lr_frame(prev_frame, cfg, "cell_forward: previous frame");
  if (!frame.same_shape(prev_frame))
    throw ShapeError("cell_forward: frame shapes differ, " +
                     frame.shape().str() + " vs " + prev_frame.shape().str());
  const Shape4 hs{frame.batch(), cfg.channels, frame.height(), frame.width()};
  if (!(state.hidden.shape() == hs))
    throw ShapeError("cell_forward: hidden state shape " +
                     state.hidden.shape().str() + ", expected " + hs.str());
  const Shape4 os{frame.batch(), cfg.color_channels,
                  frame.height() * cfg.scale, frame.width() * cfg.scale};
  if (!(state.prev_output.shape() == os))
    throw ShapeError("cell_forward: previous output shape " +
                     state.prev_output.shape().str() + ", expected " +
                     os.str());

  detail::EagerExec<T> ex;
  ex.probe_fn = probe;
  ex.finite_checks = true;
  auto refs = eager_refs(w);
  auto cell = detail::cell_forward_wired(ex, frame, prev_frame,
                                         state.prev_output, state.hidden,
                                         refs, cfg);
  RecurrentStateT<T> next;
  next.hidden = cell.hidden;
  next.prev_output = cell.output;
  return {std::move(cell.output), std::move(next)};
}

template <typename T>
std::vector<Tensor4T<T>> sequence_forward_frames(
    const std::vector<Tensor4T<T>>& lr_frames, const GrnnWeightsT<T>& w,
    const GrnnConfig& cfg, bool reset_state, const ProbeFnT<T>* probe) {
  if (lr_frames.empty())
    throw ValueError("sequence_forward: empty sequence");
  cfg.validate();

  std::vector<Tensor4T<T>> out;
  out.reserve(lr_frames.size());
  const Tensor4T<T>& f0 = lr_frames[0];
  RecurrentStateT<T> state =
      init_state_t<T>(cfg, f0.batch(), f0.height(), f0.width());
  Tensor4T<T> blank =
      Tensor4T<T>::zeros(f0.batch(), f0.channels(), f0.height(), f0.width());

  for (size_t t = 0; t < lr_frames.size(); ++t) {
    const Tensor4T<T>& prev = t == 0 || reset_state ? blank : lr_frames[t - 1];
    if (reset_state)
      state = init_state_t<T>(cfg, f0.batch(), f0.height(), f0.width());
    auto [o, next] = cell_forward(lr_frames[t], prev, state, w, cfg, probe);
    out.push_back(std::move(o));
    state = std::move(next);
  }
  return out;
}

VideoSequence sequence_forward(const VideoSequence& lr, const GrnnWeights& w,
                               const GrnnConfig& cfg, bool reset_state,
                               const ProbeFn* probe) {
  lr.validate();
  VideoSequence out;
  out.role = FrameRole::kHr;
  out.frames = sequence_forward_frames(lr.frames, w, cfg, reset_state, probe);
  return out;
}

template <typename T>
std::map<std::string, NodeId> register_weights(Tape<T>& tape,
                                               const GrnnWeightsT<T>& w,
                                               const GrnnConfig& cfg) {
  (void)cfg;
  std::map<std::string, NodeId> ids;
  visit_weights(const_cast<GrnnWeightsT<T>&>(w),
                [&](const std::string& name, Tensor4T<T>& t) {
                  ids.emplace(name, tape.param(name, t));
                });
  return ids;
}

template <typename T>
std::vector<NodeId> sequence_forward_tape(
    Tape<T>& tape, const std::vector<Tensor4T<T>>& lr_frames,
    const std::map<std::string, NodeId>& weight_ids, const GrnnConfig& cfg) {
  if (lr_frames.empty())
    throw ValueError("sequence_forward_tape: empty sequence");
  cfg.validate();

  detail::TapeExec<T> ex{&tape};
  auto refs = tape_refs<T>(weight_ids, cfg);

  const Tensor4T<T>& f0 = lr_frames[0];
  NodeId hidden = tape.constant(
      Tensor4T<T>::zeros(f0.batch(), cfg.channels, f0.height(), f0.width()));
  NodeId prev_out = tape.constant(
      Tensor4T<T>::zeros(f0.batch(), cfg.color_channels,
                         f0.height() * cfg.scale, f0.width() * cfg.scale));
  NodeId blank = tape.constant(
      Tensor4T<T>::zeros(f0.batch(), f0.channels(), f0.height(), f0.width()));

  std::vector<NodeId> outs;
  outs.reserve(lr_frames.size());
  NodeId prev_frame = blank;
  for (size_t t = 0; t < lr_frames.size(); ++t) {
    NodeId frame = tape.constant(lr_frames[t]);
    auto cell = detail::cell_forward_wired(ex, frame, prev_frame, prev_out,
                                           hidden, refs, cfg);
    outs.push_back(cell.output);
    hidden = cell.hidden;
    prev_out = cell.output;
    prev_frame = frame;
  }
  return outs;
}

#define GRNN_INSTANTIATE_MODEL(T)                                             \
  template GrnnWeightsT<T> zero_weights<T>(const GrnnConfig&);                \
  template GrnnWeightsT<T> init_weights<T>(const GrnnConfig&, uint64_t);      \
  template std::map<std::string, Tensor4T<T>> weights_to_map<T>(              \
      const GrnnWeightsT<T>&, const GrnnConfig&);                             \
  template GrnnWeightsT<T> weights_from_map<T>(                               \
      const std::map<std::string, Tensor4T<T>>&, const GrnnConfig&);          \
  template RecurrentStateT<T> init_state_t<T>(const GrnnConfig&, int64_t,     \
                                              int64_t, int64_t);              \
  template std::pair<Tensor4T<T>, RecurrentStateT<T>> cell_forward<T>(        \
      const Tensor4T<T>&, const Tensor4T<T>&, const RecurrentStateT<T>&,      \
      const GrnnWeightsT<T>&, const GrnnConfig&, const ProbeFnT<T>*);         \
  template std::vector<Tensor4T<T>> sequence_forward_frames<T>(               \
      const std::vector<Tensor4T<T>>&, const GrnnWeightsT<T>&,               \
      const GrnnConfig&, bool, const ProbeFnT<T>*);                           \
  template std::map<std::string, NodeId> register_weights<T>(                 \
      Tape<T>&, const GrnnWeightsT<T>&, const GrnnConfig&);                   \
  template std::vector<NodeId> sequence_forward_tape<T>(                      \
      Tape<T>&, const std::vector<Tensor4T<T>>&,                              \
      const std::map<std::string, NodeId>&, const GrnnConfig&);

GRNN_INSTANTIATE_MODEL(float)
GRNN_INSTANTIATE_MODEL(double)

#undef GRNN_INSTANTIATE_MODEL

}  // namespace grnn
