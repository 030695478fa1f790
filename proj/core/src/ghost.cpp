#include "grnn/ghost.hpp"

#include "wiring.hpp"

namespace grnn {

void GhostBlockConfig::validate() const {
  if (in_channels < 1 || out_channels < 1)
    throw ValueError("ghost block: channel counts must be >= 1");
  if (ratio < 1)
    throw ValueError("ghost block: ratio S must be >= 1, got " +
                     std::to_string(ratio));
  if (primary_kernel < 1 || primary_kernel % 2 == 0 || cheap_kernel < 1 ||
      cheap_kernel % 2 == 0)
    throw ValueError("ghost block: kernel sizes must be odd");
}

namespace {

template <typename T>
detail::GhostRefs<detail::EagerExec<T>> eager_refs(
    const GhostBlockWeightsT<T>& w) {
  detail::GhostRefs<detail::EagerExec<T>> r;
  r.primary_w = &w.primary_w;
  r.primary_b = w.primary_b.numel() > 0 ? &w.primary_b : nullptr;
  r.cheap_w = w.has_cheap() ? &w.cheap_w : nullptr;
  r.cheap_b = w.cheap_b.numel() > 0 ? &w.cheap_b : nullptr;
  return r;
}

NodeId find_weight(const std::map<std::string, NodeId>& ids,
                   const std::string& name, bool required) {
  auto it = ids.find(name);
  if (it == ids.end()) {
    if (required)
      throw ValueError("missing weight node '" + name + "'");
    return kNoNode;
  }
  return it->second;
}

}  // namespace

template <typename T>
Tensor4T<T> ghost_forward(const Tensor4T<T>& input,
                          const GhostBlockWeightsT<T>& w,
                          const GhostBlockConfig& cfg) {
  detail::EagerExec<T> ex;
  return detail::ghost_forward_wired(ex, input, eager_refs(w), cfg);
}

template Tensor4 ghost_forward<float>(const Tensor4&, const GhostBlockWeights&,
                                      const GhostBlockConfig&);
template Tensor4d ghost_forward<double>(const Tensor4d&,
                                        const GhostBlockWeightsT<double>&,
                                        const GhostBlockConfig&);

template <typename T>
NodeId ghost_forward_tape(Tape<T>& tape, NodeId input,
                          const std::map<std::string, NodeId>& weight_ids,
                          const std::string& prefix,
                          const GhostBlockConfig& cfg) {
  detail::TapeExec<T> ex{&tape};
  detail::GhostRefs<detail::TapeExec<T>> r;
  if (cfg.ratio == 1) {
    r.primary_w = find_weight(weight_ids, prefix + ".weight", true);
    r.primary_b = find_weight(weight_ids, prefix + ".bias", false);
  } else {
    r.primary_w = find_weight(weight_ids, prefix + ".primary.weight", true);
    r.primary_b = find_weight(weight_ids, prefix + ".primary.bias", false);
    r.cheap_w = find_weight(weight_ids, prefix + ".cheap.weight", true);
    r.cheap_b = find_weight(weight_ids, prefix + ".cheap.bias", false);
  }
  return detail::ghost_forward_wired(ex, input, r, cfg);
}

template NodeId ghost_forward_tape<float>(Tape<float>&, NodeId,
                                          const std::map<std::string, NodeId>&,
                                          const std::string&,
                                          const GhostBlockConfig&);
template NodeId ghost_forward_tape<double>(
    Tape<double>&, NodeId, const std::map<std::string, NodeId>&,
    const std::string&, const GhostBlockConfig&);

GhostParamCount ghost_param_count(const GhostBlockConfig& cfg) {
  cfg.validate();
  const uint64_t m = static_cast<uint64_t>(cfg.intrinsic());
  const uint64_t s = static_cast<uint64_t>(cfg.ratio);
  const uint64_t n = static_cast<uint64_t>(cfg.out_channels);
  const uint64_t in = static_cast<uint64_t>(cfg.in_channels);
  const uint64_t k2 = static_cast<uint64_t>(cfg.primary_kernel * cfg.primary_kernel);
  const uint64_t c2 = static_cast<uint64_t>(cfg.cheap_kernel * cfg.cheap_kernel);

  GhostParamCount out;
  out.ghost = m * in * k2 + m + m * (s - 1) * (c2 + 1);
  out.plain = n * in * k2 + n;
  out.ratio = static_cast<double>(out.ghost) / static_cast<double>(out.plain);
  return out;
}

GhostMacCount ghost_flop_count(const GhostBlockConfig& cfg, int64_t h,
                               int64_t w) {
  cfg.validate();
  if (h < 1 || w < 1) throw ValueError("ghost_flop_count: spatial size must be >= 1");
  const uint64_t m = static_cast<uint64_t>(cfg.intrinsic());
  const uint64_t s = static_cast<uint64_t>(cfg.ratio);
  const uint64_t n = static_cast<uint64_t>(cfg.out_channels);
  const uint64_t in = static_cast<uint64_t>(cfg.in_channels);
  const uint64_t k2 = static_cast<uint64_t>(cfg.primary_kernel * cfg.primary_kernel);
  const uint64_t c2 = static_cast<uint64_t>(cfg.cheap_kernel * cfg.cheap_kernel);
  const uint64_t hw = static_cast<uint64_t>(h) * static_cast<uint64_t>(w);

  GhostMacCount out;
  out.ghost = hw * (m * in * k2 + m * (s - 1) * c2);
  out.plain = hw * (n * in * k2);
  return out;
}

double ghost_ratio_limit(const GhostBlockConfig& cfg) {
  return 1.0 / static_cast<double>(cfg.ratio) +
         static_cast<double>(cfg.cheap_kernel * cfg.cheap_kernel) /
             static_cast<double>(cfg.in_channels * cfg.primary_kernel *
                                 cfg.primary_kernel);
}

}  // namespace grnn
