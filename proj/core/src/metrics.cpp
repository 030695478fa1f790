#include "grnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "grnn/ghost.hpp"

namespace grnn {

namespace {

constexpr double kL = 255.0;
constexpr double kC1 = (0.01 * kL) * (0.01 * kL);
constexpr double kC2 = (0.03 * kL) * (0.03 * kL);
constexpr int64_t kWin = 11;
constexpr double kWinSigma = 1.5;

double quant8(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return std::nearbyint(c * 255.0);
}

void check_pair(const Tensor4& a, const Tensor4& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() +
                     " vs " + b.shape().str());
}

const std::vector<double>& ssim_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(kWin * kWin);
    const int64_t r = kWin / 2;
    double z = 0.0;
    for (int64_t i = -r; i <= r; ++i)
      for (int64_t j = -r; j <= r; ++j) {
        double v = std::exp(-0.5 * (i * i + j * j) / (kWinSigma * kWinSigma));
        w[(i + r) * kWin + (j + r)] = v;
        z += v;
      }
    for (auto& v : w) v /= z;
    return w;
  }();
  return win;
}

}  // namespace

double psnr(const Tensor4& a, const Tensor4& b) {
  check_pair(a, b, "psnr");
  double se = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = quant8(a.data()[i]) - quant8(b.data()[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kL * kL / mse);
}

double ssim(const Tensor4& a, const Tensor4& b) {
  check_pair(a, b, "ssim");
  const Shape4& s = a.shape();
  if (s.h < kWin || s.w < kWin)
    throw ShapeError("ssim: image " + std::to_string(s.w) + "x" +
                     std::to_string(s.h) + " smaller than the " +
                     std::to_string(kWin) + "x" + std::to_string(kWin) +
                     " window");

  const auto& win = ssim_window();
  double total = 0.0;
  int64_t count = 0;
  for (int64_t bt = 0; bt < s.b; ++bt)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t y = 0; y + kWin <= s.h; ++y)
        for (int64_t x = 0; x + kWin <= s.w; ++x) {
          double mx = 0.0, my = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
          for (int64_t i = 0; i < kWin; ++i)
            for (int64_t j = 0; j < kWin; ++j) {
              const double w = win[i * kWin + j];
              const double va = quant8(a.at(bt, c, y + i, x + j));
              const double vb = quant8(b.at(bt, c, y + i, x + j));
              mx += w * va;
              my += w * vb;
              xx += w * va * va;
              yy += w * vb * vb;
              xy += w * va * vb;
            }
          const double vx = xx - mx * mx;
          const double vy = yy - my * my;
          const double cov = xy - mx * my;
          total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
                   ((mx * mx + my * my + kC1) * (vx + vy + kC2));
          ++count;
        }
  return total / static_cast<double>(count);
}

namespace {

Tensor4 crop(const Tensor4& t, int64_t m) {
  if (m == 0) return t;
  const Shape4& s = t.shape();
  if (s.h - 2 * m < 1 || s.w - 2 * m < 1)
    throw ValueError("crop_border " + std::to_string(m) +
                     " leaves no pixels in a " + std::to_string(s.w) + "x" +
                     std::to_string(s.h) + " frame");
  Tensor4 out = Tensor4::zeros(s.b, s.c, s.h - 2 * m, s.w - 2 * m);
  for (int64_t b = 0; b < s.b; ++b)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t y = 0; y < out.height(); ++y)
        for (int64_t x = 0; x < out.width(); ++x)
          out.at(b, c, y, x) = t.at(b, c, y + m, x + m);
  return out;
}

}  // namespace

SequenceMetrics sequence_metrics(const VideoSequence& pred,
                                 const VideoSequence& gt, int64_t skip_first,
                                 int64_t crop_border, const std::string& name) {
  pred.validate();
  gt.validate();
  if (pred.size() != gt.size())
    throw ShapeError("metrics: sequence lengths differ, " +
                     std::to_string(pred.size()) + " vs " +
                     std::to_string(gt.size()));
  if (skip_first < 0 || static_cast<size_t>(skip_first) >= pred.size())
    throw ValueError("metrics: skip_first " + std::to_string(skip_first) +
                     " leaves no frames");

  SequenceMetrics out;
  out.name = name;
  double sp = 0.0, ss = 0.0;
  for (size_t t = static_cast<size_t>(skip_first); t < pred.size(); ++t) {
    const Tensor4 p = crop(pred.frames[t], crop_border);
    const Tensor4 g = crop(gt.frames[t], crop_border);
    FrameMetrics fm;
    fm.psnr_db = psnr(p, g);
    fm.ssim = ssim(p, g);
    sp += fm.psnr_db;
    ss += fm.ssim;
    out.frames.push_back(fm);
  }
  out.avg_psnr = sp / static_cast<double>(out.frames.size());
  out.avg_ssim = ss / static_cast<double>(out.frames.size());
  return out;
}

MetricReport make_report(std::vector<SequenceMetrics> sequences) {
  MetricReport r;
  r.sequences = std::move(sequences);
  if (r.sequences.empty()) return r;
  double sp = 0.0, ss = 0.0;
  for (const auto& s : r.sequences) {
    sp += s.avg_psnr;
    ss += s.avg_ssim;
  }
  r.avg_psnr = sp / static_cast<double>(r.sequences.size());
  r.avg_ssim = ss / static_cast<double>(r.sequences.size());
  return r;
}

namespace {

LayerCost layer_cost(const std::string& name, const GhostBlockConfig& cfg,
                     int64_t h, int64_t w) {
  LayerCost lc;
  lc.name = name;
  const GhostParamCount p = ghost_param_count(cfg);
  const GhostMacCount m = ghost_flop_count(cfg, h, w);
  lc.ghost_params = p.ghost;
  lc.plain_params = p.plain;
  lc.ghost_macs = m.ghost;
  lc.plain_macs = m.plain;
  return lc;
}

}  // namespace

CostReport count_params_flops(const GrnnConfig& cfg, int64_t h, int64_t w) {
  cfg.validate();
  CostReport r;
  r.layers.push_back(layer_cost("fusion", fusion_cfg(cfg), h, w));
  for (int64_t k = 0; k < cfg.num_res_blocks; ++k) {
    const std::string p = "trunk." + std::to_string(k);
    r.layers.push_back(layer_cost(p + ".conv1", trunk_cfg(cfg), h, w));
    r.layers.push_back(layer_cost(p + ".conv2", trunk_cfg(cfg), h, w));
  }
  r.layers.push_back(layer_cost("state_head", state_head_cfg(cfg), h, w));
  r.layers.push_back(layer_cost("recon_head", recon_head_cfg(cfg), h, w));

  for (const auto& lc : r.layers) {
    r.ghost_params += lc.ghost_params;
    r.plain_params += lc.plain_params;
    r.ghost_macs += lc.ghost_macs;
    r.plain_macs += lc.plain_macs;
  }
  r.param_ratio =
      static_cast<double>(r.ghost_params) / static_cast<double>(r.plain_params);
  r.mac_ratio =
      static_cast<double>(r.ghost_macs) / static_cast<double>(r.plain_macs);
  return r;
}

SimilarityReport feature_similarity(const Tensor4& features, int64_t top_k) {
  const Shape4& s = features.shape();
  if (s.b != 1)
    throw ShapeError("feature_similarity: expected a single-batch tensor, got " +
                     s.str());
  const int64_t C = s.c;
  const int64_t n = s.h * s.w;

  // mean-center each flattened channel map
  std::vector<std::vector<double>> ch(static_cast<size_t>(C));
  std::vector<double> norms(static_cast<size_t>(C));
  SimilarityReport r;
  r.channels = C;
  for (int64_t c = 0; c < C; ++c) {
    auto& v = ch[static_cast<size_t>(c)];
    v.resize(static_cast<size_t>(n));
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      v[static_cast<size_t>(i)] = features.data()[c * n + i];
      mean += v[static_cast<size_t>(i)];
    }
    mean /= static_cast<double>(n);
    double sq = 0.0;
    for (auto& x : v) {
      x -= mean;
      sq += x * x;
    }
    norms[static_cast<size_t>(c)] = std::sqrt(sq);
    if (norms[static_cast<size_t>(c)] == 0.0) r.zero_variance.push_back(c);
  }

  r.matrix.assign(static_cast<size_t>(C * C), 0.0);
  for (int64_t i = 0; i < C; ++i) {
    r.matrix[static_cast<size_t>(i * C + i)] = 1.0;
    for (int64_t j = i + 1; j < C; ++j) {
      double cos = 0.0;
      if (norms[static_cast<size_t>(i)] > 0.0 &&
          norms[static_cast<size_t>(j)] > 0.0) {
        double dot = 0.0;
        for (int64_t k = 0; k < n; ++k)
          dot += ch[static_cast<size_t>(i)][static_cast<size_t>(k)] *
                 ch[static_cast<size_t>(j)][static_cast<size_t>(k)];
        cos = dot /
              (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]);
      }
      r.matrix[static_cast<size_t>(i * C + j)] = cos;
      r.matrix[static_cast<size_t>(j * C + i)] = cos;
    }
  }

  std::vector<ChannelPair> pairs;
  int64_t redundant = 0;
  for (int64_t i = 0; i < C; ++i)
    for (int64_t j = i + 1; j < C; ++j) {
      const double cos = r.at(i, j);
      pairs.push_back({i, j, cos});
      if (std::abs(cos) > 0.9) ++redundant;
    }
  const int64_t total_pairs = C * (C - 1) / 2;
  r.redundant_fraction =
      total_pairs == 0
          ? 0.0
          : static_cast<double>(redundant) / static_cast<double>(total_pairs);
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::abs(a.cosine) != std::abs(b.cosine))
      return std::abs(a.cosine) > std::abs(b.cosine);
    return a.a != b.a ? a.a < b.a : a.b < b.b;
  });
  if (static_cast<int64_t>(pairs.size()) > top_k) pairs.resize(top_k);
  r.top_pairs = std::move(pairs);
  return r;
}

}  // namespace grnn
