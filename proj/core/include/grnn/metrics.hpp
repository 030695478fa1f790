#ifndef GRNN_METRICS_HPP
#define GRNN_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "grnn/data.hpp"
#include "grnn/model.hpp"
#include "grnn/tensor.hpp"

namespace grnn {

// Both metrics quantize [0,1] floats to the 8-bit domain (x255, rounded)
// first, so values match what a PNG round trip would score.

// 10*log10(255^2 / MSE) over all channels jointly; +infinity for
// identical images.
double psnr(const Tensor4& a, const Tensor4& b);

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), C1=(0.01*255)^2,
// C2=(0.03*255)^2, valid window positions only, averaged over channels.
double ssim(const Tensor4& a, const Tensor4& b);

struct FrameMetrics {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct SequenceMetrics {
  std::string name;
  std::vector<FrameMetrics> frames;
  double avg_psnr = 0.0;  // mean of per-frame values
  double avg_ssim = 0.0;
};

struct MetricReport {
  std::vector<SequenceMetrics> sequences;
  double avg_psnr = 0.0;  // mean of per-sequence averages
  double avg_ssim = 0.0;
};

// skip_first drops the first N frames, crop_border trims M pixels from
// every side, both before scoring.
SequenceMetrics sequence_metrics(const VideoSequence& pred,
                                 const VideoSequence& gt,
                                 int64_t skip_first = 0,
                                 int64_t crop_border = 0,
                                 const std::string& name = "");

MetricReport make_report(std::vector<SequenceMetrics> sequences);

// --- model cost accounting ------------------------------------------------

struct LayerCost {
  std::string name;
  uint64_t ghost_params = 0;
  uint64_t plain_params = 0;  // same layer with ratio 1
  uint64_t ghost_macs = 0;
  uint64_t plain_macs = 0;
};

struct CostReport {
  std::vector<LayerCost> layers;
  uint64_t ghost_params = 0;
  uint64_t plain_params = 0;
  uint64_t ghost_macs = 0;
  uint64_t plain_macs = 0;
  double param_ratio = 0.0;
  double mac_ratio = 0.0;
};

// Per-frame parameter/MAC totals at LR spatial size h x w, ghost blocks
// accounted by their decomposition and every layer also priced as the
// plain convolution it replaces.
CostReport count_params_flops(const GrnnConfig& cfg, int64_t h, int64_t w);

// --- feature redundancy ---------------------------------------------------

struct ChannelPair {
  int64_t a = 0;
  int64_t b = 0;
  double cosine = 0.0;
};

struct SimilarityReport {
  int64_t channels = 0;
  std::vector<double> matrix;  // C x C, row-major; unit diagonal
  double redundant_fraction = 0.0;  // unordered pairs with |cos| > 0.9
  std::vector<ChannelPair> top_pairs;
  std::vector<int64_t> zero_variance;  // flagged channels

  double at(int64_t i, int64_t j) const {
    return matrix[static_cast<size_t>(i * channels + j)];
  }
};

// Pairwise cosine similarity between mean-centered flattened channel maps
// of a single-batch feature tensor. Zero-variance channels score 0 against
// every other channel and are flagged.
SimilarityReport feature_similarity(const Tensor4& features,
                                    int64_t top_k = 10);

}  // namespace grnn

#endif  // GRNN_METRICS_HPP
