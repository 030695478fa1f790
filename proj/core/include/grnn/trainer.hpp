#ifndef GRNN_TRAINER_HPP
#define GRNN_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grnn/data.hpp"
#include "grnn/metrics.hpp"
#include "grnn/model.hpp"
#include "grnn/tensor.hpp"

namespace grnn {

// mean |pred - target| over every element
template <typename T>
T l1_loss(const Tensor4T<T>& pred, const Tensor4T<T>& target);

struct TrainConfig {
  int64_t epochs = 70;
  int64_t steps_per_epoch = 100;
  double lr0 = 1e-4;
  double lr_decay = 0.1;        // multiplicative drop
  int64_t lr_step_epochs = 10;  // epochs between drops
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;
  int64_t clip_length = 4;  // frames per training clip
  int64_t patch_size = 64;  // HR crop size
  int64_t batch = 4;        // crops per step
  uint64_t seed = 0;
  double sigma = 1.6;  // degradation blur

  void validate(const GrnnConfig& model) const;
};

// lr0 * decay^floor(e / step); closed form at every epoch
double lr_at_epoch(int64_t epoch, const TrainConfig& cfg);

// First/second moments per parameter plus the step counter.
struct AdamState {
  int64_t t = 0;
  std::map<std::string, Tensor4> m;
  std::map<std::string, Tensor4> v;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;  // decoupled: p <- p - lr*wd*p before the update
};

// In-place decoupled-weight-decay Adam step with bias correction. Every
// parameter must have a gradient entry.
void adam_step(std::map<std::string, Tensor4>& params,
               const std::map<std::string, Tensor4>& grads, AdamState& state,
               const AdamConfig& cfg);

struct TrainStepLog {
  int64_t step = 0;
  int64_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainEpochLog {
  int64_t epoch = 0;
  double val_psnr = 0.0;
  bool has_val = false;
};

struct TrainLog {
  std::vector<TrainStepLog> steps;
  std::vector<TrainEpochLog> epochs;
};

struct TrainResult {
  GrnnWeights weights;
  TrainLog log;
};

using CheckpointFn = std::function<void(int64_t epoch, const GrnnWeights&)>;

// Per step: sample `batch` seeded spatio-temporal HR crops, degrade them,
// run the full unrolled recurrence on the tape, take the mean per-frame L1
// against the HR crop, backpropagate and apply one Adam step. Fully
// deterministic under (seed, config). Aborts with a diagnostic on a
// non-finite loss.
TrainResult train_loop(const GrnnConfig& model_cfg, const TrainConfig& cfg,
                       const std::vector<VideoSequence>& train_clips,
                       const std::vector<VideoSequence>& val_clips,
                       GrnnWeights init,
                       const CheckpointFn* checkpoint = nullptr);

// Degrades each HR clip, runs the recurrence, scores PSNR/SSIM per
// sequence. reset_state forces t0 behavior before every frame.
MetricReport evaluate(const GrnnWeights& w, const GrnnConfig& cfg,
                      const std::vector<VideoSequence>& hr_clips,
                      double sigma = 1.6, int64_t skip_first = 0,
                      int64_t crop_border = 0, bool reset_state = false);

// Paired variant for pre-degraded inputs.
MetricReport evaluate_pairs(const GrnnWeights& w, const GrnnConfig& cfg,
                            const std::vector<VideoSequence>& lr_clips,
                            const std::vector<VideoSequence>& hr_clips,
                            int64_t skip_first = 0, int64_t crop_border = 0,
                            bool reset_state = false);

}  // namespace grnn

#endif  // GRNN_TRAINER_HPP
