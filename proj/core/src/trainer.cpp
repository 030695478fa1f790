#include "grnn/trainer.hpp"

#include <cmath>
#include <sstream>

#include "grnn/rng.hpp"

namespace grnn {

template <typename T>
T l1_loss(const Tensor4T<T>& pred, const Tensor4T<T>& target) {
  if (!pred.same_shape(target))
    throw ShapeError("l1_loss: shape mismatch " + pred.shape().str() + " vs " +
                     target.shape().str());
  T acc = T(0);
  for (int64_t i = 0; i < pred.numel(); ++i)
    acc += std::abs(pred.data()[i] - target.data()[i]);
  return acc / static_cast<T>(pred.numel());
}

template float l1_loss<float>(const Tensor4&, const Tensor4&);
template double l1_loss<double>(const Tensor4d&, const Tensor4d&);

void TrainConfig::validate(const GrnnConfig& model) const {
  if (epochs < 0 || steps_per_epoch < 0)
    throw ValueError("train: epochs/steps_per_epoch must be >= 0");
  if (!(lr0 > 0)) throw ValueError("train: lr0 must be positive");
  if (!(lr_decay > 0) || lr_step_epochs < 1)
    throw ValueError("train: bad lr schedule");
  if (clip_length < 1) throw ValueError("train: clip_length must be >= 1");
  if (batch < 1) throw ValueError("train: batch must be >= 1");
  if (patch_size < model.scale || patch_size % model.scale != 0)
    throw ValueError("train: patch_size must be a positive multiple of scale");
  if (!(sigma > 0)) throw ValueError("train: sigma must be positive");
}

double lr_at_epoch(int64_t epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ValueError("lr_at_epoch: epoch must be >= 0");
  const auto drops = static_cast<double>(epoch / cfg.lr_step_epochs);
  return cfg.lr0 * std::pow(cfg.lr_decay, drops);
}

void adam_step(std::map<std::string, Tensor4>& params,
               const std::map<std::string, Tensor4>& grads, AdamState& state,
               const AdamConfig& cfg) {
  for (const auto& [name, p] : params) {
    if (grads.find(name) == grads.end())
      throw ValueError("adam_step: missing gradient for parameter '" + name +
                       "'");
    if (!grads.at(name).same_shape(p))
      throw ShapeError("adam_step: gradient shape mismatch for '" + name +
                       "'");
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for (auto& [name, p] : params) {
    const Tensor4& g = grads.at(name);
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor4::zeros(p.shape().b, p.shape().c,
                                                 p.shape().h, p.shape().w))
                .first;
      state.v.emplace(name, Tensor4::zeros(p.shape().b, p.shape().c,
                                           p.shape().h, p.shape().w));
    }
    Tensor4& m = mit->second;
    Tensor4& v = state.v.at(name);

    for (int64_t i = 0; i < p.numel(); ++i) {
      double pi = p.data()[i];
      const double gi = g.data()[i];
      pi -= cfg.lr * cfg.weight_decay * pi;
      const double mi = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
      m.data()[i] = static_cast<float>(mi);
      v.data()[i] = static_cast<float>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      pi -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
      p.data()[i] = static_cast<float>(pi);
    }
  }
}

namespace {

struct Crop {
  size_t clip = 0;
  int64_t t0 = 0, y0 = 0, x0 = 0;
};

Tensor4 crop_frame(const Tensor4& f, int64_t y0, int64_t x0, int64_t size) {
  Tensor4 out = Tensor4::zeros(1, f.channels(), size, size);
  for (int64_t c = 0; c < f.channels(); ++c)
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x)
        out.at(0, c, y, x) = f.at(0, c, y0 + y, x0 + x);
  return out;
}

// stacks per-crop frames (1,C,H,W) into one (B,C,H,W) tensor
Tensor4 stack_batch(const std::vector<Tensor4>& frames) {
  const Shape4& s = frames[0].shape();
  Tensor4 out =
      Tensor4::zeros(static_cast<int64_t>(frames.size()), s.c, s.h, s.w);
  for (size_t b = 0; b < frames.size(); ++b)
    std::copy_n(frames[b].data(), s.numel(),
                out.data() + static_cast<int64_t>(b) * s.numel());
  return out;
}

}  // namespace

TrainResult train_loop(const GrnnConfig& model_cfg, const TrainConfig& cfg,
                       const std::vector<VideoSequence>& train_clips,
                       const std::vector<VideoSequence>& val_clips,
                       GrnnWeights init, const CheckpointFn* checkpoint) {
  model_cfg.validate();
  cfg.validate(model_cfg);
  if (train_clips.empty() && cfg.epochs * cfg.steps_per_epoch > 0)
    throw ValueError("train_loop: no training clips");
  for (const auto& clip : train_clips) {
    clip.validate();
    if (static_cast<int64_t>(clip.size()) < cfg.clip_length)
      throw ValueError("train_loop: a clip is shorter than clip_length");
    if (clip.height() < cfg.patch_size || clip.width() < cfg.patch_size)
      throw ValueError("train_loop: a clip is smaller than patch_size");
  }

  TrainResult result;
  result.weights = std::move(init);
  auto params = weights_to_map(result.weights, model_cfg);

  AdamState adam;
  std::mt19937_64 rng(cfg.seed);
  const int64_t lr_scale = model_cfg.scale;

  int64_t step = 0;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    AdamConfig acfg{lr_at_epoch(epoch, cfg), cfg.beta1, cfg.beta2,
                    cfg.epsilon, cfg.weight_decay};
    for (int64_t s = 0; s < cfg.steps_per_epoch; ++s, ++step) {
      // seeded sampling order: clip, t0, y0, x0 per batch element
      std::vector<Crop> crops(static_cast<size_t>(cfg.batch));
      for (auto& c : crops) {
        c.clip = static_cast<size_t>(
            next_index(rng, static_cast<int64_t>(train_clips.size())));
        const VideoSequence& clip = train_clips[c.clip];
        c.t0 = next_index(
            rng, static_cast<int64_t>(clip.size()) - cfg.clip_length + 1);
        c.y0 = next_index(rng, clip.height() - cfg.patch_size + 1);
        c.x0 = next_index(rng, clip.width() - cfg.patch_size + 1);
      }

      // batched HR/LR frame tensors for the clip window
      std::vector<Tensor4> hr_frames, lr_frames;
      for (int64_t t = 0; t < cfg.clip_length; ++t) {
        std::vector<Tensor4> hr_b, lr_b;
        for (const Crop& c : crops) {
          VideoSequence one;
          one.role = FrameRole::kHr;
          one.frames.push_back(
              crop_frame(train_clips[c.clip].frames[static_cast<size_t>(
                             c.t0 + t)],
                         c.y0, c.x0, cfg.patch_size));
          VideoSequence one_lr = degrade(one, lr_scale, cfg.sigma);
          hr_b.push_back(std::move(one.frames[0]));
          lr_b.push_back(std::move(one_lr.frames[0]));
        }
        hr_frames.push_back(stack_batch(hr_b));
        lr_frames.push_back(stack_batch(lr_b));
      }

      Tape<float> tape;
      auto ids = register_weights(tape, result.weights, model_cfg);
      auto outs = sequence_forward_tape(tape, lr_frames, ids, model_cfg);
      NodeId loss = kNoNode;
      for (size_t t = 0; t < outs.size(); ++t) {
        NodeId target = tape.constant(hr_frames[t]);
        NodeId frame_loss = tape.l1_loss(outs[t], target);
        loss = loss == kNoNode ? frame_loss : tape.add(loss, frame_loss);
      }
      loss = tape.scale(loss, 1.0f / static_cast<float>(outs.size()));

      const double loss_value = tape.value(loss).data()[0];
      if (!std::isfinite(loss_value)) {
        std::ostringstream os;
        os << "train_loop: non-finite loss " << loss_value << " at step "
           << step << " (epoch " << epoch << ", lr " << acfg.lr << ")";
        throw NumericError(os.str());
      }

      auto grads = tape.backward(loss);
      adam_step(params, grads, adam, acfg);
      result.weights = weights_from_map(params, model_cfg);

      result.log.steps.push_back({step, epoch, acfg.lr, loss_value});
    }

    TrainEpochLog el;
    el.epoch = epoch;
    if (!val_clips.empty()) {
      MetricReport r = evaluate(result.weights, model_cfg, val_clips,
                                cfg.sigma);
      el.val_psnr = r.avg_psnr;
      el.has_val = true;
    }
    result.log.epochs.push_back(el);
    if (checkpoint && *checkpoint) (*checkpoint)(epoch, result.weights);
  }
  return result;
}

MetricReport evaluate(const GrnnWeights& w, const GrnnConfig& cfg,
                      const std::vector<VideoSequence>& hr_clips, double sigma,
                      int64_t skip_first, int64_t crop_border,
                      bool reset_state) {
  std::vector<VideoSequence> lr;
  lr.reserve(hr_clips.size());
  for (const auto& hr : hr_clips) lr.push_back(degrade(hr, cfg.scale, sigma));
  return evaluate_pairs(w, cfg, lr, hr_clips, skip_first, crop_border,
                        reset_state);
}

MetricReport evaluate_pairs(const GrnnWeights& w, const GrnnConfig& cfg,
                            const std::vector<VideoSequence>& lr_clips,
                            const std::vector<VideoSequence>& hr_clips,
                            int64_t skip_first, int64_t crop_border,
                            bool reset_state) {
  if (lr_clips.size() != hr_clips.size())
    throw ValueError("evaluate: clip counts differ, " +
                     std::to_string(lr_clips.size()) + " vs " +
                     std::to_string(hr_clips.size()));
  std::vector<SequenceMetrics> seqs;
  for (size_t i = 0; i < lr_clips.size(); ++i) {
    VideoSequence sr = sequence_forward(lr_clips[i], w, cfg, reset_state);
    seqs.push_back(sequence_metrics(sr, hr_clips[i], skip_first, crop_border,
                                    "seq" + std::to_string(i)));
  }
  return make_report(std::move(seqs));
}

}  // namespace grnn
