#ifndef GRNN_DATA_HPP
#define GRNN_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grnn/tensor.hpp"

namespace grnn {

enum class FrameRole { kHr, kLr };

// Ordered list of frames, each (1, 3, H, W) with values in [0, 1].
struct VideoSequence {
  std::vector<Tensor4> frames;
  FrameRole role = FrameRole::kHr;

  int64_t height() const { return frames.empty() ? 0 : frames[0].height(); }
  int64_t width() const { return frames.empty() ? 0 : frames[0].width(); }
  size_t size() const { return frames.size(); }

  // length >= 1, all frames (1,3,H,W) with one shared shape
  void validate() const;
};

enum class SynthKind { kMovingBars, kDriftingChecker, kRandomTextureTranslate };

SynthKind synth_kind_from_string(const std::string& name);
std::string to_string(SynthKind kind);

// Deterministic synthetic HR video: a seeded base pattern translated by
// `motion` pixels per frame with wrap-around. Integer motion reproduces an
// exact roll; half-integer motion is sampled bilinearly from the base.
struct SynthSpec {
  SynthKind kind = SynthKind::kDriftingChecker;
  int64_t frame_count = 8;
  int64_t hr_size = 64;
  double motion_x = 1.0;  // pixels/frame, integer or half-integer
  double motion_y = 0.0;
  uint64_t seed = 0;

  void validate(int64_t scale) const;  // hr_size divisible by 4*scale
};

VideoSequence synth_generate(const SynthSpec& spec);

// HR -> LR: per frame, Gaussian blur then decimation (every scale-th pixel
// starting at offset 0).
VideoSequence degrade(const VideoSequence& hr, int64_t scale, double sigma);

// Directory of PNG frames, lexicographic filename order, 8-bit RGB
// decoded to v/255. Distinct errors for unreadable files, inconsistent
// dimensions, and an empty directory.
VideoSequence load_sequence_dir(const std::filesystem::path& dir);

// Writes frames as 0001.png, 0002.png, ...; values clamped to [0,1] and
// rounded to 8 bits.
void save_frames(const VideoSequence& seq, const std::filesystem::path& dir);

}  // namespace grnn

#endif  // GRNN_DATA_HPP
