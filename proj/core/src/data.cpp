#include "grnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "grnn/ops.hpp"
#include "grnn/png_io.hpp"
#include "grnn/rng.hpp"

namespace grnn {

namespace fs = std::filesystem;

void VideoSequence::validate() const {
  if (frames.empty()) throw ValueError("video sequence: no frames");
  const Shape4& s0 = frames[0].shape();
  if (s0.b != 1 || s0.c != 3)
    throw ShapeError("video sequence: frames must be (1,3,H,W), got " +
                     s0.str());
  for (size_t i = 1; i < frames.size(); ++i)
    if (!(frames[i].shape() == s0))
      throw ShapeError("video sequence: frame " + std::to_string(i) +
                       " has shape " + frames[i].shape().str() +
                       ", expected " + s0.str());
}

SynthKind synth_kind_from_string(const std::string& name) {
  if (name == "moving-bars") return SynthKind::kMovingBars;
  if (name == "drifting-checker") return SynthKind::kDriftingChecker;
  if (name == "random-texture-translate")
    return SynthKind::kRandomTextureTranslate;
  throw ValueError("unknown synth kind '" + name + "'");
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::kMovingBars: return "moving-bars";
    case SynthKind::kDriftingChecker: return "drifting-checker";
    case SynthKind::kRandomTextureTranslate: return "random-texture-translate";
  }
  return "?";
}

void SynthSpec::validate(int64_t scale) const {
  if (frame_count < 1) throw ValueError("synth: frame_count must be >= 1");
  if (hr_size < 8) throw ValueError("synth: hr_size must be >= 8");
  if (scale >= 1 && hr_size % (4 * scale) != 0)
    throw ValueError("synth: hr_size " + std::to_string(hr_size) +
                     " not divisible by 4*scale = " +
                     std::to_string(4 * scale));
  auto half_integer = [](double m) {
    return std::abs(m * 2.0 - std::round(m * 2.0)) < 1e-12;
  };
  if (!half_integer(motion_x) || !half_integer(motion_y))
    throw ValueError("synth: motion must be integer or half-integer");
}

namespace {

// seeded base pattern of one clip; frames are translated samples of it
Tensor4 synth_base(const SynthSpec& spec) {
  const int64_t n = spec.hr_size;
  Tensor4 base = Tensor4::zeros(1, 3, n, n);
  std::mt19937_64 rng(spec.seed);

  switch (spec.kind) {
    case SynthKind::kMovingBars: {
      const int64_t period = std::max<int64_t>(8, n / 8);
      float ca[3], cb[3];
      for (int i = 0; i < 3; ++i) {
        ca[i] = static_cast<float>(next_uniform(rng, 0.1, 0.45));
        cb[i] = static_cast<float>(next_uniform(rng, 0.55, 0.9));
      }
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < n; ++y)
          for (int64_t x = 0; x < n; ++x)
            base.at(0, c, y, x) = (x % period) * 2 < period ? ca[c] : cb[c];
      break;
    }
    case SynthKind::kDriftingChecker: {
      const int64_t cell = std::max<int64_t>(4, n / 8);
      const int64_t cells = (n + cell - 1) / cell;
      std::vector<float> shade(static_cast<size_t>(cells * cells * 3));
      for (auto& v : shade) v = static_cast<float>(next_uniform(rng, 0.0, 1.0));
      for (int64_t y = 0; y < n; ++y)
        for (int64_t x = 0; x < n; ++x) {
          const int64_t cy = y / cell, cx = x / cell;
          const bool dark = (cy + cx) % 2 == 0;
          for (int64_t c = 0; c < 3; ++c) {
            const float s =
                shade[static_cast<size_t>((cy * cells + cx) * 3 + c)];
            base.at(0, c, y, x) = dark ? 0.1f + 0.25f * s : 0.65f + 0.3f * s;
          }
        }
      break;
    }
    case SynthKind::kRandomTextureTranslate: {
      for (auto& v : base.vec())
        v = static_cast<float>(next_uniform(rng, 0.0, 1.0));
      // bandlimit slightly so decimation leaves recoverable structure
      base = gaussian_blur(base, 1.0);
      float lo = 1.0f, hi = 0.0f;
      for (float v : base.vec()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const float span = hi > lo ? hi - lo : 1.0f;
      for (auto& v : base.vec()) v = (v - lo) / span;
      break;
    }
  }
  return base;
}

// periodic bilinear sample of the base at (y - oy, x - ox)
float sample_shifted(const Tensor4& base, int64_t c, int64_t y, int64_t x,
                     double oy, double ox) {
  const int64_t n = base.height();
  const double sy = static_cast<double>(y) - oy;
  const double sx = static_cast<double>(x) - ox;
  const double fy = std::floor(sy), fx = std::floor(sx);
  const double wy = sy - fy, wx = sx - fx;
  auto wrap = [n](int64_t i) { return ((i % n) + n) % n; };
  const int64_t y0 = wrap(static_cast<int64_t>(fy));
  const int64_t y1 = wrap(static_cast<int64_t>(fy) + 1);
  const int64_t x0 = wrap(static_cast<int64_t>(fx));
  const int64_t x1 = wrap(static_cast<int64_t>(fx) + 1);
  const double v00 = base.at(0, c, y0, x0), v01 = base.at(0, c, y0, x1);
  const double v10 = base.at(0, c, y1, x0), v11 = base.at(0, c, y1, x1);
  const double v0 = v00 * (1.0 - wx) + v01 * wx;
  const double v1 = v10 * (1.0 - wx) + v11 * wx;
  return static_cast<float>(v0 * (1.0 - wy) + v1 * wy);
}

}  // namespace

VideoSequence synth_generate(const SynthSpec& spec) {
  spec.validate(0);
  const Tensor4 base = synth_base(spec);
  const int64_t n = spec.hr_size;

  VideoSequence seq;
  seq.role = FrameRole::kHr;
  seq.frames.reserve(static_cast<size_t>(spec.frame_count));
  for (int64_t t = 0; t < spec.frame_count; ++t) {
    const double oy = spec.motion_y * static_cast<double>(t);
    const double ox = spec.motion_x * static_cast<double>(t);
    Tensor4 f = Tensor4::zeros(1, 3, n, n);
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < n; ++y)
        for (int64_t x = 0; x < n; ++x)
          f.at(0, c, y, x) = sample_shifted(base, c, y, x, oy, ox);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

VideoSequence degrade(const VideoSequence& hr, int64_t scale, double sigma) {
  hr.validate();
  if (scale < 1) throw ValueError("degrade: scale must be >= 1");
  if (hr.height() % scale != 0 || hr.width() % scale != 0)
    throw ShapeError("degrade: frame size " + std::to_string(hr.height()) +
                     "x" + std::to_string(hr.width()) +
                     " not divisible by scale " + std::to_string(scale));

  VideoSequence lr;
  lr.role = FrameRole::kLr;
  lr.frames.reserve(hr.frames.size());
  for (const Tensor4& f : hr.frames) {
    Tensor4 blurred = gaussian_blur(f, sigma);
    const int64_t oh = f.height() / scale, ow = f.width() / scale;
    Tensor4 small = Tensor4::zeros(1, 3, oh, ow);
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t x = 0; x < ow; ++x)
          small.at(0, c, y, x) = blurred.at(0, c, y * scale, x * scale);
    lr.frames.push_back(std::move(small));
  }
  return lr;
}

VideoSequence load_sequence_dir(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw IoError("'" + dir.string() + "' is not a directory");

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == ".png") files.push_back(entry.path());
  }
  if (files.empty())
    throw IoError("no PNG frames in directory '" + dir.string() + "'");
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });

  VideoSequence seq;
  seq.role = FrameRole::kHr;
  seq.frames.reserve(files.size());
  for (const fs::path& file : files) {
    ImageU8 img = read_png_rgb8(file);
    if (!seq.frames.empty() &&
        (img.height != seq.height() || img.width != seq.width()))
      throw ShapeError("frame '" + file.string() + "' is " +
                       std::to_string(img.width) + "x" +
                       std::to_string(img.height) + ", sequence is " +
                       std::to_string(seq.width()) + "x" +
                       std::to_string(seq.height()));
    Tensor4 f = Tensor4::zeros(1, 3, img.height, img.width);
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x)
        for (int64_t c = 0; c < 3; ++c)
          f.at(0, c, y, x) =
              static_cast<float>(img.rgb[static_cast<size_t>(
                  (y * img.width + x) * 3 + c)]) /
              255.0f;
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

void save_frames(const VideoSequence& seq, const fs::path& dir) {
  seq.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "'");

  for (size_t t = 0; t < seq.frames.size(); ++t) {
    const Tensor4& f = seq.frames[t];
    ImageU8 img;
    img.width = f.width();
    img.height = f.height();
    img.rgb.resize(static_cast<size_t>(img.width * img.height * 3));
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          const float v = std::clamp(f.at(0, c, y, x), 0.0f, 1.0f);
          img.rgb[static_cast<size_t>((y * img.width + x) * 3 + c)] =
              static_cast<uint8_t>(std::lround(v * 255.0f));
        }
    char name[16];
    std::snprintf(name, sizeof(name), "%04zu.png", t + 1);
    write_png_rgb8(dir / name, img);
  }
}

}  // namespace grnn
