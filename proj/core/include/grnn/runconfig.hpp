#ifndef GRNN_RUNCONFIG_HPP
#define GRNN_RUNCONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "grnn/model.hpp"
#include "grnn/trainer.hpp"

namespace grnn {

struct DataConfig {
  std::string root;  // dataset root of HR PNG sequences; empty for synthetic
  std::string synth_kind = "drifting-checker";
  int64_t synth_clips = 8;
  int64_t synth_frames = 8;
  int64_t synth_hr_size = 64;
  double synth_motion_x = 1.0;
  double synth_motion_y = 0.0;
  uint64_t synth_seed = 1234;
  int64_t val_clips = 1;  // clips held out from the end for validation
};

// Text run configuration: `key = value` lines grouped under [model],
// [train] and [data] sections; '#' or ';' start a comment. Every key has a
// default; unknown sections or keys are rejected.
struct RunConfig {
  GrnnConfig model;
  TrainConfig train;
  DataConfig data;

  static RunConfig parse_string(const std::string& text);
  static RunConfig parse_file(const std::filesystem::path& path);
};

}  // namespace grnn

#endif  // GRNN_RUNCONFIG_HPP
