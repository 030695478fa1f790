#include "grnn/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "grnn/error.hpp"

namespace grnn {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct KeyValue {
  std::string section;
  std::string key;
  std::string value;
  int line;
};

[[noreturn]] void bad(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

int64_t to_int(const KeyValue& kv) {
  int64_t v = 0;
  const std::string s = kv.value;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    bad(kv.line, "'" + kv.key + "' expects an integer, got '" + s + "'");
  return v;
}

uint64_t to_u64(const KeyValue& kv) {
  uint64_t v = 0;
  const std::string s = kv.value;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    bad(kv.line, "'" + kv.key + "' expects a non-negative integer, got '" + s +
                     "'");
  return v;
}

double to_double(const KeyValue& kv) {
  try {
    size_t used = 0;
    double v = std::stod(kv.value, &used);
    if (used != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    bad(kv.line, "'" + kv.key + "' expects a number, got '" + kv.value + "'");
  }
}

bool to_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1") return true;
  if (kv.value == "false" || kv.value == "0") return false;
  bad(kv.line, "'" + kv.key + "' expects true/false, got '" + kv.value + "'");
}

}  // namespace

RunConfig RunConfig::parse_string(const std::string& text) {
  RunConfig cfg;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    size_t hash = s.find_first_of("#;");
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;

    if (s.front() == '[') {
      if (s.back() != ']') bad(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section != "model" && section != "train" && section != "data")
        bad(line, "unknown section '" + section + "'");
      continue;
    }

    size_t eq = s.find('=');
    if (eq == std::string::npos) bad(line, "expected 'key = value'");
    KeyValue kv{section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line};
    if (kv.key.empty()) bad(line, "empty key");
    if (kv.section.empty())
      bad(line, "key '" + kv.key + "' appears before any [section]");

    if (kv.section == "model") {
      if (kv.key == "scale") cfg.model.scale = to_int(kv);
      else if (kv.key == "channels") cfg.model.channels = to_int(kv);
      else if (kv.key == "num_res_blocks") cfg.model.num_res_blocks = to_int(kv);
      else if (kv.key == "ghost_ratio") cfg.model.ghost_ratio = to_int(kv);
      else if (kv.key == "primary_kernel") cfg.model.primary_kernel = to_int(kv);
      else if (kv.key == "cheap_kernel") cfg.model.cheap_kernel = to_int(kv);
      else if (kv.key == "ghost_trunk") cfg.model.ghost_trunk = to_bool(kv);
      else bad(line, "unknown [model] key '" + kv.key + "'");
    } else if (kv.section == "train") {
      if (kv.key == "epochs") cfg.train.epochs = to_int(kv);
      else if (kv.key == "steps_per_epoch") cfg.train.steps_per_epoch = to_int(kv);
      else if (kv.key == "lr0") cfg.train.lr0 = to_double(kv);
      else if (kv.key == "lr_decay") cfg.train.lr_decay = to_double(kv);
      else if (kv.key == "lr_step_epochs") cfg.train.lr_step_epochs = to_int(kv);
      else if (kv.key == "beta1") cfg.train.beta1 = to_double(kv);
      else if (kv.key == "beta2") cfg.train.beta2 = to_double(kv);
      else if (kv.key == "epsilon") cfg.train.epsilon = to_double(kv);
      else if (kv.key == "weight_decay") cfg.train.weight_decay = to_double(kv);
      else if (kv.key == "clip_length") cfg.train.clip_length = to_int(kv);
      else if (kv.key == "patch_size") cfg.train.patch_size = to_int(kv);
      else if (kv.key == "batch") cfg.train.batch = to_int(kv);
      else if (kv.key == "seed") cfg.train.seed = to_u64(kv);
      else if (kv.key == "sigma") cfg.train.sigma = to_double(kv);
      else bad(line, "unknown [train] key '" + kv.key + "'");
    } else {  // data
      if (kv.key == "root") cfg.data.root = kv.value;
      else if (kv.key == "synth_kind") cfg.data.synth_kind = kv.value;
      else if (kv.key == "synth_clips") cfg.data.synth_clips = to_int(kv);
      else if (kv.key == "synth_frames") cfg.data.synth_frames = to_int(kv);
      else if (kv.key == "synth_hr_size") cfg.data.synth_hr_size = to_int(kv);
      else if (kv.key == "synth_motion_x") cfg.data.synth_motion_x = to_double(kv);
      else if (kv.key == "synth_motion_y") cfg.data.synth_motion_y = to_double(kv);
      else if (kv.key == "synth_seed") cfg.data.synth_seed = to_u64(kv);
      else if (kv.key == "val_clips") cfg.data.val_clips = to_int(kv);
      else bad(line, "unknown [data] key '" + kv.key + "'");
    }
  }

  cfg.model.validate();
  synth_kind_from_string(cfg.data.synth_kind);
  return cfg;
}

RunConfig RunConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

}  // namespace grnn
