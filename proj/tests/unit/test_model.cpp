#include <cmath>

#include "doctest.h"
#include "grnn/model.hpp"
#include "grnn/trainer.hpp"
#include "test_util.hpp"

using namespace grnn;
using namespace grnn::test;

namespace {

GrnnConfig toy_cfg(int64_t scale = 4, int64_t channels = 8,
                   int64_t blocks = 1) {
  GrnnConfig c;
  c.scale = scale;
  c.channels = channels;
  c.num_res_blocks = blocks;
  return c;
}

// random weights with a live reconstruction head (init_weights zeroes it)
GrnnWeights live_weights(const GrnnConfig& cfg, uint64_t seed,
                         float recon_scale = 0.05f) {
  GrnnWeights w = init_weights<float>(cfg, seed);
  std::mt19937_64 rng(seed ^ 0xabcdef);
  for (auto& v : w.recon_head.primary_w.vec())
    v = static_cast<float>(next_uniform(rng, -recon_scale, recon_scale));
  return w;
}

std::vector<Tensor4> random_frames(std::mt19937_64& rng, size_t n, int64_t hw,
                                   int64_t batch = 1) {
  std::vector<Tensor4> out;
  for (size_t i = 0; i < n; ++i)
    out.push_back(random_tensor<float>(rng, batch, 3, hw, hw, 0.0f, 1.0f));
  return out;
}

}  // namespace

TEST_CASE("init_state shapes and zeros") {
  GrnnConfig cfg = toy_cfg(4, 128, 1);
  RecurrentState s = init_state(cfg, 2, 16, 20);
  CHECK(s.hidden.shape() == Shape4{2, 128, 16, 20});
  CHECK(s.prev_output.shape() == Shape4{2, 3, 64, 80});
  for (float v : s.hidden.vec()) CHECK(v == 0.0f);
  for (float v : s.prev_output.vec()) CHECK(v == 0.0f);

  RecurrentState s2 = init_state(cfg, 2, 16, 20);
  CHECK(bit_equal(s.hidden, s2.hidden));
  CHECK(bit_equal(s.prev_output, s2.prev_output));
}

TEST_CASE("cell_forward upscales 64x64 to 256x256 at scale 4") {
  GrnnConfig cfg = toy_cfg(4, 8, 1);
  GrnnWeights w = live_weights(cfg, 1);
  std::mt19937_64 rng(2);
  Tensor4 f = random_tensor<float>(rng, 1, 3, 64, 64, 0.0f, 1.0f);
  Tensor4 fp = random_tensor<float>(rng, 1, 3, 64, 64, 0.0f, 1.0f);
  auto [o, st] = cell_forward(f, fp, init_state(cfg, 1, 64, 64), w, cfg);
  CHECK(o.shape() == Shape4{1, 3, 256, 256});
  CHECK(st.hidden.shape() == Shape4{1, 8, 64, 64});
  CHECK(bit_equal(st.prev_output, o));
}

TEST_CASE("zero weights reduce to the bicubic baseline bit-for-bit") {
  GrnnConfig cfg = toy_cfg(4, 8, 2);
  GrnnWeights w = zero_weights<float>(cfg);
  std::mt19937_64 rng(3);
  auto frames = random_frames(rng, 4, 16);
  auto out = sequence_forward_frames(frames, w, cfg);
  REQUIRE(out.size() == 4);
  for (size_t t = 0; t < 4; ++t)
    CHECK(bit_equal(out[t], bicubic_resize(frames[t], 4.0)));
}

TEST_CASE("zero-init reconstruction head starts at the bicubic baseline") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeights w = init_weights<float>(cfg, 99);
  std::mt19937_64 rng(4);
  auto frames = random_frames(rng, 3, 8);
  auto out = sequence_forward_frames(frames, w, cfg);
  for (size_t t = 0; t < 3; ++t)
    CHECK(bit_equal(out[t], bicubic_resize(frames[t], 2.0)));
}

TEST_CASE("perturbing the previous frame changes the output") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeights w = live_weights(cfg, 5);
  std::mt19937_64 rng(6);
  Tensor4 f = random_tensor<float>(rng, 1, 3, 8, 8, 0.0f, 1.0f);
  Tensor4 fp = random_tensor<float>(rng, 1, 3, 8, 8, 0.0f, 1.0f);
  RecurrentState st = init_state(cfg, 1, 8, 8);
  auto [o1, s1] = cell_forward(f, fp, st, w, cfg);
  Tensor4 fp2 = fp;
  fp2.at(0, 1, 3, 3) += 0.25f;
  auto [o2, s2] = cell_forward(f, fp2, st, w, cfg);
  CHECK(max_abs_diff(o1, o2) > 0.0);
}

TEST_CASE("causality: editing frame k changes outputs only for t >= k") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeights w = live_weights(cfg, 7);
  std::mt19937_64 rng(8);
  auto frames = random_frames(rng, 5, 8);
  auto base = sequence_forward_frames(frames, w, cfg);

  auto edited = frames;
  edited[2].at(0, 0, 4, 4) = std::min(1.0f, edited[2].at(0, 0, 4, 4) + 0.3f);
  auto out = sequence_forward_frames(edited, w, cfg);

  CHECK(bit_equal(out[0], base[0]));
  CHECK(bit_equal(out[1], base[1]));
  CHECK(max_abs_diff(out[2], base[2]) > 0.0);
  CHECK(max_abs_diff(out[3], base[3]) > 0.0);
  CHECK(max_abs_diff(out[4], base[4]) > 0.0);
}

TEST_CASE("hidden state shape is stable across steps") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeights w = live_weights(cfg, 9);
  std::mt19937_64 rng(10);
  auto frames = random_frames(rng, 4, 8);
  RecurrentState st = init_state(cfg, 1, 8, 8);
  Tensor4 blank = Tensor4::zeros(1, 3, 8, 8);
  for (size_t t = 0; t < frames.size(); ++t) {
    const Tensor4& prev = t == 0 ? blank : frames[t - 1];
    auto [o, next] = cell_forward(frames[t], prev, st, w, cfg);
    CHECK(next.hidden.shape() == st.hidden.shape());
    st = next;
  }
}

TEST_CASE("repeated identical frames converge") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeights w = live_weights(cfg, 11, 0.03f);
  std::mt19937_64 rng(12);
  Tensor4 f = random_tensor<float>(rng, 1, 3, 8, 8, 0.0f, 1.0f);
  std::vector<Tensor4> frames(6, f);
  auto out = sequence_forward_frames(frames, w, cfg);

  std::vector<double> diffs;
  for (size_t t = 1; t < out.size(); ++t)
    diffs.push_back(max_abs_diff(out[t], out[t - 1]));
  for (size_t t = 2; t < diffs.size(); ++t) CHECK(diffs[t] <= diffs[t - 1]);
}

TEST_CASE("empty sequence is rejected") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeights w = zero_weights<float>(cfg);
  CHECK_THROWS_AS(sequence_forward_frames<float>({}, w, cfg), ValueError);
}

TEST_CASE("non-finite activations are diagnosed with the layer name") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeights w = zero_weights<float>(cfg);
  w.fusion.primary_b.at(0, 0, 0, 0) =
      std::numeric_limits<float>::infinity();
  std::mt19937_64 rng(13);
  Tensor4 f = random_tensor<float>(rng, 1, 3, 8, 8, 0.0f, 1.0f);
  CHECK_THROWS_WITH_AS(
      cell_forward(f, f, init_state(cfg, 1, 8, 8), w, cfg),
      doctest::Contains("fusion"), NumericError);
}

TEST_CASE("cell_forward validates state shapes") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeights w = zero_weights<float>(cfg);
  std::mt19937_64 rng(14);
  Tensor4 f = random_tensor<float>(rng, 1, 3, 8, 8, 0.0f, 1.0f);
  RecurrentState bad = init_state(cfg, 1, 8, 8);
  bad.hidden = Tensor4::zeros(1, 8, 9, 8);
  CHECK_THROWS_AS(cell_forward(f, f, bad, w, cfg), ShapeError);
}

TEST_CASE("weight init contract: kaiming bounds, zero biases, zero recon head") {
  GrnnConfig cfg = toy_cfg(4, 16, 2);
  GrnnWeights w = init_weights<float>(cfg, 1234);

  auto m = weights_to_map(w, cfg);
  for (const auto& [name, t] : m) {
    if (name.find("recon_head") == 0) {
      for (float v : t.vec()) CHECK(v == 0.0f);
      continue;
    }
    if (name.size() > 5 && name.substr(name.size() - 5) == ".bias") {
      for (float v : t.vec()) CHECK(v == 0.0f);
      continue;
    }
    const Shape4& s = t.shape();
    const double bound = std::sqrt(6.0 / static_cast<double>(s.c * s.h * s.w));
    bool any_nonzero = false;
    for (float v : t.vec()) {
      CHECK(std::abs(v) <= bound);
      any_nonzero = любое(v);
    }
    CHECK(any_nonzero);
  }
}

TEST_CASE("weights map round trip") {
  GrnnConfig cfg = toy_cfg(2, 8, 2);
  cfg.ghost_trunk = true;
  GrnnWeights w = live_weights(cfg, 21);
  auto m = weights_to_map(w, cfg);
  GrnnWeights back = weights_from_map(m, cfg);
  auto m2 = weights_to_map(back, cfg);
  REQUIRE(m.size() == m2.size());
  for (const auto& [name, t] : m) CHECK(bit_equal(t, m2.at(name)));

  m.erase("fusion.primary.weight");
  CHECK_THROWS_AS(weights_from_map(m, cfg), ValueError);
}

TEST_CASE("ghost trunk wiring forward shape") {
  GrnnConfig cfg = toy_cfg(2, 8, 2);
  cfg.ghost_trunk = true;
  GrnnWeights w = live_weights(cfg, 23);
  std::mt19937_64 rng(24);
  auto frames = random_frames(rng, 2, 8);
  auto out = sequence_forward_frames(frames, w, cfg);
  CHECK(out[0].shape() == Shape4{1, 3, 16, 16});
}

TEST_CASE("two-step toy unroll passes grad_check at 1e-3") {
  GrnnConfig cfg = toy_cfg(2, 8, 1);
  GrnnWeightsT<double> w = init_weights<double>(cfg, 31);
  // live recon head, values nudged away from relu kinks by the random draw
  std::mt19937_64 rng(32);
  for (auto& v : w.recon_head.primary_w.vec())
    v = next_uniform(rng, -0.05, 0.05);

  std::vector<Tensor4d> frames;
  for (int t = 0; t < 2; ++t)
    frames.push_back(random_tensor<double>(rng, 1, 3, 8, 8, 0.05, 0.95));
  std::vector<Tensor4d> targets;
  for (int t = 0; t < 2; ++t)
    targets.push_back(random_tensor<double>(rng, 1, 3, 16, 16, 0.05, 0.95));

  ParamMapD params = weights_to_map(w, cfg);
  auto build = [&](Tape<double>& t, const std::map<std::string, NodeId>& ids) {
    auto outs = sequence_forward_tape(t, frames, ids, cfg);
    NodeId loss = kNoNode;
    for (size_t i = 0; i < outs.size(); ++i) {
      NodeId l = t.l1_loss(outs[i], t.constant(targets[i]));
      loss = loss == kNoNode ? l : t.add(loss, l);
    }
    return t.scale(loss, 0.5);
  };
  auto report = grad_check(build, params, 1e-5, 1e-3, 77, 8);
  INFO(report.str());
  CHECK(report.pass);
}
