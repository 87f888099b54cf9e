#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "funet/losses.hpp"
#include "funet/metrics.hpp"
#include "funet/model.hpp"
#include "funet/synth.hpp"

namespace funet {

struct AdamState {
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  std::int64_t t = 0;
  std::vector<std::vector<Scalar>> m, v;  // parallel to the model's named params
};

// One standard Adam update from the grads currently on the parameters.
void adam_step(const std::vector<std::pair<std::string, TensorPtr<Scalar>>>& params,
               AdamState& st, Scalar lr);

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 4;
  int steps = 2000;
  LossWeights weights;  // 0.8 / 0.1 / 0.1
  bool use_l2_reconstruction = false;  // ablation: l2 instead of l1 for L_r
  double aug_rotation_deg = 10.0;
  double aug_translate_frac = 0.05;
  double aug_shear = 0.05;
  bool aug_flip = true;
  int eval_interval = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (lr <= 0) throw Error("TrainConfig: lr must be > 0");
    if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
  }
};

struct TrainRecord {
  std::int64_t step = 0;
  LossBreakdown loss;
  std::optional<MetricsReport> metrics;  // filled at eval intervals
};

// Assembled training batch (inputs and encoded targets).
struct Batch {
  TensorPtr<Scalar> degraded, clean, minutia, orientation, mask;
};

// Deterministic batch assembly: sample choice and augmentation parameters
// are a pure function of (seed, step).
Batch assemble_batch(const Dataset& data, const TrainConfig& cfg, std::uint64_t step);

// Runs `steps` optimization steps starting at absolute step `start_step`.
// Appends one CSV row per step to `csv` when given. Aborts with an Error on
// non-finite loss, naming the step and component losses.
std::vector<TrainRecord> train(const TrainConfig& cfg, FingerUNet& model, const Dataset& data,
                               AdamState& opt, std::uint64_t start_step = 0,
                               std::ostream* csv = nullptr);

void write_csv_header(std::ostream& os, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoints: magic "FUNT", u32 version, length-prefixed config JSON, named
// little-endian f32 parameter and buffer records, optional Adam state, the
// step counter and the training seed.
// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelConfig model_cfg;
  std::vector<std::pair<std::string, std::vector<Scalar>>> params;
  std::vector<std::pair<std::string, std::vector<Scalar>>> buffers;
  bool has_adam = false;
  AdamState adam;
  std::uint64_t step = 0;
  std::uint64_t train_seed = 0;
};

void checkpoint_save(const std::string& path, FingerUNet& model, const AdamState* opt,
                     std::uint64_t step, std::uint64_t train_seed);
Checkpoint checkpoint_load(const std::string& path);

// Copies checkpoint values into a model built from the same config;
// verifies every name and shape.
void apply_checkpoint(FingerUNet& model, const Checkpoint& ckpt);

// Eval-mode enhancement of a [0,1] image through a checkpointed model.
Image enhance_image(FingerUNet& model, const Image& input);

}  // namespace funet
