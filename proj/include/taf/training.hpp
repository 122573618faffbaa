#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "taf/datagen.hpp"
#include "taf/model.hpp"
#include "taf/ot.hpp"

namespace taf {

struct TrainConfig {
  int stage1_epochs = 30;
  int stage2_epochs = 70;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double alpha = 1.0;
  double beta = 1.0;
  uint64_t seed = 0;
  SinkhornConfig sinkhorn;
  std::optional<double> sigma;  // prior band width; default 0.75/K
  // Pseudo-label ablations: when false the fixed identity order replaces
  // the estimated transcript for the corresponding code matrix.
  bool qs_from_estimated_transcript = true;
  bool qa_from_estimated_transcript = true;

  double effective_sigma(int k) const {
    return sigma ? *sigma : 0.75 / static_cast<double>(k);
  }
};

void validate_train_config(const TrainConfig& cfg);

// Cross-entropy against constant pseudo-labels: -(1/R) sum Q .* log(P)
// with logs floored at log(kLogFloor) so the reported value stays finite
// when softmax entries underflow. P and Q must be R x K.
double cross_entropy_loss(const Matrix& p, const Matrix& q);

// Exact gradient of -(1/R) sum Q .* log softmax(z) with respect to the
// row-softmax inputs z, evaluated from the softmax output:
// (P .* rowsum(Q) - Q) / R. Stays finite even where P underflows, which the
// per-entry 1/P form does not.
Matrix ce_softmax_grad(const Matrix& p_softmax, const Matrix& q);

double loss_frame(const CodeMatrix& p_f, const CodeMatrix& q_f);
double loss_segment(const CodeMatrix& p_s, const CodeMatrix& q_s);
double loss_align(const CodeMatrix& p_a, const CodeMatrix& q_a);
double loss_total(double lf, double ls, double la, double alpha, double beta);

// Adam with decoupled weight decay. Moments and step counts are stored per
// tensor in the visitation order of for_each_tensor; a tensor's step count
// only advances when it is updated, so parameters that join the
// optimization late still get fresh bias correction.
struct OptimizerState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::vector<long> steps;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

OptimizerState make_optimizer_state(const ModelParams& params);

// Single-tensor update: decoupled decay p *= (1 - lr*wd), then the
// bias-corrected Adam step. `step` is the 1-based step count.
void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                 long step, double lr, double weight_decay, double beta1,
                 double beta2, double epsilon);

// Applies adam_update to every tensor accepted by `include` (by name) and
// renormalizes prototype rows afterward. Throws on non-finite gradients.
void adam_step(ModelParams& params, const ModelGrads& grads,
               OptimizerState& state, double lr, double weight_decay,
               const std::function<bool(const std::string&)>& include =
                   [](const std::string&) { return true; });

struct StepLog {
  int epoch = 0;
  std::string video_id;
  double loss_frame = 0.0;
  double loss_segment = 0.0;
  double loss_align = 0.0;
  double loss_total = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<StepLog> log;
};

// Two-stage schedule: stage 1 fits the frame-level objective only (encoder
// and prototypes); stage 2 continues from those weights with the combined
// objective over all parameters. One video per optimization step, visited
// in a seed-shuffled order each epoch.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg,
                  const ModelConfig& model_cfg);

// CSV rows "epoch,video_id,loss_frame,loss_segment,loss_align,loss_total"
// with full round-trip precision (used for byte-identical run comparison).
std::string loss_log_csv(const std::vector<StepLog>& log);

}  // namespace taf
