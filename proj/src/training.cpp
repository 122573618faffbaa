#include "taf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "taf/pseudo_labels.hpp"
#include "taf/rng.hpp"

namespace taf {

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.stage1_epochs < 0 || cfg.stage2_epochs < 0) {
    throw shape_error("epoch counts must be >= 0");
  }
  if (!(cfg.lr > 0.0)) throw shape_error("learning rate must be > 0");
  if (cfg.weight_decay < 0.0) throw shape_error("weight decay must be >= 0");
  if (cfg.sigma && !(*cfg.sigma > 0.0)) throw shape_error("sigma must be > 0");
  validate_sinkhorn_config(cfg.sinkhorn);
}

double cross_entropy_loss(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw shape_error("loss shapes disagree");
  }
  const double floor_log = std::log(kLogFloor);
  double acc = 0.0;
  for (long i = 0; i < p.rows(); ++i) {
    for (long j = 0; j < p.cols(); ++j) {
      acc += q(i, j) * std::max(std::log(p(i, j)), floor_log);
    }
  }
  return -acc / static_cast<double>(p.rows());
}

Matrix cross_entropy_loss_grad(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw shape_error("loss shapes disagree");
  }
  const double inv_rows = 1.0 / static_cast<double>(p.rows());
  Matrix grad = Matrix::Zero(p.rows(), p.cols());
  for (long i = 0; i < p.rows(); ++i) {
    for (long j = 0; j < p.cols(); ++j) {
      if (p(i, j) > kLogFloor) {
        grad(i, j) = -inv_rows * q(i, j) / p(i, j);
      }
    }
  }
  return grad;
}

double loss_frame(const CodeMatrix& p_f, const CodeMatrix& q_f) {
  return cross_entropy_loss(p_f.values, q_f.values);
}

double loss_segment(const CodeMatrix& p_s, const CodeMatrix& q_s) {
  return cross_entropy_loss(p_s.values, q_s.values);
}

double loss_align(const CodeMatrix& p_a, const CodeMatrix& q_a) {
  return cross_entropy_loss(p_a.values, q_a.values);
}

double loss_total(double lf, double ls, double la, double alpha, double beta) {
  return lf + alpha * ls + beta * la;
}

OptimizerState make_optimizer_state(const ModelParams& params) {
  OptimizerState state;
  for_each_tensor(params, [&](const std::string&, const Matrix& m) {
    state.m.push_back(Matrix::Zero(m.rows(), m.cols()));
    state.v.push_back(Matrix::Zero(m.rows(), m.cols()));
    state.steps.push_back(0);
  });
  return state;
}

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                 long step, double lr, double weight_decay, double beta1,
                 double beta2, double epsilon) {
  if (!grad.allFinite()) throw numeric_error("non-finite gradient");
  if (weight_decay > 0.0) param *= (1.0 - lr * weight_decay);
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  const Matrix m_hat = m / bc1;
  const Matrix v_hat = v / bc2;
  param.array() -=
      lr * m_hat.array() / (v_hat.array().sqrt() + epsilon);
}

void adam_step(ModelParams& params, const ModelGrads& grads,
               OptimizerState& state, double lr, double weight_decay,
               const std::function<bool(const std::string&)>& include) {
  std::vector<const Matrix*> grad_list;
  for_each_tensor(grads, [&](const std::string&, const Matrix& g) {
    grad_list.push_back(&g);
  });
  if (grad_list.size() != state.m.size()) {
    throw shape_error("optimizer state does not match parameter layout");
  }
  size_t idx = 0;
  for_each_tensor(params, [&](const std::string& name, Matrix& p) {
    if (include(name)) {
      ++state.steps[idx];
      adam_update(p, *grad_list[idx], state.m[idx], state.v[idx],
                  state.steps[idx], lr, weight_decay, state.beta1, state.beta2,
                  state.epsilon);
    }
    ++idx;
  });
  for (long i = 0; i < params.prototypes.rows(); ++i) {
    const double n = params.prototypes.row(i).norm();
    if (n > 0.0) params.prototypes.row(i) /= n;
  }
}

namespace {

bool stage1_tensor(const std::string& name) {
  return name == "input_proj" || name == "prototypes" ||
         name.rfind("encoder.", 0) == 0;
}

struct StepOutcome {
  double lf = 0.0, ls = 0.0, la = 0.0, total = 0.0;
};

StepOutcome train_step(const VideoSample& video, ModelParams& params,
                       OptimizerState& opt, const TrainConfig& cfg,
                       bool stage2, std::mt19937_64& dropout_rng) {
  const int k = params.cfg.k;
  const double sigma = cfg.effective_sigma(k);

  DropoutSpec drop;
  drop.active = stage2;  // stage 1 trains without dropout
  drop.rng = &dropout_rng;

  ForwardTrace trace;
  trace.encoder = encode(video.features.frames, params, drop);
  const Matrix& e = trace.encoder.output;
  trace.frame = frame_predicted_codes(e, params.prototypes, params.cfg.tau);

  const CodeMatrix q_f = frame_pseudo_labels(
      e, Prototypes{params.prototypes}, cfg.sinkhorn, sigma);

  StepOutcome out;
  LossGradients upstream;
  CodeMatrix p_f{trace.frame.p_f, CodeKind::kPredictedFrame};
  out.lf = loss_frame(p_f, q_f);
  upstream.d_p_f = cross_entropy_loss_grad(trace.frame.p_f, q_f.values);

  if (stage2) {
    const Transcript estimated = estimate_transcript(q_f);
    const Transcript identity = Transcript::identity(k);
    const Transcript& t_qs =
        cfg.qs_from_estimated_transcript ? estimated : identity;
    const Transcript& t_qa =
        cfg.qa_from_estimated_transcript ? estimated : identity;

    const CodeMatrix q_s = segment_pseudo_labels(t_qs, k);
    trace.decoder = decode(t_qs, e, params, drop);

    const CodeMatrix q_a = alignment_pseudo_labels(
        e, Prototypes{params.prototypes}, t_qa, cfg.sinkhorn, sigma);
    trace.align =
        align(e, trace.decoder->decoder_out, t_qa, params.cfg.tau_prime);

    CodeMatrix p_s{trace.decoder->p_s, CodeKind::kPredictedSegment};
    CodeMatrix p_a{trace.align->p_a, CodeKind::kPredictedAlign};
    out.ls = loss_segment(p_s, q_s);
    out.la = loss_align(p_a, q_a);
    upstream.d_p_s =
        cfg.alpha * cross_entropy_loss_grad(trace.decoder->p_s, q_s.values);
    upstream.d_p_a =
        cfg.beta * cross_entropy_loss_grad(trace.align->p_a, q_a.values);
  }
  out.total = loss_total(out.lf, out.ls, out.la, cfg.alpha, cfg.beta);

  const ModelGrads grads = backward(trace, params, upstream);
  if (stage2) {
    adam_step(params, grads, opt, cfg.lr, cfg.weight_decay);
  } else {
    adam_step(params, grads, opt, cfg.lr, cfg.weight_decay, stage1_tensor);
  }
  return out;
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg,
                  const ModelConfig& model_cfg) {
  validate_train_config(cfg);
  validate_model_config(model_cfg);
  if (dataset.videos.empty()) throw shape_error("empty dataset");
  for (const auto& v : dataset.videos) validate_feature_sequence(v.features);

  TrainResult result;
  result.params = init_params(model_cfg, cfg.seed);
  OptimizerState opt = make_optimizer_state(result.params);

  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 1));
  std::mt19937_64 dropout_rng(mix_seed(cfg.seed, 2));

  std::vector<size_t> order(dataset.videos.size());
  std::iota(order.begin(), order.end(), 0);

  const int total_epochs = cfg.stage1_epochs + cfg.stage2_epochs;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const bool stage2 = epoch >= cfg.stage1_epochs;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (size_t idx : order) {
      const VideoSample& video = dataset.videos[idx];
      const StepOutcome out =
          train_step(video, result.params, opt, cfg, stage2, dropout_rng);
      result.log.push_back({epoch, video.features.video_id, out.lf, out.ls,
                            out.la, out.total});
    }
  }
  return result;
}

std::string loss_log_csv(const std::vector<StepLog>& log) {
  std::ostringstream os;
  os << "epoch,video_id,loss_frame,loss_segment,loss_align,loss_total\n";
  char buf[512];
  for (const StepLog& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g,%.17g,%.17g\n",
                  row.epoch, row.video_id.c_str(), row.loss_frame,
                  row.loss_segment, row.loss_align, row.loss_total);
    os << buf;
  }
  return os.str();
}

}  // namespace taf
