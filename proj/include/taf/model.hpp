#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "taf/types.hpp"

namespace taf {

struct ModelConfig {
  int d_in = 0;
  int d = 30;
  int k = 0;
  int encoder_layers = 2;
  int decoder_layers = 2;
  double tau = 0.1;
  double tau_prime = 1e-3;
  double encoder_dropout = 0.3;
  double decoder_dropout = 0.1;
};

void validate_model_config(const ModelConfig& cfg);

// All tensors are MatrixXd so the optimizer and checkpoint code can walk
// them uniformly; 1-D quantities (norm gains/biases, head bias) are 1 x d.
struct LayerNormParams {
  Matrix gain;  // 1 x d
  Matrix bias;  // 1 x d
};

struct AttentionParams {
  Matrix wq, wk, wv, wo;  // d x d each
};

struct MlpParams {
  Matrix w1;  // d x 4d
  Matrix w2;  // 4d x d
};

struct EncoderLayerParams {
  LayerNormParams ln_attn;
  AttentionParams attn;
  LayerNormParams ln_mlp;
  MlpParams mlp;
};

struct DecoderLayerParams {
  LayerNormParams ln_self;
  AttentionParams self_attn;
  LayerNormParams ln_cross;
  AttentionParams cross_attn;
  LayerNormParams ln_mlp;
  MlpParams mlp;
};

struct ModelParams {
  ModelConfig cfg;
  Matrix input_proj;  // d_in x d
  std::vector<EncoderLayerParams> encoder;
  Matrix embedding;  // K x d transcript-token table
  std::vector<DecoderLayerParams> decoder;
  Matrix head_w;  // d x K
  Matrix head_b;  // 1 x K
  Matrix prototypes;  // K x d, unit rows
};

using ModelGrads = ModelParams;

// Uniform(-1/sqrt(d), 1/sqrt(d)) weights, unit norm gains, zero biases,
// prototypes renormalized to unit rows. Deterministic in `seed`.
ModelParams init_params(const ModelConfig& cfg, uint64_t seed);

ModelParams zeros_like(const ModelParams& p);

// Visits every parameter tensor in a fixed order. F is called as
// f(const std::string& name, Matrix&).
template <class P, class F>
void for_each_tensor(P& params, F&& f) {
  auto visit_ln = [&](const std::string& prefix, auto& ln) {
    f(prefix + ".gain", ln.gain);
    f(prefix + ".bias", ln.bias);
  };
  auto visit_attn = [&](const std::string& prefix, auto& a) {
    f(prefix + ".wq", a.wq);
    f(prefix + ".wk", a.wk);
    f(prefix + ".wv", a.wv);
    f(prefix + ".wo", a.wo);
  };
  auto visit_mlp = [&](const std::string& prefix, auto& m) {
    f(prefix + ".w1", m.w1);
    f(prefix + ".w2", m.w2);
  };

  f("input_proj", params.input_proj);
  for (size_t l = 0; l < params.encoder.size(); ++l) {
    const std::string p = "encoder." + std::to_string(l);
    visit_ln(p + ".ln_attn", params.encoder[l].ln_attn);
    visit_attn(p + ".attn", params.encoder[l].attn);
    visit_ln(p + ".ln_mlp", params.encoder[l].ln_mlp);
    visit_mlp(p + ".mlp", params.encoder[l].mlp);
  }
  f("embedding", params.embedding);
  for (size_t l = 0; l < params.decoder.size(); ++l) {
    const std::string p = "decoder." + std::to_string(l);
    visit_ln(p + ".ln_self", params.decoder[l].ln_self);
    visit_attn(p + ".self_attn", params.decoder[l].self_attn);
    visit_ln(p + ".ln_cross", params.decoder[l].ln_cross);
    visit_attn(p + ".cross_attn", params.decoder[l].cross_attn);
    visit_ln(p + ".ln_mlp", params.decoder[l].ln_mlp);
    visit_mlp(p + ".mlp", params.decoder[l].mlp);
  }
  f("head.w", params.head_w);
  f("head.b", params.head_b);
  f("prototypes", params.prototypes);
}

// Fixed sinusoidal table, n x d.
Matrix positional_encoding(long n, int d);

// Dropout is only active during stage-2 training passes.
struct DropoutSpec {
  bool active = false;
  std::mt19937_64* rng = nullptr;
};

// ---- forward traces (everything backward needs) ----

struct LayerNormTrace {
  Matrix normalized;  // x_hat
  Vector inv_std;
};

struct AttentionTrace {
  Matrix q_in, kv_in;   // post-norm query input / key-value input
  Matrix q, k, v;
  Matrix weights;       // softmax rows
  Matrix context;       // weights * v
};

struct MlpTrace {
  Matrix input;    // post-norm input
  Matrix pre_act;  // input * w1
  Matrix act;      // gelu(pre_act)
};

struct DropoutTrace {
  bool active = false;
  Matrix mask;  // scaled keep-mask, same shape as the activation
};

struct RowNormTrace {
  Matrix output;
  Vector inv_norm;
};

struct EncoderLayerTrace {
  LayerNormTrace ln_attn;
  AttentionTrace attn;
  DropoutTrace drop_attn;
  LayerNormTrace ln_mlp;
  MlpTrace mlp;
  DropoutTrace drop_mlp;
};

struct EncoderTrace {
  Matrix input;  // B x d_in
  std::vector<EncoderLayerTrace> layers;
  RowNormTrace out_norm;
  Matrix output;  // E, B x d, unit rows
};

struct FrameHeadTrace {
  Matrix encoder_out;    // E
  RowNormTrace proto_norm;  // normalized prototypes
  double tau = 0.1;
  Matrix p_f;  // B x K
};

struct DecoderLayerTrace {
  LayerNormTrace ln_self;
  AttentionTrace self_attn;
  DropoutTrace drop_self;
  LayerNormTrace ln_cross;
  AttentionTrace cross_attn;
  DropoutTrace drop_cross;
  LayerNormTrace ln_mlp;
  MlpTrace mlp;
  DropoutTrace drop_mlp;
};

struct DecoderTrace {
  std::vector<int> tokens;  // shifted input; -1 marks the start slot
  Matrix enc_pe;            // E + positional encoding (cross-attn keys/values)
  std::vector<DecoderLayerTrace> layers;
  Matrix decoder_out;  // D, N x d
  Matrix p_s;          // N x K
};

struct AlignTrace {
  Matrix enc_pe;   // E + PE
  Matrix dec_pe;   // D + PE
  Matrix weights;  // B x N softmax over transcript positions
  std::vector<int> transcript;
  double tau_prime = 1e-3;
  Matrix p_a;  // B x K, action-indexed
};

struct ForwardTrace {
  EncoderTrace encoder;
  FrameHeadTrace frame;
  std::optional<DecoderTrace> decoder;
  std::optional<AlignTrace> align;
};

// ---- forward ----

// Two pre-norm self-attention blocks over the projected input; output rows
// are l2-normalized. No positional encoding is added here, so the map is
// permutation-equivariant over frames.
EncoderTrace encode(const Matrix& frames, const ModelParams& p,
                    const DropoutSpec& drop = {});

// P_f = softmax(E * normalize(C)^T / tau) rowwise.
FrameHeadTrace frame_predicted_codes(const Matrix& encoder_out,
                                     const Matrix& prototypes, double tau);

// Teacher-forced decoder: input tokens are the transcript shifted right by
// one (a zero start embedding fills slot 0), so row i of P_s depends only
// on t[0..i-1] and E. Cross-attention keys/values are E + PE.
DecoderTrace decode(const Transcript& t, const Matrix& encoder_out,
                    const ModelParams& p, const DropoutSpec& drop = {});

// P_a: rowwise softmax of (E+PE)(D+PE)^T / tau_prime over transcript
// positions, columns scattered from position p to action t[p].
AlignTrace align(const Matrix& encoder_out, const Matrix& decoder_out,
                 const Transcript& t, double tau_prime);

// ---- backward ----

// Upstream gradients w.r.t. the predicted code matrices; empty (0x0)
// matrices switch the corresponding path off.
struct LossGradients {
  Matrix d_p_f;
  Matrix d_p_s;
  Matrix d_p_a;
};

// Exact reverse-mode gradients for every parameter tensor. Pseudo-labels
// never appear here: they enter the losses as constants.
ModelGrads backward(const ForwardTrace& trace, const ModelParams& p,
                    const LossGradients& upstream);

}  // namespace taf
