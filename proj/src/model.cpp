#include "taf/model.hpp"

#include <cmath>

#include "taf/errors.hpp"

namespace taf {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Matrix softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (long i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    Eigen::RowVectorXd e = (z.row(i).array() - mx).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

// dz for y = softmax_rows(z) given dy.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  Matrix dz(y.rows(), y.cols());
  for (long i = 0; i < y.rows(); ++i) {
    const double dot = y.row(i).dot(dy.row(i));
    dz.row(i) = y.row(i).array() * (dy.row(i).array() - dot);
  }
  return dz;
}

Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& ln,
                          LayerNormTrace* trace) {
  const long rows = x.rows();
  const long d = x.cols();
  trace->normalized.resize(rows, d);
  trace->inv_std.resize(rows);
  for (long i = 0; i < rows; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    trace->inv_std(i) = inv;
    trace->normalized.row(i) = (x.row(i).array() - mu) * inv;
  }
  Matrix y = trace->normalized;
  y.array().rowwise() *= ln.gain.array().row(0);
  y.array().rowwise() += ln.bias.array().row(0);
  return y;
}

Matrix layer_norm_backward(const LayerNormTrace& trace,
                           const LayerNormParams& ln, const Matrix& dy,
                           LayerNormParams* grads) {
  grads->gain.array().row(0) +=
      (dy.cwiseProduct(trace.normalized)).colwise().sum().array();
  grads->bias.array().row(0) += dy.colwise().sum().array();

  Matrix dxhat = dy;
  dxhat.array().rowwise() *= ln.gain.array().row(0);

  Matrix dx(dy.rows(), dy.cols());
  for (long i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).mean();
    const double m2 = dxhat.row(i).cwiseProduct(trace.normalized.row(i)).mean();
    dx.row(i) = (dxhat.row(i).array() - m1 -
                 trace.normalized.row(i).array() * m2) *
                trace.inv_std(i);
  }
  return dx;
}

Matrix row_norm_forward(const Matrix& x, RowNormTrace* trace) {
  trace->output.resize(x.rows(), x.cols());
  trace->inv_norm.resize(x.rows());
  for (long i = 0; i < x.rows(); ++i) {
    const double n = std::max(x.row(i).norm(), 1e-12);
    trace->inv_norm(i) = 1.0 / n;
    trace->output.row(i) = x.row(i) / n;
  }
  return trace->output;
}

Matrix row_norm_backward(const RowNormTrace& trace, const Matrix& dy) {
  Matrix dx(dy.rows(), dy.cols());
  for (long i = 0; i < dy.rows(); ++i) {
    const double dot = trace.output.row(i).dot(dy.row(i));
    dx.row(i) = (dy.row(i) - trace.output.row(i) * dot) * trace.inv_norm(i);
  }
  return dx;
}

Matrix attention_forward(const Matrix& q_in, const Matrix& kv_in,
                         const AttentionParams& w, bool causal,
                         AttentionTrace* trace) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q_in.cols()));
  trace->q_in = q_in;
  trace->kv_in = kv_in;
  trace->q = q_in * w.wq;
  trace->k = kv_in * w.wk;
  trace->v = kv_in * w.wv;
  Matrix scores = trace->q * trace->k.transpose() * scale;
  if (causal) {
    for (long i = 0; i < scores.rows(); ++i) {
      for (long j = i + 1; j < scores.cols(); ++j) {
        scores(i, j) = -std::numeric_limits<double>::infinity();
      }
    }
  }
  trace->weights = softmax_rows(scores);
  trace->context = trace->weights * trace->v;
  return trace->context * w.wo;
}

// Returns d q_in; accumulates d kv_in into *d_kv_in (callers pass separate
// buffers even for self-attention and sum them).
Matrix attention_backward(const AttentionTrace& trace,
                          const AttentionParams& w, const Matrix& d_out,
                          AttentionParams* grads, Matrix* d_kv_in) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(trace.q_in.cols()));
  grads->wo += trace.context.transpose() * d_out;
  const Matrix d_context = d_out * w.wo.transpose();

  const Matrix d_weights = d_context * trace.v.transpose();
  const Matrix d_v = trace.weights.transpose() * d_context;
  const Matrix d_scores = softmax_rows_backward(trace.weights, d_weights);

  const Matrix d_q = d_scores * trace.k * scale;
  const Matrix d_k = d_scores.transpose() * trace.q * scale;

  grads->wq += trace.q_in.transpose() * d_q;
  grads->wk += trace.kv_in.transpose() * d_k;
  grads->wv += trace.kv_in.transpose() * d_v;

  *d_kv_in += d_k * w.wk.transpose() + d_v * w.wv.transpose();
  return d_q * w.wq.transpose();
}

Matrix mlp_forward(const Matrix& x, const MlpParams& w, MlpTrace* trace) {
  trace->input = x;
  trace->pre_act = x * w.w1;
  trace->act = trace->pre_act.unaryExpr([](double v) { return gelu(v); });
  return trace->act * w.w2;
}

Matrix mlp_backward(const MlpTrace& trace, const MlpParams& w,
                    const Matrix& d_out, MlpParams* grads) {
  grads->w2 += trace.act.transpose() * d_out;
  Matrix d_act = d_out * w.w2.transpose();
  Matrix d_pre = d_act.cwiseProduct(
      trace.pre_act.unaryExpr([](double v) { return gelu_grad(v); }));
  grads->w1 += trace.input.transpose() * d_pre;
  return d_pre * w.w1.transpose();
}

Matrix dropout_forward(const Matrix& x, double rate, const DropoutSpec& spec,
                       DropoutTrace* trace) {
  if (!spec.active || rate <= 0.0) {
    trace->active = false;
    return x;
  }
  if (spec.rng == nullptr) throw shape_error("dropout needs an rng");
  trace->active = true;
  trace->mask.resize(x.rows(), x.cols());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (long i = 0; i < x.rows(); ++i) {
    for (long j = 0; j < x.cols(); ++j) {
      trace->mask(i, j) = unit(*spec.rng) < rate ? 0.0 : keep_scale;
    }
  }
  return x.cwiseProduct(trace->mask);
}

Matrix dropout_backward(const DropoutTrace& trace, const Matrix& dy) {
  if (!trace.active) return dy;
  return dy.cwiseProduct(trace.mask);
}

void check_finite(const Matrix& m, const char* where, int layer) {
  if (!m.allFinite()) {
    throw numeric_error(std::string("non-finite activation in ") + where +
                        " layer " + std::to_string(layer));
  }
}

}  // namespace

void validate_model_config(const ModelConfig& cfg) {
  if (cfg.d_in < 1 || cfg.d < 1 || cfg.k < 2) {
    throw shape_error("model config needs d_in >= 1, d >= 1, K >= 2");
  }
  if (cfg.encoder_layers < 1 || cfg.decoder_layers < 1) {
    throw shape_error("model needs at least one layer per stack");
  }
  if (!(cfg.tau > 0.0) || !(cfg.tau_prime > 0.0)) {
    throw shape_error("temperatures must be > 0");
  }
}

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
  validate_model_config(cfg);
  ModelParams p;
  p.cfg = cfg;
  const int d = cfg.d;
  p.input_proj.resize(cfg.d_in, d);
  p.encoder.resize(cfg.encoder_layers);
  for (auto& l : p.encoder) {
    l.ln_attn = {Matrix(1, d), Matrix(1, d)};
    l.attn = {Matrix(d, d), Matrix(d, d), Matrix(d, d), Matrix(d, d)};
    l.ln_mlp = {Matrix(1, d), Matrix(1, d)};
    l.mlp = {Matrix(d, 4 * d), Matrix(4 * d, d)};
  }
  p.embedding.resize(cfg.k, d);
  p.decoder.resize(cfg.decoder_layers);
  for (auto& l : p.decoder) {
    l.ln_self = {Matrix(1, d), Matrix(1, d)};
    l.self_attn = {Matrix(d, d), Matrix(d, d), Matrix(d, d), Matrix(d, d)};
    l.ln_cross = {Matrix(1, d), Matrix(1, d)};
    l.cross_attn = {Matrix(d, d), Matrix(d, d), Matrix(d, d), Matrix(d, d)};
    l.ln_mlp = {Matrix(1, d), Matrix(1, d)};
    l.mlp = {Matrix(d, 4 * d), Matrix(4 * d, d)};
  }
  p.head_w.resize(d, cfg.k);
  p.head_b.resize(1, cfg.k);
  p.prototypes.resize(cfg.k, d);

  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for_each_tensor(p, [&](const std::string& name, Matrix& m) {
    if (name.ends_with(".gain")) {
      m.setOnes();
    } else if (name.ends_with(".bias") || name == "head.b") {
      m.setZero();
    } else {
      for (long i = 0; i < m.rows(); ++i) {
        for (long j = 0; j < m.cols(); ++j) m(i, j) = uniform(rng);
      }
    }
  });
  for (long i = 0; i < p.prototypes.rows(); ++i) {
    p.prototypes.row(i) /= p.prototypes.row(i).norm();
  }
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for_each_tensor(z, [](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

Matrix positional_encoding(long n, int d) {
  Matrix pe(n, d);
  for (long pos = 0; pos < n; ++pos) {
    for (int i = 0; i < d; ++i) {
      const int pair = i / 2;
      const double rate =
          std::pow(10000.0, -2.0 * static_cast<double>(pair) / d);
      const double angle = static_cast<double>(pos) * rate;
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

EncoderTrace encode(const Matrix& frames, const ModelParams& p,
                    const DropoutSpec& drop) {
  if (frames.cols() != p.input_proj.rows()) {
    throw shape_error("input feature dim does not match model d_in");
  }
  if (!frames.allFinite()) throw numeric_error("non-finite encoder input");

  EncoderTrace trace;
  trace.input = frames;
  trace.layers.resize(p.encoder.size());

  Matrix h = frames * p.input_proj;
  for (size_t l = 0; l < p.encoder.size(); ++l) {
    const EncoderLayerParams& lp = p.encoder[l];
    EncoderLayerTrace& lt = trace.layers[l];

    const Matrix n1 = layer_norm_forward(h, lp.ln_attn, &lt.ln_attn);
    Matrix a = attention_forward(n1, n1, lp.attn, false, &lt.attn);
    a = dropout_forward(a, p.cfg.encoder_dropout, drop, &lt.drop_attn);
    h += a;

    const Matrix n2 = layer_norm_forward(h, lp.ln_mlp, &lt.ln_mlp);
    Matrix m = mlp_forward(n2, lp.mlp, &lt.mlp);
    m = dropout_forward(m, p.cfg.encoder_dropout, drop, &lt.drop_mlp);
    h += m;
    check_finite(h, "encoder", static_cast<int>(l));
  }
  trace.output = row_norm_forward(h, &trace.out_norm);
  return trace;
}

FrameHeadTrace frame_predicted_codes(const Matrix& encoder_out,
                                     const Matrix& prototypes, double tau) {
  if (!(tau > 0.0)) throw shape_error("tau must be > 0");
  if (encoder_out.cols() != prototypes.cols()) {
    throw shape_error("embedding and prototype dims disagree");
  }
  FrameHeadTrace trace;
  trace.encoder_out = encoder_out;
  trace.tau = tau;
  const Matrix c_norm = row_norm_forward(prototypes, &trace.proto_norm);
  trace.p_f = softmax_rows(encoder_out * c_norm.transpose() / tau);
  return trace;
}

DecoderTrace decode(const Transcript& t, const Matrix& encoder_out,
                    const ModelParams& p, const DropoutSpec& drop) {
  const int n = t.size();
  if (n != p.cfg.k) throw shape_error("transcript length must equal K");
  if (encoder_out.cols() != p.cfg.d) {
    throw shape_error("encoder output dim does not match model d");
  }

  DecoderTrace trace;
  trace.tokens.resize(n);
  trace.tokens[0] = -1;
  for (int i = 1; i < n; ++i) trace.tokens[i] = t[i - 1];

  const Matrix pe_n = positional_encoding(n, p.cfg.d);
  Matrix h = pe_n;  // start slot keeps the zero embedding
  for (int i = 1; i < n; ++i) h.row(i) += p.embedding.row(trace.tokens[i]);

  trace.enc_pe =
      encoder_out + positional_encoding(encoder_out.rows(), p.cfg.d);
  trace.layers.resize(p.decoder.size());

  for (size_t l = 0; l < p.decoder.size(); ++l) {
    const DecoderLayerParams& lp = p.decoder[l];
    DecoderLayerTrace& lt = trace.layers[l];

    const Matrix n1 = layer_norm_forward(h, lp.ln_self, &lt.ln_self);
    Matrix sa = attention_forward(n1, n1, lp.self_attn, true, &lt.self_attn);
    sa = dropout_forward(sa, p.cfg.decoder_dropout, drop, &lt.drop_self);
    h += sa;

    const Matrix n2 = layer_norm_forward(h, lp.ln_cross, &lt.ln_cross);
    Matrix ca =
        attention_forward(n2, trace.enc_pe, lp.cross_attn, false, &lt.cross_attn);
    ca = dropout_forward(ca, p.cfg.decoder_dropout, drop, &lt.drop_cross);
    h += ca;

    const Matrix n3 = layer_norm_forward(h, lp.ln_mlp, &lt.ln_mlp);
    Matrix m = mlp_forward(n3, lp.mlp, &lt.mlp);
    m = dropout_forward(m, p.cfg.decoder_dropout, drop, &lt.drop_mlp);
    h += m;
    check_finite(h, "decoder", static_cast<int>(l));
  }
  trace.decoder_out = h;
  Matrix logits = h * p.head_w;
  logits.array().rowwise() += p.head_b.array().row(0);
  trace.p_s = softmax_rows(logits);
  return trace;
}

AlignTrace align(const Matrix& encoder_out, const Matrix& decoder_out,
                 const Transcript& t, double tau_prime) {
  if (!(tau_prime > 0.0)) throw shape_error("tau_prime must be > 0");
  if (encoder_out.cols() != decoder_out.cols()) {
    throw shape_error("encoder/decoder dims disagree");
  }
  if (t.size() != decoder_out.rows()) {
    throw shape_error("transcript length must match decoder rows");
  }

  AlignTrace trace;
  trace.transcript = t.actions();
  trace.tau_prime = tau_prime;
  trace.enc_pe = encoder_out + positional_encoding(encoder_out.rows(),
                                                   static_cast<int>(encoder_out.cols()));
  trace.dec_pe = decoder_out + positional_encoding(decoder_out.rows(),
                                                   static_cast<int>(decoder_out.cols()));
  trace.weights =
      softmax_rows(trace.enc_pe * trace.dec_pe.transpose() / tau_prime);

  const int n = t.size();
  trace.p_a.resize(encoder_out.rows(), n);
  for (int pos = 0; pos < n; ++pos) {
    trace.p_a.col(t[pos]) = trace.weights.col(pos);
  }
  return trace;
}

ModelGrads backward(const ForwardTrace& trace, const ModelParams& p,
                    const LossGradients& upstream) {
  ModelGrads grads = zeros_like(p);
  const Matrix& e = trace.encoder.output;
  Matrix d_e = Matrix::Zero(e.rows(), e.cols());
  Matrix d_d;  // decoder output gradient
  if (trace.decoder) {
    d_d = Matrix::Zero(trace.decoder->decoder_out.rows(),
                       trace.decoder->decoder_out.cols());
  }

  // Alignment head.
  if (upstream.d_p_a.size() > 0) {
    if (!trace.align) throw shape_error("missing alignment trace");
    const AlignTrace& at = *trace.align;
    const int n = static_cast<int>(at.transcript.size());
    Matrix d_weights(at.weights.rows(), at.weights.cols());
    for (int pos = 0; pos < n; ++pos) {
      d_weights.col(pos) = upstream.d_p_a.col(at.transcript[pos]);
    }
    const Matrix d_scores =
        softmax_rows_backward(at.weights, d_weights) / at.tau_prime;
    d_e += d_scores * at.dec_pe;
    d_d += d_scores.transpose() * at.enc_pe;
  }

  // Decoder stack (prediction head + cross/self attention + embedding).
  if (trace.decoder && (upstream.d_p_s.size() > 0 || d_d.size() > 0)) {
    const DecoderTrace& dt = *trace.decoder;
    if (upstream.d_p_s.size() > 0) {
      const Matrix d_logits =
          softmax_rows_backward(dt.p_s, upstream.d_p_s);
      grads.head_w += dt.decoder_out.transpose() * d_logits;
      grads.head_b.array().row(0) += d_logits.colwise().sum().array();
      d_d += d_logits * p.head_w.transpose();
    }

    Matrix d_h = d_d;
    Matrix d_enc_pe = Matrix::Zero(dt.enc_pe.rows(), dt.enc_pe.cols());
    for (long l = static_cast<long>(p.decoder.size()) - 1; l >= 0; --l) {
      const DecoderLayerParams& lp = p.decoder[l];
      const DecoderLayerTrace& lt = dt.layers[l];

      Matrix d_m = dropout_backward(lt.drop_mlp, d_h);
      Matrix d_n3 = mlp_backward(lt.mlp, lp.mlp, d_m, &grads.decoder[l].mlp);
      d_h += layer_norm_backward(lt.ln_mlp, lp.ln_mlp, d_n3,
                                 &grads.decoder[l].ln_mlp);

      Matrix d_ca = dropout_backward(lt.drop_cross, d_h);
      Matrix d_n2 = attention_backward(lt.cross_attn, lp.cross_attn, d_ca,
                                       &grads.decoder[l].cross_attn, &d_enc_pe);
      d_h += layer_norm_backward(lt.ln_cross, lp.ln_cross, d_n2,
                                 &grads.decoder[l].ln_cross);

      Matrix d_sa = dropout_backward(lt.drop_self, d_h);
      Matrix d_n1_kv = Matrix::Zero(d_h.rows(), d_h.cols());
      Matrix d_n1 = attention_backward(lt.self_attn, lp.self_attn, d_sa,
                                       &grads.decoder[l].self_attn, &d_n1_kv);
      d_n1 += d_n1_kv;
      d_h += layer_norm_backward(lt.ln_self, lp.ln_self, d_n1,
                                 &grads.decoder[l].ln_self);
    }

    for (size_t i = 1; i < dt.tokens.size(); ++i) {
      grads.embedding.row(dt.tokens[i]) += d_h.row(i);
    }
    d_e += d_enc_pe;
  }

  // Frame prediction head.
  if (upstream.d_p_f.size() > 0) {
    const FrameHeadTrace& ft = trace.frame;
    const Matrix d_logits = softmax_rows_backward(ft.p_f, upstream.d_p_f);
    d_e += d_logits * ft.proto_norm.output / ft.tau;
    const Matrix d_c_norm =
        d_logits.transpose() * ft.encoder_out / ft.tau;
    grads.prototypes += row_norm_backward(ft.proto_norm, d_c_norm);
  }

  // Encoder stack.
  {
    Matrix d_h = row_norm_backward(trace.encoder.out_norm, d_e);
    for (long l = static_cast<long>(p.encoder.size()) - 1; l >= 0; --l) {
      const EncoderLayerParams& lp = p.encoder[l];
      const EncoderLayerTrace& lt = trace.encoder.layers[l];

      Matrix d_m = dropout_backward(lt.drop_mlp, d_h);
      Matrix d_n2 = mlp_backward(lt.mlp, lp.mlp, d_m, &grads.encoder[l].mlp);
      d_h += layer_norm_backward(lt.ln_mlp, lp.ln_mlp, d_n2,
                                 &grads.encoder[l].ln_mlp);

      Matrix d_a = dropout_backward(lt.drop_attn, d_h);
      Matrix d_n1_kv = Matrix::Zero(d_h.rows(), d_h.cols());
      Matrix d_n1 = attention_backward(lt.attn, lp.attn, d_a,
                                       &grads.encoder[l].attn, &d_n1_kv);
      d_n1 += d_n1_kv;
      d_h += layer_norm_backward(lt.ln_attn, lp.ln_attn, d_n1,
                                 &grads.encoder[l].ln_attn);
    }
    grads.input_proj += trace.encoder.input.transpose() * d_h;
  }

  return grads;
}

}  // namespace taf
