#include <doctest.h>

#include <filesystem>
#include <random>

#include "taf/checkpoint.hpp"
#include "taf/model.hpp"
#include "taf/training.hpp"

using namespace taf;

namespace {

Matrix random_matrix(long rows, long cols, std::mt19937_64& rng,
                     double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

Matrix random_codes(long rows, long cols, std::mt19937_64& rng) {
  Matrix q = random_matrix(rows, cols, rng, 0.05, 1.0);
  q /= q.sum();  // arbitrary positive constants, unit mass
  return q;
}

struct GradCheckInstance {
  ModelConfig cfg;
  Matrix frames;
  Transcript t;
  Matrix q_f, q_s, q_a;
  double alpha = 1.0;
  double beta = 1.0;
};

GradCheckInstance make_instance(uint64_t seed) {
  GradCheckInstance inst;
  inst.cfg.d_in = 5;
  inst.cfg.d = 8;
  inst.cfg.k = 3;
  inst.cfg.tau = 0.1;
  inst.cfg.tau_prime = 0.5;  // moderate so the alignment softmax has slope
  std::mt19937_64 rng(seed);
  const long b = 6;
  inst.frames = random_matrix(b, inst.cfg.d_in, rng);
  inst.t = Transcript({1, 2, 0});
  inst.q_f = random_codes(b, inst.cfg.k, rng);
  inst.q_s = random_codes(inst.cfg.k, inst.cfg.k, rng);
  inst.q_a = random_codes(b, inst.cfg.k, rng);
  return inst;
}

double total_loss(const GradCheckInstance& inst, const ModelParams& p) {
  const EncoderTrace enc = encode(inst.frames, p);
  const FrameHeadTrace head =
      frame_predicted_codes(enc.output, p.prototypes, p.cfg.tau);
  const DecoderTrace dec = decode(inst.t, enc.output, p);
  const AlignTrace al =
      align(enc.output, dec.decoder_out, inst.t, p.cfg.tau_prime);
  return cross_entropy_loss(head.p_f, inst.q_f) +
         inst.alpha * cross_entropy_loss(dec.p_s, inst.q_s) +
         inst.beta * cross_entropy_loss(al.p_a, inst.q_a);
}

ModelGrads analytic_grads(const GradCheckInstance& inst, const ModelParams& p) {
  ForwardTrace trace;
  trace.encoder = encode(inst.frames, p);
  trace.frame =
      frame_predicted_codes(trace.encoder.output, p.prototypes, p.cfg.tau);
  trace.decoder = decode(inst.t, trace.encoder.output, p);
  trace.align = align(trace.encoder.output, trace.decoder->decoder_out, inst.t,
                      p.cfg.tau_prime);
  LossGradients upstream;
  upstream.d_p_f = cross_entropy_loss_grad(trace.frame.p_f, inst.q_f);
  upstream.d_p_s =
      inst.alpha * cross_entropy_loss_grad(trace.decoder->p_s, inst.q_s);
  upstream.d_p_a =
      inst.beta * cross_entropy_loss_grad(trace.align->p_a, inst.q_a);
  return backward(trace, p, upstream);
}

// Max relative finite-difference error across every entry of every tensor.
double max_grad_check_error(const GradCheckInstance& inst, ModelParams& p,
                            double h) {
  const ModelGrads grads = analytic_grads(inst, p);
  std::vector<const Matrix*> grad_list;
  for_each_tensor(grads, [&](const std::string&, const Matrix& g) {
    grad_list.push_back(&g);
  });

  double worst = 0.0;
  size_t idx = 0;
  for_each_tensor(p, [&](const std::string&, Matrix& tensor) {
    const Matrix& g = *grad_list[idx++];
    for (long i = 0; i < tensor.rows(); ++i) {
      for (long j = 0; j < tensor.cols(); ++j) {
        const double saved = tensor(i, j);
        tensor(i, j) = saved + h;
        const double up = total_loss(inst, p);
        tensor(i, j) = saved - h;
        const double down = total_loss(inst, p);
        tensor(i, j) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom =
            std::max({std::abs(fd), std::abs(g(i, j)), 1e-3});
        worst = std::max(worst, std::abs(fd - g(i, j)) / denom);
      }
    }
  });
  return worst;
}

}  // namespace

TEST_CASE("every parameter block passes the finite-difference gradient check") {
  GradCheckInstance inst = make_instance(0);
  ModelParams p = init_params(inst.cfg, 1);
  CHECK(max_grad_check_error(inst, p, 1e-4) < 1e-4);
}

TEST_CASE("gradient check also passes in the frame-only regime") {
  GradCheckInstance inst = make_instance(3);
  ModelParams p = init_params(inst.cfg, 4);

  auto loss = [&](const ModelParams& params) {
    const EncoderTrace enc = encode(inst.frames, params);
    const FrameHeadTrace head =
        frame_predicted_codes(enc.output, params.prototypes, params.cfg.tau);
    return cross_entropy_loss(head.p_f, inst.q_f);
  };

  ForwardTrace trace;
  trace.encoder = encode(inst.frames, p);
  trace.frame =
      frame_predicted_codes(trace.encoder.output, p.prototypes, p.cfg.tau);
  LossGradients upstream;
  upstream.d_p_f = cross_entropy_loss_grad(trace.frame.p_f, inst.q_f);
  const ModelGrads grads = backward(trace, p, upstream);

  // Spot-check two representative tensors against finite differences, and
  // confirm decoder parameters receive no gradient on this path.
  const double h = 1e-4;
  double worst = 0.0;
  auto check_tensor = [&](Matrix& tensor, const Matrix& g) {
    for (long i = 0; i < tensor.rows(); ++i) {
      for (long j = 0; j < tensor.cols(); ++j) {
        const double saved = tensor(i, j);
        tensor(i, j) = saved + h;
        const double up = loss(p);
        tensor(i, j) = saved - h;
        const double down = loss(p);
        tensor(i, j) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(g(i, j)), 1e-3});
        worst = std::max(worst, std::abs(fd - g(i, j)) / denom);
      }
    }
  };
  check_tensor(p.prototypes, grads.prototypes);
  check_tensor(p.input_proj, grads.input_proj);
  CHECK(worst < 1e-4);

  CHECK(grads.embedding.norm() == 0.0);
  CHECK(grads.head_w.norm() == 0.0);
  for (const auto& layer : grads.decoder) {
    CHECK(layer.self_attn.wq.norm() == 0.0);
    CHECK(layer.cross_attn.wv.norm() == 0.0);
  }
}

TEST_CASE("zero upstream gradients produce zero parameter gradients") {
  GradCheckInstance inst = make_instance(5);
  const ModelParams p = init_params(inst.cfg, 6);
  ForwardTrace trace;
  trace.encoder = encode(inst.frames, p);
  trace.frame =
      frame_predicted_codes(trace.encoder.output, p.prototypes, p.cfg.tau);
  trace.decoder = decode(inst.t, trace.encoder.output, p);
  trace.align = align(trace.encoder.output, trace.decoder->decoder_out, inst.t,
                      p.cfg.tau_prime);
  LossGradients upstream;
  upstream.d_p_f = Matrix::Zero(trace.frame.p_f.rows(), trace.frame.p_f.cols());
  upstream.d_p_s =
      Matrix::Zero(trace.decoder->p_s.rows(), trace.decoder->p_s.cols());
  upstream.d_p_a =
      Matrix::Zero(trace.align->p_a.rows(), trace.align->p_a.cols());
  const ModelGrads grads = backward(trace, p, upstream);
  for_each_tensor(grads, [&](const std::string&, const Matrix& g) {
    CHECK(g.norm() == 0.0);
  });
}

TEST_CASE("encoder is deterministic and permutation-equivariant without dropout") {
  ModelConfig cfg;
  cfg.d_in = 4;
  cfg.d = 8;
  cfg.k = 3;
  const ModelParams p = init_params(cfg, 7);
  std::mt19937_64 rng(8);
  const Matrix x = random_matrix(9, 4, rng);

  const Matrix e1 = encode(x, p).output;
  const Matrix e2 = encode(x, p).output;
  CHECK((e1 - e2).norm() == 0.0);

  std::vector<int> perm = {4, 0, 7, 2, 8, 1, 6, 3, 5};
  Matrix xp(9, 4);
  for (int i = 0; i < 9; ++i) xp.row(perm[i]) = x.row(i);
  const Matrix ep = encode(xp, p).output;
  for (int i = 0; i < 9; ++i) {
    CHECK((ep.row(perm[i]) - e1.row(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("single-frame self-attention weight is exactly one") {
  ModelConfig cfg;
  cfg.d_in = 4;
  cfg.d = 8;
  cfg.k = 2;
  const ModelParams p = init_params(cfg, 2);
  std::mt19937_64 rng(3);
  const EncoderTrace trace = encode(random_matrix(1, 4, rng), p);
  for (const auto& layer : trace.layers) {
    REQUIRE(layer.attn.weights.rows() == 1);
    CHECK(layer.attn.weights(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(trace.output.row(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("frame head produces uniform rows for zero similarity") {
  ModelConfig cfg;
  cfg.d_in = 4;
  cfg.d = 6;
  cfg.k = 4;
  const ModelParams p = init_params(cfg, 9);
  const Matrix e = Matrix::Zero(5, 6);
  const FrameHeadTrace head = frame_predicted_codes(e, p.prototypes, 0.1);
  CHECK((head.p_f.array() - 0.25).abs().maxCoeff() < 1e-15);
}

TEST_CASE("frame head sharpens as tau shrinks and flattens as tau grows") {
  std::mt19937_64 rng(11);
  const Matrix e = random_matrix(6, 8, rng);
  const Matrix protos = random_matrix(3, 8, rng);

  const FrameHeadTrace sharp = frame_predicted_codes(e, protos, 1e-4);
  for (long i = 0; i < 6; ++i) {
    CHECK(sharp.p_f.row(i).maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
  }

  const FrameHeadTrace base = frame_predicted_codes(e, protos, 0.5);
  const FrameHeadTrace flat = frame_predicted_codes(e, protos, 1.0);
  for (long i = 0; i < 6; ++i) {
    CHECK(flat.p_f.row(i).maxCoeff() < base.p_f.row(i).maxCoeff());
  }

  // Softmax rows always sum to one.
  CHECK((base.p_f.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("decoder first position attends only to itself") {
  ModelConfig cfg;
  cfg.d_in = 4;
  cfg.d = 8;
  cfg.k = 4;
  const ModelParams p = init_params(cfg, 13);
  std::mt19937_64 rng(14);
  const Matrix e = encode(random_matrix(10, 4, rng), p).output;
  const DecoderTrace dec = decode(Transcript({2, 0, 3, 1}), e, p);
  for (const auto& layer : dec.layers) {
    CHECK(layer.self_attn.weights(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    for (int j = 1; j < 4; ++j) CHECK(layer.self_attn.weights(0, j) == 0.0);
  }
  CHECK((dec.p_s.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("zeroed cross-attention value weights hide the encoder from P_s") {
  ModelConfig cfg;
  cfg.d_in = 4;
  cfg.d = 8;
  cfg.k = 3;
  ModelParams p = init_params(cfg, 15);
  for (auto& layer : p.decoder) layer.cross_attn.wv.setZero();

  std::mt19937_64 rng(16);
  const Matrix e1 = encode(random_matrix(7, 4, rng), p).output;
  const Matrix e2 = encode(random_matrix(7, 4, rng), p).output;
  const Transcript t({1, 0, 2});
  const DecoderTrace d1 = decode(t, e1, p);
  const DecoderTrace d2 = decode(t, e2, p);
  CHECK((d1.p_s - d2.p_s).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("teacher forcing is causal: changing later tokens keeps earlier rows") {
  ModelConfig cfg;
  cfg.d_in = 4;
  cfg.d = 8;
  cfg.k = 4;
  const ModelParams p = init_params(cfg, 17);
  std::mt19937_64 rng(18);
  const Matrix e = encode(random_matrix(12, 4, rng), p).output;

  const Transcript t1({0, 1, 2, 3});
  const Transcript t2({0, 1, 3, 2});  // differs from position 2 onward
  const DecoderTrace d1 = decode(t1, e, p);
  const DecoderTrace d2 = decode(t2, e, p);
  // Rows 0..2 depend only on t[0..1], which agree.
  for (int i = 0; i <= 2; ++i) {
    CHECK((d1.p_s.row(i) - d2.p_s.row(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK((d1.p_s.row(3) - d2.p_s.row(3)).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("alignment softmax is uniform when both streams cancel the encoding") {
  const long b = 5;
  const int n = 3;
  const int d = 8;
  const Matrix e = -positional_encoding(b, d);
  const Matrix dd = -positional_encoding(n, d);
  const AlignTrace al = align(e, dd, Transcript({1, 2, 0}), 0.7);
  CHECK((al.weights.array() - 1.0 / n).abs().maxCoeff() < 1e-15);
}

TEST_CASE("alignment scatter is the identity for identity transcripts") {
  std::mt19937_64 rng(19);
  const Matrix e = random_matrix(6, 8, rng);
  const Matrix d = random_matrix(3, 8, rng);
  const AlignTrace al = align(e, d, Transcript::identity(3), 0.5);
  CHECK((al.p_a - al.weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gathering alignment columns by the transcript inverts the scatter") {
  std::mt19937_64 rng(20);
  const Matrix e = random_matrix(6, 8, rng);
  const Matrix d = random_matrix(4, 8, rng);
  const Transcript t({2, 0, 3, 1});
  const AlignTrace al = align(e, d, t, 0.5);
  for (int pos = 0; pos < 4; ++pos) {
    CHECK((al.p_a.col(t[pos]) - al.weights.col(pos)).cwiseAbs().maxCoeff() ==
          0.0);
  }
}

TEST_CASE("encode rejects mismatched and non-finite input") {
  ModelConfig cfg;
  cfg.d_in = 4;
  cfg.d = 8;
  cfg.k = 2;
  const ModelParams p = init_params(cfg, 21);
  CHECK_THROWS_AS(encode(Matrix::Zero(3, 5), p), shape_error);
  Matrix bad = Matrix::Zero(3, 4);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(encode(bad, p), numeric_error);
}

TEST_CASE("checkpoints round-trip every tensor and the config echo") {
  ModelConfig cfg;
  cfg.d_in = 5;
  cfg.d = 8;
  cfg.k = 3;
  const ModelParams p = init_params(cfg, 22);
  const std::string echo = model_config_echo(cfg) + "train.rho=0.07\n";

  const auto path = std::filesystem::temp_directory_path() / "taf_test.ckpt";
  save_checkpoint(path, p, echo);
  const LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.config_echo == echo);

  std::vector<const Matrix*> orig;
  for_each_tensor(p, [&](const std::string&, const Matrix& m) {
    orig.push_back(&m);
  });
  size_t idx = 0;
  for_each_tensor(loaded.params, [&](const std::string&, const Matrix& m) {
    CHECK((m - *orig[idx++]).norm() == 0.0);
  });
  std::filesystem::remove(path);
}
