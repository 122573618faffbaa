#include "taf/inference.hpp"

#include <cmath>
#include <limits>

#include "taf/pseudo_labels.hpp"

namespace taf {

void validate_decode_config(const DecodeConfig& cfg) {
  if (cfg.min_seg_frames < 1) {
    throw shape_error("min_seg_frames must be >= 1");
  }
}

Segmentation viterbi_decode(const Matrix& probs, const Transcript& t,
                            const DecodeConfig& cfg) {
  validate_decode_config(cfg);
  const long b = probs.rows();
  const int k = t.size();
  const long m = cfg.min_seg_frames;
  if (probs.cols() < k) throw shape_error("probability matrix narrower than K");
  if (!probs.allFinite()) throw numeric_error("non-finite probabilities");
  if (b < static_cast<long>(k) * m) {
    throw shape_error("sequence too short for transcript");
  }

  const double neg_inf = -std::numeric_limits<double>::infinity();

  // lp(i, p): log prob of frame i under the action at transcript slot p;
  // prefix(p, i) = sum of lp(0..i-1, p).
  Matrix prefix(k, b + 1);
  for (int p = 0; p < k; ++p) {
    prefix(p, 0) = 0.0;
    for (long i = 0; i < b; ++i) {
      prefix(p, i + 1) =
          prefix(p, i) + std::log(std::max(probs(i, t[p]), kLogFloor));
    }
  }

  // dp(p, i): best score of frames [0..i] with segment p ending exactly at
  // frame i. dp(p, i) = prefix(p, i+1) + max over starts s of
  // (dp(p-1, s-1) - prefix(p, s)); the running maximum admits start s once
  // i >= s + m - 1. Ties prefer the later start.
  Matrix dp = Matrix::Constant(k, b, neg_inf);
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> arg_start(k, b);
  arg_start.setConstant(-1);

  for (long i = m - 1; i < b; ++i) {
    dp(0, i) = prefix(0, i + 1);
    arg_start(0, i) = 0;
  }
  for (int p = 1; p < k; ++p) {
    double best = neg_inf;
    long best_start = -1;
    for (long i = static_cast<long>(p + 1) * m - 1; i < b; ++i) {
      const long s = i - m + 1;  // newly admissible start for segment p
      if (dp(p - 1, s - 1) > neg_inf) {
        const double cand = dp(p - 1, s - 1) - prefix(p, s);
        if (cand >= best) {
          best = cand;
          best_start = s;
        }
      }
      if (best_start >= 0) {
        dp(p, i) = prefix(p, i + 1) + best;
        arg_start(p, i) = best_start;
      }
    }
  }

  if (!(dp(k - 1, b - 1) > neg_inf)) {
    throw numeric_error("no feasible segmentation");
  }

  std::vector<int> labels(static_cast<size_t>(b));
  long end = b - 1;
  for (int p = k - 1; p >= 0; --p) {
    const long start = arg_start(p, end);
    for (long i = start; i <= end; ++i) labels[i] = t[p];
    end = start - 1;
  }
  return make_segmentation(std::move(labels));
}

SegmentVideoResult segment_video(const FeatureSequence& x,
                                 const ModelParams& params,
                                 const SinkhornConfig& sinkhorn, double sigma,
                                 const DecodeConfig& cfg) {
  validate_feature_sequence(x);
  const EncoderTrace enc = encode(x.frames, params);
  const Matrix& e = enc.output;

  const CodeMatrix q_f =
      frame_pseudo_labels(e, Prototypes{params.prototypes}, sinkhorn, sigma);
  SegmentVideoResult result;
  result.transcript = estimate_transcript(q_f);

  const FrameHeadTrace head =
      frame_predicted_codes(e, params.prototypes, params.cfg.tau);
  result.p_f = head.p_f;

  const DecoderTrace dec = decode(result.transcript, e, params);
  const AlignTrace al =
      align(e, dec.decoder_out, result.transcript, params.cfg.tau_prime);
  result.p_a = al.p_a;

  const Matrix& probs =
      cfg.source == ProbSource::kAlignProbs ? result.p_a : result.p_f;
  result.segmentation = viterbi_decode(probs, result.transcript, cfg);
  return result;
}

}  // namespace taf
