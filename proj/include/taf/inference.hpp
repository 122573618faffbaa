#pragma once

#include "taf/model.hpp"
#include "taf/ot.hpp"
#include "taf/types.hpp"

namespace taf {

enum class ProbSource { kAlignProbs, kFrameProbs };

struct DecodeConfig {
  ProbSource source = ProbSource::kAlignProbs;
  int min_seg_frames = 1;
};

void validate_decode_config(const DecodeConfig& cfg);

// Maximum-log-probability labeling made of exactly K contiguous segments in
// transcript order, each at least min_seg_frames long. O(B*K) dynamic
// program over (frame, transcript position); score ties break toward later
// segment boundaries. Probabilities are floored at kLogFloor before logs.
Segmentation viterbi_decode(const Matrix& probs, const Transcript& t,
                            const DecodeConfig& cfg);

struct SegmentVideoResult {
  Segmentation segmentation;
  Transcript transcript;
  Matrix p_f;  // B x K frame probabilities
  Matrix p_a;  // B x K alignment probabilities
};

// Full inference path for one video: encode, transport-based transcript
// estimate, decode/align, then Viterbi over the configured probability
// source given the estimated action order.
SegmentVideoResult segment_video(const FeatureSequence& x,
                                 const ModelParams& params,
                                 const SinkhornConfig& sinkhorn, double sigma,
                                 const DecodeConfig& cfg);

}  // namespace taf
