#pragma once

#include "taf/ot.hpp"
#include "taf/types.hpp"

namespace taf {

// Returns a copy of m with each row scaled to unit Euclidean norm.
// Zero rows are left untouched.
Matrix row_normalized(const Matrix& m);

// Cosine similarity between frame embeddings and prototypes:
// row_normalized(E) * row_normalized(C)^T. Detached from any gradient path;
// used as the transport cost for pseudo-labels.
Matrix prototype_similarity(const Matrix& encoder_out, const Prototypes& c);

// Q_f: transport coupling of frames to actions under the fixed-order prior.
CodeMatrix frame_pseudo_labels(const Matrix& encoder_out, const Prototypes& c,
                               const SinkhornConfig& cfg, double sigma);

// Anchors each action at the frame holding its column maximum in Q_f, then
// orders actions by anchor frame. Ties break toward the smaller frame index
// and then the smaller action id.
Transcript estimate_transcript(const CodeMatrix& q_f);

// Q_s: one-hot rows, row i marks action t[i].
CodeMatrix segment_pseudo_labels(const Transcript& t, int k);

// Q_a: transport coupling under the permutation-aware prior built from t.
CodeMatrix alignment_pseudo_labels(const Matrix& encoder_out,
                                   const Prototypes& c, const Transcript& t,
                                   const SinkhornConfig& cfg, double sigma);

}  // namespace taf
