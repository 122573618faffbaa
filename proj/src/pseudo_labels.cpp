#include "taf/pseudo_labels.hpp"

#include <algorithm>
#include <cmath>

namespace taf {

Matrix row_normalized(const Matrix& m) {
  Matrix out = m;
  for (long i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

Matrix prototype_similarity(const Matrix& encoder_out, const Prototypes& c) {
  if (encoder_out.cols() != c.rows.cols()) {
    throw shape_error("embedding and prototype dims disagree");
  }
  return row_normalized(encoder_out) * row_normalized(c.rows).transpose();
}

CodeMatrix frame_pseudo_labels(const Matrix& encoder_out, const Prototypes& c,
                               const SinkhornConfig& cfg, double sigma) {
  const Matrix sim = prototype_similarity(encoder_out, c);
  const PriorMatrix prior =
      build_fixed_order_prior(sim.rows(), static_cast<int>(sim.cols()), sigma);
  return sinkhorn_with_prior(sim, prior, cfg, CodeKind::kPseudoFrame);
}

Transcript estimate_transcript(const CodeMatrix& q_f) {
  const Matrix& q = q_f.values;
  if (q.rows() < 1 || q.cols() < 1) throw shape_error("empty code matrix");
  if (!q.allFinite()) throw numeric_error("non-finite code");

  const int k = static_cast<int>(q.cols());
  std::vector<std::pair<long, int>> anchors(k);  // (frame, action)
  for (int j = 0; j < k; ++j) {
    long best_row = 0;
    double best = q(0, j);
    for (long i = 1; i < q.rows(); ++i) {
      if (q(i, j) > best) {
        best = q(i, j);
        best_row = i;
      }
    }
    anchors[j] = {best_row, j};
  }
  std::sort(anchors.begin(), anchors.end());
  std::vector<int> order(k);
  for (int p = 0; p < k; ++p) order[p] = anchors[p].second;
  return Transcript(std::move(order));
}

CodeMatrix segment_pseudo_labels(const Transcript& t, int k) {
  if (t.size() != k) throw shape_error("transcript length must equal K");
  Matrix q = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) q(i, t[i]) = 1.0;
  return CodeMatrix{std::move(q), CodeKind::kPseudoSegment};
}

CodeMatrix alignment_pseudo_labels(const Matrix& encoder_out,
                                   const Prototypes& c, const Transcript& t,
                                   const SinkhornConfig& cfg, double sigma) {
  const Matrix sim = prototype_similarity(encoder_out, c);
  const PriorMatrix prior = build_permutation_prior(
      sim.rows(), static_cast<int>(sim.cols()), sigma, t);
  return sinkhorn_with_prior(sim, prior, cfg, CodeKind::kPseudoAlign);
}

}  // namespace taf
