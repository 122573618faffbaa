#pragma once

#include <vector>

#include "taf/types.hpp"

namespace taf {

// Floor applied to prior entries before taking logs, and to probabilities
// before cross-entropy / Viterbi logs.
inline constexpr double kLogFloor = 1e-12;

// Temporal prior coupling frames to actions: a Gaussian band over
// normalized time/action coordinates. Entries are strictly positive and
// sum to 1.
struct PriorMatrix {
  Matrix values;             // B x K
  double sigma = 0.0;        // band width, fraction of normalized time
  std::vector<int> order;    // action id per band position (identity for M_A)
};

enum class SinkhornMode { kFixedIterations, kConvergeTo };

struct SinkhornConfig {
  double rho = 0.07;        // KL pull toward the prior
  int iterations = 3;       // used in kFixedIterations mode
  SinkhornMode mode = SinkhornMode::kFixedIterations;
  double tolerance = 1e-6;  // used in kConvergeTo mode
};

void validate_sinkhorn_config(const SinkhornConfig& cfg);

// Default band width when none is configured.
inline double default_prior_sigma(int k) { return 0.75 / static_cast<double>(k); }

// Band prior in canonical action order: entry (i,j) is proportional to
// exp(-((i+.5)/B - (j+.5)/K)^2 / (2 sigma^2)), normalized to total mass 1.
PriorMatrix build_fixed_order_prior(long b, int k, double sigma);

// Same band laid out along the transcript: band position p is assigned to
// action t[p], so column t[p] of the result is column p of the fixed-order
// prior.
PriorMatrix build_permutation_prior(long b, int k, double sigma,
                                    const Transcript& t);

// Solves max_Q <Q, similarity> - rho * KL(Q || prior) over couplings with
// row marginals 1/B and column marginals 1/K. Alternates column and row
// scaling updates in the log domain, ending on a row update, so row sums
// are exact on return. kConvergeTo mode iterates until both marginals are
// within cfg.tolerance.
CodeMatrix sinkhorn_with_prior(const Matrix& similarity,
                               const PriorMatrix& prior,
                               const SinkhornConfig& cfg,
                               CodeKind kind = CodeKind::kPseudoFrame);

}  // namespace taf
