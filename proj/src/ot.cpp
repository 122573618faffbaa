#include "taf/ot.hpp"

#include <cmath>
#include <limits>

namespace taf {

void validate_sinkhorn_config(const SinkhornConfig& cfg) {
  if (!(cfg.rho > 0.0)) throw shape_error("sinkhorn rho must be > 0");
  if (cfg.mode == SinkhornMode::kFixedIterations && cfg.iterations < 1) {
    throw shape_error("sinkhorn iterations must be >= 1");
  }
  if (cfg.mode == SinkhornMode::kConvergeTo && !(cfg.tolerance > 0.0)) {
    throw shape_error("sinkhorn tolerance must be > 0");
  }
}

PriorMatrix build_fixed_order_prior(long b, int k, double sigma) {
  if (b < 1 || k < 1) throw shape_error("prior needs B,K >= 1");
  if (!(sigma > 0.0)) throw shape_error("prior sigma must be > 0");

  PriorMatrix prior;
  prior.sigma = sigma;
  prior.order.resize(k);
  for (int j = 0; j < k; ++j) prior.order[j] = j;

  prior.values.resize(b, k);
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  for (long i = 0; i < b; ++i) {
    const double ti = (static_cast<double>(i) + 0.5) / static_cast<double>(b);
    for (int j = 0; j < k; ++j) {
      const double tj = (static_cast<double>(j) + 0.5) / static_cast<double>(k);
      const double delta = ti - tj;
      prior.values(i, j) = std::exp(-delta * delta * inv_two_sigma2);
    }
  }
  prior.values /= prior.values.sum();
  // Keep entries strictly positive for the log-domain solver, then restore
  // unit total mass.
  prior.values = prior.values.cwiseMax(kLogFloor);
  prior.values /= prior.values.sum();
  return prior;
}

PriorMatrix build_permutation_prior(long b, int k, double sigma,
                                    const Transcript& t) {
  if (t.size() != k) throw shape_error("transcript length must equal K");
  PriorMatrix fixed = build_fixed_order_prior(b, k, sigma);
  PriorMatrix prior;
  prior.sigma = sigma;
  prior.order = t.actions();
  prior.values.resize(b, k);
  for (int p = 0; p < k; ++p) {
    prior.values.col(t[p]) = fixed.values.col(p);
  }
  return prior;
}

namespace {

// logsumexp over each column of m shifted by the row vector u:
// out[j] = log sum_i exp(m(i,j) + u(i)).
Vector col_logsumexp(const Matrix& m, const Vector& u) {
  const long k = m.cols();
  Vector out(k);
  for (long j = 0; j < k; ++j) {
    const Vector col = m.col(j) + u;
    const double mx = col.maxCoeff();
    out(j) = mx + std::log((col.array() - mx).exp().sum());
  }
  return out;
}

Vector row_logsumexp(const Matrix& m, const Vector& v) {
  const long b = m.rows();
  Vector out(b);
  for (long i = 0; i < b; ++i) {
    const Vector row = m.row(i).transpose() + v;
    const double mx = row.maxCoeff();
    out(i) = mx + std::log((row.array() - mx).exp().sum());
  }
  return out;
}

}  // namespace

CodeMatrix sinkhorn_with_prior(const Matrix& similarity,
                               const PriorMatrix& prior,
                               const SinkhornConfig& cfg, CodeKind kind) {
  validate_sinkhorn_config(cfg);
  if (similarity.rows() != prior.values.rows() ||
      similarity.cols() != prior.values.cols()) {
    throw shape_error("similarity and prior shapes disagree");
  }
  if (!similarity.allFinite()) {
    throw numeric_error("rescale similarity: non-finite input");
  }

  const long b = similarity.rows();
  const long k = similarity.cols();
  const double log_row_target = -std::log(static_cast<double>(b));
  const double log_col_target = -std::log(static_cast<double>(k));

  // Kernel in the log domain: sim/rho + log prior.
  const Matrix log_kernel =
      similarity / cfg.rho +
      prior.values.cwiseMax(kLogFloor).array().log().matrix();

  Vector u = Vector::Zero(b);  // log row scalings
  Vector v = Vector::Zero(k);  // log column scalings

  auto iterate_once = [&]() {
    v = (Vector::Constant(k, log_col_target) - col_logsumexp(log_kernel, u));
    u = (Vector::Constant(b, log_row_target) - row_logsumexp(log_kernel, v));
  };

  auto realize = [&]() -> Matrix {
    Matrix q = ((log_kernel.colwise() + u).rowwise() +
                v.transpose()).array().exp();
    return q;
  };

  Matrix q;
  if (cfg.mode == SinkhornMode::kFixedIterations) {
    for (int it = 0; it < cfg.iterations; ++it) iterate_once();
    q = realize();
  } else {
    const long max_iterations = 200000;
    bool converged = false;
    for (long it = 0; it < max_iterations; ++it) {
      iterate_once();
      q = realize();
      // Row sums are exact after the row update; only columns can deviate.
      const double col_dev =
          (q.colwise().sum().array() - 1.0 / static_cast<double>(k))
              .abs()
              .maxCoeff();
      const double row_dev =
          (q.rowwise().sum().array() - 1.0 / static_cast<double>(b))
              .abs()
              .maxCoeff();
      if (col_dev < cfg.tolerance && row_dev < cfg.tolerance) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw numeric_error("sinkhorn failed to converge");
    }
  }

  if (!q.allFinite()) {
    throw numeric_error("rescale similarity: overflow in transport kernel");
  }
  return CodeMatrix{std::move(q), kind};
}

}  // namespace taf
