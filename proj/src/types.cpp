#include "taf/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace taf {

void validate_feature_sequence(const FeatureSequence& x) {
  if (x.frames.rows() < 1 || x.frames.cols() < 1) {
    throw shape_error("feature sequence must be at least 1x1");
  }
  if (!x.frames.allFinite()) {
    throw numeric_error("non-finite feature value in video '" + x.video_id +
                        "'");
  }
}

void validate_action_list(const ActionList& a) {
  if (a.num_actions < 2) {
    throw shape_error("action list needs K >= 2");
  }
  if (a.names) {
    if (static_cast<int>(a.names->size()) != a.num_actions) {
      throw shape_error("action name count does not match K");
    }
    auto sorted = *a.names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw shape_error("duplicate action name");
    }
  }
}

Transcript::Transcript(std::vector<int> actions) : actions_(std::move(actions)) {
  const int n = static_cast<int>(actions_.size());
  if (n == 0) throw shape_error("empty transcript");
  std::vector<char> seen(n, 0);
  for (int a : actions_) {
    if (a < 0 || a >= n || seen[a]) {
      throw shape_error("transcript is not a permutation of {0..K-1}");
    }
    seen[a] = 1;
  }
}

Transcript Transcript::identity(int k) {
  std::vector<int> v(k);
  for (int i = 0; i < k; ++i) v[i] = i;
  return Transcript(std::move(v));
}

std::vector<int> Transcript::inverse() const {
  std::vector<int> inv(actions_.size());
  for (int p = 0; p < size(); ++p) inv[actions_[p]] = p;
  return inv;
}

const char* code_kind_name(CodeKind kind) {
  switch (kind) {
    case CodeKind::kPredictedFrame: return "predicted_frame";
    case CodeKind::kPseudoFrame: return "pseudo_frame";
    case CodeKind::kPredictedSegment: return "predicted_segment";
    case CodeKind::kPseudoSegment: return "pseudo_segment";
    case CodeKind::kPredictedAlign: return "predicted_align";
    case CodeKind::kPseudoAlign: return "pseudo_align";
  }
  return "unknown";
}

namespace {

bool rows_sum_to(const Matrix& m, double target, double tol, double* worst) {
  Vector sums = m.rowwise().sum();
  *worst = (sums.array() - target).abs().maxCoeff();
  return *worst <= tol;
}

bool cols_sum_to(const Matrix& m, double target, double tol, double* worst) {
  Eigen::RowVectorXd sums = m.colwise().sum();
  *worst = (sums.array() - target).abs().maxCoeff();
  return *worst <= tol;
}

}  // namespace

CodeValidation validate_code_matrix(const CodeMatrix& m, double tol) {
  if (m.values.rows() < 1 || m.values.cols() < 1) {
    throw shape_error("empty code matrix");
  }
  if (!m.values.allFinite()) {
    throw numeric_error("non-finite code");
  }
  CodeValidation report;
  const double lo = m.values.minCoeff();
  const double hi = m.values.maxCoeff();
  if (lo < -tol || hi > 1.0 + tol) {
    report.ok = false;
    report.message = "entries outside [0,1]";
    return report;
  }

  const long b = m.values.rows();
  const long k = m.values.cols();
  switch (m.kind) {
    case CodeKind::kPredictedFrame:
    case CodeKind::kPredictedSegment:
    case CodeKind::kPredictedAlign:
    case CodeKind::kPseudoSegment: {
      report.ok = rows_sum_to(m.values, 1.0, tol, &report.worst_row_deviation);
      if (!report.ok) report.message = "row sums deviate from 1";
      break;
    }
    case CodeKind::kPseudoFrame:
    case CodeKind::kPseudoAlign: {
      const bool rows_ok =
          rows_sum_to(m.values, 1.0 / static_cast<double>(b), tol,
                      &report.worst_row_deviation);
      const bool cols_ok =
          cols_sum_to(m.values, 1.0 / static_cast<double>(k), tol,
                      &report.worst_col_deviation);
      report.ok = rows_ok && cols_ok;
      if (!report.ok) {
        std::ostringstream os;
        os << "marginal deviation: rows " << report.worst_row_deviation
           << ", cols " << report.worst_col_deviation;
        report.message = os.str();
      }
      break;
    }
  }
  return report;
}

std::vector<Segment> derive_segments(const std::vector<int>& framewise) {
  if (framewise.empty()) throw shape_error("empty sequence");
  std::vector<Segment> out;
  long run_start = -1;
  int run_action = kIgnoreLabel;
  for (long i = 0; i < static_cast<long>(framewise.size()); ++i) {
    const int label = framewise[i];
    if (label == run_action && run_start >= 0) continue;
    if (run_start >= 0 && run_action != kIgnoreLabel) {
      out.push_back({run_action, run_start, i - 1});
    }
    run_start = i;
    run_action = label;
  }
  if (run_start >= 0 && run_action != kIgnoreLabel) {
    out.push_back({run_action, run_start,
                   static_cast<long>(framewise.size()) - 1});
  }
  return out;
}

std::vector<int> flatten_segments(const std::vector<Segment>& segments,
                                  long num_frames) {
  std::vector<int> framewise(static_cast<size_t>(num_frames), kIgnoreLabel);
  for (const Segment& s : segments) {
    if (s.start < 0 || s.end >= num_frames || s.start > s.end) {
      throw shape_error("segment out of range");
    }
    for (long i = s.start; i <= s.end; ++i) framewise[i] = s.action;
  }
  return framewise;
}

Segmentation make_segmentation(std::vector<int> framewise) {
  Segmentation seg;
  seg.segments = derive_segments(framewise);
  seg.framewise = std::move(framewise);
  return seg;
}

}  // namespace taf
