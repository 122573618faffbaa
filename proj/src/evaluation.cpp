#include "taf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace taf {

namespace {

// Optimal assignment value (maximization) for a square matrix, shortest
// augmenting path formulation with potentials, O(n^3).
double assignment_max_value(const Matrix& value) {
  const long n = value.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // Minimize the negated values; 1-based potentials arrays.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<long> match(n + 1, 0), way(n + 1, 0);
  for (long i = 1; i <= n; ++i) {
    match[0] = i;
    long j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const long i0 = match[j0];
      long j1 = 0;
      double delta = inf;
      for (long j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -value(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (long j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const long j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (long j = 1; j <= n; ++j) {
    if (match[j]) total += value(match[j] - 1, j - 1);
  }
  return total;
}

}  // namespace

Matrix confusion_counts(const std::vector<EvalVideo>& videos, int k_pred,
                        int k_gt) {
  Matrix counts = Matrix::Zero(k_pred, k_gt);
  for (const EvalVideo& v : videos) {
    if (v.ground_truth.framewise.size() != v.prediction.framewise.size()) {
      throw shape_error("ground truth and prediction lengths differ for '" +
                        v.video_id + "'");
    }
    for (size_t i = 0; i < v.ground_truth.framewise.size(); ++i) {
      const int g = v.ground_truth.framewise[i];
      const int p = v.prediction.framewise[i];
      if (g == kIgnoreLabel) continue;
      if (p == kIgnoreLabel) throw shape_error("prediction contains IGNORE");
      if (p < 0 || p >= k_pred || g < 0 || g >= k_gt) {
        throw shape_error("label out of range in '" + v.video_id + "'");
      }
      counts(p, g) += 1.0;
    }
  }
  return counts;
}

std::vector<int> hungarian_match(const Matrix& confusion) {
  if (confusion.rows() < 1 || confusion.cols() < 1) {
    throw shape_error("empty confusion matrix");
  }
  if (confusion.minCoeff() < 0.0) {
    throw shape_error("confusion counts must be nonnegative");
  }
  const long k_pred = confusion.rows();
  const long k_gt = confusion.cols();
  const long n = std::max(k_pred, k_gt);

  Matrix padded = Matrix::Zero(n, n);
  padded.topLeftCorner(k_pred, k_gt) = confusion;

  // Greedy lexicographic refinement: fix each row in turn to the smallest
  // column that still admits an optimal completion. Counts are integers, so
  // the equality checks below are exact.
  double remaining_value = assignment_max_value(padded);
  std::vector<long> rows(n), cols(n);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);

  std::vector<int> mapping(k_pred, -1);
  for (long step = 0; step < n; ++step) {
    const long row = rows.front();
    long chosen = -1;
    for (size_t cj = 0; cj < cols.size(); ++cj) {
      const long col = cols[cj];
      double rest = 0.0;
      if (cols.size() > 1) {
        Matrix sub(rows.size() - 1, cols.size() - 1);
        for (size_t ri = 1; ri < rows.size(); ++ri) {
          long out_c = 0;
          for (size_t cc = 0; cc < cols.size(); ++cc) {
            if (cc == cj) continue;
            sub(ri - 1, out_c++) = padded(rows[ri], cols[cc]);
          }
        }
        rest = assignment_max_value(sub);
      }
      if (padded(row, col) + rest == remaining_value) {
        chosen = col;
        remaining_value -= padded(row, col);
        cols.erase(cols.begin() + cj);
        break;
      }
    }
    rows.erase(rows.begin());
    if (row < k_pred) {
      mapping[row] = chosen < k_gt ? static_cast<int>(chosen) : -1;
    }
  }
  return mapping;
}

double mof(const std::vector<EvalVideo>& videos,
           const std::vector<int>& mapping) {
  long matched = 0;
  long total = 0;
  for (const EvalVideo& v : videos) {
    if (v.ground_truth.framewise.size() != v.prediction.framewise.size()) {
      throw shape_error("ground truth and prediction lengths differ for '" +
                        v.video_id + "'");
    }
    for (size_t i = 0; i < v.ground_truth.framewise.size(); ++i) {
      const int g = v.ground_truth.framewise[i];
      if (g == kIgnoreLabel) continue;
      ++total;
      const int p = v.prediction.framewise[i];
      if (p >= 0 && p < static_cast<int>(mapping.size()) && mapping[p] == g) {
        ++matched;
      }
    }
  }
  return total > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                   : 0.0;
}

namespace {

double segment_iou(const Segment& a, const Segment& b) {
  const long inter_start = std::max(a.start, b.start);
  const long inter_end = std::min(a.end, b.end);
  const long inter = std::max<long>(0, inter_end - inter_start + 1);
  const long uni = a.length() + b.length() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace

double f1_at_50(const std::vector<Segment>& gt_segments,
                const std::vector<Segment>& pred_segments,
                const std::vector<int>& mapping) {
  struct Pair {
    double iou;
    size_t gi, pi;
  };
  std::vector<Pair> pairs;
  for (size_t gi = 0; gi < gt_segments.size(); ++gi) {
    for (size_t pi = 0; pi < pred_segments.size(); ++pi) {
      const int pred_class = pred_segments[pi].action;
      const int mapped = pred_class >= 0 &&
                                 pred_class < static_cast<int>(mapping.size())
                             ? mapping[pred_class]
                             : -1;
      if (mapped != gt_segments[gi].action) continue;
      const double iou = segment_iou(gt_segments[gi], pred_segments[pi]);
      if (iou > 0.5) pairs.push_back({iou, gi, pi});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gi != b.gi) return a.gi < b.gi;
    return a.pi < b.pi;
  });

  std::vector<char> gt_used(gt_segments.size(), 0);
  std::vector<char> pred_used(pred_segments.size(), 0);
  long tp = 0;
  for (const Pair& pr : pairs) {
    if (gt_used[pr.gi] || pred_used[pr.pi]) continue;
    gt_used[pr.gi] = 1;
    pred_used[pr.pi] = 1;
    ++tp;
  }

  if (pred_segments.empty() || gt_segments.empty()) return 0.0;
  const double precision =
      static_cast<double>(tp) / static_cast<double>(pred_segments.size());
  const double recall =
      static_cast<double>(tp) / static_cast<double>(gt_segments.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

EvalReport evaluate(const std::vector<EvalVideo>& videos, int k_pred,
                    int k_gt) {
  if (videos.empty()) throw shape_error("no videos to evaluate");

  if (k_pred < 0 || k_gt < 0) {
    int max_pred = 0, max_gt = 0;
    for (const EvalVideo& v : videos) {
      for (int p : v.prediction.framewise) max_pred = std::max(max_pred, p);
      for (int g : v.ground_truth.framewise) max_gt = std::max(max_gt, g);
    }
    if (k_pred < 0) k_pred = max_pred + 1;
    if (k_gt < 0) k_gt = max_gt + 1;
  }

  std::map<std::string, std::vector<const EvalVideo*>> by_activity;
  for (const EvalVideo& v : videos) by_activity[v.activity].push_back(&v);

  EvalReport report;
  std::map<std::string, const ActivityEval*> activity_eval;
  for (const auto& [activity, group] : by_activity) {
    std::vector<EvalVideo> group_videos;
    group_videos.reserve(group.size());
    for (const EvalVideo* v : group) group_videos.push_back(*v);

    ActivityEval ae;
    ae.activity = activity;
    ae.confusion = confusion_counts(group_videos, k_pred, k_gt);
    ae.mapping = hungarian_match(ae.confusion);
    ae.mof = mof(group_videos, ae.mapping);
    ae.scored_frames = static_cast<long>(ae.confusion.sum());
    long matched = 0;
    for (int p = 0; p < k_pred; ++p) {
      if (ae.mapping[p] >= 0) {
        matched += static_cast<long>(ae.confusion(p, ae.mapping[p]));
      }
    }
    ae.matched_frames = matched;
    report.activities.push_back(std::move(ae));
  }
  for (const ActivityEval& ae : report.activities) {
    activity_eval[ae.activity] = &ae;
  }

  double mof_sum = 0.0;
  for (const ActivityEval& ae : report.activities) mof_sum += ae.mof;
  report.mof = mof_sum / static_cast<double>(report.activities.size());

  double f1_sum = 0.0;
  for (const EvalVideo& v : videos) {
    const ActivityEval* ae = activity_eval.at(v.activity);
    const double f1 = f1_at_50(v.ground_truth.segments, v.prediction.segments,
                               ae->mapping);
    report.per_video_f1.emplace_back(v.video_id, f1);
    f1_sum += f1;
  }
  report.f1 = f1_sum / static_cast<double>(videos.size());
  return report;
}

}  // namespace taf
