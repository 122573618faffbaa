#pragma once

#include <string>
#include <utility>
#include <vector>

#include "taf/types.hpp"

namespace taf {

// One evaluated video: ground truth may contain IGNORE frames, predictions
// never do. Lengths must match.
struct EvalVideo {
  std::string video_id;
  std::string activity = "default";
  Segmentation ground_truth;
  Segmentation prediction;
};

// Frame-count matrix: entry (p, g) counts frames predicted p with ground
// truth g, IGNORE ground-truth frames excluded.
Matrix confusion_counts(const std::vector<EvalVideo>& videos, int k_pred,
                        int k_gt);

// Maximum-matched-frames bijection between predicted and ground-truth
// classes. Returns mapping[pred] = gt id or -1 when K_pred > K_gt leaves a
// class unmatched. Ties break toward the lexicographically smallest
// mapping (smaller gt index preferred, unmatched last).
std::vector<int> hungarian_match(const Matrix& confusion);

// Pooled frame accuracy over the given videos under `mapping`, IGNORE
// ground-truth frames excluded.
double mof(const std::vector<EvalVideo>& videos,
           const std::vector<int>& mapping);

// Segment F1 with IoU > 0.5: greedy one-to-one matching of same-class
// segments by descending IoU (ties toward earlier segments).
double f1_at_50(const std::vector<Segment>& gt_segments,
                const std::vector<Segment>& pred_segments,
                const std::vector<int>& mapping);

struct ActivityEval {
  std::string activity;
  std::vector<int> mapping;  // pred -> gt
  Matrix confusion;
  double mof = 0.0;
  long matched_frames = 0;
  long scored_frames = 0;
};

struct EvalReport {
  double mof = 0.0;  // mean over activities
  double f1 = 0.0;   // mean over videos
  std::vector<std::pair<std::string, double>> per_video_f1;
  std::vector<ActivityEval> activities;
};

// Activity-level protocol: one Hungarian matching per activity, pooled MOF
// per activity averaged across activities, per-video F1 averaged across all
// videos. k_pred/k_gt < 0 means infer from the data.
EvalReport evaluate(const std::vector<EvalVideo>& videos, int k_pred = -1,
                    int k_gt = -1);

}  // namespace taf
