#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "taf/errors.hpp"

namespace taf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Sentinel for frames that carry no action label (e.g. background in ground
// truth). Lives outside [0, K); predictions never emit it.
inline constexpr int kIgnoreLabel = -1;

// Per-video input: one feature row per frame.
struct FeatureSequence {
  Matrix frames;  // B x d_in
  std::string video_id;
  std::optional<double> fps;  // metadata only

  long num_frames() const { return frames.rows(); }
  long feature_dim() const { return frames.cols(); }
};

// Throws if the sequence is empty or contains non-finite values.
void validate_feature_sequence(const FeatureSequence& x);

struct ActionList {
  int num_actions = 0;  // K >= 2
  std::optional<std::vector<std::string>> names;
};

void validate_action_list(const ActionList& a);

// K learned prototype vectors, one per action class. Rows are kept at unit
// Euclidean norm by the optimizer.
struct Prototypes {
  Matrix rows;  // K x d

  int num_actions() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }
};

// Ordered action sequence of a video. Length N equals K and the entries are
// a permutation of {0, ..., K-1}; the constructor enforces this.
class Transcript {
 public:
  Transcript() = default;
  explicit Transcript(std::vector<int> actions);

  static Transcript identity(int k);

  int size() const { return static_cast<int>(actions_.size()); }
  int operator[](int i) const { return actions_[i]; }
  const std::vector<int>& actions() const { return actions_; }

  // Position of each action: inverse()[action] == position in the transcript.
  std::vector<int> inverse() const;

  bool operator==(const Transcript& o) const { return actions_ == o.actions_; }

 private:
  std::vector<int> actions_;
};

enum class CodeKind {
  kPredictedFrame,   // P_f, rows sum to 1
  kPseudoFrame,      // Q_f, row sums 1/B, column sums 1/K
  kPredictedSegment, // P_s, rows sum to 1
  kPseudoSegment,    // Q_s, one-hot rows
  kPredictedAlign,   // P_a, rows sum to 1
  kPseudoAlign,      // Q_a, row sums 1/B, column sums 1/K
};

const char* code_kind_name(CodeKind kind);

// Assignment-probability matrix between rows (frames or transcript
// positions) and the K actions.
struct CodeMatrix {
  Matrix values;  // R x K
  CodeKind kind = CodeKind::kPredictedFrame;

  long rows() const { return values.rows(); }
  int num_actions() const { return static_cast<int>(values.cols()); }
};

struct CodeValidation {
  bool ok = true;
  std::string message;
  double worst_row_deviation = 0.0;
  double worst_col_deviation = 0.0;
};

// Checks the kind-specific marginal invariants of `m` at tolerance `tol`.
// Throws numeric_error on NaN/Inf entries ("non-finite code").
CodeValidation validate_code_matrix(const CodeMatrix& m, double tol);

// Contiguous run of frames sharing one action. end_frame is inclusive.
struct Segment {
  int action = 0;
  long start = 0;
  long end = 0;  // inclusive

  long length() const { return end - start + 1; }
  bool operator==(const Segment& o) const {
    return action == o.action && start == o.start && end == o.end;
  }
};

struct Segmentation {
  std::vector<int> framewise;     // length B, values in [0,K) or kIgnoreLabel
  std::vector<Segment> segments;  // derived, IGNORE runs excluded

  long num_frames() const { return static_cast<long>(framewise.size()); }
};

// Run-length encodes maximal constant runs; IGNORE runs are skipped.
// Throws shape_error("empty sequence") on empty input.
std::vector<Segment> derive_segments(const std::vector<int>& framewise);

// Inverse of derive_segments for gap-free segment lists: writes each
// segment's action over its frame range; frames not covered get IGNORE.
std::vector<int> flatten_segments(const std::vector<Segment>& segments,
                                  long num_frames);

Segmentation make_segmentation(std::vector<int> framewise);

// Encoder/decoder activations shared between modules.
struct EmbeddingSet {
  Matrix encoder_out;    // B x d  (E)
  Matrix transcript_emb; // N x d  (S)
  Matrix decoder_out;    // N x d  (D)
};

}  // namespace taf
