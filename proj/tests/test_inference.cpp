#include <doctest.h>

#include <cmath>
#include <random>

#include "taf/datagen.hpp"
#include "taf/inference.hpp"

using namespace taf;

namespace {

// Brute-force oracle: enumerate every monotone boundary placement, score in
// the same floored log domain, prefer later starts (compared from the last
// segment backward) on ties.
struct OracleResult {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<long> starts;  // start frame of each segment
};

void enumerate_starts(const Matrix& probs, const Transcript& t, long m,
                      int seg, long next_start, std::vector<long>& starts,
                      OracleResult& best) {
  const long b = probs.rows();
  const int k = t.size();
  if (seg == k) return;
  const long remaining_after = static_cast<long>(k - seg - 1) * m;
  for (long start = next_start; start + m - 1 + remaining_after <= b - 1;
       ++start) {
    if (seg == 0 && start != 0) break;  // first segment starts at frame 0
    starts[seg] = start;
    if (seg == k - 1) {
      double score = 0.0;
      for (int p = 0; p < k; ++p) {
        const long seg_end = p + 1 < k ? starts[p + 1] - 1 : b - 1;
        for (long i = starts[p]; i <= seg_end; ++i) {
          score += std::log(std::max(probs(i, t[p]), kLogFloor));
        }
      }
      bool take = score > best.score;
      if (!take && score == best.score) {
        for (int p = k - 1; p >= 0; --p) {
          if (starts[p] != best.starts[p]) {
            take = starts[p] > best.starts[p];
            break;
          }
        }
      }
      if (take) {
        best.score = score;
        best.starts = starts;
      }
    } else {
      enumerate_starts(probs, t, m, seg + 1, start + m, starts, best);
    }
  }
}

std::vector<int> oracle_labels(const Matrix& probs, const Transcript& t,
                               long m) {
  OracleResult best;
  std::vector<long> starts(t.size());
  enumerate_starts(probs, t, m, 0, 0, starts, best);
  REQUIRE(best.starts.size() == static_cast<size_t>(t.size()));
  std::vector<int> labels(probs.rows());
  for (int p = 0; p < t.size(); ++p) {
    const long seg_end =
        p + 1 < t.size() ? best.starts[p + 1] - 1 : probs.rows() - 1;
    for (long i = best.starts[p]; i <= seg_end; ++i) labels[i] = t[p];
  }
  return labels;
}

Matrix random_probs(long b, int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(1e-3, 1.0);
  Matrix probs(b, k);
  for (long i = 0; i < b; ++i) {
    for (int j = 0; j < k; ++j) probs(i, j) = unit(rng);
    probs.row(i) /= probs.row(i).sum();
  }
  return probs;
}

}  // namespace

TEST_CASE("viterbi picks the higher-scoring boundary on the 3-frame example") {
  Matrix probs(3, 2);
  probs << 0.9, 0.1, 0.6, 0.4, 0.2, 0.8;
  // [0,0,1] scores 0.9*0.6*0.8 = 0.432 against 0.288 for [0,1,1].
  const Segmentation seg = viterbi_decode(probs, Transcript({0, 1}), {});
  CHECK(seg.framewise == std::vector<int>{0, 0, 1});
}

TEST_CASE("viterbi returns a consistent one-hot labeling unchanged") {
  const Transcript t({1, 0, 2});
  Matrix probs = Matrix::Zero(7, 3);
  const std::vector<int> truth = {1, 1, 0, 0, 0, 2, 2};
  for (long i = 0; i < 7; ++i) probs(i, truth[i]) = 1.0;
  const Segmentation seg = viterbi_decode(probs, t, {});
  CHECK(seg.framewise == truth);
}

TEST_CASE("viterbi with a single action labels every frame") {
  Matrix probs(4, 1);
  probs << 1.0, 0.5, 0.25, 1.0;
  const Segmentation seg = viterbi_decode(probs, Transcript({0}), {});
  CHECK(seg.framewise == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("viterbi rejects sequences shorter than the transcript needs") {
  Matrix probs = Matrix::Constant(3, 2, 0.5);
  DecodeConfig cfg;
  cfg.min_seg_frames = 2;
  CHECK_THROWS_WITH_AS(viterbi_decode(probs, Transcript({0, 1}), cfg),
                       "sequence too short for transcript", shape_error);
}

TEST_CASE("viterbi matches exhaustive enumeration on random instances") {
  std::mt19937_64 rng(0);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 3);
    const long b = k + static_cast<long>(rng() % (11 - k));
    std::vector<int> order(k);
    for (int i = 0; i < k; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const Transcript t(order);
    const Matrix probs = random_probs(b, k, rng);
    const Segmentation seg = viterbi_decode(probs, t, {});
    CHECK(seg.framewise == oracle_labels(probs, t, 1));
  }
}

TEST_CASE("viterbi honors minimum segment lengths against the oracle") {
  std::mt19937_64 rng(1);
  DecodeConfig cfg;
  cfg.min_seg_frames = 2;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 2);
    const long b = 2 * k + static_cast<long>(rng() % 5);
    const Transcript t = Transcript::identity(k);
    const Matrix probs = random_probs(b, k, rng);
    const Segmentation seg = viterbi_decode(probs, t, cfg);
    CHECK(seg.framewise == oracle_labels(probs, t, 2));
    for (const Segment& s : seg.segments) CHECK(s.length() >= 2);
  }
}

TEST_CASE("viterbi pushes boundaries late when all placements tie") {
  const Matrix probs = Matrix::Constant(5, 2, 0.5);
  const Transcript t({0, 1});
  const Segmentation seg = viterbi_decode(probs, t, {});
  CHECK(seg.framewise == oracle_labels(probs, t, 1));
  CHECK(seg.framewise == std::vector<int>{0, 0, 0, 0, 1});
}

TEST_CASE("viterbi output actions follow the transcript exactly") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 3;
    const long b = 12;
    std::vector<int> order = {2, 0, 1};
    std::shuffle(order.begin(), order.end(), rng);
    const Transcript t(order);
    const Segmentation seg = viterbi_decode(random_probs(b, k, rng), t, {});
    REQUIRE(seg.segments.size() == static_cast<size_t>(k));
    for (int p = 0; p < k; ++p) CHECK(seg.segments[p].action == t[p]);
  }
}

TEST_CASE("scaling one frame's probabilities does not move the labeling") {
  std::mt19937_64 rng(3);
  const Transcript t({1, 0});
  const Matrix probs = random_probs(9, 2, rng);
  const Segmentation base = viterbi_decode(probs, t, {});
  Matrix scaled = probs;
  scaled.row(4) *= 17.0;  // additive constant in the log domain
  const Segmentation same = viterbi_decode(scaled, t, {});
  CHECK(base.framewise == same.framewise);
}

TEST_CASE("segment_video produces a tiling segmentation in transcript order") {
  SynthConfig synth;
  synth.num_videos = 1;
  synth.k = 3;
  synth.d_in = 8;
  synth.frames_min = 30;
  synth.frames_max = 30;
  synth.seed = 4;
  const Dataset dataset = generate(synth);

  ModelConfig cfg;
  cfg.d_in = dataset.d_in;
  cfg.d = 16;
  cfg.k = dataset.k;
  const ModelParams params = init_params(cfg, 5);

  SinkhornConfig sinkhorn;
  const SegmentVideoResult result = segment_video(
      dataset.videos[0].features, params, sinkhorn, 0.25, {});

  REQUIRE(result.segmentation.framewise.size() == 30);
  CHECK(derive_segments(result.segmentation.framewise) ==
        result.segmentation.segments);
  REQUIRE(result.segmentation.segments.size() == 3);
  for (int p = 0; p < 3; ++p) {
    CHECK(result.segmentation.segments[p].action == result.transcript[p]);
  }
  CHECK(result.p_f.rows() == 30);
  CHECK(result.p_a.rows() == 30);

  // Deterministic given fixed params and input.
  const SegmentVideoResult again = segment_video(
      dataset.videos[0].features, params, sinkhorn, 0.25, {});
  CHECK(again.segmentation.framewise == result.segmentation.framewise);
}
