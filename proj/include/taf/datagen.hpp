#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "taf/types.hpp"

namespace taf {

struct VideoSample {
  FeatureSequence features;
  Segmentation ground_truth;
  std::string activity = "default";
};

struct Dataset {
  std::vector<VideoSample> videos;
  int k = 0;
  int d_in = 0;
  std::optional<std::vector<std::string>> action_names;
};

// Synthetic activity generator: K well-separated feature clusters, one
// ordered segment per present action, optional permuted and missing steps.
struct SynthConfig {
  int num_videos = 20;
  int k = 5;
  int d_in = 16;
  long frames_min = 100;
  long frames_max = 200;
  double cluster_sep = 6.0;   // minimum pairwise prototype distance
  double noise_sigma = 1.0;
  double permute_prob = 0.0;  // chance a video's action order is shuffled
  double missing_prob = 0.0;  // chance each non-first action is dropped
  uint64_t seed = 0;
};

void validate_synth_config(const SynthConfig& cfg);

// Deterministic in cfg.seed. If permute_prob > 0 the corpus is re-rolled
// (bounded) until at least one video has a non-identity order.
Dataset generate(const SynthConfig& cfg);

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// Seeded shuffle, then the first floor(n * train_fraction) videos train.
SplitResult split(const Dataset& dataset, double train_fraction,
                  uint64_t seed);

}  // namespace taf
