#include "taf/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "taf/rng.hpp"

namespace taf {

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.num_videos < 1) throw shape_error("num_videos must be >= 1");
  if (cfg.k < 2) throw shape_error("K must be >= 2");
  if (cfg.d_in < 1) throw shape_error("d_in must be >= 1");
  if (cfg.frames_min < cfg.k || cfg.frames_max < cfg.frames_min) {
    throw shape_error("frames range must satisfy K <= min <= max");
  }
  if (cfg.cluster_sep < 0.0 || cfg.noise_sigma < 0.0) {
    throw shape_error("cluster_sep and noise_sigma must be >= 0");
  }
  if (cfg.permute_prob < 0.0 || cfg.permute_prob > 1.0 ||
      cfg.missing_prob < 0.0 || cfg.missing_prob > 1.0) {
    throw shape_error("probabilities must be in [0,1]");
  }
}

namespace {

Matrix draw_centers(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix centers(cfg.k, cfg.d_in);
  const int max_attempts = 10000;
  for (int j = 0; j < cfg.k; ++j) {
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
      Eigen::RowVectorXd cand(cfg.d_in);
      for (int c = 0; c < cfg.d_in; ++c) {
        cand(c) = cfg.cluster_sep * gauss(rng);
      }
      placed = true;
      for (int prev = 0; prev < j; ++prev) {
        if ((cand - centers.row(prev)).norm() < cfg.cluster_sep) {
          placed = false;
          break;
        }
      }
      if (placed) centers.row(j) = cand;
    }
    if (!placed) {
      throw numeric_error("infeasible synth config: cannot separate centers");
    }
  }
  return centers;
}

VideoSample draw_video(const SynthConfig& cfg, const Matrix& centers,
                       int index, uint64_t video_seed) {
  std::mt19937_64 rng(video_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<int> order(cfg.k);
  std::iota(order.begin(), order.end(), 0);
  if (unit(rng) < cfg.permute_prob) {
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<int> present;
  present.push_back(order[0]);  // the first action always survives
  for (int p = 1; p < cfg.k; ++p) {
    if (unit(rng) >= cfg.missing_prob) present.push_back(order[p]);
  }

  std::uniform_int_distribution<long> frames_dist(cfg.frames_min,
                                                  cfg.frames_max);
  const long b = frames_dist(rng);
  const int m = static_cast<int>(present.size());

  // Random segment lengths proportional to Uniform(0.5, 1.5) stick weights.
  std::vector<double> weights(m);
  double weight_sum = 0.0;
  for (int s = 0; s < m; ++s) {
    weights[s] = 0.5 + unit(rng);
    weight_sum += weights[s];
  }
  std::vector<long> lengths(m, 1);
  long assigned = m;
  for (int s = 0; s < m; ++s) {
    const long extra = static_cast<long>(
        std::floor(weights[s] / weight_sum * static_cast<double>(b - m)));
    lengths[s] += extra;
    assigned += extra;
  }
  lengths[m - 1] += b - assigned;  // remainder to the last segment

  VideoSample video;
  video.activity = "synth";
  char id[32];
  std::snprintf(id, sizeof(id), "vid_%04d", index);
  video.features.video_id = id;
  video.features.frames.resize(b, cfg.d_in);

  std::vector<int> labels;
  labels.reserve(b);
  long frame = 0;
  for (int s = 0; s < m; ++s) {
    const int action = present[s];
    for (long f = 0; f < lengths[s]; ++f, ++frame) {
      labels.push_back(action);
      for (int c = 0; c < cfg.d_in; ++c) {
        video.features.frames(frame, c) =
            centers(action, c) + cfg.noise_sigma * gauss(rng);
      }
    }
  }
  video.ground_truth = make_segmentation(std::move(labels));
  return video;
}

bool has_non_identity_order(const Dataset& dataset) {
  for (const VideoSample& v : dataset.videos) {
    int prev = -1;
    for (const Segment& s : v.ground_truth.segments) {
      if (s.action < prev) return true;
      prev = s.action;
    }
  }
  return false;
}

}  // namespace

Dataset generate(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  const int max_rerolls = 32;
  for (int reroll = 0; reroll < max_rerolls; ++reroll) {
    const uint64_t seed = cfg.seed + static_cast<uint64_t>(reroll);
    std::mt19937_64 rng(mix_seed(seed, 0));

    Dataset dataset;
    dataset.k = cfg.k;
    dataset.d_in = cfg.d_in;
    const Matrix centers = draw_centers(cfg, rng);
    for (int i = 0; i < cfg.num_videos; ++i) {
      dataset.videos.push_back(
          draw_video(cfg, centers, i, mix_seed(seed, 1 + i)));
    }
    if (cfg.permute_prob > 0.0 && !has_non_identity_order(dataset)) {
      continue;  // reroll until a permuted transcript shows up
    }
    return dataset;
  }
  throw numeric_error("no permuted video generated after rerolls");
}

SplitResult split(const Dataset& dataset, double train_fraction,
                  uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw shape_error("train_fraction must be in (0,1)");
  }
  std::vector<size_t> order(dataset.videos.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 99));
  std::shuffle(order.begin(), order.end(), rng);

  const size_t n_train = static_cast<size_t>(std::floor(
      train_fraction * static_cast<double>(dataset.videos.size()) + 1e-9));

  SplitResult result;
  result.train.k = result.test.k = dataset.k;
  result.train.d_in = result.test.d_in = dataset.d_in;
  result.train.action_names = result.test.action_names = dataset.action_names;
  for (size_t i = 0; i < order.size(); ++i) {
    const VideoSample& v = dataset.videos[order[i]];
    if (i < n_train) {
      result.train.videos.push_back(v);
      result.train_ids.push_back(v.features.video_id);
    } else {
      result.test.videos.push_back(v);
      result.test_ids.push_back(v.features.video_id);
    }
  }
  return result;
}

}  // namespace taf
