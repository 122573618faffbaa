#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "taf/datagen.hpp"
#include "taf/io.hpp"

using namespace taf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SynthConfig base_config() {
  SynthConfig cfg;
  cfg.num_videos = 8;
  cfg.k = 4;
  cfg.d_in = 6;
  cfg.frames_min = 30;
  cfg.frames_max = 50;
  cfg.cluster_sep = 6.0;
  cfg.noise_sigma = 1.0;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("generation is deterministic under a fixed seed") {
  const Dataset a = generate(base_config());
  const Dataset b = generate(base_config());
  REQUIRE(a.videos.size() == b.videos.size());
  for (size_t i = 0; i < a.videos.size(); ++i) {
    CHECK(a.videos[i].features.frames == b.videos[i].features.frames);
    CHECK(a.videos[i].ground_truth.framewise ==
          b.videos[i].ground_truth.framewise);
  }
}

TEST_CASE("without permutations every video is identity-ordered and complete") {
  const Dataset dataset = generate(base_config());
  for (const VideoSample& v : dataset.videos) {
    REQUIRE(v.ground_truth.segments.size() == 4);
    for (int p = 0; p < 4; ++p) {
      CHECK(v.ground_truth.segments[p].action == p);
    }
  }
}

TEST_CASE("zero noise collapses every frame onto its cluster center") {
  SynthConfig cfg = base_config();
  cfg.noise_sigma = 0.0;
  const Dataset dataset = generate(cfg);
  for (const VideoSample& v : dataset.videos) {
    for (const Segment& s : v.ground_truth.segments) {
      for (long i = s.start; i <= s.end; ++i) {
        CHECK((v.features.frames.row(i) - v.features.frames.row(s.start))
                  .norm() == 0.0);
      }
    }
  }
}

TEST_CASE("generated ground truth satisfies the segmentation invariants") {
  SynthConfig cfg = base_config();
  cfg.permute_prob = 0.5;
  cfg.missing_prob = 0.3;
  cfg.seed = 11;
  const Dataset dataset = generate(cfg);
  for (const VideoSample& v : dataset.videos) {
    CHECK(derive_segments(v.ground_truth.framewise) == v.ground_truth.segments);
    CHECK(static_cast<long>(v.ground_truth.framewise.size()) ==
          v.features.num_frames());
    std::set<int> actions;
    for (const Segment& s : v.ground_truth.segments) {
      CHECK(s.action >= 0);
      CHECK(s.action < cfg.k);
      CHECK(actions.insert(s.action).second);  // no repeats in this generator
    }
  }
}

TEST_CASE("permute_prob > 0 guarantees a permuted transcript somewhere") {
  SynthConfig cfg = base_config();
  cfg.permute_prob = 0.4;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const Dataset dataset = generate(cfg);
    bool found = false;
    for (const VideoSample& v : dataset.videos) {
      for (size_t s = 1; s < v.ground_truth.segments.size(); ++s) {
        if (v.ground_truth.segments[s].action <
            v.ground_truth.segments[s - 1].action) {
          found = true;
        }
      }
    }
    CHECK(found);
  }
}

TEST_CASE("split produces seeded, disjoint, exhaustive partitions") {
  SynthConfig cfg = base_config();
  cfg.num_videos = 10;
  const Dataset dataset = generate(cfg);
  const SplitResult sp = split(dataset, 0.8, 5);
  CHECK(sp.train.videos.size() == 8);
  CHECK(sp.test.videos.size() == 2);

  const SplitResult again = split(dataset, 0.8, 5);
  CHECK(sp.train_ids == again.train_ids);
  CHECK(sp.test_ids == again.test_ids);

  std::set<std::string> all;
  for (const auto& id : sp.train_ids) all.insert(id);
  for (const auto& id : sp.test_ids) all.insert(id);
  CHECK(all.size() == 10);
}

TEST_CASE("binary feature files round-trip at f32 precision") {
  const fs::path dir = temp_dir("taf_io_bin");
  FeatureSequence seq;
  seq.video_id = "clip";
  seq.frames.resize(3, 2);
  seq.frames << 0.125, -3.5, 0.5, 7.25, -0.875, 2.0;  // exact in f32
  write_features(seq, dir / "clip.taf");
  const FeatureSequence back = read_features(dir / "clip.taf");
  CHECK(back.frames == seq.frames);
  CHECK(back.video_id == "clip");
}

TEST_CASE("csv feature files round-trip") {
  const fs::path dir = temp_dir("taf_io_csv");
  FeatureSequence seq;
  seq.video_id = "clip";
  seq.frames.resize(2, 3);
  seq.frames << 1.0, 2.5, -3.0, 0.5, 0.25, 8.0;
  write_features(seq, dir / "clip.csv");
  const FeatureSequence back = read_features(dir / "clip.csv");
  CHECK((back.frames - seq.frames).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("truncated binary features raise unexpected EOF") {
  const fs::path dir = temp_dir("taf_io_trunc");
  FeatureSequence seq;
  seq.video_id = "clip";
  seq.frames = Matrix::Ones(4, 4);
  write_features(seq, dir / "clip.taf");
  const auto size = fs::file_size(dir / "clip.taf");
  fs::resize_file(dir / "clip.taf", size - 8);
  CHECK_THROWS_WITH_AS(read_features(dir / "clip.taf"),
                       doctest::Contains("unexpected EOF"), format_error);
}

TEST_CASE("wrong magic bytes are rejected") {
  const fs::path dir = temp_dir("taf_io_magic");
  std::ofstream out(dir / "bad.taf", std::ios::binary);
  out << "NOPE!aaaaaaaaaaaaaaa";
  out.close();
  CHECK_THROWS_WITH_AS(read_features(dir / "bad.taf"),
                       doctest::Contains("bad magic"), format_error);
}

TEST_CASE("ragged csv rows report the offending row") {
  const fs::path dir = temp_dir("taf_io_ragged");
  write_text_file(dir / "bad.csv", "1,2,3\n4,5\n");
  CHECK_THROWS_WITH_AS(read_features(dir / "bad.csv"),
                       doctest::Contains("row 2"), format_error);
}

TEST_CASE("label files parse integers and IGNORE") {
  const fs::path dir = temp_dir("taf_io_labels");
  write_text_file(dir / "ok.txt", "0\n0\n1\n");
  CHECK(read_labels(dir / "ok.txt") == std::vector<int>{0, 0, 1});

  write_text_file(dir / "bg.txt", "IGNORE\n2\n");
  CHECK(read_labels(dir / "bg.txt") == std::vector<int>{kIgnoreLabel, 2});

  write_text_file(dir / "bad.txt", "0\nx\n");
  CHECK_THROWS_WITH_AS(read_labels(dir / "bad.txt"),
                       doctest::Contains("line 2"), format_error);
}

TEST_CASE("datasets round-trip through a directory") {
  const fs::path dir = temp_dir("taf_io_dataset");
  SynthConfig cfg = base_config();
  cfg.num_videos = 3;
  const Dataset dataset = generate(cfg);
  save_dataset(dataset, dir);
  const Dataset back = load_dataset(dir);
  REQUIRE(back.videos.size() == dataset.videos.size());
  CHECK(back.k == dataset.k);
  CHECK(back.d_in == dataset.d_in);
  for (size_t i = 0; i < dataset.videos.size(); ++i) {
    CHECK(back.videos[i].features.video_id ==
          dataset.videos[i].features.video_id);
    CHECK(back.videos[i].ground_truth.framewise ==
          dataset.videos[i].ground_truth.framewise);
    // f32 on disk
    CHECK((back.videos[i].features.frames - dataset.videos[i].features.frames)
              .cwiseAbs()
              .maxCoeff() < 1e-6);
  }
}

TEST_CASE("prediction csv files round-trip") {
  const fs::path dir = temp_dir("taf_io_pred");
  const Segmentation seg = make_segmentation({0, 0, 1, 2, 2});
  write_prediction_csv(seg, dir / "v.pred.csv");
  CHECK(read_prediction_csv(dir / "v.pred.csv") ==
        std::vector<int>{0, 0, 1, 2, 2});
}

TEST_CASE("missing files raise io errors") {
  CHECK_THROWS_AS(read_features("/nonexistent/path.taf"), io_error);
  CHECK_THROWS_AS(read_labels("/nonexistent/path.txt"), io_error);
  CHECK_THROWS_AS(load_dataset("/nonexistent"), io_error);
}
