#include "taf/io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace taf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kFeatureMagic[5] = {'T', 'A', 'F', 'V', '1'};

FeatureSequence read_features_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        row.push_back(v);
      } catch (const std::exception&) {
        throw format_error("bad number at row " + std::to_string(line_no) +
                           " in '" + path.string() + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw format_error("ragged row " + std::to_string(line_no) + " in '" +
                         path.string() + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw format_error("empty feature file '" + path.string() + "'");

  FeatureSequence seq;
  seq.frames.resize(static_cast<long>(rows.size()),
                    static_cast<long>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      seq.frames(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    }
  }
  return seq;
}

void write_features_csv(const FeatureSequence& seq, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  char buf[64];
  for (long i = 0; i < seq.frames.rows(); ++i) {
    for (long j = 0; j < seq.frames.cols(); ++j) {
      // f32 precision on disk regardless of container format
      std::snprintf(buf, sizeof(buf), "%.9g",
                    static_cast<double>(static_cast<float>(seq.frames(i, j))));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

FeatureSequence read_features_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kFeatureMagic, 5) != 0) {
    throw format_error("bad magic in '" + path.string() + "'");
  }
  uint32_t b = 0, d = 0;
  if (!in.read(reinterpret_cast<char*>(&b), 4) ||
      !in.read(reinterpret_cast<char*>(&d), 4)) {
    throw format_error("unexpected EOF in '" + path.string() + "'");
  }
  if (b == 0 || d == 0) {
    throw format_error("zero dimension in '" + path.string() + "'");
  }
  std::vector<float> data(static_cast<size_t>(b) * d);
  if (!in.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(float)))) {
    throw format_error("unexpected EOF in '" + path.string() + "'");
  }
  FeatureSequence seq;
  seq.frames.resize(b, d);
  for (uint32_t i = 0; i < b; ++i) {
    for (uint32_t j = 0; j < d; ++j) {
      const float v = data[static_cast<size_t>(i) * d + j];
      if (!std::isfinite(v)) {
        throw format_error("non-finite value in '" + path.string() + "'");
      }
      seq.frames(i, j) = static_cast<double>(v);
    }
  }
  return seq;
}

void write_features_binary(const FeatureSequence& seq, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out.write(kFeatureMagic, 5);
  const uint32_t b = static_cast<uint32_t>(seq.frames.rows());
  const uint32_t d = static_cast<uint32_t>(seq.frames.cols());
  out.write(reinterpret_cast<const char*>(&b), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  std::vector<float> data(static_cast<size_t>(b) * d);
  for (uint32_t i = 0; i < b; ++i) {
    for (uint32_t j = 0; j < d; ++j) {
      data[static_cast<size_t>(i) * d + j] =
          static_cast<float>(seq.frames(i, j));
    }
  }
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
}

}  // namespace

FeatureSequence read_features(const fs::path& path) {
  if (!fs::exists(path)) throw io_error("missing file '" + path.string() + "'");
  FeatureSequence seq = path.extension() == ".csv"
                            ? read_features_csv(path)
                            : read_features_binary(path);
  seq.video_id = path.stem().string();
  validate_feature_sequence(seq);
  return seq;
}

void write_features(const FeatureSequence& seq, const fs::path& path) {
  validate_feature_sequence(seq);
  if (path.extension() == ".csv") {
    write_features_csv(seq, path);
  } else {
    write_features_binary(seq, path);
  }
}

std::vector<int> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("missing file '" + path.string() + "'");
  std::vector<int> labels;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.pop_back();
    }
    if (line.empty()) continue;
    if (line == "IGNORE") {
      labels.push_back(kIgnoreLabel);
      continue;
    }
    try {
      size_t used = 0;
      const int v = std::stoi(line, &used);
      if (used != line.size() || v < 0) throw std::invalid_argument(line);
      labels.push_back(v);
    } catch (const std::exception&) {
      throw format_error("bad label at line " + std::to_string(line_no) +
                         " in '" + path.string() + "'");
    }
  }
  if (labels.empty()) {
    throw format_error("empty label file '" + path.string() + "'");
  }
  return labels;
}

void write_labels(const std::vector<int>& labels, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  for (int v : labels) {
    if (v == kIgnoreLabel) {
      out << "IGNORE\n";
    } else {
      out << v << '\n';
    }
  }
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["k"] = dataset.k;
  manifest["d_in"] = dataset.d_in;
  if (dataset.action_names) manifest["action_names"] = *dataset.action_names;
  manifest["videos"] = json::array();
  for (const VideoSample& v : dataset.videos) {
    const std::string base = v.features.video_id;
    write_features(v.features, dir / (base + ".taf"));
    write_labels(v.ground_truth.framewise, dir / (base + ".labels.txt"));
    manifest["videos"].push_back({{"id", base},
                                  {"activity", v.activity},
                                  {"features", base + ".taf"},
                                  {"labels", base + ".labels.txt"}});
  }
  write_text_file(dir / "dataset.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "dataset.json";
  if (!fs::exists(manifest_path)) {
    throw io_error("missing file '" + manifest_path.string() + "'");
  }
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw format_error("bad dataset manifest: " + std::string(e.what()));
  }

  Dataset dataset;
  dataset.k = manifest.at("k").get<int>();
  dataset.d_in = manifest.at("d_in").get<int>();
  if (manifest.contains("action_names")) {
    dataset.action_names =
        manifest["action_names"].get<std::vector<std::string>>();
  }
  for (const auto& entry : manifest.at("videos")) {
    VideoSample v;
    v.activity = entry.value("activity", "default");
    v.features = read_features(dir / entry.at("features").get<std::string>());
    v.features.video_id = entry.at("id").get<std::string>();
    auto labels = read_labels(dir / entry.at("labels").get<std::string>());
    if (static_cast<long>(labels.size()) != v.features.num_frames()) {
      throw shape_error("label count does not match frames for '" +
                        v.features.video_id + "'");
    }
    for (int l : labels) {
      if (l != kIgnoreLabel && l >= dataset.k) {
        throw shape_error("label exceeds K in '" + v.features.video_id + "'");
      }
    }
    v.ground_truth = make_segmentation(std::move(labels));
    if (v.features.feature_dim() != dataset.d_in) {
      throw shape_error("feature dim mismatch in '" + v.features.video_id +
                        "'");
    }
    dataset.videos.push_back(std::move(v));
  }
  return dataset;
}

void write_split_manifest(const std::vector<std::string>& train_ids,
                          const std::vector<std::string>& test_ids,
                          const fs::path& path) {
  json j;
  j["train"] = train_ids;
  j["test"] = test_ids;
  write_text_file(path, j.dump(2) + "\n");
}

Dataset load_split(const Dataset& dataset, const fs::path& path,
                   const std::string& side) {
  if (!fs::exists(path)) throw io_error("missing file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw format_error("bad split manifest: " + std::string(e.what()));
  }
  if (!j.contains(side)) throw format_error("split side '" + side + "' absent");
  const auto ids = j.at(side).get<std::vector<std::string>>();

  Dataset out;
  out.k = dataset.k;
  out.d_in = dataset.d_in;
  out.action_names = dataset.action_names;
  for (const std::string& id : ids) {
    bool found = false;
    for (const VideoSample& v : dataset.videos) {
      if (v.features.video_id == id) {
        out.videos.push_back(v);
        found = true;
        break;
      }
    }
    if (!found) throw format_error("split id '" + id + "' not in dataset");
  }
  return out;
}

void write_prediction_csv(const Segmentation& seg, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << "frame_index,label\n";
  for (size_t i = 0; i < seg.framewise.size(); ++i) {
    out << i << ',' << seg.framewise[i] << '\n';
  }
}

std::vector<int> read_prediction_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("missing file '" + path.string() + "'");
  std::vector<int> labels;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) continue;  // header
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw format_error("bad prediction row " + std::to_string(line_no) +
                         " in '" + path.string() + "'");
    }
    try {
      const long idx = std::stol(line.substr(0, comma));
      const int label = std::stoi(line.substr(comma + 1));
      if (idx != static_cast<long>(labels.size())) {
        throw std::invalid_argument("index");
      }
      labels.push_back(label);
    } catch (const std::exception&) {
      throw format_error("bad prediction row " + std::to_string(line_no) +
                         " in '" + path.string() + "'");
    }
  }
  if (labels.empty()) {
    throw format_error("empty prediction file '" + path.string() + "'");
  }
  return labels;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("missing file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << content;
}

void write_matrix_csv(const Matrix& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  char buf[64];
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace taf
