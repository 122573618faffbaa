#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "taf/datagen.hpp"
#include "taf/types.hpp"

namespace taf {

// Feature files. Two formats, chosen by extension:
//   .csv        one frame per row, comma separated
//   anything else: binary, magic "TAFV1", u32 frame count, u32 feature dim,
//                  little-endian f32 values in row-major order.
// Values are f32 on disk and double in memory.
FeatureSequence read_features(const std::filesystem::path& path);
void write_features(const FeatureSequence& seq,
                    const std::filesystem::path& path);

// One label per line: a nonnegative integer or the literal "IGNORE".
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::vector<int>& labels,
                  const std::filesystem::path& path);

// Dataset directory: dataset.json manifest plus one feature file and one
// label file per video.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Split manifest: {"train": [ids...], "test": [ids...]}.
void write_split_manifest(const std::vector<std::string>& train_ids,
                          const std::vector<std::string>& test_ids,
                          const std::filesystem::path& path);
// Returns the subset of `dataset` named by the manifest side ("train" or
// "test").
Dataset load_split(const Dataset& dataset, const std::filesystem::path& path,
                   const std::string& side);

// Per-video prediction files used by `segment` and `eval`:
// "frame_index,label" CSV rows.
void write_prediction_csv(const Segmentation& seg,
                          const std::filesystem::path& path);
std::vector<int> read_prediction_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

// Plain comma-separated dump, one matrix row per line.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);

}  // namespace taf
