#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "taf/types.hpp"

namespace taf {

// Grayscale heatmap of a nonnegative matrix, one rect per cell, dark = large.
std::string svg_heatmap(const Matrix& values, const std::string& title);

// Stacked label bands (e.g. ground truth over prediction). IGNORE frames
// are drawn black; actions cycle through a fixed palette.
std::string svg_label_bands(const std::vector<std::vector<int>>& rows,
                            const std::vector<std::string>& row_titles,
                            int num_actions);

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace taf
