#pragma once

#include <string>

#include "huberfl/tasks.hpp"

namespace huberfl {

/// Loads an IDX image/label file pair (big-endian, magic 0x00000803 for
/// images and 0x00000801 for labels). Pixels are scaled to [0, 1]. Throws
/// IdxError on missing files, bad magic numbers, truncation, or when the two
/// files disagree on the sample count.
ClassifierDataset mnist_load(const std::string& images_path,
                             const std::string& labels_path);

/// Writes an IDX pair (the inverse of mnist_load, pixel values rounded to
/// bytes). Used to build fixtures.
void idx_write(const std::string& images_path, const std::string& labels_path,
               const ClassifierDataset& data, std::size_t rows, std::size_t cols);

}  // namespace huberfl
