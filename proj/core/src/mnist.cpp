#include "huberfl/mnist.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <vector>

#include "huberfl/errors.hpp"

namespace huberfl {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("(" + path + "): cannot open file");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t read_u32(const std::vector<unsigned char>& bytes, std::size_t offset,
                       const std::string& path) {
  if (offset + 4 > bytes.size())
    throw IdxError("(" + path + "): truncated header");
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

void write_u32(std::ofstream& out, std::uint32_t value) {
  unsigned char b[4] = {static_cast<unsigned char>(value >> 24),
                        static_cast<unsigned char>(value >> 16),
                        static_cast<unsigned char>(value >> 8),
                        static_cast<unsigned char>(value)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

ClassifierDataset mnist_load(const std::string& images_path,
                             const std::string& labels_path) {
  const auto image_bytes = read_all(images_path);
  std::uint32_t magic = read_u32(image_bytes, 0, images_path);
  if (magic != kImagesMagic)
    throw IdxError("(" + images_path + "): bad magic number for an image file");
  const std::size_t count = read_u32(image_bytes, 4, images_path);
  const std::size_t rows = read_u32(image_bytes, 8, images_path);
  const std::size_t cols = read_u32(image_bytes, 12, images_path);
  const std::size_t pixels = rows * cols;
  if (image_bytes.size() != 16 + count * pixels)
    throw IdxError("(" + images_path + "): truncated image data");

  const auto label_bytes = read_all(labels_path);
  magic = read_u32(label_bytes, 0, labels_path);
  if (magic != kLabelsMagic)
    throw IdxError("(" + labels_path + "): bad magic number for a label file");
  const std::size_t label_count = read_u32(label_bytes, 4, labels_path);
  if (label_bytes.size() != 8 + label_count)
    throw IdxError("(" + labels_path + "): truncated label data");
  if (label_count != count)
    throw IdxError("(" + labels_path + "): label count " + std::to_string(label_count) +
                   " does not match image count " + std::to_string(count));

  ClassifierDataset data;
  data.images.reserve(count);
  data.labels.reserve(count);
  int max_label = 0;
  for (std::size_t j = 0; j < count; ++j) {
    Vector image(pixels);
    const unsigned char* src = image_bytes.data() + 16 + j * pixels;
    for (std::size_t k = 0; k < pixels; ++k)
      image[k] = static_cast<double>(src[k]) / 255.0;
    data.images.push_back(std::move(image));
    int label = static_cast<int>(label_bytes[8 + j]);
    max_label = std::max(max_label, label);
    data.labels.push_back(label);
  }
  data.num_classes = max_label + 1;
  return data;
}

void idx_write(const std::string& images_path, const std::string& labels_path,
               const ClassifierDataset& data, std::size_t rows, std::size_t cols) {
  if (rows * cols != data.dim())
    throw IdxError("(" + images_path + "): rows*cols does not match image size");

  std::ofstream images(images_path, std::ios::binary);
  if (!images) throw IdxError("(" + images_path + "): cannot open file for writing");
  write_u32(images, kImagesMagic);
  write_u32(images, static_cast<std::uint32_t>(data.size()));
  write_u32(images, static_cast<std::uint32_t>(rows));
  write_u32(images, static_cast<std::uint32_t>(cols));
  for (const Vector& image : data.images) {
    for (double v : image) {
      double scaled = v * 255.0;
      if (scaled < 0.0) scaled = 0.0;
      if (scaled > 255.0) scaled = 255.0;
      unsigned char byte = static_cast<unsigned char>(scaled + 0.5);
      images.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }

  std::ofstream labels(labels_path, std::ios::binary);
  if (!labels) throw IdxError("(" + labels_path + "): cannot open file for writing");
  write_u32(labels, kLabelsMagic);
  write_u32(labels, static_cast<std::uint32_t>(data.size()));
  for (int label : data.labels) {
    unsigned char byte = static_cast<unsigned char>(label);
    labels.write(reinterpret_cast<const char*>(&byte), 1);
  }
}

}  // namespace huberfl
