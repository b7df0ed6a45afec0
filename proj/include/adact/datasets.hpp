#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adact/tensor.hpp"

namespace adact {

/// Labelled samples laid out as [N, C, H, W].
struct Dataset {
  TensorXd images;
  std::vector<int> labels;
  int classes = 0;
  std::string name;

  Index size() const { return static_cast<Index>(labels.size()); }
  Shape sample_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }

  /// Checks N, label range and (for image data) the [0, 1] pixel range.
  void validate(bool unit_range) const;
};

inline constexpr Index kCifarRecordBytes = 3073;
inline constexpr Index kCifarSide = 32;

/// CIFAR-10 binary records: one label byte then 3x1024 plane-major pixels.
Dataset parse_cifar10_bin(std::span<const std::uint8_t> bytes, const std::string& name = "cifar10");
Dataset load_cifar10_bin(const std::vector<std::filesystem::path>& paths);
/// Inverse of parse_cifar10_bin for data that came from it.
std::vector<std::uint8_t> write_cifar10_bin(const Dataset& ds);

/// IDX image (0x00000803) and label (0x00000801) files, big-endian headers.
Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes,
                  const std::string& name = "idx");
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// "gaussians-<k>" or "spirals-2". Samples are 2-d points stored as
/// [N, 1, 2, 1] feature "images"; classes are assigned round-robin so every
/// class gets n/k samples (the first n%k classes one more).
Dataset make_synthetic(const std::string& kind, Index n, Rng& rng);

Dataset take(const Dataset& ds, std::span<const Index> indices);

/// Seeded shuffle, then the first n_train samples and the next n_test.
std::pair<Dataset, Dataset> subset(const Dataset& ds, Index n_train, Index n_test, Rng& rng);

std::vector<Index> class_counts(const Dataset& ds);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace adact
