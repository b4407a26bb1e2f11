#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stalesim/optimization.hpp"

namespace stalesim {

/// Raw unsigned-byte IDX array (the MNIST container format).
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

/// Reads an IDX file with magic 0x00000803 (rank-3 images) or 0x00000801
/// (rank-1 labels); dimensions are big-endian 32-bit.
IdxArray read_idx(const std::filesystem::path& path);

/// Flattens images to rows scaled into [0, 1] and binarizes labels:
/// `positive_label` maps to +1, every other class to -1.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         int positive_label, std::size_t max_samples = 0);

/// Comma-separated rows `label,x1,...,xd` (an optional non-numeric header
/// row is skipped). Labels equal to `positive_label` map to +1, others to -1.
Dataset load_labeled_csv(const std::filesystem::path& path, double positive_label = 1.0);

}  // namespace stalesim
