#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pxmc/potential.hpp"
#include "pxmc/rng.hpp"

namespace pxmc {

struct Dataset {
  MatrixX<double> features;  // N x D
  std::vector<int> labels;   // N, each in [0, num_classes)
  int num_classes = 0;
  std::string split = "train";

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  void validate() const;
  Batch as_batch() const { return {features, labels}; }
  /// Rows [begin, begin + count).
  Dataset slice(Index begin, Index count) const;
};

/// Two interleaved half-circles; class 0 gets the extra point when n is odd.
Dataset two_moons(Index n, double noise_std, RngStream& rng);
/// `classes` spiral arms with (near-)equal counts.
Dataset spirals(Index n, int classes, double noise_std, RngStream& rng);

/// IDX image (magic 0x00000803) and label (0x00000801) files; pixels scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
/// Writers for the same format; `pixels` holds one row of rows*cols bytes per image.
void write_idx_images(const std::string& path, const std::vector<std::vector<std::uint8_t>>& pixels, std::uint32_t rows,
                      std::uint32_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

/// Comma-separated rows with the integer label in the last column; the first
/// row is treated as a header when it does not parse as numbers.
Dataset load_csv(const std::string& path);

struct Standardization {
  VectorX<double> mean;
  VectorX<double> scale;
};
/// Zero mean and unit variance per feature (constant features keep scale 1).
Standardization standardize(Dataset& data);
void apply_standardization(Dataset& data, const Standardization& st);

/// First `train_count` rows become "train", the rest "validation".
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, Index train_count);

// Epoch-wise shuffled minibatches. Each epoch draws a Fisher-Yates permutation
// from the stream and yields contiguous slices of it; the last, possibly
// shorter, slice is kept.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, Index batch_size, RngStream rng);

  Batch next();
  /// Row indices of the next batch (advances like next()).
  std::vector<Index> next_indices();
  Index epoch() const { return epoch_; }
  Index batches_per_epoch() const;

 private:
  void reshuffle();

  const Dataset* data_;
  Index batch_size_;
  RngStream rng_;
  std::vector<Index> order_;
  Index cursor_ = 0;
  Index epoch_ = 0;
};

}  // namespace pxmc
