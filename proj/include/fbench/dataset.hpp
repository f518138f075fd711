#pragma once

// Supervised testbed data: image datasets, stratified folds, the four-phase
// example stream and probe sets.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fbench/idx.hpp"

namespace fb {

struct Example {
  Eigen::VectorXd features;  // pixels scaled to [0, 1]
  int label = 0;             // original dataset class
  std::size_t source_index = 0;
};

class ImageDataset {
 public:
  ImageDataset(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> pixels,
               std::vector<std::uint8_t> labels);

  // Throws FormatError/ShapeError when image and label files disagree.
  static ImageDataset from_idx(const IdxTensor& images, const IdxTensor& labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t feature_count() const { return rows_ * cols_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }

  Eigen::VectorXd features(std::size_t i) const;
  Example example(std::size_t i) const;

  IdxTensor image_tensor() const;
  IdxTensor label_tensor() const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> pixels_;
  std::vector<std::uint8_t> labels_;
};

// Training-split file names, with or without a .gz suffix.
struct IdxFiles {
  std::filesystem::path images;
  std::filesystem::path labels;
};
IdxFiles locate_training_files(const std::filesystem::path& dir);  // throws IoError
ImageDataset load_training_set(const std::filesystem::path& dir);

struct FoldAssignment {
  int fold_count = 0;
  std::vector<int> fold_of;  // per example

  // counts[fold][class]
  std::vector<std::vector<std::size_t>> counts(std::span<const std::uint8_t> labels, int class_count) const;
  std::vector<std::size_t> members(int fold) const;
};

// Per class (ascending), shuffle that class's examples and deal them
// round-robin starting at fold 0.
FoldAssignment stratified_folds(std::span<const std::uint8_t> labels, int k, std::uint64_t seed);

struct Phase {
  std::array<int, 2> classes{};
  int fold = 0;
};

// Phases 1 and 3 present subtask A, phases 2 and 4 subtask B. Fold `first`
// serves phases 1-2 and fold `second` serves phases 3-4.
struct PhaseSchedule {
  std::array<int, 2> subtask_a{1, 2};
  std::array<int, 2> subtask_b{3, 4};
  int first_fold = 0;
  int second_fold = 1;

  void validate(int fold_count) const;  // throws ConfigError
  Phase phase(int index) const;         // index in [0, 4)
  std::array<int, 4> classes() const { return {subtask_a[0], subtask_a[1], subtask_b[0], subtask_b[1]}; }
  // Output unit of a dataset class: subtask A -> 0,1; subtask B -> 2,3.
  int output_unit(int label) const;
};

class PhaseStream {
 public:
  PhaseStream(std::array<std::vector<std::size_t>, 4> order) : order_(std::move(order)) {}

  // Dataset index of the next example of `phase`. Throws StreamExhausted.
  std::size_t next(int phase);
  std::size_t emitted(int phase) const { return cursor_[static_cast<std::size_t>(phase)]; }
  std::size_t available(int phase) const { return order_[static_cast<std::size_t>(phase)].size(); }
  const std::vector<std::size_t>& order(int phase) const { return order_[static_cast<std::size_t>(phase)]; }

  bool operator==(const PhaseStream&) const = default;

 private:
  std::array<std::vector<std::size_t>, 4> order_;
  std::array<std::size_t, 4> cursor_{};
};

PhaseStream build_phase_stream(const ImageDataset& data, const FoldAssignment& folds,
                               const PhaseSchedule& schedule, std::uint64_t seed);

struct ProbeSet {
  std::vector<Example> examples;
  std::map<int, std::size_t> per_class;
};

// n_per_class examples of each class, sampled without replacement from folds
// outside `excluded_folds`. Throws ConfigError when a class runs short.
ProbeSet build_probe_set(const ImageDataset& data, const FoldAssignment& folds,
                         std::span<const int> excluded_folds, std::span<const int> classes,
                         std::size_t n_per_class, std::uint64_t seed);

// Gaussian blobs around class-specific random mean images, quantized to
// bytes. 28x28 images; labels cycle through the classes.
ImageDataset synth_dataset(std::size_t n_per_class, int class_count, std::uint64_t seed,
                           double spread = 0.2);

}  // namespace fb
