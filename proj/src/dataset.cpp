#include "fbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fbench/error.hpp"
#include "fbench/random.hpp"

namespace fb {

ImageDataset::ImageDataset(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> pixels,
                           std::vector<std::uint8_t> labels)
    : rows_(rows), cols_(cols), pixels_(std::move(pixels)), labels_(std::move(labels)) {
  if (rows_ * cols_ == 0) throw ShapeError("image dimensions must be positive");
  if (pixels_.size() != labels_.size() * rows_ * cols_)
    throw ShapeError("pixel payload does not match label count");
}

ImageDataset ImageDataset::from_idx(const IdxTensor& images, const IdxTensor& labels) {
  if (images.dims.size() != 3) throw ShapeError("image tensor must be 3-dimensional");
  if (labels.dims.size() != 1) throw ShapeError("label tensor must be 1-dimensional");
  if (images.dims[0] != labels.dims[0])
    throw ShapeError("image count " + std::to_string(images.dims[0]) + " differs from label count " +
                     std::to_string(labels.dims[0]));
  return ImageDataset(images.dims[1], images.dims[2], images.data, labels.data);
}

Eigen::VectorXd ImageDataset::features(std::size_t i) const {
  const std::size_t n = feature_count();
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  const std::uint8_t* px = pixels_.data() + i * n;
  for (std::size_t j = 0; j < n; ++j) x(static_cast<Eigen::Index>(j)) = px[j] / 255.0;
  return x;
}

Example ImageDataset::example(std::size_t i) const {
  return Example{features(i), labels_[i], i};
}

IdxTensor ImageDataset::image_tensor() const {
  return IdxTensor{{static_cast<std::uint32_t>(size()), static_cast<std::uint32_t>(rows_),
                    static_cast<std::uint32_t>(cols_)},
                   pixels_};
}

IdxTensor ImageDataset::label_tensor() const {
  return IdxTensor{{static_cast<std::uint32_t>(size())}, labels_};
}

IdxFiles locate_training_files(const std::filesystem::path& dir) {
  auto find = [&](std::initializer_list<const char*> stems) {
    for (const char* stem : stems)
      for (const char* suffix : {"", ".gz"}) {
        auto p = dir / (std::string(stem) + suffix);
        if (std::filesystem::is_regular_file(p)) return p;
      }
    throw IoError("no " + std::string(*stems.begin()) + "[.gz] in " + dir.string());
  };
  return IdxFiles{find({"train-images-idx3-ubyte", "train-images.idx3-ubyte"}),
                  find({"train-labels-idx1-ubyte", "train-labels.idx1-ubyte"})};
}

ImageDataset load_training_set(const std::filesystem::path& dir) {
  const IdxFiles files = locate_training_files(dir);
  const IdxTensor images = parse_idx(read_file_bytes(files.images));
  const IdxTensor labels = parse_idx(read_file_bytes(files.labels));
  if (images.dims.size() != 3 || labels.dims.size() != 1)
    throw FormatError("image/label files swapped or malformed in " + dir.string(), 0);
  return ImageDataset::from_idx(images, labels);
}

std::vector<std::vector<std::size_t>> FoldAssignment::counts(std::span<const std::uint8_t> labels,
                                                             int class_count) const {
  if (labels.size() != fold_of.size()) throw ShapeError("label count does not match fold assignment");
  std::vector<std::vector<std::size_t>> table(static_cast<std::size_t>(fold_count),
                                              std::vector<std::size_t>(static_cast<std::size_t>(class_count)));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < class_count) ++table[static_cast<std::size_t>(fold_of[i])][labels[i]];
  return table;
}

std::vector<std::size_t> FoldAssignment::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

FoldAssignment stratified_folds(std::span<const std::uint8_t> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  FoldAssignment folds;
  folds.fold_count = k;
  folds.fold_of.assign(labels.size(), -1);
  Rng rng = make_rng(seed, Stream::folds);
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < idx.size(); ++j) folds.fold_of[idx[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
  }
  return folds;
}

void PhaseSchedule::validate(int fold_count) const {
  const auto all = classes();
  const std::set<int> unique(all.begin(), all.end());
  if (unique.size() != 4) throw ConfigError("the two subtasks need four distinct classes");
  for (int c : all)
    if (c < 0) throw ConfigError("class ids must be nonnegative");
  for (int f : {first_fold, second_fold})
    if (f < 0 || f >= fold_count) throw ConfigError("phase fold " + std::to_string(f) + " out of range");
  if (first_fold == second_fold) throw ConfigError("phases 1-2 and 3-4 must use different folds");
}

Phase PhaseSchedule::phase(int index) const {
  const bool a = index % 2 == 0;
  return Phase{a ? subtask_a : subtask_b, index < 2 ? first_fold : second_fold};
}

int PhaseSchedule::output_unit(int label) const {
  const auto all = classes();
  for (int u = 0; u < 4; ++u)
    if (all[static_cast<std::size_t>(u)] == label) return u;
  throw UsageError("class " + std::to_string(label) + " is not part of the phase schedule");
}

std::size_t PhaseStream::next(int phase) {
  const auto p = static_cast<std::size_t>(phase);
  if (cursor_[p] >= order_[p].size())
    throw StreamExhausted("phase " + std::to_string(phase + 1) + " exhausted its " +
                          std::to_string(order_[p].size()) + " eligible examples");
  return order_[p][cursor_[p]++];
}

PhaseStream build_phase_stream(const ImageDataset& data, const FoldAssignment& folds,
                               const PhaseSchedule& schedule, std::uint64_t seed) {
  schedule.validate(folds.fold_count);
  if (folds.fold_of.size() != data.size()) throw ShapeError("fold assignment does not cover the dataset");
  Rng rng = make_rng(seed, Stream::data_order);
  std::array<std::vector<std::size_t>, 4> order;
  for (int p = 0; p < 4; ++p) {
    const Phase phase = schedule.phase(p);
    auto& out = order[static_cast<std::size_t>(p)];
    for (std::size_t i = 0; i < data.size(); ++i)
      if (folds.fold_of[i] == phase.fold && (data.label(i) == phase.classes[0] || data.label(i) == phase.classes[1]))
        out.push_back(i);
    if (out.empty())
      throw ConfigError("phase " + std::to_string(p + 1) + " has no eligible examples in fold " +
                        std::to_string(phase.fold));
    std::shuffle(out.begin(), out.end(), rng);
  }
  return PhaseStream(std::move(order));
}

ProbeSet build_probe_set(const ImageDataset& data, const FoldAssignment& folds,
                         std::span<const int> excluded_folds, std::span<const int> classes,
                         std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class == 0) throw ConfigError("probe set needs at least one example per class");
  Rng rng = make_rng(seed, Stream::probe);
  ProbeSet probe;
  for (int c : classes) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.label(i) != c) continue;
      const int f = folds.fold_of[i];
      if (std::find(excluded_folds.begin(), excluded_folds.end(), f) != excluded_folds.end()) continue;
      pool.push_back(i);
    }
    if (pool.size() < n_per_class)
      throw ConfigError("class " + std::to_string(c) + " has only " + std::to_string(pool.size()) +
                        " probe candidates, need " + std::to_string(n_per_class));
    std::vector<std::size_t> picked;
    std::sample(pool.begin(), pool.end(), std::back_inserter(picked), static_cast<std::ptrdiff_t>(n_per_class), rng);
    for (std::size_t i : picked) probe.examples.push_back(data.example(i));
    probe.per_class[c] = n_per_class;
  }
  return probe;
}

ImageDataset synth_dataset(std::size_t n_per_class, int class_count, std::uint64_t seed, double spread) {
  if (n_per_class == 0 || class_count < 1) throw ConfigError("synthetic dataset needs examples and classes");
  constexpr std::size_t side = 28;
  constexpr std::size_t n = side * side;
  Rng rng = make_rng(seed, Stream::synth);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spread);

  std::vector<std::vector<double>> means(static_cast<std::size_t>(class_count), std::vector<double>(n));
  for (auto& m : means)
    for (double& v : m) v = unit(rng);

  const std::size_t total = n_per_class * static_cast<std::size_t>(class_count);
  std::vector<std::uint8_t> pixels(total * n);
  std::vector<std::uint8_t> labels(total);
  for (std::size_t i = 0; i < total; ++i) {
    const auto c = static_cast<std::size_t>(i % static_cast<std::size_t>(class_count));
    labels[i] = static_cast<std::uint8_t>(c);
    for (std::size_t j = 0; j < n; ++j) {
      const double v = std::clamp(means[c][j] + noise(rng), 0.0, 1.0);
      pixels[i * n + j] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return ImageDataset(side, side, std::move(pixels), std::move(labels));
}

}  // namespace fb
