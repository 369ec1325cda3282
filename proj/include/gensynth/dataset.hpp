// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gensynth/netgraph.hpp"

namespace gensynth {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

std::string_view split_name(Split s);
/// Accepts "train", "val", "test".
Split split_from_name(std::string_view name);

/// Samples stored row-major: sample i occupies features[i*D, (i+1)*D) with D =
/// sample_shape.size(). Immutable once built.
class LabeledDataset {
public:
    /// Throws DatasetError on empty data, a label >= num_classes, or a non-finite feature.
    /// Every sample starts in the train split.
    LabeledDataset(TensorShape sample_shape, std::vector<double> features, std::vector<int> labels, int num_classes,
                   std::vector<std::int64_t> label_values = {});

    std::size_t size() const noexcept { return labels_.size(); }
    const TensorShape& sample_shape() const noexcept { return shape_; }
    std::size_t sample_size() const noexcept { return static_cast<std::size_t>(shape_.size()); }
    int num_classes() const noexcept { return classes_; }

    std::span<const double> sample(std::size_t i) const {
        return {features_.data() + i * sample_size(), sample_size()};
    }
    const std::vector<double>& features() const noexcept { return features_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    const std::vector<Split>& assignment() const noexcept { return split_of_; }

    /// Original label value of each contiguous class index (identity for synthetic data).
    const std::vector<std::int64_t>& label_values() const noexcept { return label_values_; }

    /// Sample indices in the given split, ascending.
    std::vector<std::size_t> indices(Split s) const;

    /// Copy with a new split assignment. Throws DatasetError on a size mismatch.
    LabeledDataset with_assignment(std::vector<Split> assignment) const;

    /// SHA-256 over shape, features, labels and split assignment.
    std::string digest() const;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

private:
    TensorShape shape_;
    std::vector<double> features_;
    std::vector<int> labels_;
    int classes_ = 0;
    std::vector<std::int64_t> label_values_;
    std::vector<Split> split_of_;
};

/// K Gaussian blobs in the plane, class c centred at angle 2*pi*c/K on the unit circle.
LabeledDataset synth_blobs(int classes, int per_class, double spread, std::uint64_t seed);

/// Rows "f1,...,fD,label". Labels are remapped to contiguous indices in ascending
/// order of their original values.
LabeledDataset load_csv(const std::filesystem::path& path);

/// IDX image file (magic 0x00000803) plus IDX label file (magic 0x00000801).
/// Pixels are scaled by 1/255 into shape (1, H, W).
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

using SplitFractions = std::array<double, 3>;

/// Class-stratified assignment. Within each class the split sizes are the
/// largest-remainder rounding of count*fraction, so every split is within one
/// sample of its exact share per class.
LabeledDataset split(const LabeledDataset& ds, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace gensynth
