// SPDX-License-Identifier: Apache-2.0
#include "gensynth/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "gensynth/digest.hpp"
#include "gensynth/rng.hpp"

namespace gensynth {

std::string_view split_name(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

Split split_from_name(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw DatasetError("unknown split '" + std::string(name) + "'");
}

LabeledDataset::LabeledDataset(TensorShape sample_shape, std::vector<double> features, std::vector<int> labels,
                               int num_classes, std::vector<std::int64_t> label_values)
    : shape_(std::move(sample_shape)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      classes_(num_classes),
      label_values_(std::move(label_values)) {
    if (labels_.empty()) throw DatasetError("dataset has no samples");
    if (shape_.rank() == 0) throw DatasetError("dataset sample shape is unset");
    if (features_.size() != labels_.size() * sample_size())
        throw DatasetError("feature count does not match samples x sample size");
    if (classes_ < 1) throw DatasetError("dataset needs at least one class");
    for (auto y : labels_)
        if (y < 0 || y >= classes_) throw DatasetError("label " + std::to_string(y) + " outside [0, K)");
    for (std::size_t i = 0; i < features_.size(); ++i)
        if (!std::isfinite(features_[i]))
            throw DatasetError("non-finite feature in sample " + std::to_string(i / sample_size()));
    if (label_values_.empty()) {
        label_values_.resize(static_cast<std::size_t>(classes_));
        std::iota(label_values_.begin(), label_values_.end(), 0);
    }
    split_of_.assign(labels_.size(), Split::Train);
}

std::vector<std::size_t> LabeledDataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split_of_.size(); ++i)
        if (split_of_[i] == s) out.push_back(i);
    return out;
}

LabeledDataset LabeledDataset::with_assignment(std::vector<Split> assignment) const {
    if (assignment.size() != size()) throw DatasetError("split assignment size does not match dataset");
    LabeledDataset copy = *this;
    copy.split_of_ = std::move(assignment);
    return copy;
}

std::string LabeledDataset::digest() const {
    std::string bytes;
    auto put = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
    for (auto d : shape_.dims()) put(&d, sizeof d);
    put(&classes_, sizeof classes_);
    put(features_.data(), features_.size() * sizeof(double));
    put(labels_.data(), labels_.size() * sizeof(int));
    put(split_of_.data(), split_of_.size());
    return sha256_hex(bytes);
}

LabeledDataset synth_blobs(int classes, int per_class, double spread, std::uint64_t seed) {
    if (classes < 2) throw DatasetError("synth_blobs needs at least 2 classes");
    if (per_class < 1) throw DatasetError("synth_blobs needs at least 1 sample per class");
    if (!(spread > 0) || !std::isfinite(spread)) throw DatasetError("synth_blobs spread must be positive");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spread);
    std::vector<double> features;
    std::vector<int> labels;
    features.reserve(static_cast<std::size_t>(classes) * per_class * 2);
    for (int c = 0; c < classes; ++c) {
        double angle = 2.0 * std::numbers::pi * c / classes;
        double cx = std::cos(angle), cy = std::sin(angle);
        for (int i = 0; i < per_class; ++i) {
            double x = cx + noise(rng);
            double y = cy + noise(rng);
            features.push_back(x);
            features.push_back(y);
            labels.push_back(c);
        }
    }
    return LabeledDataset(TensorShape::flat(2), std::move(features), std::move(labels), classes);
}

LabeledDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open '" + path.string() + "'");

    std::vector<double> features;
    std::vector<std::int64_t> raw_labels;
    std::size_t width = 0;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() < 2)
            throw DatasetError("line " + std::to_string(line_no) + ": need at least one feature and a label", line_no);
        if (width == 0) width = fields.size();
        if (fields.size() != width)
            throw DatasetError("line " + std::to_string(line_no) + ": ragged row with " + std::to_string(fields.size()) +
                                   " fields, expected " + std::to_string(width),
                               line_no);
        auto trim = [](std::string_view s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
            return s;
        };
        for (std::size_t f = 0; f + 1 < fields.size(); ++f) {
            auto s = trim(fields[f]);
            double v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size() || s.empty())
                throw DatasetError("line " + std::to_string(line_no) + ": non-numeric field '" + std::string(s) + "'",
                                   line_no);
            if (!std::isfinite(v))
                throw DatasetError("line " + std::to_string(line_no) + ": non-finite feature", line_no);
            features.push_back(v);
        }
        auto s = trim(fields.back());
        std::int64_t label = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), label);
        if (ec != std::errc() || p != s.data() + s.size() || s.empty())
            throw DatasetError("line " + std::to_string(line_no) + ": label '" + std::string(s) + "' is not an integer",
                               line_no);
        raw_labels.push_back(label);
    }
    if (raw_labels.empty()) throw DatasetError("'" + path.string() + "' contains no rows");

    std::map<std::int64_t, int> remap;
    for (auto l : raw_labels) remap.emplace(l, 0);
    std::vector<std::int64_t> values;
    for (auto& [value, index] : remap) {
        index = static_cast<int>(values.size());
        values.push_back(value);
    }
    std::vector<int> labels;
    labels.reserve(raw_labels.size());
    for (auto l : raw_labels) labels.push_back(remap.at(l));
    const auto dims = static_cast<std::int64_t>(width - 1);
    const auto classes = static_cast<int>(values.size());
    return LabeledDataset(TensorShape::flat(dims), std::move(features), std::move(labels), classes, std::move(values));
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint32_t be32(const std::string& bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const std::string img = read_file(images);
    const std::string lab = read_file(labels);
    if (img.size() < 16) throw DatasetError("'" + images.string() + "': truncated IDX header");
    if (lab.size() < 8) throw DatasetError("'" + labels.string() + "': truncated IDX header");
    if (be32(img, 0) != 0x00000803u) throw DatasetError("'" + images.string() + "': bad magic, expected 0x00000803");
    if (be32(lab, 0) != 0x00000801u) throw DatasetError("'" + labels.string() + "': bad magic, expected 0x00000801");

    const std::uint64_t n = be32(img, 4), h = be32(img, 8), w = be32(img, 12);
    const std::uint64_t n_labels = be32(lab, 4);
    if (n != n_labels)
        throw DatasetError("count mismatch: " + std::to_string(n) + " images, " + std::to_string(n_labels) + " labels");
    if (n == 0 || h == 0 || w == 0) throw DatasetError("'" + images.string() + "': empty image set");
    if (img.size() < 16 + n * h * w) throw DatasetError("'" + images.string() + "': truncated payload");
    if (lab.size() < 8 + n) throw DatasetError("'" + labels.string() + "': truncated payload");

    std::vector<double> features(n * h * w);
    for (std::size_t i = 0; i < features.size(); ++i)
        features[i] = static_cast<unsigned char>(img[16 + i]) / 255.0;
    std::vector<std::int64_t> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = static_cast<unsigned char>(lab[8 + i]);

    std::map<std::int64_t, int> remap;
    for (auto l : raw) remap.emplace(l, 0);
    std::vector<std::int64_t> values;
    for (auto& [value, index] : remap) {
        index = static_cast<int>(values.size());
        values.push_back(value);
    }
    std::vector<int> ys;
    for (auto l : raw) ys.push_back(remap.at(l));
    const auto classes = static_cast<int>(values.size());
    return LabeledDataset(TensorShape::image(1, static_cast<std::int64_t>(h), static_cast<std::int64_t>(w)),
                          std::move(features), std::move(ys), classes, std::move(values));
}

LabeledDataset split(const LabeledDataset& ds, const SplitFractions& fractions, std::uint64_t seed) {
    double sum = 0;
    for (double f : fractions) {
        if (!(f >= 0) || !std::isfinite(f)) throw DatasetError("split fractions must be nonnegative");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DatasetError("split fractions sum to " + std::to_string(sum) + ", not 1");

    std::vector<Split> assignment(ds.size(), Split::Train);
    for (int c = 0; c < ds.num_classes(); ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.labels()[i] == c) members.push_back(i);
        std::mt19937_64 rng(derive_seed(seed, {tag("split"), static_cast<std::uint64_t>(c)}));
        std::shuffle(members.begin(), members.end(), rng);

        const auto count = static_cast<double>(members.size());
        std::array<std::size_t, 3> sizes{};
        std::array<double, 3> remainder{};
        std::size_t assigned = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            double exact = count * fractions[s];
            sizes[s] = static_cast<std::size_t>(std::floor(exact));
            remainder[s] = exact - std::floor(exact);
            assigned += sizes[s];
        }
        std::array<std::size_t, 3> by_remainder{0, 1, 2};
        std::stable_sort(by_remainder.begin(), by_remainder.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t k = 0; assigned < members.size(); ++k, ++assigned) ++sizes[by_remainder[k % 3]];

        std::size_t at = 0;
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t j = 0; j < sizes[s]; ++j) assignment[members[at++]] = static_cast<Split>(s);
    }
    return ds.with_assignment(std::move(assignment));
}

}  // namespace gensynth
