// SPDX-License-Identifier: Apache-2.0
//
// Network graph model: typed layer vertices joined by directed edges, with
// shape inference and the parameter / multiply-accumulate counters that every
// efficiency metric is built on.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gensynth/error.hpp"

namespace gensynth {

/// Tensor extents per sample: (features) or (channels, height, width).
class TensorShape {
public:
    TensorShape() = default;
    explicit TensorShape(std::vector<std::int64_t> dims);

    static TensorShape flat(std::int64_t features) { return TensorShape({features}); }
    static TensorShape image(std::int64_t c, std::int64_t h, std::int64_t w) { return TensorShape({c, h, w}); }

    const std::vector<std::int64_t>& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::int64_t operator[](std::size_t i) const { return dims_.at(i); }
    /// Product of all extents.
    std::int64_t size() const noexcept;

    std::string to_string() const;

    friend bool operator==(const TensorShape&, const TensorShape&) = default;

private:
    std::vector<std::int64_t> dims_;
};

enum class OpKind { Input, Dense, Conv2D, ReLU, MaxPool2D, GlobalAvgPool, Flatten, Softmax, Output };

std::string_view op_name(OpKind kind);
/// Throws GraphError(Schema) on an unknown name.
OpKind op_from_name(std::string_view name);

struct Vertex {
    std::string id;
    OpKind kind = OpKind::Input;
    std::int64_t units = 0;    // Dense width or Conv2D out_channels
    std::int64_t kernel = 0;   // Conv2D / MaxPool2D
    std::int64_t stride = 0;   // Conv2D / MaxPool2D
    std::int64_t padding = 0;  // Conv2D

    static Vertex input(std::string id) { return {std::move(id), OpKind::Input}; }
    static Vertex output(std::string id) { return {std::move(id), OpKind::Output}; }
    static Vertex dense(std::string id, std::int64_t units) { return {std::move(id), OpKind::Dense, units}; }
    static Vertex conv2d(std::string id, std::int64_t out_channels, std::int64_t kernel, std::int64_t stride,
                         std::int64_t padding) {
        return {std::move(id), OpKind::Conv2D, out_channels, kernel, stride, padding};
    }
    static Vertex relu(std::string id) { return {std::move(id), OpKind::ReLU}; }
    static Vertex max_pool(std::string id, std::int64_t kernel, std::int64_t stride) {
        return {std::move(id), OpKind::MaxPool2D, 0, kernel, stride, 0};
    }
    static Vertex global_avg_pool(std::string id) { return {std::move(id), OpKind::GlobalAvgPool}; }
    static Vertex flatten(std::string id) { return {std::move(id), OpKind::Flatten}; }
    static Vertex softmax(std::string id) { return {std::move(id), OpKind::Softmax}; }

    bool trainable() const noexcept { return kind == OpKind::Dense || kind == OpKind::Conv2D; }

    friend bool operator==(const Vertex&, const Vertex&) = default;
};

using Edge = std::pair<std::string, std::string>;

/// An immutable, validated feedforward network.
///
/// Vertices are stored in canonical order (topological, ties broken by id) and
/// edges sorted by (src, dst); two graphs with the same content therefore
/// compare equal and serialize identically regardless of construction order.
///
/// The single trainable vertex closest to the Output is the classifier head: its
/// width is the class count, so it reports zero prunable units.
class NetworkGraph {
public:
    /// Validates and canonicalizes. Throws GraphError.
    NetworkGraph(TensorShape input_shape, std::vector<Vertex> vertices, std::vector<Edge> edges);

    const TensorShape& input_shape() const noexcept { return input_shape_; }
    const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    /// Per-vertex output shapes, parallel to vertices().
    const std::vector<TensorShape>& shapes() const noexcept { return shapes_; }
    /// Shape entering vertex i (input_shape for the Input vertex).
    const TensorShape& input_shape_of(std::size_t i) const;

    std::size_t index_of(std::string_view id) const;
    bool contains(std::string_view id) const;
    /// Index of the unique predecessor, or npos for the Input vertex.
    std::size_t predecessor(std::size_t i) const { return pred_[i]; }
    const std::vector<std::size_t>& successors(std::size_t i) const { return succ_[i]; }

    std::size_t input_index() const noexcept { return 0; }
    std::size_t output_index() const noexcept { return vertices_.size() - 1; }

    /// Index of the classifier head, or npos when the graph has no trainable vertex.
    std::size_t head_index() const noexcept { return head_; }

    std::int64_t prunable_units(std::size_t i) const;
    std::int64_t total_prunable_units() const;
    /// Offset of vertex i's first unit in the canonical unit enumeration.
    std::int64_t unit_offset(std::size_t i) const { return unit_offset_.at(i); }

    friend bool operator==(const NetworkGraph& a, const NetworkGraph& b) {
        return a.input_shape_ == b.input_shape_ && a.vertices_ == b.vertices_ && a.edges_ == b.edges_;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    TensorShape input_shape_;
    std::vector<Vertex> vertices_;
    std::vector<Edge> edges_;
    std::vector<TensorShape> shapes_;
    std::vector<std::size_t> pred_;
    std::vector<std::vector<std::size_t>> succ_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::vector<std::int64_t> unit_offset_;
    std::size_t head_ = npos;
};

/// Output shape of each vertex, keyed by id. Throws GraphError(Shape) on a rank
/// mismatch or a non-positive computed extent.
std::map<std::string, TensorShape> infer_shapes(const NetworkGraph& g, const TensorShape& input_shape);

/// Weights plus biases of every Dense / Conv2D vertex.
std::uint64_t count_params(const NetworkGraph& g);
/// Per-sample multiply-accumulates. Bias additions, pooling and activations are free.
std::uint64_t count_macs(const NetworkGraph& g);
std::uint64_t count_macs(const NetworkGraph& g, const TensorShape& input_shape);

/// Per-unit keep flags in canonical unit order (see NetworkGraph::unit_offset).
using RetentionMask = std::vector<bool>;

/// Narrows every prunable vertex to its kept-unit count. Topology is unchanged.
/// Throws GraphError(Retention) on a length mismatch or a layer left empty.
NetworkGraph apply_retention(const NetworkGraph& g, const RetentionMask& mask);

/// Parses a network-description document (JSON text).
NetworkGraph parse_network(std::string_view document);
/// Canonical compact JSON: version, input_shape, vertices, edges.
std::string serialize(const NetworkGraph& g);

}  // namespace gensynth
