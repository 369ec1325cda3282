// SPDX-License-Identifier: Apache-2.0
#include "gensynth/netgraph.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gensynth {

namespace {

using Code = GraphError::Code;

[[noreturn]] void fail(Code code, const std::string& subject, const std::string& what) {
    throw GraphError(code, subject, what);
}

TensorShape shape_after(const Vertex& v, const TensorShape& in) {
    const auto& d = in.dims();
    auto need_image = [&] {
        if (in.rank() != 3)
            fail(Code::Shape, v.id,
                 "rank mismatch at '" + v.id + "': " + std::string(op_name(v.kind)) + " needs (C,H,W), got " +
                     in.to_string());
    };
    auto spatial = [&](std::int64_t extent, std::int64_t pad) {
        std::int64_t span = extent + 2 * pad - v.kernel;
        if (span < 0)
            fail(Code::Shape, v.id, "non-positive extent at '" + v.id + "': kernel larger than padded input");
        return span / v.stride + 1;
    };
    switch (v.kind) {
    case OpKind::Input:
    case OpKind::ReLU:
    case OpKind::Output:
        return in;
    case OpKind::Softmax:
        if (in.rank() != 1)
            fail(Code::Shape, v.id, "rank mismatch at '" + v.id + "': Softmax needs a flat tensor, got " + in.to_string());
        return in;
    case OpKind::Dense:
        if (in.rank() != 1)
            fail(Code::Shape, v.id, "rank mismatch at '" + v.id + "': Dense needs a flat tensor, got " + in.to_string());
        return TensorShape::flat(v.units);
    case OpKind::Conv2D:
        need_image();
        return TensorShape::image(v.units, spatial(d[1], v.padding), spatial(d[2], v.padding));
    case OpKind::MaxPool2D:
        need_image();
        return TensorShape::image(d[0], spatial(d[1], 0), spatial(d[2], 0));
    case OpKind::GlobalAvgPool:
        need_image();
        return TensorShape::flat(d[0]);
    case OpKind::Flatten:
        return TensorShape::flat(in.size());
    }
    return in;
}

std::vector<TensorShape> propagate(const std::vector<Vertex>& vs, const std::vector<std::size_t>& pred,
                                   const TensorShape& input) {
    std::vector<TensorShape> out(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const TensorShape& in = pred[i] == NetworkGraph::npos ? input : out[pred[i]];
        out[i] = shape_after(vs[i], in);
    }
    return out;
}

void check_attrs(const Vertex& v) {
    auto positive = [&](std::int64_t x, const char* name) {
        if (x < 1) fail(Code::Schema, v.id, "vertex '" + v.id + "': " + name + " must be >= 1");
    };
    switch (v.kind) {
    case OpKind::Dense:
        positive(v.units, "units");
        break;
    case OpKind::Conv2D:
        positive(v.units, "out_channels");
        positive(v.kernel, "kernel");
        positive(v.stride, "stride");
        if (v.padding < 0) fail(Code::Schema, v.id, "vertex '" + v.id + "': padding must be >= 0");
        break;
    case OpKind::MaxPool2D:
        positive(v.kernel, "kernel");
        positive(v.stride, "stride");
        break;
    default:
        break;
    }
}

}  // namespace

TensorShape::TensorShape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
    if (dims_.size() != 1 && dims_.size() != 3)
        throw GraphError(Code::Shape, "", "tensor rank must be 1 or 3, got " + std::to_string(dims_.size()));
    for (auto d : dims_)
        if (d < 1) throw GraphError(Code::Shape, "", "tensor extents must be >= 1");
}

std::int64_t TensorShape::size() const noexcept {
    return std::accumulate(dims_.begin(), dims_.end(), std::int64_t{1}, std::multiplies<>());
}

std::string TensorShape::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ')';
    return os.str();
}

std::string_view op_name(OpKind kind) {
    switch (kind) {
    case OpKind::Input: return "Input";
    case OpKind::Dense: return "Dense";
    case OpKind::Conv2D: return "Conv2D";
    case OpKind::ReLU: return "ReLU";
    case OpKind::MaxPool2D: return "MaxPool2D";
    case OpKind::GlobalAvgPool: return "GlobalAvgPool";
    case OpKind::Flatten: return "Flatten";
    case OpKind::Softmax: return "Softmax";
    case OpKind::Output: return "Output";
    }
    return "?";
}

OpKind op_from_name(std::string_view name) {
    for (auto k : {OpKind::Input, OpKind::Dense, OpKind::Conv2D, OpKind::ReLU, OpKind::MaxPool2D,
                   OpKind::GlobalAvgPool, OpKind::Flatten, OpKind::Softmax, OpKind::Output})
        if (op_name(k) == name) return k;
    fail(Code::Schema, std::string(name), "unknown op '" + std::string(name) + "'");
}

NetworkGraph::NetworkGraph(TensorShape input_shape, std::vector<Vertex> vertices, std::vector<Edge> edges)
    : input_shape_(std::move(input_shape)) {
    if (input_shape_.rank() == 0) fail(Code::Schema, "input_shape", "input_shape is required");

    std::map<std::string, std::size_t, std::less<>> pos;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        if (vertices[i].id.empty()) fail(Code::Schema, "", "vertex id must be non-empty");
        if (!pos.emplace(vertices[i].id, i).second)
            fail(Code::DuplicateId, vertices[i].id, "duplicate vertex id '" + vertices[i].id + "'");
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    const std::size_t n = vertices.size();
    std::vector<std::vector<std::size_t>> out(n);
    std::vector<std::size_t> indeg(n, 0);
    for (const auto& [src, dst] : edges) {
        auto s = pos.find(src);
        if (s == pos.end()) fail(Code::DanglingEdge, src, "edge endpoint '" + src + "' is not a vertex");
        auto d = pos.find(dst);
        if (d == pos.end()) fail(Code::DanglingEdge, dst, "edge endpoint '" + dst + "' is not a vertex");
        out[s->second].push_back(d->second);
        ++indeg[d->second];
    }

    // Kahn's algorithm; ready vertices leave in id order.
    auto by_id = [&](std::size_t a, std::size_t b) { return vertices[a].id > vertices[b].id; };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_id)> ready(by_id);
    std::vector<std::size_t> remaining = indeg;
    for (std::size_t i = 0; i < n; ++i)
        if (remaining[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        std::size_t v = ready.top();
        ready.pop();
        order.push_back(v);
        for (auto w : out[v])
            if (--remaining[w] == 0) ready.push(w);
    }
    if (order.size() != n) {
        std::string on_cycle;
        for (std::size_t i = 0; i < n; ++i)
            if (remaining[i] > 0 && (on_cycle.empty() || vertices[i].id < on_cycle)) on_cycle = vertices[i].id;
        fail(Code::Cycle, on_cycle, "cycle detected through vertex '" + on_cycle + "'");
    }

    std::size_t inputs = 0, outputs = 0;
    for (const auto& v : vertices) {
        inputs += v.kind == OpKind::Input;
        outputs += v.kind == OpKind::Output;
    }
    if (inputs != 1) fail(Code::Schema, "", "graph needs exactly one Input vertex, found " + std::to_string(inputs));
    if (outputs != 1) fail(Code::Schema, "", "graph needs exactly one Output vertex, found " + std::to_string(outputs));

    for (std::size_t i = 0; i < n; ++i) {
        const auto& v = vertices[i];
        check_attrs(v);
        if (v.kind == OpKind::Input) {
            if (indeg[i] != 0) fail(Code::Schema, v.id, "Input vertex '" + v.id + "' has incoming edges");
        } else if (indeg[i] != 1) {
            // No merge vertices exist in the vocabulary, so every other vertex has one producer.
            fail(Code::Schema, v.id,
                 "vertex '" + v.id + "' must have exactly one incoming edge, has " + std::to_string(indeg[i]));
        }
        if (v.kind == OpKind::Output) {
            if (!out[i].empty()) fail(Code::Schema, v.id, "Output vertex '" + v.id + "' has outgoing edges");
        } else if (out[i].empty()) {
            fail(Code::Schema, v.id, "vertex '" + v.id + "' has no outgoing edge");
        }
    }

    vertices_.reserve(n);
    for (auto i : order) vertices_.push_back(std::move(vertices[i]));
    edges_ = std::move(edges);
    pred_.assign(n, npos);
    succ_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        index_.emplace(vertices_[i].id, i);
    }
    for (const auto& [src, dst] : edges_) {
        auto s = index_.at(src), d = index_.at(dst);
        pred_[d] = s;
        succ_[s].push_back(d);
    }
    for (auto& s : succ_) std::sort(s.begin(), s.end());
    if (vertices_.front().kind != OpKind::Input || vertices_.back().kind != OpKind::Output)
        fail(Code::Schema, "", "Input and Output must be the graph's source and sink");

    shapes_ = propagate(vertices_, pred_, input_shape_);

    for (std::size_t i = n; i-- > 0;)
        if (vertices_[i].trainable()) {
            head_ = i;
            break;
        }
    unit_offset_.resize(n);
    std::int64_t offset = 0;
    for (std::size_t i = 0; i < n; ++i) {
        unit_offset_[i] = offset;
        offset += prunable_units(i);
    }
}

const TensorShape& NetworkGraph::input_shape_of(std::size_t i) const {
    return pred_.at(i) == npos ? input_shape_ : shapes_[pred_[i]];
}

std::size_t NetworkGraph::index_of(std::string_view id) const {
    auto it = index_.find(id);
    if (it == index_.end()) fail(Code::Schema, std::string(id), "unknown vertex id '" + std::string(id) + "'");
    return it->second;
}

bool NetworkGraph::contains(std::string_view id) const { return index_.find(id) != index_.end(); }

std::int64_t NetworkGraph::prunable_units(std::size_t i) const {
    const auto& v = vertices_.at(i);
    return v.trainable() && i != head_ ? v.units : 0;
}

std::int64_t NetworkGraph::total_prunable_units() const {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) total += prunable_units(i);
    return total;
}

std::map<std::string, TensorShape> infer_shapes(const NetworkGraph& g, const TensorShape& input_shape) {
    std::vector<std::size_t> pred(g.vertices().size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = g.predecessor(i);
    auto shapes = propagate(g.vertices(), pred, input_shape);
    std::map<std::string, TensorShape> result;
    for (std::size_t i = 0; i < shapes.size(); ++i) result.emplace(g.vertices()[i].id, shapes[i]);
    return result;
}

std::uint64_t count_params(const NetworkGraph& g) {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < g.vertices().size(); ++i) {
        const auto& v = g.vertices()[i];
        const auto& in = g.input_shape_of(i);
        auto out = static_cast<std::uint64_t>(v.units);
        if (v.kind == OpKind::Dense) {
            total += static_cast<std::uint64_t>(in[0]) * out + out;
        } else if (v.kind == OpKind::Conv2D) {
            auto k2 = static_cast<std::uint64_t>(v.kernel * v.kernel);
            total += static_cast<std::uint64_t>(in[0]) * k2 * out + out;
        }
    }
    return total;
}

std::uint64_t count_macs(const NetworkGraph& g, const TensorShape& input_shape) {
    std::vector<std::size_t> pred(g.vertices().size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = g.predecessor(i);
    auto shapes = propagate(g.vertices(), pred, input_shape);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto& v = g.vertices()[i];
        const auto& in = pred[i] == NetworkGraph::npos ? input_shape : shapes[pred[i]];
        auto out = static_cast<std::uint64_t>(v.units);
        if (v.kind == OpKind::Dense) {
            total += static_cast<std::uint64_t>(in[0]) * out;
        } else if (v.kind == OpKind::Conv2D) {
            auto k2 = static_cast<std::uint64_t>(v.kernel * v.kernel);
            auto positions = static_cast<std::uint64_t>(shapes[i][1] * shapes[i][2]);
#ifdef GENSYNTH_MUTATE_MAC_FORMULA
            // Mutation-testing build: drops the output-area factor on purpose.
            positions = 1;
#endif
            total += static_cast<std::uint64_t>(in[0]) * k2 * out * positions;
        }
    }
    return total;
}

std::uint64_t count_macs(const NetworkGraph& g) { return count_macs(g, g.input_shape()); }

NetworkGraph apply_retention(const NetworkGraph& g, const RetentionMask& mask) {
    const auto total = g.total_prunable_units();
    if (static_cast<std::int64_t>(mask.size()) != total)
        fail(Code::Retention, "",
             "retention mask has " + std::to_string(mask.size()) + " entries, graph has " + std::to_string(total) +
                 " prunable units");
    std::vector<Vertex> vs = g.vertices();
    for (std::size_t i = 0; i < vs.size(); ++i) {
        auto units = g.prunable_units(i);
        if (units == 0) continue;
        auto first = mask.begin() + g.unit_offset(i);
        auto kept = std::count(first, first + units, true);
        if (kept == 0) fail(Code::Retention, vs[i].id, "retention leaves vertex '" + vs[i].id + "' with zero units");
        vs[i].units = kept;
    }
    return NetworkGraph(g.input_shape(), std::move(vs), g.edges());
}

// ---------------------------------------------------------------------------
// Document format

namespace {

using ojson = nlohmann::ordered_json;

std::int64_t read_attr(const nlohmann::json& attrs, const Vertex& v, const char* name) {
    auto it = attrs.find(name);
    if (it == attrs.end() || !it->is_number_integer())
        fail(Code::Schema, v.id, "vertex '" + v.id + "': attribute '" + name + "' must be an integer");
    return it->get<std::int64_t>();
}

std::vector<const char*> attr_names(OpKind kind) {
    switch (kind) {
    case OpKind::Dense: return {"units"};
    case OpKind::Conv2D: return {"out_channels", "kernel", "stride", "padding"};
    case OpKind::MaxPool2D: return {"kernel", "stride"};
    default: return {};
    }
}

void require_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) fail(Code::Schema, where, where + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            fail(Code::Schema, where, where + ": unknown key '" + key + "'");
}

}  // namespace

NetworkGraph parse_network(std::string_view document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        fail(Code::Schema, "", std::string("malformed network document: ") + e.what());
    }
    require_keys(doc, {"version", "input_shape", "vertices", "edges"}, "document");
    if (!doc.contains("version") || doc["version"] != 1) fail(Code::Schema, "version", "version must be 1");
    for (const char* key : {"input_shape", "vertices", "edges"})
        if (!doc.contains(key) || !doc[key].is_array()) fail(Code::Schema, key, std::string(key) + " must be an array");

    std::vector<std::int64_t> dims;
    for (const auto& d : doc["input_shape"]) {
        if (!d.is_number_integer()) fail(Code::Schema, "input_shape", "input_shape entries must be integers");
        dims.push_back(d.get<std::int64_t>());
    }
    TensorShape input;
    try {
        input = TensorShape(std::move(dims));
    } catch (const GraphError& e) {
        fail(Code::Schema, "input_shape", e.what());
    }

    std::vector<Vertex> vertices;
    for (const auto& jv : doc["vertices"]) {
        require_keys(jv, {"id", "op", "attrs"}, "vertex");
        if (!jv.contains("id") || !jv["id"].is_string()) fail(Code::Schema, "", "vertex id must be a string");
        if (!jv.contains("op") || !jv["op"].is_string()) fail(Code::Schema, jv["id"].get<std::string>(), "vertex op must be a string");
        Vertex v;
        v.id = jv["id"].get<std::string>();
        try {
            v.kind = op_from_name(jv["op"].get<std::string>());
        } catch (const GraphError& e) {
            fail(Code::Schema, v.id, "vertex '" + v.id + "': " + e.what());
        }
        nlohmann::json attrs = jv.value("attrs", nlohmann::json::object());
        if (!attrs.is_object()) fail(Code::Schema, v.id, "vertex '" + v.id + "': attrs must be an object");
        auto names = attr_names(v.kind);
        for (const auto& [key, _] : attrs.items())
            if (std::none_of(names.begin(), names.end(), [&](const char* a) { return key == a; }))
                fail(Code::Schema, v.id, "vertex '" + v.id + "': unknown attribute '" + key + "'");
        switch (v.kind) {
        case OpKind::Dense:
            v.units = read_attr(attrs, v, "units");
            break;
        case OpKind::Conv2D:
            v.units = read_attr(attrs, v, "out_channels");
            v.kernel = read_attr(attrs, v, "kernel");
            v.stride = read_attr(attrs, v, "stride");
            v.padding = read_attr(attrs, v, "padding");
            break;
        case OpKind::MaxPool2D:
            v.kernel = read_attr(attrs, v, "kernel");
            v.stride = read_attr(attrs, v, "stride");
            break;
        default:
            break;
        }
        vertices.push_back(std::move(v));
    }

    std::vector<Edge> edges;
    for (const auto& je : doc["edges"]) {
        if (!je.is_array() || je.size() != 2 || !je[0].is_string() || !je[1].is_string())
            fail(Code::Schema, "edges", "each edge must be a [src, dst] pair of ids");
        edges.emplace_back(je[0].get<std::string>(), je[1].get<std::string>());
    }
    return NetworkGraph(std::move(input), std::move(vertices), std::move(edges));
}

std::string serialize(const NetworkGraph& g) {
    ojson doc;
    doc["version"] = 1;
    doc["input_shape"] = g.input_shape().dims();
    ojson vertices = ojson::array();
    for (const auto& v : g.vertices()) {
        ojson attrs = ojson::object();
        switch (v.kind) {
        case OpKind::Dense:
            attrs["units"] = v.units;
            break;
        case OpKind::Conv2D:
            attrs["out_channels"] = v.units;
            attrs["kernel"] = v.kernel;
            attrs["stride"] = v.stride;
            attrs["padding"] = v.padding;
            break;
        case OpKind::MaxPool2D:
            attrs["kernel"] = v.kernel;
            attrs["stride"] = v.stride;
            break;
        default:
            break;
        }
        vertices.push_back(ojson{{"id", v.id}, {"op", std::string(op_name(v.kind))}, {"attrs", std::move(attrs)}});
    }
    doc["vertices"] = std::move(vertices);
    ojson edges = ojson::array();
    for (const auto& [src, dst] : g.edges()) edges.push_back(ojson::array({src, dst}));
    doc["edges"] = std::move(edges);
    return doc.dump();
}

}  // namespace gensynth
