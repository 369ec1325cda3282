// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gensynth/netgraph.hpp"

namespace testing {

using namespace gensynth;

/// Chains the vertices in the given order.
inline NetworkGraph chain(TensorShape input, std::vector<Vertex> vs) {
    std::vector<Edge> es;
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) es.emplace_back(vs[i].id, vs[i + 1].id);
    return NetworkGraph(std::move(input), std::move(vs), std::move(es));
}

/// Input(d) -> [Dense(w) -> ReLU]* -> Dense(classes) -> Softmax -> Output.
inline NetworkGraph mlp(std::int64_t d, const std::vector<std::int64_t>& hidden, std::int64_t classes) {
    std::vector<Vertex> vs{Vertex::input("input")};
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        vs.push_back(Vertex::dense("fc" + std::to_string(i + 1), hidden[i]));
        vs.push_back(Vertex::relu("relu" + std::to_string(i + 1)));
    }
    vs.push_back(Vertex::dense("head", classes));
    vs.push_back(Vertex::softmax("softmax"));
    vs.push_back(Vertex::output("output"));
    return chain(TensorShape::flat(d), std::move(vs));
}

inline NetworkGraph reference_prototype() { return mlp(2, {64, 64, 64}, 4); }

/// A fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / ("gensynth_test_" + name);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& leaf) const { return path / leaf; }
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
