// SPDX-License-Identifier: Apache-2.0
//
// Built-in oracles for `gensynth check`.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gensynth/netgraph.hpp"

namespace gensynth::selfcheck {

/// A random valid chain: optional conv/pool stages on an image input, then a
/// flatten or global pool and dense layers, ending in a softmax classifier.
NetworkGraph random_chain(std::mt19937_64& rng);

/// Counts by walking every weight and every multiplication one at a time.
std::uint64_t enumerate_params(const NetworkGraph& g);
std::uint64_t enumerate_macs(const NetworkGraph& g);

/// A small image network that uses every vertex kind.
NetworkGraph every_kind_network();

struct OracleResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

OracleResult check_counters(std::size_t graphs, std::uint64_t seed);
OracleResult check_gradients(std::uint64_t seed);
OracleResult check_netscore(std::size_t triples, std::uint64_t seed);

std::vector<OracleResult> run_all();

}  // namespace gensynth::selfcheck
