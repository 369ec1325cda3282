// SPDX-License-Identifier: Apache-2.0
//
// Minimal double-precision trainer for the vertex vocabulary in netgraph.hpp:
// batched forward pass, reverse-mode gradients, and minibatch SGD with momentum
// on softmax cross-entropy.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gensynth/dataset.hpp"
#include "gensynth/netgraph.hpp"

namespace gensynth {

/// Dense weights are laid out (in, out); Conv2D weights (out, in, k, k).
struct LayerWeights {
    std::vector<double> weight;
    std::vector<double> bias;

    friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

/// One entry per graph vertex (empty for non-trainable kinds).
struct WeightStore {
    std::vector<LayerWeights> layers;

    friend bool operator==(const WeightStore&, const WeightStore&) = default;
};

struct TrainConfig {
    int epochs = 15;
    int batch_size = 32;
    double learning_rate = 0.1;
    double momentum = 0.9;
    std::uint64_t seed = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EvalResult {
    double accuracy = 0;
    double loss = 0;  // mean cross-entropy
};

/// He-uniform weights within +-sqrt(6/fan_in), zero biases.
WeightStore init_weights(const NetworkGraph& g, std::uint64_t seed);

struct ForwardResult {
    std::size_t batch = 0;
    /// Output-vertex values, `batch` rows.
    std::vector<double> output;
    /// Class scores fed to the loss: the Softmax input when Softmax feeds the
    /// Output directly, otherwise the output itself.
    std::vector<double> logits;
    /// Per-vertex activations (batch x vertex size), parallel to g.vertices().
    std::vector<std::vector<double>> activations;
};

/// `inputs` holds `batch` samples of g.input_shape(). Throws DivergenceError on
/// a non-finite activation (epoch -1, offending vertex id).
ForwardResult forward(const NetworkGraph& g, const WeightStore& w, std::span<const double> inputs, std::size_t batch);

/// Mean cross-entropy and its gradient with respect to every weight.
struct LossGradient {
    double loss = 0;
    WeightStore grad;
};
LossGradient loss_and_gradient(const NetworkGraph& g, const WeightStore& w, std::span<const double> inputs,
                               std::span<const int> labels);

struct TrainResult {
    WeightStore weights;
    /// Accuracy/loss on the val split, absent when that split is empty.
    std::optional<EvalResult> val;
    double initial_train_loss = 0;
    double final_train_loss = 0;
};

/// Throws DivergenceError (with the epoch index) on a non-finite loss.
TrainResult train(const NetworkGraph& g, const LabeledDataset& ds, const TrainConfig& cfg);

/// Argmax accuracy with ties broken toward the lowest class index.
/// Throws DatasetError on an empty split.
EvalResult evaluate(const NetworkGraph& g, const WeightStore& w, const LabeledDataset& ds, Split split);

struct GradCheckReport {
    double max_relative_error = 0;
    std::size_t coordinates = 0;
    /// Coordinates whose perturbation crosses a ReLU or max-pool switch. They
    /// are excluded from max_relative_error.
    std::size_t kinks = 0;
};

/// Compares analytic gradients with central differences of step `epsilon` on at
/// least 50 sampled coordinates per trainable vertex (all of them when fewer).
/// Relative error is |a - n| / max(|a|, |n|, 1e-12). A coordinate counts as a
/// kink when either perturbation flips a ReLU sign or a max-pool winner.
GradCheckReport grad_check(const NetworkGraph& g, const WeightStore& w, std::span<const double> inputs,
                           std::span<const int> labels, double epsilon, std::uint64_t sample_seed = 0);

}  // namespace gensynth
