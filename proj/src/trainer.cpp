// SPDX-License-Identifier: Apache-2.0
#include "gensynth/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gensynth/rng.hpp"

namespace gensynth {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs", "must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate", "must be > 0");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum", "must be in [0, 1)");
}

namespace {

std::size_t fan_in(const NetworkGraph& g, std::size_t i) {
    const auto& v = g.vertices()[i];
    const auto& in = g.input_shape_of(i);
    return v.kind == OpKind::Dense ? static_cast<std::size_t>(in[0])
                                   : static_cast<std::size_t>(in[0] * v.kernel * v.kernel);
}

std::size_t weight_count(const NetworkGraph& g, std::size_t i) {
    return fan_in(g, i) * static_cast<std::size_t>(g.vertices()[i].units);
}

WeightStore zeros_like(const NetworkGraph& g) {
    WeightStore w;
    w.layers.resize(g.vertices().size());
    for (std::size_t i = 0; i < g.vertices().size(); ++i) {
        if (!g.vertices()[i].trainable()) continue;
        w.layers[i].weight.assign(weight_count(g, i), 0.0);
        w.layers[i].bias.assign(static_cast<std::size_t>(g.vertices()[i].units), 0.0);
    }
    return w;
}

void check_weights(const NetworkGraph& g, const WeightStore& w) {
    if (w.layers.size() != g.vertices().size()) throw Error("weight store does not match graph");
    for (std::size_t i = 0; i < g.vertices().size(); ++i) {
        if (!g.vertices()[i].trainable()) continue;
        if (w.layers[i].weight.size() != weight_count(g, i) ||
            w.layers[i].bias.size() != static_cast<std::size_t>(g.vertices()[i].units))
            throw Error("weight shapes do not match vertex '" + g.vertices()[i].id + "'");
    }
}

bool fused_softmax(const NetworkGraph& g) {
    auto p = g.predecessor(g.output_index());
    return p != NetworkGraph::npos && g.vertices()[p].kind == OpKind::Softmax;
}

// Forward kernels. `in`/`out` hold `batch` consecutive samples.

void dense_forward(const LayerWeights& lw, std::size_t n_in, std::size_t n_out, const double* in, double* out,
                   std::size_t batch) {
    for (std::size_t b = 0; b < batch; ++b) {
        double* o = out + b * n_out;
        std::copy(lw.bias.begin(), lw.bias.end(), o);
        const double* x = in + b * n_in;
        for (std::size_t i = 0; i < n_in; ++i) {
            const double xi = x[i];
            const double* row = lw.weight.data() + i * n_out;
            for (std::size_t j = 0; j < n_out; ++j) o[j] += xi * row[j];
        }
    }
}

struct ConvGeometry {
    std::int64_t c_in, h_in, w_in, c_out, h_out, w_out, k, s, p;
};

ConvGeometry conv_geometry(const NetworkGraph& g, std::size_t i) {
    const auto& v = g.vertices()[i];
    const auto& in = g.input_shape_of(i);
    const auto& out = g.shapes()[i];
    return {in[0], in[1], in[2], out[0], out[1], out[2], v.kernel, v.stride, v.padding};
}

void conv_forward(const LayerWeights& lw, const ConvGeometry& c, const double* in, double* out, std::size_t batch) {
    const std::int64_t in_size = c.c_in * c.h_in * c.w_in, out_size = c.c_out * c.h_out * c.w_out;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = in + b * in_size;
        double* y = out + b * out_size;
        for (std::int64_t o = 0; o < c.c_out; ++o)
            for (std::int64_t oy = 0; oy < c.h_out; ++oy)
                for (std::int64_t ox = 0; ox < c.w_out; ++ox) {
                    double acc = lw.bias[o];
                    for (std::int64_t ci = 0; ci < c.c_in; ++ci)
                        for (std::int64_t ky = 0; ky < c.k; ++ky) {
                            std::int64_t iy = oy * c.s + ky - c.p;
                            if (iy < 0 || iy >= c.h_in) continue;
                            for (std::int64_t kx = 0; kx < c.k; ++kx) {
                                std::int64_t ix = ox * c.s + kx - c.p;
                                if (ix < 0 || ix >= c.w_in) continue;
                                acc += x[(ci * c.h_in + iy) * c.w_in + ix] *
                                       lw.weight[((o * c.c_in + ci) * c.k + ky) * c.k + kx];
                            }
                        }
                    y[(o * c.h_out + oy) * c.w_out + ox] = acc;
                }
    }
}

struct PoolGeometry {
    std::int64_t c, h_in, w_in, h_out, w_out, k, s;
};

PoolGeometry pool_geometry(const NetworkGraph& g, std::size_t i) {
    const auto& v = g.vertices()[i];
    const auto& in = g.input_shape_of(i);
    const auto& out = g.shapes()[i];
    return {in[0], in[1], in[2], out[1], out[2], v.kernel, v.stride};
}

// Flat input offset of the first maximum in a pooling window.
std::int64_t pool_argmax(const PoolGeometry& pg, const double* x, std::int64_t ch, std::int64_t oy, std::int64_t ox) {
    std::int64_t best = (ch * pg.h_in + oy * pg.s) * pg.w_in + ox * pg.s;
    for (std::int64_t ky = 0; ky < pg.k; ++ky)
        for (std::int64_t kx = 0; kx < pg.k; ++kx) {
            std::int64_t at = (ch * pg.h_in + oy * pg.s + ky) * pg.w_in + ox * pg.s + kx;
            if (x[at] > x[best]) best = at;
        }
    return best;
}

void softmax_rows(const double* in, double* out, std::size_t batch, std::size_t k) {
    for (std::size_t b = 0; b < batch; ++b) {
        const double* z = in + b * k;
        double* p = out + b * k;
        double m = *std::max_element(z, z + k);
        double sum = 0;
        for (std::size_t j = 0; j < k; ++j) sum += (p[j] = std::exp(z[j] - m));
        for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
    }
}

}  // namespace

WeightStore init_weights(const NetworkGraph& g, std::uint64_t seed) {
    WeightStore w = zeros_like(g);
    for (std::size_t i = 0; i < g.vertices().size(); ++i) {
        if (!g.vertices()[i].trainable()) continue;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in(g, i)));
        std::mt19937_64 rng(derive_seed(seed, {tag("init"), i}));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& x : w.layers[i].weight) x = dist(rng);
    }
    return w;
}

ForwardResult forward(const NetworkGraph& g, const WeightStore& w, std::span<const double> inputs,
                      std::size_t batch) {
    check_weights(g, w);
    const auto in_size = static_cast<std::size_t>(g.input_shape().size());
    if (inputs.size() != batch * in_size) throw Error("forward: batch does not match the graph input shape");

    const auto& vs = g.vertices();
    ForwardResult r;
    r.batch = batch;
    r.activations.resize(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const auto& v = vs[i];
        const auto out_size = static_cast<std::size_t>(g.shapes()[i].size());
        auto& out = r.activations[i];
        if (v.kind == OpKind::Input) {
            out.assign(inputs.begin(), inputs.end());
            continue;
        }
        const auto& in = r.activations[g.predecessor(i)];
        const auto n_in = static_cast<std::size_t>(g.input_shape_of(i).size());
        out.assign(batch * out_size, 0.0);
        switch (v.kind) {
        case OpKind::Dense:
            dense_forward(w.layers[i], n_in, out_size, in.data(), out.data(), batch);
            break;
        case OpKind::Conv2D:
            conv_forward(w.layers[i], conv_geometry(g, i), in.data(), out.data(), batch);
            break;
        case OpKind::ReLU:
            for (std::size_t j = 0; j < out.size(); ++j) out[j] = in[j] > 0 ? in[j] : 0.0;
            break;
        case OpKind::MaxPool2D: {
            auto pg = pool_geometry(g, i);
            for (std::size_t b = 0; b < batch; ++b) {
                const double* x = in.data() + b * n_in;
                double* y = out.data() + b * out_size;
                for (std::int64_t ch = 0; ch < pg.c; ++ch)
                    for (std::int64_t oy = 0; oy < pg.h_out; ++oy)
                        for (std::int64_t ox = 0; ox < pg.w_out; ++ox)
                            y[(ch * pg.h_out + oy) * pg.w_out + ox] = x[pool_argmax(pg, x, ch, oy, ox)];
            }
            break;
        }
        case OpKind::GlobalAvgPool: {
            const auto area = n_in / out_size;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t ch = 0; ch < out_size; ++ch) {
                    const double* x = in.data() + b * n_in + ch * area;
                    out[b * out_size + ch] = std::accumulate(x, x + area, 0.0) / static_cast<double>(area);
                }
            break;
        }
        case OpKind::Softmax:
            softmax_rows(in.data(), out.data(), batch, out_size);
            break;
        case OpKind::Flatten:
        case OpKind::Output:
            out = in;
            break;
        case OpKind::Input:
            break;
        }
        for (double x : out)
            if (!std::isfinite(x)) throw DivergenceError("non-finite activation at vertex '" + v.id + "'", -1, v.id);
    }
    r.output = r.activations[g.output_index()];
    r.logits = fused_softmax(g) ? r.activations[g.predecessor(g.predecessor(g.output_index()))] : r.output;
    return r;
}

namespace {

// Cross-entropy of each row of `logits` against `labels`, and the gradient of
// the batch mean (softmax - onehot) / batch.
double cross_entropy(const std::vector<double>& logits, std::span<const int> labels, std::size_t k,
                     std::vector<double>* grad) {
    const std::size_t batch = labels.size();
    double total = 0;
    if (grad) grad->assign(logits.size(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* z = logits.data() + b * k;
        double m = *std::max_element(z, z + k);
        double sum = 0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - m);
        const double lse = m + std::log(sum);
        total += lse - z[labels[b]];
        if (grad) {
            double* gz = grad->data() + b * k;
            for (std::size_t j = 0; j < k; ++j) gz[j] = std::exp(z[j] - lse) / static_cast<double>(batch);
            gz[labels[b]] -= 1.0 / static_cast<double>(batch);
        }
    }
    return total / static_cast<double>(batch);
}

std::size_t class_count(const NetworkGraph& g) {
    const auto& out = g.shapes()[g.output_index()];
    if (out.rank() != 1) throw Error("network output must be a flat tensor of class scores");
    return static_cast<std::size_t>(out[0]);
}

void check_labels(std::span<const int> labels, std::size_t k) {
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw Error("label " + std::to_string(y) + " exceeds the network's " + std::to_string(k) + " outputs");
}

}  // namespace

LossGradient loss_and_gradient(const NetworkGraph& g, const WeightStore& w, std::span<const double> inputs,
                               std::span<const int> labels) {
    const std::size_t batch = labels.size();
    const std::size_t k = class_count(g);
    check_labels(labels, k);
    ForwardResult fr = forward(g, w, inputs, batch);

    LossGradient result;
    result.grad = zeros_like(g);
    std::vector<double> seed_grad;
    result.loss = cross_entropy(fr.logits, labels, k, &seed_grad);
    if (!std::isfinite(result.loss)) throw DivergenceError("non-finite loss", -1, "");

    const auto& vs = g.vertices();
    std::vector<std::vector<double>> grads(vs.size());
    // With a fused Softmax the loss gradient enters at the Softmax input.
    std::size_t start = g.output_index();
    if (fused_softmax(g)) start = g.predecessor(g.predecessor(start));
    grads[start] = std::move(seed_grad);

    for (std::size_t i = start + 1; i-- > 1;) {
        if (grads[i].empty()) continue;
        const auto& v = vs[i];
        const std::size_t src = g.predecessor(i);
        const auto& x = fr.activations[src];
        const auto& gy = grads[i];
        auto& gx = grads[src];
        gx.assign(x.size(), 0.0);
        const auto n_in = static_cast<std::size_t>(g.input_shape_of(i).size());
        const auto n_out = static_cast<std::size_t>(g.shapes()[i].size());
        switch (v.kind) {
        case OpKind::Dense: {
            auto& dw = result.grad.layers[i];
            const auto& W = w.layers[i].weight;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* xb = x.data() + b * n_in;
                const double* gb = gy.data() + b * n_out;
                double* gxb = gx.data() + b * n_in;
                for (std::size_t j = 0; j < n_out; ++j) dw.bias[j] += gb[j];
                for (std::size_t a = 0; a < n_in; ++a) {
                    double* dwrow = dw.weight.data() + a * n_out;
                    const double* wrow = W.data() + a * n_out;
                    double acc = 0;
                    for (std::size_t j = 0; j < n_out; ++j) {
                        dwrow[j] += xb[a] * gb[j];
                        acc += wrow[j] * gb[j];
                    }
                    gxb[a] = acc;
                }
            }
            break;
        }
        case OpKind::Conv2D: {
            auto c = conv_geometry(g, i);
            auto& dw = result.grad.layers[i];
            const auto& W = w.layers[i].weight;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* xb = x.data() + b * n_in;
                const double* gb = gy.data() + b * n_out;
                double* gxb = gx.data() + b * n_in;
                for (std::int64_t o = 0; o < c.c_out; ++o)
                    for (std::int64_t oy = 0; oy < c.h_out; ++oy)
                        for (std::int64_t ox = 0; ox < c.w_out; ++ox) {
                            const double go = gb[(o * c.h_out + oy) * c.w_out + ox];
                            dw.bias[o] += go;
                            for (std::int64_t ci = 0; ci < c.c_in; ++ci)
                                for (std::int64_t ky = 0; ky < c.k; ++ky) {
                                    std::int64_t iy = oy * c.s + ky - c.p;
                                    if (iy < 0 || iy >= c.h_in) continue;
                                    for (std::int64_t kx = 0; kx < c.k; ++kx) {
                                        std::int64_t ix = ox * c.s + kx - c.p;
                                        if (ix < 0 || ix >= c.w_in) continue;
                                        const auto wi = ((o * c.c_in + ci) * c.k + ky) * c.k + kx;
                                        const auto xi = (ci * c.h_in + iy) * c.w_in + ix;
                                        dw.weight[wi] += xb[xi] * go;
                                        gxb[xi] += W[wi] * go;
                                    }
                                }
                        }
            }
            break;
        }
        case OpKind::ReLU:
            for (std::size_t j = 0; j < x.size(); ++j) gx[j] = x[j] > 0 ? gy[j] : 0.0;
            break;
        case OpKind::MaxPool2D: {
            auto pg = pool_geometry(g, i);
            for (std::size_t b = 0; b < batch; ++b) {
                const double* xb = x.data() + b * n_in;
                const double* gb = gy.data() + b * n_out;
                double* gxb = gx.data() + b * n_in;
                for (std::int64_t ch = 0; ch < pg.c; ++ch)
                    for (std::int64_t oy = 0; oy < pg.h_out; ++oy)
                        for (std::int64_t ox = 0; ox < pg.w_out; ++ox)
                            gxb[pool_argmax(pg, xb, ch, oy, ox)] += gb[(ch * pg.h_out + oy) * pg.w_out + ox];
            }
            break;
        }
        case OpKind::GlobalAvgPool: {
            const auto area = n_in / n_out;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t ch = 0; ch < n_out; ++ch) {
                    const double share = gy[b * n_out + ch] / static_cast<double>(area);
                    double* dst = gx.data() + b * n_in + ch * area;
                    for (std::size_t a = 0; a < area; ++a) dst[a] = share;
                }
            break;
        }
        case OpKind::Softmax: {
            const auto& p = fr.activations[i];
            for (std::size_t b = 0; b < batch; ++b) {
                const double* pb = p.data() + b * n_out;
                const double* gb = gy.data() + b * n_out;
                double dot = 0;
                for (std::size_t j = 0; j < n_out; ++j) dot += pb[j] * gb[j];
                for (std::size_t j = 0; j < n_out; ++j) gx[b * n_out + j] = pb[j] * (gb[j] - dot);
            }
            break;
        }
        case OpKind::Flatten:
        case OpKind::Output:
            gx = gy;
            break;
        case OpKind::Input:
            break;
        }
    }
    return result;
}

namespace {

std::vector<double> gather(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size() * ds.sample_size());
    for (auto r : rows) {
        auto s = ds.sample(r);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

std::vector<int> gather_labels(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(ds.labels()[r]);
    return out;
}

constexpr std::size_t kEvalChunk = 256;

EvalResult evaluate_rows(const NetworkGraph& g, const WeightStore& w, const LabeledDataset& ds,
                         const std::vector<std::size_t>& rows) {
    const std::size_t k = class_count(g);
    std::size_t correct = 0;
    double loss_sum = 0;
    for (std::size_t start = 0; start < rows.size(); start += kEvalChunk) {
        std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                       rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), start + kEvalChunk)));
        auto x = gather(ds, chunk);
        auto y = gather_labels(ds, chunk);
        check_labels(y, k);
        auto fr = forward(g, w, x, chunk.size());
        loss_sum += cross_entropy(fr.logits, y, k, nullptr) * static_cast<double>(chunk.size());
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            const double* z = fr.logits.data() + b * k;
            auto pred = static_cast<int>(std::max_element(z, z + k) - z);  // first maximum wins ties
            correct += pred == y[b];
        }
    }
    const auto n = static_cast<double>(rows.size());
    return {static_cast<double>(correct) / n, loss_sum / n};
}

}  // namespace

EvalResult evaluate(const NetworkGraph& g, const WeightStore& w, const LabeledDataset& ds, Split split) {
    auto rows = ds.indices(split);
    if (rows.empty()) throw DatasetError("cannot evaluate on empty split '" + std::string(split_name(split)) + "'");
    return evaluate_rows(g, w, ds, rows);
}

TrainResult train(const NetworkGraph& g, const LabeledDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.sample_shape() != g.input_shape())
        throw Error("dataset samples " + ds.sample_shape().to_string() + " do not match network input " +
                    g.input_shape().to_string());
    auto rows = ds.indices(Split::Train);
    if (rows.empty()) throw DatasetError("train split is empty");

    TrainResult result;
    result.weights = init_weights(g, derive_seed(cfg.seed, {tag("weights")}));
    WeightStore velocity = zeros_like(g);
    result.initial_train_loss = evaluate_rows(g, result.weights, ds, rows).loss;

    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> order = rows;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, {tag("shuffle"), static_cast<std::uint64_t>(epoch)}));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() +
                                               static_cast<std::ptrdiff_t>(std::min(order.size(), start + batch_size)));
            auto x = gather(ds, chunk);
            auto y = gather_labels(ds, chunk);
            LossGradient lg;
            try {
                lg = loss_and_gradient(g, result.weights, x, y);
            } catch (const DivergenceError& e) {
                throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what(), epoch,
                                      e.vertex());
            }
            epoch_loss += lg.loss * static_cast<double>(chunk.size());
            for (std::size_t i = 0; i < velocity.layers.size(); ++i) {
                auto update = [&](std::vector<double>& param, std::vector<double>& vel, const std::vector<double>& grad) {
                    for (std::size_t j = 0; j < param.size(); ++j) {
                        vel[j] = cfg.momentum * vel[j] - cfg.learning_rate * grad[j];
                        param[j] += vel[j];
                    }
                };
                update(result.weights.layers[i].weight, velocity.layers[i].weight, lg.grad.layers[i].weight);
                update(result.weights.layers[i].bias, velocity.layers[i].bias, lg.grad.layers[i].bias);
            }
        }
        if (!std::isfinite(epoch_loss))
            throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": non-finite loss", epoch, "");
    }
    try {
        result.final_train_loss = evaluate_rows(g, result.weights, ds, rows).loss;
    } catch (const DivergenceError& e) {
        throw DivergenceError(std::string("trained network diverged: ") + e.what(), cfg.epochs, e.vertex());
    }
    if (!std::isfinite(result.final_train_loss))
        throw DivergenceError("trained network has non-finite loss", cfg.epochs, "");
    if (auto val = ds.indices(Split::Val); !val.empty()) result.val = evaluate_rows(g, result.weights, ds, val);
    return result;
}

GradCheckReport grad_check(const NetworkGraph& g, const WeightStore& w, std::span<const double> inputs,
                           std::span<const int> labels, double epsilon, std::uint64_t sample_seed) {
    const auto analytic = loss_and_gradient(g, w, inputs, labels).grad;
    GradCheckReport report;
    WeightStore probe = w;
    auto loss_at = [&] { return loss_and_gradient(g, probe, inputs, labels).loss; };
    // ReLU signs and max-pool winners; a perturbation that changes them crosses a kink.
    const auto batch = labels.size();
    auto switches = [&](const WeightStore& ws) {
        const auto f = forward(g, ws, inputs, batch);
        std::vector<std::int64_t> pattern;
        for (std::size_t i = 0; i < g.vertices().size(); ++i) {
            const auto& in = f.activations[g.vertices()[i].kind == OpKind::Input ? i : g.predecessor(i)];
            if (g.vertices()[i].kind == OpKind::ReLU) {
                for (double x : in) pattern.push_back(x > 0);
            } else if (g.vertices()[i].kind == OpKind::MaxPool2D) {
                const auto pg = pool_geometry(g, i);
                const auto n_in = static_cast<std::size_t>(g.input_shape_of(i).size());
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::int64_t ch = 0; ch < pg.c; ++ch)
                        for (std::int64_t oy = 0; oy < pg.h_out; ++oy)
                            for (std::int64_t ox = 0; ox < pg.w_out; ++ox)
                                pattern.push_back(pool_argmax(pg, in.data() + b * n_in, ch, oy, ox));
            }
        }
        return pattern;
    };
    const auto centre_switches = switches(w);

    for (std::size_t i = 0; i < g.vertices().size(); ++i) {
        if (!g.vertices()[i].trainable()) continue;
        const std::size_t n_w = w.layers[i].weight.size();
        const std::size_t total = n_w + w.layers[i].bias.size();
        std::vector<std::size_t> coords(total);
        std::iota(coords.begin(), coords.end(), 0);
        if (total > 50) {
            std::mt19937_64 rng(derive_seed(sample_seed, {tag("gradcheck"), i}));
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(50);
        }
        for (auto c : coords) {
            double& param = c < n_w ? probe.layers[i].weight[c] : probe.layers[i].bias[c - n_w];
            const double a = c < n_w ? analytic.layers[i].weight[c] : analytic.layers[i].bias[c - n_w];
            const double saved = param;
            param = saved + epsilon;
            const double up = loss_at();
            param = saved - epsilon;
            const double down = loss_at();
            param = saved;
            const double numeric = (up - down) / (2 * epsilon);
            ++report.coordinates;
            param = saved + epsilon;
            const bool moved_up = switches(probe) != centre_switches;
            param = saved - epsilon;
            const bool moved_down = switches(probe) != centre_switches;
            param = saved;
            if (moved_up || moved_down) {
                ++report.kinks;
                continue;
            }
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
            report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
        }
    }
    return report;
}

}  // namespace gensynth
