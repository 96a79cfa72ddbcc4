#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sardine/dataset.hpp"
#include "sardine/nn.hpp"
#include "sardine/speckle.hpp"
#include "sardine/tensor.hpp"

namespace sardine {

// Residual despeckling CNN: conv+ReLU, (depth-2) x conv+BN+ReLU, conv.
// All kernels 3x3 pad 1, so the residual is shape-congruent with the
// input. The network maps log-noisy images to the log-speckle residual.
template <typename T>
struct SarCnn {
    int depth = 17;
    int width = 64;
    bool training = false;

    std::vector<nn::ConvParams<T>> convs;      // depth entries
    std::vector<nn::BatchNormParams<T>> bns;   // depth - 2 entries, layers 2..depth-1

    // Trainable parameters in declaration order: per layer weights, bias,
    // then gamma, beta for batch-normalized layers.
    std::vector<std::span<T>> parameter_views();
    std::size_t parameter_count() const;
};

using SarCnnF = SarCnn<float>;
using SarCnnD = SarCnn<double>;

template <typename T>
SarCnn<T> build_sar_cnn(int depth, int width, std::uint64_t seed);

// Activations retained by a training forward pass for the backward pass.
template <typename T>
struct ForwardTrace {
    // inputs[i] is the input of conv layer i; inputs[i+1] doubles as the
    // ReLU output of layer i (its positivity is the ReLU mask).
    std::vector<Tensor4<T>> inputs;
    std::vector<nn::BatchNormCache<T>> bn_caches;
};

// Runs the network on log-domain input. In training mode BN uses batch
// statistics and updates running stats; a trace may only be requested in
// training mode.
template <typename T>
Tensor4<T> sar_cnn_forward(SarCnn<T>& net, const Tensor4<T>& log_noisy,
                           ForwardTrace<T>* trace = nullptr);

template <typename T>
struct SarCnnGrads {
    std::vector<Tensor4<T>> conv_w;
    std::vector<std::vector<T>> conv_b;
    std::vector<std::vector<T>> bn_gamma, bn_beta;
    Tensor4<T> input;

    // Same order as SarCnn::parameter_views().
    std::vector<std::span<T>> parameter_views();
};

template <typename T>
SarCnnGrads<T> sar_cnn_backward(const SarCnn<T>& net, const ForwardTrace<T>& trace,
                                const Tensor4<T>& grad_residual);

template <typename T>
struct LossResult {
    double value = 0.0;     // sum over every element
    Tensor4<T> grad;        // d value / d residual_pred = tanh(z), per element
};

// Log-cosh residual loss: z = residual_pred + c - log_ratio, value =
// sum log(cosh(z)) evaluated stably as |z| + log1p(exp(-2|z|)) - log 2.
template <typename T>
LossResult<T> log_cosh_loss(const Tensor4<T>& residual_pred,
                            const Tensor4<T>& log_ratio, double c);

// Homomorphic inference: x_hat = exp(log y - R(log y) - c), computed over
// overlapping tiles with central-crop stitching.
Raster despeckle(SarCnnF& net, const Raster& noisy, double c,
                 int tile = 256, int overlap = 16);

struct TrainStage {
    int epochs = 0;
    double lr = 0.0;
};

// "epochs:lr,epochs:lr" e.g. "30:0.001,20:0.0001".
std::vector<TrainStage> parse_schedule(const std::string& text);

struct EpochStat {
    int epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0; // per-patch mean of the summed loss
};

// Minibatch Adam on the log-cosh loss. The loss itself is a sum; the
// gradient handed to the optimizer is scaled by 1/batch so learning
// rates stay comparable across batch sizes. Deterministic per seed.
std::vector<EpochStat> train(SarCnnF& net, const PatchSet& patches,
                             const std::vector<TrainStage>& schedule,
                             int batch, std::uint64_t seed);

// Checkpoint: magic "SRCW", version u16, depth u16, width u16, f32 LE
// parameter blocks in declaration order, BN running stats, CRC-32.
void save_checkpoint(const SarCnnF& net, const std::string& path);
SarCnnF load_checkpoint(const std::string& path);

} // namespace sardine
