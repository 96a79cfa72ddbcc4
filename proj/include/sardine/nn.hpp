#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sardine/tensor.hpp"

namespace sardine::nn {

// 3x3 convolution parameters; weights laid out (out_channels, in_channels, 3, 3).
template <typename T>
struct ConvParams {
    Tensor4<T> weights;
    std::vector<T> bias;

    int out_channels() const { return weights.n; }
    int in_channels() const { return weights.c; }
};

// Cross-correlation (no kernel flip) of the zero-padded input with each
// 3x3 kernel, plus bias. pad=1 keeps the spatial size, which is what the
// residual stack relies on.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvParams<T>& params,
                          int pad = 1);

template <typename T>
struct ConvGrads {
    Tensor4<T> input;
    Tensor4<T> weights;
    std::vector<T> bias;
};

// Exact gradients of sum(grad_output .* conv2d_forward(input)) w.r.t.
// input, weights and bias.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const ConvParams<T>& params,
                             const Tensor4<T>& grad_output, int pad = 1);

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x);

// Subgradient 0 at x == 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_output);

// Same backward expressed through the forward output; valid because
// relu(x) > 0 iff x > 0 under the chosen subgradient.
template <typename T>
Tensor4<T> relu_backward_from_output(const Tensor4<T>& y, const Tensor4<T>& grad_output);

enum class BnMode { train, infer };

template <typename T>
struct BatchNormParams {
    std::vector<T> gamma, beta;
    std::vector<T> running_mean, running_var;
    T epsilon = T(1e-5);
    // Fraction of the old running statistic kept per update:
    // running = momentum * running + (1 - momentum) * batch.
    T momentum = T(0.9);

    BatchNormParams() = default;
    explicit BatchNormParams(int channels)
        : gamma(channels, T(1)), beta(channels, T(0)),
          running_mean(channels, T(0)), running_var(channels, T(1)) {}

    int channels() const { return static_cast<int>(gamma.size()); }
};

template <typename T>
struct BatchNormCache {
    bool from_train_forward = false;
    Tensor4<T> x_hat;
    std::vector<T> inv_std; // per channel, 1/sqrt(var + eps)
    std::vector<T> gamma;
};

// Train mode normalizes with batch statistics over (N,H,W) per channel,
// applies gamma/beta and updates the running stats; infer mode uses the
// running stats only. A cache filled by a train-mode call feeds backward.
template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, BatchNormParams<T>& params,
                             BnMode mode, BatchNormCache<T>* cache = nullptr);

template <typename T>
struct BatchNormGrads {
    Tensor4<T> input;
    std::vector<T> gamma, beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache,
                                     const Tensor4<T>& grad_output);

// Gaussian init with variance 2/fan_in, fan_in = in_channels * kh * kw.
template <typename T>
Tensor4<T> he_init(int out_channels, int in_channels, int kh, int kw,
                   std::uint64_t seed);

template <typename T>
struct AdamState {
    std::vector<T> m, v;
    long t = 0;
    T beta1 = T(0.9), beta2 = T(0.999);
    T eps_hat = T(1e-8);

    AdamState() = default;
    explicit AdamState(std::size_t size) : m(size, T(0)), v(size, T(0)) {}
};

// One bias-corrected Adam update; rejects non-finite gradients before
// touching params or state.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads,
               AdamState<T>& state, T lr);

} // namespace sardine::nn
