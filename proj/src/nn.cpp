#include "sardine/nn.hpp"

#include <cmath>

#include "sardine/parallel.hpp"
#include "sardine/rng.hpp"

namespace sardine::nn {

namespace {

// Copies every (n,c) plane of src into a buffer padded by `pad` zeros on
// each side. The conv kernels then run bounds-check-free saxpy rows.
template <typename T>
std::vector<T> zero_pad_planes(const Tensor4<T>& src, int pad) {
    const int hp = src.h + 2 * pad;
    const int wp = src.w + 2 * pad;
    std::vector<T> out(static_cast<std::size_t>(src.n) * src.c * hp * wp, T(0));
    const std::size_t plane = static_cast<std::size_t>(hp) * wp;
    for (int in = 0; in < src.n; ++in) {
        for (int ic = 0; ic < src.c; ++ic) {
            T* dst = out.data() + (static_cast<std::size_t>(in) * src.c + ic) * plane;
            const T* s = src.plane(in, ic);
            for (int y = 0; y < src.h; ++y) {
                T* row = dst + static_cast<std::size_t>(y + pad) * wp + pad;
                const T* srow = s + static_cast<std::size_t>(y) * src.w;
                for (int x = 0; x < src.w; ++x) row[x] = srow[x];
            }
        }
    }
    return out;
}

// Dot product with eight independent accumulators combined in a fixed
// order; deterministic for any build and friendly to auto-vectorization.
template <typename T>
T dot8(const T* a, const T* b, int len) {
    T s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    int i = 0;
    for (; i + 8 <= len; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    T tail = 0;
    for (; i < len; ++i) tail += a[i] * b[i];
    return (((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))) + tail;
}

void check_pad(int pad) {
    if (pad < 0 || pad > 1) {
        throw ShapeError("conv2d: pad must be 0 or 1 for 3x3 kernels");
    }
}

template <typename T>
void check_conv_args(const Tensor4<T>& input, const ConvParams<T>& params) {
    if (params.weights.h != 3 || params.weights.w != 3) {
        throw ShapeError("conv2d: kernel must be 3x3, got " + params.weights.shape_str());
    }
    if (static_cast<int>(params.bias.size()) != params.out_channels()) {
        throw ShapeError("conv2d: bias length != out_channels");
    }
    if (input.c != params.in_channels()) {
        throw ShapeError("conv2d: input channels " + std::to_string(input.c) +
                         " != kernel in_channels " + std::to_string(params.in_channels()));
    }
    require_finite(input, "conv2d input");
    require_finite(params.weights, "conv2d weights");
    for (T b : params.bias) {
        if (!std::isfinite(static_cast<double>(b))) {
            throw NumericError("conv2d bias: non-finite value");
        }
    }
}

template <typename T>
void check_finite_scalar_vec(const std::vector<T>& v, const char* what) {
    for (T x : v) {
        if (!std::isfinite(static_cast<double>(x))) {
            throw NumericError(std::string(what) + ": non-finite value");
        }
    }
}

} // namespace

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvParams<T>& params, int pad) {
    check_pad(pad);
    check_conv_args(input, params);

    const int oh = input.h + 2 * pad - 2;
    const int ow = input.w + 2 * pad - 2;
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: output would be empty");

    const int ic_n = params.in_channels();
    const int oc_n = params.out_channels();
    const int wp = input.w + 2 * pad;
    const std::size_t padded_plane = static_cast<std::size_t>(input.h + 2 * pad) * wp;
    const std::vector<T> padded = zero_pad_planes(input, pad);

    Tensor4<T> out(input.n, oc_n, oh, ow);

    parallel_for(static_cast<std::int64_t>(input.n) * oc_n, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / oc_n);
        const int oc = static_cast<int>(idx % oc_n);
        T* out_plane = out.plane(in, oc);
        const T bias = params.bias[oc];
        for (std::size_t i = 0; i < out.plane_size(); ++i) out_plane[i] = bias;
        for (int ic = 0; ic < ic_n; ++ic) {
            const T* pin = padded.data() +
                           (static_cast<std::size_t>(in) * ic_n + ic) * padded_plane;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const T wv = params.weights.at(oc, ic, ky, kx);
                    for (int y = 0; y < oh; ++y) {
                        const T* src = pin + static_cast<std::size_t>(y + ky) * wp + kx;
                        T* dst = out_plane + static_cast<std::size_t>(y) * ow;
                        for (int x = 0; x < ow; ++x) dst[x] += wv * src[x];
                    }
                }
            }
        }
    });
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const ConvParams<T>& params,
                             const Tensor4<T>& grad_output, int pad) {
    check_pad(pad);
    check_conv_args(input, params);

    const int oh = input.h + 2 * pad - 2;
    const int ow = input.w + 2 * pad - 2;
    if (grad_output.n != input.n || grad_output.c != params.out_channels() ||
        grad_output.h != oh || grad_output.w != ow) {
        throw ShapeError("conv2d_backward: grad_output shape " + grad_output.shape_str() +
                         " inconsistent with forward output");
    }
    require_finite(grad_output, "conv2d grad_output");

    const int ic_n = params.in_channels();
    const int oc_n = params.out_channels();

    ConvGrads<T> grads{Tensor4<T>(input.n, ic_n, input.h, input.w),
                       Tensor4<T>(oc_n, ic_n, 3, 3),
                       std::vector<T>(static_cast<std::size_t>(oc_n), T(0))};

    // d/d input: correlation of grad_output with the flipped kernel.
    // With grad_output padded by (2 - pad), gin[y][x] accumulates
    // w[ky][kx] * gpad[y + 2 - ky][x + 2 - kx].
    const int gq = 2 - pad;
    const int gwp = ow + 2 * gq;
    const std::size_t gplane = static_cast<std::size_t>(oh + 2 * gq) * gwp;
    const std::vector<T> gpad = zero_pad_planes(grad_output, gq);

    parallel_for(static_cast<std::int64_t>(input.n) * ic_n, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / ic_n);
        const int ic = static_cast<int>(idx % ic_n);
        T* gin_plane = grads.input.plane(in, ic);
        for (int oc = 0; oc < oc_n; ++oc) {
            const T* gp = gpad.data() + (static_cast<std::size_t>(in) * oc_n + oc) * gplane;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const T wv = params.weights.at(oc, ic, ky, kx);
                    for (int y = 0; y < input.h; ++y) {
                        const T* src = gp + static_cast<std::size_t>(y + 2 - ky) * gwp + (2 - kx);
                        T* dst = gin_plane + static_cast<std::size_t>(y) * input.w;
                        for (int x = 0; x < input.w; ++x) dst[x] += wv * src[x];
                    }
                }
            }
        }
    });

    // d/d weights: valid correlation of the padded input with grad_output,
    // one (oc, ic) pair per task so each 3x3 tile has a single writer.
    const int wp = input.w + 2 * pad;
    const std::size_t padded_plane = static_cast<std::size_t>(input.h + 2 * pad) * wp;
    const std::vector<T> padded = zero_pad_planes(input, pad);

    parallel_for(static_cast<std::int64_t>(oc_n) * ic_n, [&](std::int64_t idx) {
        const int oc = static_cast<int>(idx / ic_n);
        const int ic = static_cast<int>(idx % ic_n);
        double acc[9] = {};
        for (int in = 0; in < input.n; ++in) {
            const T* gout = grad_output.plane(in, oc);
            const T* pin = padded.data() +
                           (static_cast<std::size_t>(in) * ic_n + ic) * padded_plane;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    T s = 0;
                    for (int y = 0; y < oh; ++y) {
                        s += dot8(gout + static_cast<std::size_t>(y) * ow,
                                  pin + static_cast<std::size_t>(y + ky) * wp + kx, ow);
                    }
                    acc[ky * 3 + kx] += static_cast<double>(s);
                }
            }
        }
        for (int k = 0; k < 9; ++k) {
            grads.weights.at(oc, ic, k / 3, k % 3) = static_cast<T>(acc[k]);
        }
    });

    // d/d bias: plain sum of each output channel.
    parallel_for(oc_n, [&](std::int64_t oc) {
        double s = 0;
        for (int in = 0; in < input.n; ++in) {
            const T* gout = grad_output.plane(in, static_cast<int>(oc));
            for (std::size_t i = 0; i < grad_output.plane_size(); ++i) {
                s += static_cast<double>(gout[i]);
            }
        }
        grads.bias[static_cast<std::size_t>(oc)] = static_cast<T>(s);
    });

    return grads;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
    require_finite(x, "relu input");
    Tensor4<T> y = x;
    for (T& v : y.data) v = v > T(0) ? v : T(0);
    return y;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_output) {
    if (!x.same_shape(grad_output)) {
        throw ShapeError("relu_backward: shape mismatch");
    }
    Tensor4<T> g = grad_output;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(x.data[i] > T(0))) g.data[i] = T(0);
    }
    return g;
}

template <typename T>
Tensor4<T> relu_backward_from_output(const Tensor4<T>& y, const Tensor4<T>& grad_output) {
    return relu_backward(y, grad_output);
}

template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, BatchNormParams<T>& params,
                             BnMode mode, BatchNormCache<T>* cache) {
    if (x.c != params.channels()) {
        throw ShapeError("batchnorm: channel mismatch");
    }
    if (params.epsilon <= T(0)) throw DomainError("batchnorm: epsilon must be > 0");
    require_finite(x, "batchnorm input");

    const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
    Tensor4<T> y(x.n, x.c, x.h, x.w);

    if (mode == BnMode::infer) {
        parallel_for(x.c, [&](std::int64_t ci) {
            const int ch = static_cast<int>(ci);
            const T inv = T(1) / std::sqrt(params.running_var[ch] + params.epsilon);
            const T g = params.gamma[ch], b = params.beta[ch], mu = params.running_mean[ch];
            for (int in = 0; in < x.n; ++in) {
                const T* xp = x.plane(in, ch);
                T* yp = y.plane(in, ch);
                for (std::size_t i = 0; i < x.plane_size(); ++i) {
                    yp[i] = g * ((xp[i] - mu) * inv) + b;
                }
            }
        });
        if (cache) cache->from_train_forward = false;
        return y;
    }

    if (m < 2) {
        throw DomainError("batchnorm train mode: variance needs >= 2 samples per channel");
    }

    if (cache) {
        cache->from_train_forward = true;
        cache->x_hat = Tensor4<T>(x.n, x.c, x.h, x.w);
        cache->inv_std.assign(static_cast<std::size_t>(x.c), T(0));
        cache->gamma = params.gamma;
    }

    parallel_for(x.c, [&](std::int64_t ci) {
        const int ch = static_cast<int>(ci);
        // Two-pass mean/variance in double, fixed (n, y, x) order.
        double sum = 0;
        for (int in = 0; in < x.n; ++in) {
            const T* xp = x.plane(in, ch);
            for (std::size_t i = 0; i < x.plane_size(); ++i) sum += static_cast<double>(xp[i]);
        }
        const double mean = sum / static_cast<double>(m);
        double sq = 0;
        for (int in = 0; in < x.n; ++in) {
            const T* xp = x.plane(in, ch);
            for (std::size_t i = 0; i < x.plane_size(); ++i) {
                const double d = static_cast<double>(xp[i]) - mean;
                sq += d * d;
            }
        }
        const double var = sq / static_cast<double>(m);
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(params.epsilon));

        const T g = params.gamma[ch], b = params.beta[ch];
        for (int in = 0; in < x.n; ++in) {
            const T* xp = x.plane(in, ch);
            T* yp = y.plane(in, ch);
            T* hp = cache ? cache->x_hat.plane(in, ch) : nullptr;
            for (std::size_t i = 0; i < x.plane_size(); ++i) {
                const T xh = static_cast<T>((static_cast<double>(xp[i]) - mean) * inv);
                if (hp) hp[i] = xh;
                yp[i] = g * xh + b;
            }
        }
        if (cache) cache->inv_std[ch] = static_cast<T>(inv);

        params.running_mean[ch] = params.momentum * params.running_mean[ch] +
                                  (T(1) - params.momentum) * static_cast<T>(mean);
        params.running_var[ch] = params.momentum * params.running_var[ch] +
                                 (T(1) - params.momentum) * static_cast<T>(var);
    });
    return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache,
                                     const Tensor4<T>& grad_output) {
    if (!cache.from_train_forward) {
        throw UsageError("batchnorm_backward: cache not from a train-mode forward");
    }
    if (!cache.x_hat.same_shape(grad_output)) {
        throw ShapeError("batchnorm_backward: grad_output shape mismatch");
    }
    require_finite(grad_output, "batchnorm grad_output");

    const Tensor4<T>& xh = cache.x_hat;
    const std::size_t m = static_cast<std::size_t>(xh.n) * xh.h * xh.w;

    BatchNormGrads<T> grads{Tensor4<T>(xh.n, xh.c, xh.h, xh.w),
                            std::vector<T>(static_cast<std::size_t>(xh.c), T(0)),
                            std::vector<T>(static_cast<std::size_t>(xh.c), T(0))};

    parallel_for(xh.c, [&](std::int64_t ci) {
        const int ch = static_cast<int>(ci);
        double sum_dy = 0, sum_dy_xh = 0;
        for (int in = 0; in < xh.n; ++in) {
            const T* gp = grad_output.plane(in, ch);
            const T* hp = xh.plane(in, ch);
            for (std::size_t i = 0; i < xh.plane_size(); ++i) {
                sum_dy += static_cast<double>(gp[i]);
                sum_dy_xh += static_cast<double>(gp[i]) * static_cast<double>(hp[i]);
            }
        }
        grads.beta[ch] = static_cast<T>(sum_dy);
        grads.gamma[ch] = static_cast<T>(sum_dy_xh);

        // dx = gamma*inv_std * (dy - mean(dy) - x_hat * mean(dy*x_hat)),
        // the exact gradient through the batch mean and variance.
        const double k = static_cast<double>(cache.gamma[ch]) *
                         static_cast<double>(cache.inv_std[ch]);
        const double mean_dy = sum_dy / static_cast<double>(m);
        const double mean_dy_xh = sum_dy_xh / static_cast<double>(m);
        for (int in = 0; in < xh.n; ++in) {
            const T* gp = grad_output.plane(in, ch);
            const T* hp = xh.plane(in, ch);
            T* dp = grads.input.plane(in, ch);
            for (std::size_t i = 0; i < xh.plane_size(); ++i) {
                dp[i] = static_cast<T>(k * (static_cast<double>(gp[i]) - mean_dy -
                                            static_cast<double>(hp[i]) * mean_dy_xh));
            }
        }
    });
    return grads;
}

template <typename T>
Tensor4<T> he_init(int out_channels, int in_channels, int kh, int kw, std::uint64_t seed) {
    Tensor4<T> t(out_channels, in_channels, kh, kw);
    const double sigma = std::sqrt(2.0 / (static_cast<double>(in_channels) * kh * kw));
    rng::Stream rs(seed);
    for (T& v : t.data) v = static_cast<T>(sigma * rs.normal());
    return t;
}

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, T lr) {
    if (params.size() != grads.size() || state.m.size() != params.size() ||
        state.v.size() != params.size()) {
        throw ShapeError("adam_step: params/grads/state size mismatch");
    }
    for (T g : grads) {
        if (!std::isfinite(static_cast<double>(g))) {
            throw NumericError("adam_step: non-finite gradient, step aborted");
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(state.t));
    const T b1 = state.beta1, b2 = state.beta2;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T g = grads[i];
        state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
        const double mhat = static_cast<double>(state.m[i]) / bc1;
        const double vhat = static_cast<double>(state.v[i]) / bc2;
        params[i] -= static_cast<T>(static_cast<double>(lr) * mhat /
                                    (std::sqrt(vhat) + static_cast<double>(state.eps_hat)));
    }
}

#define SARDINE_NN_INSTANTIATE(T)                                                        \
    template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, const ConvParams<T>&, int); \
    template ConvGrads<T> conv2d_backward<T>(const Tensor4<T>&, const ConvParams<T>&,    \
                                             const Tensor4<T>&, int);                    \
    template Tensor4<T> relu_forward<T>(const Tensor4<T>&);                              \
    template Tensor4<T> relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&);          \
    template Tensor4<T> relu_backward_from_output<T>(const Tensor4<T>&,                  \
                                                     const Tensor4<T>&);                 \
    template Tensor4<T> batchnorm_forward<T>(const Tensor4<T>&, BatchNormParams<T>&,     \
                                             BnMode, BatchNormCache<T>*);                \
    template BatchNormGrads<T> batchnorm_backward<T>(const BatchNormCache<T>&,           \
                                                     const Tensor4<T>&);                 \
    template Tensor4<T> he_init<T>(int, int, int, int, std::uint64_t);                   \
    template void adam_step<T>(std::span<T>, std::span<const T>, AdamState<T>&, T);

SARDINE_NN_INSTANTIATE(float)
SARDINE_NN_INSTANTIATE(double)

#undef SARDINE_NN_INSTANTIATE

} // namespace sardine::nn
