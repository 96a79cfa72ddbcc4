#include "sardine/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sardine/binio.hpp"
#include "sardine/rng.hpp"

namespace sardine {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

// log(cosh(z)) without overflow: |z| + log1p(exp(-2|z|)) - log 2.
double stable_log_cosh(double z) {
    const double a = std::fabs(z);
    return a + std::log1p(std::exp(-2.0 * a)) - kLn2;
}

void check_depth_width(int depth, int width) {
    if (depth < 3) throw UsageError("SarCnn: depth must be >= 3");
    if (width < 1) throw UsageError("SarCnn: width must be >= 1");
}

} // namespace

template <typename T>
std::vector<std::span<T>> SarCnn<T>::parameter_views() {
    std::vector<std::span<T>> views;
    for (int layer = 0; layer < depth; ++layer) {
        views.emplace_back(convs[layer].weights.data);
        views.emplace_back(convs[layer].bias);
        if (layer >= 1 && layer <= depth - 2) {
            views.emplace_back(bns[layer - 1].gamma);
            views.emplace_back(bns[layer - 1].beta);
        }
    }
    return views;
}

template <typename T>
std::size_t SarCnn<T>::parameter_count() const {
    std::size_t total = 0;
    for (int layer = 0; layer < depth; ++layer) {
        total += convs[layer].weights.size() + convs[layer].bias.size();
        if (layer >= 1 && layer <= depth - 2) {
            total += bns[layer - 1].gamma.size() + bns[layer - 1].beta.size();
        }
    }
    return total;
}

template <typename T>
SarCnn<T> build_sar_cnn(int depth, int width, std::uint64_t seed) {
    check_depth_width(depth, width);
    SarCnn<T> net;
    net.depth = depth;
    net.width = width;
    net.convs.reserve(depth);
    for (int layer = 0; layer < depth; ++layer) {
        const int in_c = layer == 0 ? 1 : width;
        const int out_c = layer == depth - 1 ? 1 : width;
        nn::ConvParams<T> conv;
        conv.weights = nn::he_init<T>(out_c, in_c, 3, 3, rng::derive(seed, layer));
        conv.bias.assign(static_cast<std::size_t>(out_c), T(0));
        net.convs.push_back(std::move(conv));
        if (layer >= 1 && layer <= depth - 2) {
            net.bns.emplace_back(width);
        }
    }
    return net;
}

template <typename T>
Tensor4<T> sar_cnn_forward(SarCnn<T>& net, const Tensor4<T>& log_noisy,
                           ForwardTrace<T>* trace) {
    if (log_noisy.c != 1) {
        throw ShapeError("sar_cnn_forward: input must be single-channel, got " +
                         log_noisy.shape_str());
    }
    if (trace && !net.training) {
        throw UsageError("sar_cnn_forward: trace requires training mode");
    }
    const nn::BnMode mode = net.training ? nn::BnMode::train : nn::BnMode::infer;

    if (trace) {
        trace->inputs.clear();
        trace->inputs.reserve(net.depth);
        trace->bn_caches.assign(static_cast<std::size_t>(net.depth - 2),
                                nn::BatchNormCache<T>{});
    }

    Tensor4<T> x = log_noisy;
    for (int layer = 0; layer < net.depth; ++layer) {
        if (trace) trace->inputs.push_back(x);
        x = nn::conv2d_forward(x, net.convs[layer], 1);
        if (layer == net.depth - 1) break; // last layer: bare conv
        if (layer >= 1) {
            nn::BatchNormCache<T>* cache = trace ? &trace->bn_caches[layer - 1] : nullptr;
            x = nn::batchnorm_forward(x, net.bns[layer - 1], mode, cache);
        }
        x = nn::relu_forward(x);
    }
    return x;
}

template <typename T>
std::vector<std::span<T>> SarCnnGrads<T>::parameter_views() {
    std::vector<std::span<T>> views;
    const int depth = static_cast<int>(conv_w.size());
    for (int layer = 0; layer < depth; ++layer) {
        views.emplace_back(conv_w[layer].data);
        views.emplace_back(conv_b[layer]);
        if (layer >= 1 && layer <= depth - 2) {
            views.emplace_back(bn_gamma[layer - 1]);
            views.emplace_back(bn_beta[layer - 1]);
        }
    }
    return views;
}

template <typename T>
SarCnnGrads<T> sar_cnn_backward(const SarCnn<T>& net, const ForwardTrace<T>& trace,
                                const Tensor4<T>& grad_residual) {
    if (static_cast<int>(trace.inputs.size()) != net.depth) {
        throw UsageError("sar_cnn_backward: trace does not match the network");
    }
    SarCnnGrads<T> grads;
    grads.conv_w.resize(net.depth);
    grads.conv_b.resize(net.depth);
    grads.bn_gamma.resize(net.depth - 2);
    grads.bn_beta.resize(net.depth - 2);

    Tensor4<T> g = grad_residual;
    for (int layer = net.depth - 1; layer >= 0; --layer) {
        if (layer < net.depth - 1) {
            // ReLU mask from the stored activation (= next conv input).
            g = nn::relu_backward_from_output(trace.inputs[layer + 1], g);
            if (layer >= 1) {
                auto bn = nn::batchnorm_backward(trace.bn_caches[layer - 1], g);
                grads.bn_gamma[layer - 1] = std::move(bn.gamma);
                grads.bn_beta[layer - 1] = std::move(bn.beta);
                g = std::move(bn.input);
            }
        }
        auto conv = nn::conv2d_backward(trace.inputs[layer], net.convs[layer], g, 1);
        grads.conv_w[layer] = std::move(conv.weights);
        grads.conv_b[layer] = std::move(conv.bias);
        g = std::move(conv.input);
    }
    grads.input = std::move(g);
    return grads;
}

template <typename T>
LossResult<T> log_cosh_loss(const Tensor4<T>& residual_pred, const Tensor4<T>& log_ratio,
                            double c) {
    if (!residual_pred.same_shape(log_ratio)) {
        throw ShapeError("log_cosh_loss: residual_pred and log_ratio shapes differ");
    }
    LossResult<T> out;
    out.grad = Tensor4<T>(residual_pred.n, residual_pred.c, residual_pred.h, residual_pred.w);
    double total = 0.0;
    for (std::size_t i = 0; i < residual_pred.size(); ++i) {
        const double z = static_cast<double>(residual_pred.data[i]) + c -
                         static_cast<double>(log_ratio.data[i]);
        if (!std::isfinite(z)) throw NumericError("log_cosh_loss: non-finite argument");
        total += stable_log_cosh(z);
        out.grad.data[i] = static_cast<T>(std::tanh(z));
    }
    out.value = total;
    return out;
}

Raster despeckle(SarCnnF& net, const Raster& noisy, double c, int tile, int overlap) {
    if (net.training) throw UsageError("despeckle: model must be in inference mode");
    require_positive_finite(noisy, "despeckle input");
    if (overlap < 0) throw UsageError("despeckle: overlap must be >= 0");

    const int h = noisy.height, w = noisy.width;
    if (tile <= 0 || (tile >= h && tile >= w)) {
        tile = std::max(h, w);
        overlap = 0;
    }
    const int core = tile - 2 * overlap;
    if (core < 1) throw UsageError("despeckle: tile too small for the requested overlap");

    const Raster log_y = log_transform(noisy);
    Raster out(h, w);

    for (int cy = 0; cy < h; cy += core) {
        for (int cx = 0; cx < w; cx += core) {
            const int core_h = std::min(core, h - cy);
            const int core_w = std::min(core, w - cx);
            const int wy0 = std::max(0, cy - overlap);
            const int wx0 = std::max(0, cx - overlap);
            const int wy1 = std::min(h, cy + core_h + overlap);
            const int wx1 = std::min(w, cx + core_w + overlap);
            const int wh = wy1 - wy0, ww = wx1 - wx0;

            Tensor4f window(1, 1, wh, ww);
            for (int y = 0; y < wh; ++y) {
                std::memcpy(window.plane(0, 0) + static_cast<std::size_t>(y) * ww,
                            log_y.values.data() + static_cast<std::size_t>(wy0 + y) * w + wx0,
                            static_cast<std::size_t>(ww) * sizeof(float));
            }
            const Tensor4f residual = sar_cnn_forward(net, window);

            // Central crop: keep only the core, drop the halo.
            for (int y = 0; y < core_h; ++y) {
                for (int x = 0; x < core_w; ++x) {
                    const int wy = cy + y - wy0;
                    const int wx = cx + x - wx0;
                    const double value = static_cast<double>(log_y.at(cy + y, cx + x)) -
                                         static_cast<double>(residual.at(0, 0, wy, wx)) - c;
                    out.at(cy + y, cx + x) = static_cast<float>(std::exp(value));
                }
            }
        }
    }
    require_positive_finite(out, "despeckle output");
    return out;
}

std::vector<TrainStage> parse_schedule(const std::string& text) {
    std::vector<TrainStage> stages;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(pos, comma - pos);
        const std::size_t colon = part.find(':');
        if (colon == std::string::npos) {
            throw UsageError("schedule: expected 'epochs:lr' in '" + part + "'");
        }
        TrainStage stage;
        try {
            stage.epochs = std::stoi(part.substr(0, colon));
            stage.lr = std::stod(part.substr(colon + 1));
        } catch (const std::exception&) {
            throw UsageError("schedule: cannot parse '" + part + "'");
        }
        if (stage.epochs < 1) throw UsageError("schedule: epochs must be >= 1");
        if (stage.lr < 0.0 || !std::isfinite(stage.lr)) {
            throw UsageError("schedule: learning rate must be finite and >= 0");
        }
        stages.push_back(stage);
        pos = comma + 1;
    }
    if (stages.empty()) throw UsageError("schedule: empty");
    return stages;
}

std::vector<EpochStat> train(SarCnnF& net, const PatchSet& patches,
                             const std::vector<TrainStage>& schedule, int batch,
                             std::uint64_t seed) {
    if (patches.pairs.empty()) throw UsageError("train: empty patch set");
    if (batch < 1) throw UsageError("train: batch must be >= 1");
    if (schedule.empty()) throw UsageError("train: empty schedule");

    const double c = patches.log_speckle_c();
    auto params = net.parameter_views();
    std::vector<nn::AdamState<float>> states;
    states.reserve(params.size());
    for (const auto& view : params) states.emplace_back(view.size());

    std::vector<EpochStat> trace;
    int epoch = 0;
    for (const TrainStage& stage : schedule) {
        for (int e = 0; e < stage.epochs; ++e, ++epoch) {
            MinibatchStream batches(patches, batch, seed, epoch);
            double epoch_loss = 0.0;
            std::size_t epoch_patches = 0;
            int batch_index = 0;
            Tensor4f clean, noisy;
            while (batches.next(clean, noisy)) {
                // Log domain: network input log y, target log(y/x).
                Tensor4f log_noisy(noisy.n, 1, noisy.h, noisy.w);
                Tensor4f log_ratio(noisy.n, 1, noisy.h, noisy.w);
                for (std::size_t i = 0; i < noisy.size(); ++i) {
                    const float ln = std::log(noisy.data[i]);
                    log_noisy.data[i] = ln;
                    log_ratio.data[i] = ln - std::log(clean.data[i]);
                }

                net.training = true;
                ForwardTrace<float> fwd;
                LossResult<float> loss;
                try {
                    const Tensor4f residual = sar_cnn_forward(net, log_noisy, &fwd);
                    loss = log_cosh_loss(residual, log_ratio, c);
                    if (!std::isfinite(loss.value)) {
                        throw NumericError("summed loss is non-finite");
                    }
                } catch (const NumericError& err) {
                    net.training = false;
                    throw NumericError("train: numeric failure at epoch " +
                                       std::to_string(epoch) + ", batch " +
                                       std::to_string(batch_index) + ": " + err.what());
                }

                // Mean reduction at the optimizer boundary: scale the summed
                // loss gradient by 1/batch so the learning rate is
                // batch-size-comparable.
                const float scale = 1.0f / static_cast<float>(noisy.n);
                for (float& gv : loss.grad.data) gv *= scale;

                SarCnnGrads<float> grads = sar_cnn_backward(net, fwd, loss.grad);
                auto grad_views = grads.parameter_views();
                for (std::size_t p = 0; p < params.size(); ++p) {
                    nn::adam_step<float>(params[p],
                                         std::span<const float>(grad_views[p].data(),
                                                                grad_views[p].size()),
                                         states[p], static_cast<float>(stage.lr));
                }

                epoch_loss += loss.value;
                epoch_patches += static_cast<std::size_t>(noisy.n);
                ++batch_index;
            }
            trace.push_back(EpochStat{epoch, stage.lr,
                                      epoch_loss / static_cast<double>(epoch_patches)});
        }
    }
    net.training = false;
    return trace;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {
constexpr char kCkptMagic[4] = {'S', 'R', 'C', 'W'};
constexpr std::uint16_t kCkptVersion = 1;
} // namespace

void save_checkpoint(const SarCnnF& net, const std::string& path) {
    ByteWriter w;
    w.bytes(kCkptMagic, 4);
    w.u16(kCkptVersion);
    w.u16(static_cast<std::uint16_t>(net.depth));
    w.u16(static_cast<std::uint16_t>(net.width));
    // Trainable parameters in declaration order, then BN running stats.
    for (int layer = 0; layer < net.depth; ++layer) {
        for (float v : net.convs[layer].weights.data) w.f32(v);
        for (float v : net.convs[layer].bias) w.f32(v);
        if (layer >= 1 && layer <= net.depth - 2) {
            for (float v : net.bns[layer - 1].gamma) w.f32(v);
            for (float v : net.bns[layer - 1].beta) w.f32(v);
        }
    }
    for (const auto& bn : net.bns) {
        for (float v : bn.running_mean) w.f32(v);
        for (float v : bn.running_var) w.f32(v);
    }
    write_file_with_crc(path, std::move(w));
}

SarCnnF load_checkpoint(const std::string& path) {
    const std::vector<unsigned char> body = read_file_checked(path);
    ByteReader rd(body.data(), body.size());
    char magic[4];
    rd.bytes(magic, 4);
    if (std::memcmp(magic, kCkptMagic, 4) != 0) {
        throw FormatError("bad magic (expected SRCW): " + path);
    }
    if (rd.u16() != kCkptVersion) throw FormatError("unsupported checkpoint version: " + path);
    const int depth = rd.u16();
    const int width = rd.u16();
    if (depth < 3 || width < 1) throw FormatError("bad checkpoint architecture: " + path);

    SarCnnF net = build_sar_cnn<float>(depth, width, 0);
    for (int layer = 0; layer < depth; ++layer) {
        for (float& v : net.convs[layer].weights.data) v = rd.f32();
        for (float& v : net.convs[layer].bias) v = rd.f32();
        if (layer >= 1 && layer <= depth - 2) {
            for (float& v : net.bns[layer - 1].gamma) v = rd.f32();
            for (float& v : net.bns[layer - 1].beta) v = rd.f32();
        }
    }
    for (auto& bn : net.bns) {
        for (float& v : bn.running_mean) v = rd.f32();
        for (float& v : bn.running_var) v = rd.f32();
        for (float v : bn.running_var) {
            if (v < 0.0f) throw FormatError("negative running variance: " + path);
        }
    }
    if (rd.remaining() != 0) throw FormatError("trailing bytes in checkpoint: " + path);
    return net;
}

#define SARDINE_MODEL_INSTANTIATE(T)                                                   \
    template struct SarCnn<T>;                                                         \
    template struct SarCnnGrads<T>;                                                    \
    template SarCnn<T> build_sar_cnn<T>(int, int, std::uint64_t);                      \
    template Tensor4<T> sar_cnn_forward<T>(SarCnn<T>&, const Tensor4<T>&,              \
                                           ForwardTrace<T>*);                          \
    template SarCnnGrads<T> sar_cnn_backward<T>(const SarCnn<T>&,                      \
                                                const ForwardTrace<T>&,                \
                                                const Tensor4<T>&);                    \
    template LossResult<T> log_cosh_loss<T>(const Tensor4<T>&, const Tensor4<T>&,      \
                                            double);

SARDINE_MODEL_INSTANTIATE(float)
SARDINE_MODEL_INSTANTIATE(double)

#undef SARDINE_MODEL_INSTANTIATE

} // namespace sardine
