#pragma once
// U-Net assembly over the nnet kernels. Encoder stages double channel width
// and halve resolution; the decoder mirrors them with transposed convolutions
// and skip concatenations; a 1x1 head maps to the 7 class logits.
//
// Parameter declaration order (checkpoints and the optimizer walk it):
//   enc stage 0 conv_a, conv_b, ..., enc stage depth-1,
//   bottleneck_a, bottleneck_b,
//   decoder deepest stage (up, conv_a, conv_b), ..., shallowest,
//   head.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "terratwin/classes.hpp"
#include "terratwin/errors.hpp"
#include "terratwin/nnet.hpp"
#include "terratwin/rng.hpp"
#include "terratwin/tensor.hpp"

namespace terratwin::nnet {

struct UNetConfig {
    int in_channels = 3; // 3 = RGB, 4 = RGB + height
    int n_classes = labeler::kNumClasses;
    int depth = 2;
    int base_filters = 16;
    double dropout_p = 0.0;

    void validate() const {
        if (in_channels != 3 && in_channels != 4)
            throw argument_error("unet: in_channels must be 3 or 4");
        if (n_classes != labeler::kNumClasses)
            throw argument_error("unet: n_classes must be 7");
        if (depth < 1)
            throw argument_error("unet: depth must be >= 1");
        if (base_filters < 1)
            throw argument_error("unet: base_filters must be >= 1");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0))
            throw argument_error("unet: dropout_p must be in [0,1)");
    }
};

template <class T>
struct ConvLayer {
    Tensor<T> w; // Kh x Kw x Cin x Cout
    std::vector<T> b;
};

template <class T>
struct UNetModel {
    UNetConfig config;
    std::vector<ConvLayer<T>> enc; // 2 per stage, stage-major
    ConvLayer<T> bottleneck_a, bottleneck_b;
    struct DecoderStage {
        ConvLayer<T> up; // 2x2 transposed conv
        ConvLayer<T> a, b;
    };
    std::vector<DecoderStage> dec; // [0] = deepest level, applied first
    ConvLayer<T> head;             // 1x1 conv to n_classes

    // Visits every layer in declared parameter order.
    template <class Fn>
    void visit_layers(Fn&& fn) {
        for (auto& l : enc)
            fn(l);
        fn(bottleneck_a);
        fn(bottleneck_b);
        for (auto& d : dec) {
            fn(d.up);
            fn(d.a);
            fn(d.b);
        }
        fn(head);
    }
    template <class Fn>
    void visit_layers(Fn&& fn) const {
        for (const auto& l : enc)
            fn(l);
        fn(bottleneck_a);
        fn(bottleneck_b);
        for (const auto& d : dec) {
            fn(d.up);
            fn(d.a);
            fn(d.b);
        }
        fn(head);
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        visit_layers([&](const ConvLayer<T>& l) { n += l.w.size() + l.b.size(); });
        return n;
    }
};

namespace detail {

template <class T>
ConvLayer<T> make_layer(int kh, int kw, int cin, int cout) {
    return ConvLayer<T>{Tensor<T>(kh, kw, cin, cout),
                        std::vector<T>(static_cast<std::size_t>(cout), T(0))};
}

template <class T>
void he_uniform_fill(ConvLayer<T>& layer, Pcg32& rng) {
    const int fan_in = layer.w.dim[0] * layer.w.dim[1] * layer.w.dim[2];
    const double bound = std::sqrt(6.0 / fan_in);
    for (T& v : layer.w.data)
        v = static_cast<T>(rng.uniform(-bound, bound));
    // biases stay zero
}

} // namespace detail

// Zero-valued model with the same layer shapes; used as a gradient container
// and for optimizer moments.
template <class T>
UNetModel<T> zeros_like(const UNetModel<T>& m) {
    UNetModel<T> z = m;
    z.visit_layers([](ConvLayer<T>& l) {
        std::fill(l.w.data.begin(), l.w.data.end(), T(0));
        std::fill(l.b.begin(), l.b.end(), T(0));
    });
    return z;
}

template <class T>
UNetModel<T> build_model(const UNetConfig& cfg) {
    cfg.validate();
    UNetModel<T> m;
    m.config = cfg;
    int cin = cfg.in_channels;
    for (int k = 0; k < cfg.depth; ++k) {
        const int width = cfg.base_filters << k;
        m.enc.push_back(detail::make_layer<T>(3, 3, cin, width));
        m.enc.push_back(detail::make_layer<T>(3, 3, width, width));
        cin = width;
    }
    const int bott = cfg.base_filters << cfg.depth;
    m.bottleneck_a = detail::make_layer<T>(3, 3, cin, bott);
    m.bottleneck_b = detail::make_layer<T>(3, 3, bott, bott);
    int prev = bott;
    for (int k = cfg.depth - 1; k >= 0; --k) {
        const int width = cfg.base_filters << k;
        typename UNetModel<T>::DecoderStage stage;
        stage.up = detail::make_layer<T>(2, 2, prev, width);
        stage.a = detail::make_layer<T>(3, 3, 2 * width, width);
        stage.b = detail::make_layer<T>(3, 3, width, width);
        m.dec.push_back(std::move(stage));
        prev = width;
    }
    m.head = detail::make_layer<T>(1, 1, prev, cfg.n_classes);
    return m;
}

// He-uniform weights, zero biases; one stream drawn in declared order.
template <class T>
UNetModel<T> init_params(const UNetConfig& cfg, std::uint64_t seed) {
    UNetModel<T> m = build_model<T>(cfg);
    Pcg32 rng = make_stream(seed, {streams::kInit});
    m.visit_layers([&](ConvLayer<T>& l) { detail::he_uniform_fill(l, rng); });
    return m;
}

// Stored activations needed by the backward pass.
template <class T>
struct UNetCache {
    struct ConvRec {
        Tensor<T> x;   // layer input
        Tensor<T> pre; // conv output before relu
    };
    std::vector<ConvRec> enc;
    std::vector<std::vector<std::uint8_t>> pool_idx;
    std::vector<std::array<int, 4>> pool_in_dim;
    ConvRec bott_a, bott_b;
    std::vector<std::uint8_t> drop_mask_a, drop_mask_b;
    struct DecRec {
        Tensor<T> up_x; // input to the transposed conv
        ConvRec a, b;
        int skip_channels = 0;
    };
    std::vector<DecRec> dec;
    Tensor<T> head_x;
};

template <class T>
Tensor<T> unet_forward(const UNetModel<T>& m, const Tensor<T>& x, bool training,
                       Pcg32* rng = nullptr, UNetCache<T>* cache = nullptr) {
    const UNetConfig& cfg = m.config;
    if (x.dim[1] != cfg.in_channels)
        throw shape_error("unet_forward: input has " + std::to_string(x.dim[1]) +
                          " channels, model wants " + std::to_string(cfg.in_channels));
    const int div = 1 << cfg.depth;
    if (x.dim[2] % div != 0 || x.dim[3] % div != 0)
        throw shape_error("unet_forward: spatial dims " + x.shape_str() +
                          " not divisible by 2^depth");
    if (training && cfg.dropout_p > 0.0 && rng == nullptr)
        throw argument_error("unet_forward: dropout needs an rng in training mode");

    auto conv_relu = [&](const Tensor<T>& in, const ConvLayer<T>& layer,
                         typename UNetCache<T>::ConvRec* rec) {
        Tensor<T> pre = conv2d_forward(in, layer.w, std::span<const T>(layer.b));
        Tensor<T> act = relu(pre);
        if (rec) {
            rec->x = in;
            rec->pre = std::move(pre);
        }
        return act;
    };

    Tensor<T> cur = x;
    std::vector<Tensor<T>> skips;
    if (cache) {
        cache->enc.resize(static_cast<std::size_t>(2 * cfg.depth));
        cache->pool_idx.resize(static_cast<std::size_t>(cfg.depth));
        cache->pool_in_dim.resize(static_cast<std::size_t>(cfg.depth));
        cache->dec.resize(m.dec.size());
    }
    for (int k = 0; k < cfg.depth; ++k) {
        cur = conv_relu(cur, m.enc[2 * k], cache ? &cache->enc[2 * k] : nullptr);
        cur = conv_relu(cur, m.enc[2 * k + 1], cache ? &cache->enc[2 * k + 1] : nullptr);
        skips.push_back(cur);
        PoolResult<T> pooled = maxpool2(cur);
        if (cache) {
            cache->pool_idx[k] = std::move(pooled.argmax);
            cache->pool_in_dim[k] = cur.dim;
        }
        cur = std::move(pooled.out);
    }

    cur = conv_relu(cur, m.bottleneck_a, cache ? &cache->bott_a : nullptr);
    if (cfg.dropout_p > 0.0) {
        Pcg32 unused;
        DropoutResult<T> d = dropout(cur, cfg.dropout_p, rng ? *rng : unused, training);
        if (cache)
            cache->drop_mask_a = d.mask;
        cur = std::move(d.out);
    }
    cur = conv_relu(cur, m.bottleneck_b, cache ? &cache->bott_b : nullptr);
    if (cfg.dropout_p > 0.0) {
        Pcg32 unused;
        DropoutResult<T> d = dropout(cur, cfg.dropout_p, rng ? *rng : unused, training);
        if (cache)
            cache->drop_mask_b = d.mask;
        cur = std::move(d.out);
    }

    for (std::size_t s = 0; s < m.dec.size(); ++s) {
        const Tensor<T>& skip = skips[skips.size() - 1 - s];
        if (cache)
            cache->dec[s].up_x = cur;
        Tensor<T> up = tconv2_forward(cur, m.dec[s].up.w, std::span<const T>(m.dec[s].up.b));
        Tensor<T> cat = concat_channels(skip, up);
        if (cache)
            cache->dec[s].skip_channels = skip.dim[1];
        cur = conv_relu(cat, m.dec[s].a, cache ? &cache->dec[s].a : nullptr);
        cur = conv_relu(cur, m.dec[s].b, cache ? &cache->dec[s].b : nullptr);
    }

    if (cache)
        cache->head_x = cur;
    Tensor<T> logits = conv2d_forward(cur, m.head.w, std::span<const T>(m.head.b));
    debug_check_finite(logits, "unet_forward");
    return logits;
}

// Returns parameter gradients in a model-shaped container.
template <class T>
UNetModel<T> unet_backward(const UNetModel<T>& m, const UNetCache<T>& cache,
                           const Tensor<T>& grad_logits) {
    UNetModel<T> grads = zeros_like(m);
    const UNetConfig& cfg = m.config;

    auto conv_bwd = [](const typename UNetCache<T>::ConvRec& rec, const ConvLayer<T>& layer,
                       ConvLayer<T>& grad_layer, const Tensor<T>& grad_relu_out) {
        Tensor<T> gpre = relu_backward(rec.pre, grad_relu_out);
        ConvGrads<T> g = conv2d_backward(rec.x, layer.w, gpre);
        grad_layer.w = std::move(g.w);
        grad_layer.b = std::move(g.b);
        return std::move(g.x);
    };

    ConvGrads<T> hg = conv2d_backward(cache.head_x, m.head.w, grad_logits);
    grads.head.w = std::move(hg.w);
    grads.head.b = std::move(hg.b);
    Tensor<T> g = std::move(hg.x);

    std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(cfg.depth));
    for (std::size_t s = m.dec.size(); s-- > 0;) {
        const int level = cfg.depth - 1 - static_cast<int>(s);
        g = conv_bwd(cache.dec[s].b, m.dec[s].b, grads.dec[s].b, g);
        g = conv_bwd(cache.dec[s].a, m.dec[s].a, grads.dec[s].a, g);
        auto [g_skip, g_up] = split_channels(g, cache.dec[s].skip_channels);
        skip_grads[static_cast<std::size_t>(level)] = std::move(g_skip);
        ConvGrads<T> ug = tconv2_backward(cache.dec[s].up_x, m.dec[s].up.w, g_up);
        grads.dec[s].up.w = std::move(ug.w);
        grads.dec[s].up.b = std::move(ug.b);
        g = std::move(ug.x);
    }

    if (cfg.dropout_p > 0.0)
        g = dropout_backward(g, cache.drop_mask_b, cfg.dropout_p);
    g = conv_bwd(cache.bott_b, m.bottleneck_b, grads.bottleneck_b, g);
    if (cfg.dropout_p > 0.0)
        g = dropout_backward(g, cache.drop_mask_a, cfg.dropout_p);
    g = conv_bwd(cache.bott_a, m.bottleneck_a, grads.bottleneck_a, g);

    for (int k = cfg.depth - 1; k >= 0; --k) {
        g = maxpool2_backward(g, cache.pool_idx[k], cache.pool_in_dim[k]);
        // The skip tensor feeds both the pool and the decoder concat.
        Tensor<T>& sg = skip_grads[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < g.size(); ++i)
            g.data[i] += sg.data[i];
        g = conv_bwd(cache.enc[2 * k + 1], m.enc[2 * k + 1], grads.enc[2 * k + 1], g);
        g = conv_bwd(cache.enc[2 * k], m.enc[2 * k], grads.enc[2 * k], g);
    }
    return grads;
}

} // namespace terratwin::nnet
