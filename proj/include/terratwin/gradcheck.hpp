#pragma once
// Finite-difference verification of every analytic adjoint, run in 64-bit.
// The numeric side only ever calls forward passes; the analytic side only
// ever calls backward passes, so each checks the other.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "terratwin/nnet.hpp"
#include "terratwin/rng.hpp"
#include "terratwin/tensor.hpp"
#include "terratwin/unet.hpp"

namespace terratwin::nnet {

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

inline constexpr double kGradCheckEps = 1e-5;

inline double rel_err(double analytic, double numeric) noexcept {
    return std::abs(analytic - numeric) /
           std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

namespace gradcheck_detail {

inline Tensor<double> random_tensor(int d0, int d1, int d2, int d3, Pcg32& rng,
                                    bool avoid_zero = false) {
    Tensor<double> t(d0, d1, d2, d3);
    for (double& v : t.data) {
        v = rng.uniform(-1.0, 1.0);
        if (avoid_zero) {
            const double mag = 0.1 + 0.9 * std::abs(v);
            v = v >= 0.0 ? mag : -mag;
        }
    }
    return t;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a.data[i] * b.data[i];
    return s;
}

// Central difference of a scalar functional with respect to one element.
inline double central_diff(const std::function<double()>& f, double& elem) {
    const double orig = elem;
    elem = orig + kGradCheckEps;
    const double fp = f();
    elem = orig - kGradCheckEps;
    const double fm = f();
    elem = orig;
    return (fp - fm) / (2.0 * kGradCheckEps);
}

inline void track(double& worst, double analytic, double numeric) {
    worst = std::max(worst, rel_err(analytic, numeric));
}

} // namespace gradcheck_detail

// Each layer check projects the layer output onto a fixed random tensor r so
// the functional is scalar: F = <r, layer(inputs)>; the analytic gradient is
// layer_backward(r).
inline std::vector<GradCheckReport> run_layer_gradchecks(std::uint64_t seed,
                                                         double tolerance = 1e-6) {
    using namespace gradcheck_detail;
    std::vector<GradCheckReport> reports;
    Pcg32 rng = make_stream(seed, {0x6c6179657273ULL});

    // conv2d 3x3
    {
        Tensor<double> x = random_tensor(1, 2, 4, 4, rng);
        Tensor<double> w = random_tensor(3, 3, 2, 3, rng);
        std::vector<double> b(3);
        for (double& v : b)
            v = rng.uniform(-0.5, 0.5);
        Tensor<double> r = random_tensor(1, 3, 4, 4, rng);
        auto f = [&] { return dot(conv2d_forward(x, w, std::span<const double>(b)), r); };
        ConvGrads<double> g = conv2d_backward(x, w, r);
        double worst = 0.0;
        for (double& e : x.data)
            track(worst, g.x.data[&e - x.data.data()], central_diff(f, e));
        for (double& e : w.data)
            track(worst, g.w.data[&e - w.data.data()], central_diff(f, e));
        for (double& e : b)
            track(worst, g.b[&e - b.data()], central_diff(f, e));
        reports.push_back({"conv3x3", worst, worst < tolerance});
    }

    // relu (inputs kept away from 0)
    {
        Tensor<double> x = random_tensor(1, 2, 4, 4, rng, /*avoid_zero=*/true);
        Tensor<double> r = random_tensor(1, 2, 4, 4, rng);
        auto f = [&] { return dot(relu(x), r); };
        Tensor<double> g = relu_backward(x, r);
        double worst = 0.0;
        for (double& e : x.data)
            track(worst, g.data[&e - x.data.data()], central_diff(f, e));
        reports.push_back({"relu", worst, worst < tolerance});
    }

    // maxpool2 (random draws give a unique max per block)
    {
        Tensor<double> x = random_tensor(1, 2, 4, 4, rng);
        Tensor<double> r = random_tensor(1, 2, 2, 2, rng);
        auto f = [&] { return dot(maxpool2(x).out, r); };
        PoolResult<double> pooled = maxpool2(x);
        Tensor<double> g = maxpool2_backward(r, pooled.argmax, x.dim);
        double worst = 0.0;
        for (double& e : x.data)
            track(worst, g.data[&e - x.data.data()], central_diff(f, e));
        reports.push_back({"maxpool2", worst, worst < tolerance});
    }

    // tconv2
    {
        Tensor<double> x = random_tensor(1, 2, 3, 3, rng);
        Tensor<double> w = random_tensor(2, 2, 2, 3, rng);
        std::vector<double> b(3);
        for (double& v : b)
            v = rng.uniform(-0.5, 0.5);
        Tensor<double> r = random_tensor(1, 3, 6, 6, rng);
        auto f = [&] { return dot(tconv2_forward(x, w, std::span<const double>(b)), r); };
        ConvGrads<double> g = tconv2_backward(x, w, r);
        double worst = 0.0;
        for (double& e : x.data)
            track(worst, g.x.data[&e - x.data.data()], central_diff(f, e));
        for (double& e : w.data)
            track(worst, g.w.data[&e - w.data.data()], central_diff(f, e));
        for (double& e : b)
            track(worst, g.b[&e - b.data()], central_diff(f, e));
        reports.push_back({"tconv2", worst, worst < tolerance});
    }

    // concat + split
    {
        Tensor<double> a = random_tensor(1, 2, 3, 3, rng);
        Tensor<double> b = random_tensor(1, 3, 3, 3, rng);
        Tensor<double> r = random_tensor(1, 5, 3, 3, rng);
        auto f = [&] { return dot(concat_channels(a, b), r); };
        auto [ga, gb] = split_channels(r, a.dim[1]);
        double worst = 0.0;
        for (double& e : a.data)
            track(worst, ga.data[&e - a.data.data()], central_diff(f, e));
        for (double& e : b.data)
            track(worst, gb.data[&e - b.data.data()], central_diff(f, e));
        reports.push_back({"concat", worst, worst < tolerance});
    }

    // dropout with p = 0 (identity path)
    {
        Tensor<double> x = random_tensor(1, 2, 4, 4, rng);
        Tensor<double> r = random_tensor(1, 2, 4, 4, rng);
        Pcg32 drng = make_stream(seed, {0x64726f70ULL});
        auto f = [&] {
            Pcg32 local = drng;
            return dot(dropout(x, 0.0, local, true).out, r);
        };
        Tensor<double> g = dropout_backward(r, {}, 0.0);
        double worst = 0.0;
        for (double& e : x.data)
            track(worst, g.data[&e - x.data.data()], central_diff(f, e));
        reports.push_back({"dropout_off", worst, worst < tolerance});
    }

    // softmax cross-entropy (the loss itself is the scalar functional)
    {
        Tensor<double> logits = random_tensor(1, 7, 2, 2, rng);
        std::vector<std::uint8_t> labels(4);
        for (auto& l : labels)
            l = static_cast<std::uint8_t>(rng.next_below(7));
        auto f = [&] {
            return softmax_ce(logits, std::span<const std::uint8_t>(labels)).loss;
        };
        CeResult<double> ce = softmax_ce(logits, std::span<const std::uint8_t>(labels));
        double worst = 0.0;
        for (double& e : logits.data)
            track(worst, ce.grad_logits.data[&e - logits.data.data()], central_diff(f, e));
        reports.push_back({"softmax_ce", worst, worst < tolerance});
    }

    return reports;
}

// Whole-model check: loss(params) on a fixed input, finite differences over
// every weight and bias of a depth-1 / base-4 net on a 1x3x8x8 input.
inline GradCheckReport run_unet_gradcheck(std::uint64_t seed, double tolerance = 1e-5) {
    using namespace gradcheck_detail;
    UNetConfig cfg;
    cfg.in_channels = 3;
    cfg.depth = 1;
    cfg.base_filters = 4;
    UNetModel<double> model = init_params<double>(cfg, seed);

    Pcg32 rng = make_stream(seed, {0x756e6574ULL});
    Tensor<double> x = random_tensor(1, 3, 8, 8, rng);
    std::vector<std::uint8_t> labels(64);
    for (auto& l : labels)
        l = static_cast<std::uint8_t>(rng.next_below(7));

    auto loss_fn = [&] {
        Tensor<double> logits = unet_forward(model, x, /*training=*/false);
        return softmax_ce(logits, std::span<const std::uint8_t>(labels)).loss;
    };

    UNetCache<double> cache;
    Tensor<double> logits = unet_forward(model, x, /*training=*/true, nullptr, &cache);
    CeResult<double> ce = softmax_ce(logits, std::span<const std::uint8_t>(labels));
    UNetModel<double> grads = unet_backward(model, cache, ce.grad_logits);

    double worst = 0.0;
    std::vector<ConvLayer<double>*> model_layers, grad_layers;
    model.visit_layers([&](ConvLayer<double>& l) { model_layers.push_back(&l); });
    grads.visit_layers([&](ConvLayer<double>& l) { grad_layers.push_back(&l); });
    for (std::size_t li = 0; li < model_layers.size(); ++li) {
        ConvLayer<double>& layer = *model_layers[li];
        ConvLayer<double>& glayer = *grad_layers[li];
        for (std::size_t i = 0; i < layer.w.size(); ++i)
            track(worst, glayer.w.data[i], central_diff(loss_fn, layer.w.data[i]));
        for (std::size_t i = 0; i < layer.b.size(); ++i)
            track(worst, glayer.b[i], central_diff(loss_fn, layer.b[i]));
    }
    return {"unet_depth1_base4", worst, worst < tolerance};
}

} // namespace terratwin::nnet
