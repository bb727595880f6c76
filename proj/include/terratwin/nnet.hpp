#pragma once
// From-scratch tensor kernels and the micro U-Net: forward passes plus
// hand-derived adjoints for every layer. Cross-correlation convention,
// zero same-padding, stride 1 (3x3 and 1x1 kernels); 2x2/stride-2 max
// pooling and transposed convolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "terratwin/errors.hpp"
#include "terratwin/rng.hpp"
#include "terratwin/tensor.hpp"

namespace terratwin::nnet {

// --- convolution ---

namespace detail {

// Zero-pad the spatial dims of an activation tensor.
template <class T>
Tensor<T> pad_spatial(const Tensor<T>& x, int pad) {
    if (pad == 0)
        return x;
    Tensor<T> out(x.dim[0], x.dim[1], x.dim[2] + 2 * pad, x.dim[3] + 2 * pad);
    for (int n = 0; n < x.dim[0]; ++n)
        for (int c = 0; c < x.dim[1]; ++c) {
            const T* src = x.plane(n, c);
            T* dst = out.plane(n, c);
            for (int i = 0; i < x.dim[2]; ++i)
                std::copy(src + static_cast<std::size_t>(i) * x.dim[3],
                          src + static_cast<std::size_t>(i + 1) * x.dim[3],
                          dst + static_cast<std::size_t>(i + pad) * out.dim[3] + pad);
        }
    return out;
}

template <class T>
void check_conv_shapes(const Tensor<T>& x, const Tensor<T>& w, std::span<const T> b) {
    if (w.dim[0] != w.dim[1] || w.dim[0] % 2 == 0)
        throw shape_error("conv2d: kernel must be odd and square, got " + w.shape_str());
    if (w.dim[2] != x.dim[1])
        throw shape_error("conv2d: kernel input channels " + std::to_string(w.dim[2]) +
                          " do not match activation channels " + std::to_string(x.dim[1]));
    if (static_cast<int>(b.size()) != w.dim[3])
        throw shape_error("conv2d: bias length does not match output channels");
}

} // namespace detail

// out[n,co,i,j] = b[co] + sum_{ci,di,dj} x[n,ci,i+di-pad,j+dj-pad] * w[di,dj,ci,co]
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, std::span<const T> b) {
    detail::check_conv_shapes(x, w, b);
    const int K = w.dim[0], pad = K / 2;
    const int N = x.dim[0], Cin = x.dim[1], H = x.dim[2], W = x.dim[3];
    const int Cout = w.dim[3];
    const Tensor<T> xp = detail::pad_spatial(x, pad);
    const int PW = W + 2 * pad;

    Tensor<T> out(N, Cout, H, W);
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Cout; ++co) {
            T* o = out.plane(n, co);
            std::fill(o, o + static_cast<std::size_t>(H) * W, b[co]);
            for (int ci = 0; ci < Cin; ++ci) {
                const T* xc = xp.plane(n, ci);
                for (int di = 0; di < K; ++di) {
                    for (int dj = 0; dj < K; ++dj) {
                        const T wv = w.at(di, dj, ci, co);
                        for (int i = 0; i < H; ++i) {
                            const T* xr = xc + static_cast<std::size_t>(i + di) * PW + dj;
                            T* orow = o + static_cast<std::size_t>(i) * W;
                            for (int j = 0; j < W; ++j)
                                orow[j] += wv * xr[j];
                        }
                    }
                }
            }
        }
    }
    debug_check_finite(out, "conv2d_forward");
    return out;
}

template <class T>
struct ConvGrads {
    Tensor<T> x;
    Tensor<T> w;
    std::vector<T> b;
};

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w,
                             const Tensor<T>& grad_out) {
    const int K = w.dim[0], pad = K / 2;
    const int N = x.dim[0], Cin = x.dim[1], H = x.dim[2], W = x.dim[3];
    const int Cout = w.dim[3];
    if (grad_out.dim != std::array<int, 4>{N, Cout, H, W})
        throw shape_error("conv2d_backward: grad_out shape " + grad_out.shape_str());

    ConvGrads<T> g{Tensor<T>(N, Cin, H, W), Tensor<T>(K, K, Cin, Cout),
                   std::vector<T>(static_cast<std::size_t>(Cout), T(0))};
    const Tensor<T> gop = detail::pad_spatial(grad_out, pad);
    const Tensor<T> xp = detail::pad_spatial(x, pad);
    const int PW = W + 2 * pad;

    for (int n = 0; n < N; ++n) {
        // grad_x: correlation of padded grad_out with the flipped kernel.
        for (int ci = 0; ci < Cin; ++ci) {
            T* gx = g.x.plane(n, ci);
            for (int co = 0; co < Cout; ++co) {
                const T* gp = gop.plane(n, co);
                for (int di = 0; di < K; ++di) {
                    for (int dj = 0; dj < K; ++dj) {
                        const T wv = w.at(K - 1 - di, K - 1 - dj, ci, co);
                        for (int i = 0; i < H; ++i) {
                            const T* gr = gp + static_cast<std::size_t>(i + di) * PW + dj;
                            T* xrow = gx + static_cast<std::size_t>(i) * W;
                            for (int j = 0; j < W; ++j)
                                xrow[j] += wv * gr[j];
                        }
                    }
                }
            }
        }
        // grad_w and grad_b.
        for (int co = 0; co < Cout; ++co) {
            const T* go = grad_out.plane(n, co);
            T bsum = T(0);
            for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i)
                bsum += go[i];
            g.b[co] += bsum;
            for (int ci = 0; ci < Cin; ++ci) {
                const T* xc = xp.plane(n, ci);
                for (int di = 0; di < K; ++di) {
                    for (int dj = 0; dj < K; ++dj) {
                        T acc = T(0);
                        for (int i = 0; i < H; ++i) {
                            const T* xr = xc + static_cast<std::size_t>(i + di) * PW + dj;
                            const T* gr = go + static_cast<std::size_t>(i) * W;
                            for (int j = 0; j < W; ++j)
                                acc += xr[j] * gr[j];
                        }
                        g.w.at(di, dj, ci, co) += acc;
                    }
                }
            }
        }
    }
    return g;
}

// --- relu ---

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out = x;
    for (T& v : out.data)
        v = std::max(T(0), v);
    return out;
}

// Gradient at exactly 0 is defined as 0.
template <class T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    if (!x.same_shape(grad_out))
        throw shape_error("relu_backward: shape mismatch");
    Tensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(x.data[i] > T(0)))
            g.data[i] = T(0);
    return g;
}

// --- 2x2 max pooling, stride 2 ---

template <class T>
struct PoolResult {
    Tensor<T> out;
    std::vector<std::uint8_t> argmax; // 0..3 = di*2+dj within each block, scan order
};

template <class T>
PoolResult<T> maxpool2(const Tensor<T>& x) {
    const int N = x.dim[0], C = x.dim[1], H = x.dim[2], W = x.dim[3];
    if (H % 2 != 0 || W % 2 != 0)
        throw shape_error("maxpool2: spatial dims must be even, got " + x.shape_str());
    PoolResult<T> res{Tensor<T>(N, C, H / 2, W / 2), {}};
    res.argmax.resize(res.out.size());
    std::size_t oi = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* p = x.plane(n, c);
            for (int i = 0; i < H; i += 2)
                for (int j = 0; j < W; j += 2) {
                    // first-in-scan-order wins ties
                    T best = p[static_cast<std::size_t>(i) * W + j];
                    std::uint8_t bi = 0;
                    for (std::uint8_t k = 1; k < 4; ++k) {
                        const T v = p[static_cast<std::size_t>(i + k / 2) * W + j + k % 2];
                        if (v > best) {
                            best = v;
                            bi = k;
                        }
                    }
                    res.out.data[oi] = best;
                    res.argmax[oi] = bi;
                    ++oi;
                }
        }
    return res;
}

template <class T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& argmax,
                            const std::array<int, 4>& in_dim) {
    const int N = in_dim[0], C = in_dim[1], H = in_dim[2], W = in_dim[3];
    if (grad_out.dim != std::array<int, 4>{N, C, H / 2, W / 2} ||
        argmax.size() != grad_out.size())
        throw shape_error("maxpool2_backward: shape mismatch");
    Tensor<T> g(N, C, H, W);
    std::size_t oi = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            T* p = g.plane(n, c);
            for (int i = 0; i < H; i += 2)
                for (int j = 0; j < W; j += 2) {
                    const std::uint8_t k = argmax[oi];
                    p[static_cast<std::size_t>(i + k / 2) * W + j + k % 2] = grad_out.data[oi];
                    ++oi;
                }
        }
    return g;
}

// --- transposed convolution, 2x2 kernel, stride 2 (non-overlapping) ---

// out[n,co,2i+di,2j+dj] = b[co] + sum_ci x[n,ci,i,j] * w[di,dj,ci,co]
template <class T>
Tensor<T> tconv2_forward(const Tensor<T>& x, const Tensor<T>& w, std::span<const T> b) {
    if (w.dim[0] != 2 || w.dim[1] != 2)
        throw shape_error("tconv2: kernel must be 2x2, got " + w.shape_str());
    if (w.dim[2] != x.dim[1])
        throw shape_error("tconv2: channel mismatch");
    if (static_cast<int>(b.size()) != w.dim[3])
        throw shape_error("tconv2: bias length mismatch");
    const int N = x.dim[0], Cin = x.dim[1], H = x.dim[2], W = x.dim[3];
    const int Cout = w.dim[3], OW = 2 * W;

    Tensor<T> out(N, Cout, 2 * H, OW);
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co) {
            T* o = out.plane(n, co);
            std::fill(o, o + static_cast<std::size_t>(2 * H) * OW, b[co]);
            for (int ci = 0; ci < Cin; ++ci) {
                const T* xc = x.plane(n, ci);
                const T w00 = w.at(0, 0, ci, co), w01 = w.at(0, 1, ci, co);
                const T w10 = w.at(1, 0, ci, co), w11 = w.at(1, 1, ci, co);
                for (int i = 0; i < H; ++i) {
                    const T* xr = xc + static_cast<std::size_t>(i) * W;
                    T* o0 = o + static_cast<std::size_t>(2 * i) * OW;
                    T* o1 = o0 + OW;
                    for (int j = 0; j < W; ++j) {
                        const T v = xr[j];
                        o0[2 * j] += v * w00;
                        o0[2 * j + 1] += v * w01;
                        o1[2 * j] += v * w10;
                        o1[2 * j + 1] += v * w11;
                    }
                }
            }
        }
    debug_check_finite(out, "tconv2_forward");
    return out;
}

template <class T>
ConvGrads<T> tconv2_backward(const Tensor<T>& x, const Tensor<T>& w,
                             const Tensor<T>& grad_out) {
    const int N = x.dim[0], Cin = x.dim[1], H = x.dim[2], W = x.dim[3];
    const int Cout = w.dim[3], OW = 2 * W;
    if (grad_out.dim != std::array<int, 4>{N, Cout, 2 * H, OW})
        throw shape_error("tconv2_backward: grad_out shape " + grad_out.shape_str());

    ConvGrads<T> g{Tensor<T>(N, Cin, H, W), Tensor<T>(2, 2, Cin, Cout),
                   std::vector<T>(static_cast<std::size_t>(Cout), T(0))};
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co) {
            const T* go = grad_out.plane(n, co);
            T bsum = T(0);
            for (std::size_t i = 0; i < static_cast<std::size_t>(2 * H) * OW; ++i)
                bsum += go[i];
            g.b[co] += bsum;
            for (int ci = 0; ci < Cin; ++ci) {
                const T* xc = x.plane(n, ci);
                T* gx = g.x.plane(n, ci);
                const T w00 = w.at(0, 0, ci, co), w01 = w.at(0, 1, ci, co);
                const T w10 = w.at(1, 0, ci, co), w11 = w.at(1, 1, ci, co);
                T a00 = T(0), a01 = T(0), a10 = T(0), a11 = T(0);
                for (int i = 0; i < H; ++i) {
                    const T* g0 = go + static_cast<std::size_t>(2 * i) * OW;
                    const T* g1 = g0 + OW;
                    const T* xr = xc + static_cast<std::size_t>(i) * W;
                    T* gxr = gx + static_cast<std::size_t>(i) * W;
                    for (int j = 0; j < W; ++j) {
                        const T v00 = g0[2 * j], v01 = g0[2 * j + 1];
                        const T v10 = g1[2 * j], v11 = g1[2 * j + 1];
                        gxr[j] += w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11;
                        const T xv = xr[j];
                        a00 += xv * v00;
                        a01 += xv * v01;
                        a10 += xv * v10;
                        a11 += xv * v11;
                    }
                }
                g.w.at(0, 0, ci, co) += a00;
                g.w.at(0, 1, ci, co) += a01;
                g.w.at(1, 0, ci, co) += a10;
                g.w.at(1, 1, ci, co) += a11;
            }
        }
    return g;
}

// --- channel concatenation (encoder features first) ---

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dim[0] != b.dim[0] || a.dim[2] != b.dim[2] || a.dim[3] != b.dim[3])
        throw shape_error("concat_channels: spatial/batch mismatch " + a.shape_str() + " vs " +
                          b.shape_str());
    Tensor<T> out(a.dim[0], a.dim[1] + b.dim[1], a.dim[2], a.dim[3]);
    const std::size_t plane = static_cast<std::size_t>(a.dim[2]) * a.dim[3];
    for (int n = 0; n < a.dim[0]; ++n) {
        for (int c = 0; c < a.dim[1]; ++c)
            std::copy(a.plane(n, c), a.plane(n, c) + plane, out.plane(n, c));
        for (int c = 0; c < b.dim[1]; ++c)
            std::copy(b.plane(n, c), b.plane(n, c) + plane, out.plane(n, a.dim[1] + c));
    }
    return out;
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int ca) {
    if (ca < 0 || ca > g.dim[1])
        throw shape_error("split_channels: bad split point");
    const int cb = g.dim[1] - ca;
    Tensor<T> a(g.dim[0], ca, g.dim[2], g.dim[3]);
    Tensor<T> b(g.dim[0], cb, g.dim[2], g.dim[3]);
    const std::size_t plane = static_cast<std::size_t>(g.dim[2]) * g.dim[3];
    for (int n = 0; n < g.dim[0]; ++n) {
        for (int c = 0; c < ca; ++c)
            std::copy(g.plane(n, c), g.plane(n, c) + plane, a.plane(n, c));
        for (int c = 0; c < cb; ++c)
            std::copy(g.plane(n, ca + c), g.plane(n, ca + c) + plane, b.plane(n, c));
    }
    return {std::move(a), std::move(b)};
}

// --- inverted dropout ---

template <class T>
struct DropoutResult {
    Tensor<T> out;
    std::vector<std::uint8_t> mask; // empty = identity (p == 0 or inference)
};

template <class T>
DropoutResult<T> dropout(const Tensor<T>& x, double p, Pcg32& rng, bool training) {
    if (!(p >= 0.0 && p < 1.0))
        throw argument_error("dropout: p must be in [0,1)");
    if (!training || p == 0.0)
        return {x, {}};
    DropoutResult<T> res{x, std::vector<std::uint8_t>(x.size())};
    const T scale = T(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool keep = rng.uniform01() >= p;
        res.mask[i] = keep ? 1 : 0;
        res.out.data[i] = keep ? x.data[i] * scale : T(0);
    }
    return res;
}

template <class T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& mask,
                           double p) {
    if (mask.empty())
        return grad_out;
    Tensor<T> g = grad_out;
    const T scale = T(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < g.size(); ++i)
        g.data[i] = mask[i] ? g.data[i] * scale : T(0);
    return g;
}

// --- softmax cross-entropy over class channel ---

template <class T>
struct CeResult {
    double loss = 0.0;
    Tensor<T> grad_logits;
    std::size_t correct = 0; // argmax == label count, for pixel accuracy
};

// loss = mean over all N*H*W pixels; grad = (softmax - onehot) / (N*H*W).
template <class T>
CeResult<T> softmax_ce(const Tensor<T>& logits, std::span<const std::uint8_t> labels) {
    const int N = logits.dim[0], C = logits.dim[1], H = logits.dim[2], W = logits.dim[3];
    const std::size_t pixels = static_cast<std::size_t>(N) * H * W;
    if (labels.size() != pixels)
        throw shape_error("softmax_ce: label count does not match logits");

    CeResult<T> res;
    res.grad_logits = Tensor<T>(N, C, H, W);
    const double inv = 1.0 / static_cast<double>(pixels);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    double loss = 0.0;
    std::size_t li = 0;
    std::vector<double> z(static_cast<std::size_t>(C));
    for (int n = 0; n < N; ++n) {
        const T* base = logits.plane(n, 0);
        T* gbase = res.grad_logits.plane(n, 0);
        for (std::size_t px = 0; px < plane; ++px, ++li) {
            const int label = labels[li];
            if (label < 0 || label >= C)
                throw argument_error("softmax_ce: label " + std::to_string(label) +
                                     " out of range");
            double zmax = -1e300;
            int arg = 0;
            for (int c = 0; c < C; ++c) {
                z[c] = static_cast<double>(base[static_cast<std::size_t>(c) * plane + px]);
                if (z[c] > zmax) {
                    zmax = z[c];
                    arg = c;
                }
            }
            double sum = 0.0;
            for (int c = 0; c < C; ++c) {
                z[c] = std::exp(z[c] - zmax);
                sum += z[c];
            }
            loss += std::log(sum) - (static_cast<double>(
                                         base[static_cast<std::size_t>(label) * plane + px]) -
                                     zmax);
            if (arg == label)
                ++res.correct;
            for (int c = 0; c < C; ++c) {
                const double soft = z[c] / sum;
                gbase[static_cast<std::size_t>(c) * plane + px] =
                    static_cast<T>((soft - (c == label ? 1.0 : 0.0)) * inv);
            }
        }
    }
    res.loss = loss * inv;
    return res;
}

// Per-pixel class probabilities (inference utility).
template <class T>
Tensor<T> softmax_probs(const Tensor<T>& logits) {
    const int N = logits.dim[0], C = logits.dim[1];
    const std::size_t plane = static_cast<std::size_t>(logits.dim[2]) * logits.dim[3];
    Tensor<T> probs(logits.dim[0], logits.dim[1], logits.dim[2], logits.dim[3]);
    for (int n = 0; n < N; ++n) {
        const T* base = logits.plane(n, 0);
        T* pbase = probs.plane(n, 0);
        for (std::size_t px = 0; px < plane; ++px) {
            double zmax = -1e300;
            for (int c = 0; c < C; ++c)
                zmax = std::max(zmax,
                                static_cast<double>(base[static_cast<std::size_t>(c) * plane + px]));
            double sum = 0.0;
            for (int c = 0; c < C; ++c)
                sum += std::exp(
                    static_cast<double>(base[static_cast<std::size_t>(c) * plane + px]) - zmax);
            for (int c = 0; c < C; ++c)
                pbase[static_cast<std::size_t>(c) * plane + px] = static_cast<T>(
                    std::exp(static_cast<double>(base[static_cast<std::size_t>(c) * plane + px]) -
                             zmax) /
                    sum);
        }
    }
    return probs;
}

// Per-pixel argmax class (first maximum wins ties).
template <class T>
std::vector<std::uint8_t> argmax_labels(const Tensor<T>& logits) {
    const int N = logits.dim[0], C = logits.dim[1];
    const std::size_t plane = static_cast<std::size_t>(logits.dim[2]) * logits.dim[3];
    std::vector<std::uint8_t> out(static_cast<std::size_t>(N) * plane);
    std::size_t oi = 0;
    for (int n = 0; n < N; ++n) {
        const T* base = logits.plane(n, 0);
        for (std::size_t px = 0; px < plane; ++px, ++oi) {
            int arg = 0;
            T best = base[px];
            for (int c = 1; c < C; ++c) {
                const T v = base[static_cast<std::size_t>(c) * plane + px];
                if (v > best) {
                    best = v;
                    arg = c;
                }
            }
            out[oi] = static_cast<std::uint8_t>(arg);
        }
    }
    return out;
}

} // namespace terratwin::nnet
