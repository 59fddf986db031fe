#include "regionlens/gridops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace regionlens {

FeatureMap::FeatureMap(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
    if (channels <= 0 || height <= 0 || width <= 0) {
        throw ShapeError("FeatureMap: dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

FeatureMap::FeatureMap(int channels, int height, int width, std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (channels <= 0 || height <= 0 || width <= 0) {
        throw ShapeError("FeatureMap: dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
        throw ShapeError("FeatureMap: data length does not match channels*height*width");
    }
}

bool FeatureMap::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Kernel::Kernel(int out_c, int in_c, int kh, int kw)
    : out_channels(out_c), in_channels(in_c), k_h(kh), k_w(kw) {
    if (out_c <= 0 || in_c <= 0 || kh <= 0 || kw <= 0) {
        throw ShapeError("Kernel: dimensions must be positive");
    }
    weights.assign(static_cast<std::size_t>(out_c) * in_c * kh * kw, 0.0);
    bias.assign(static_cast<std::size_t>(out_c), 0.0);
}

Kernel Kernel::transposed() const {
    Kernel t(in_channels, out_channels, k_h, k_w);
    for (int o = 0; o < out_channels; ++o)
        for (int i = 0; i < in_channels; ++i)
            for (int ky = 0; ky < k_h; ++ky)
                for (int kx = 0; kx < k_w; ++kx) t.w(i, o, ky, kx) = w(o, i, ky, kx);
    return t;
}

void Kernel::validate() const {
    if (out_channels <= 0 || in_channels <= 0 || k_h <= 0 || k_w <= 0) {
        throw ShapeError("Kernel: dimensions must be positive");
    }
    if (weights.size() != static_cast<std::size_t>(out_channels) * in_channels * k_h * k_w) {
        throw ShapeError("Kernel: weights length mismatch");
    }
    if (bias.size() != static_cast<std::size_t>(out_channels)) {
        throw ShapeError("Kernel: bias length mismatch");
    }
}

namespace {

struct Tap {
    int lo;
    int hi;
    double frac;  // weight of hi
};

// Half-pixel-center source coordinate with edge clamping.
Tap resize_tap(int dst, int in, int out) {
    double src = (dst + 0.5) * (static_cast<double>(in) / out) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    int lo = static_cast<int>(std::floor(src));
    int hi = std::min(lo + 1, in - 1);
    return {lo, hi, src - lo};
}

}  // namespace

FeatureMap bilinear_resize(const FeatureMap& map, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: target size must be positive");
    if (map.empty()) throw ShapeError("bilinear_resize: empty map");
    FeatureMap out(map.channels(), out_h, out_w);
    std::vector<Tap> ty(out_h), tx(out_w);
    for (int y = 0; y < out_h; ++y) ty[y] = resize_tap(y, map.height(), out_h);
    for (int x = 0; x < out_w; ++x) tx[x] = resize_tap(x, map.width(), out_w);
    for (int c = 0; c < map.channels(); ++c) {
        for (int y = 0; y < out_h; ++y) {
            const Tap& a = ty[y];
            for (int x = 0; x < out_w; ++x) {
                const Tap& b = tx[x];
                double top = map.at(c, a.lo, b.lo) * (1 - b.frac) + map.at(c, a.lo, b.hi) * b.frac;
                double bot = map.at(c, a.hi, b.lo) * (1 - b.frac) + map.at(c, a.hi, b.hi) * b.frac;
                out.at(c, y, x) = top * (1 - a.frac) + bot * a.frac;
            }
        }
    }
    return out;
}

FeatureMap bilinear_resize_backward(const FeatureMap& grad_out, int in_h, int in_w) {
    if (in_h < 1 || in_w < 1) throw ShapeError("bilinear_resize_backward: input size must be positive");
    FeatureMap grad_in(grad_out.channels(), in_h, in_w);
    const int out_h = grad_out.height();
    const int out_w = grad_out.width();
    std::vector<Tap> ty(out_h), tx(out_w);
    for (int y = 0; y < out_h; ++y) ty[y] = resize_tap(y, in_h, out_h);
    for (int x = 0; x < out_w; ++x) tx[x] = resize_tap(x, in_w, out_w);
    for (int c = 0; c < grad_out.channels(); ++c) {
        for (int y = 0; y < out_h; ++y) {
            const Tap& a = ty[y];
            for (int x = 0; x < out_w; ++x) {
                const Tap& b = tx[x];
                double g = grad_out.at(c, y, x);
                grad_in.at(c, a.lo, b.lo) += g * (1 - a.frac) * (1 - b.frac);
                grad_in.at(c, a.lo, b.hi) += g * (1 - a.frac) * b.frac;
                grad_in.at(c, a.hi, b.lo) += g * a.frac * (1 - b.frac);
                grad_in.at(c, a.hi, b.hi) += g * a.frac * b.frac;
            }
        }
    }
    return grad_in;
}

namespace {

int conv_out_size(int in, int k, int stride, int padding) {
    int span = in + 2 * padding - k;
    if (span < 0) return 0;
    return span / stride + 1;
}

void check_conv_args(const FeatureMap& map, const Kernel& kernel, int stride, const char* op) {
    kernel.validate();
    if (map.empty()) throw ShapeError(std::string(op) + ": empty map");
    if (stride < 1) throw ShapeError(std::string(op) + ": stride must be positive");
    if (kernel.in_channels != map.channels()) {
        throw ShapeError(std::string(op) + ": kernel in_channels " + std::to_string(kernel.in_channels) +
                         " != map channels " + std::to_string(map.channels()));
    }
}

}  // namespace

namespace {

// y[0..n) += a * x[0..n)
inline void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

inline double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += x[k] * y[k];
    return s;
}

// Rows (i, ky, kx), columns output pixels; out-of-range taps stay zero.
std::vector<double> im2col(const FeatureMap& map, int k_h, int k_w, int stride, int padding, int oh, int ow) {
    const std::size_t q = static_cast<std::size_t>(oh) * ow;
    std::vector<double> cols(static_cast<std::size_t>(map.channels()) * k_h * k_w * q, 0.0);
    double* dst = cols.data();
    for (int i = 0; i < map.channels(); ++i) {
        for (int ky = 0; ky < k_h; ++ky) {
            for (int kx = 0; kx < k_w; ++kx, dst += q) {
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * stride + ky - padding;
                    if (iy < 0 || iy >= map.height()) continue;
                    for (int x = 0; x < ow; ++x) {
                        const int ix = x * stride + kx - padding;
                        if (ix < 0 || ix >= map.width()) continue;
                        dst[static_cast<std::size_t>(y) * ow + x] = map.at(i, iy, ix);
                    }
                }
            }
        }
    }
    return cols;
}

void col2im_add(const std::vector<double>& cols, FeatureMap& map, int k_h, int k_w, int stride, int padding, int oh,
                int ow) {
    const std::size_t q = static_cast<std::size_t>(oh) * ow;
    const double* src = cols.data();
    for (int i = 0; i < map.channels(); ++i) {
        for (int ky = 0; ky < k_h; ++ky) {
            for (int kx = 0; kx < k_w; ++kx, src += q) {
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * stride + ky - padding;
                    if (iy < 0 || iy >= map.height()) continue;
                    for (int x = 0; x < ow; ++x) {
                        const int ix = x * stride + kx - padding;
                        if (ix < 0 || ix >= map.width()) continue;
                        map.at(i, iy, ix) += src[static_cast<std::size_t>(y) * ow + x];
                    }
                }
            }
        }
    }
}

// Weight of tap (o, ky, kx) on input channel i, with rows ordered (o, ky, kx).
inline double deconv_weight(const Kernel& k, std::size_t r, int i) {
    const int taps = k.k_h * k.k_w;
    const int o = static_cast<int>(r) / taps;
    const int t = static_cast<int>(r) % taps;
    return k.w(o, i, t / k.k_w, t % k.k_w);
}

}  // namespace

FeatureMap conv2d(const FeatureMap& map, const Kernel& kernel, int stride, int padding) {
    check_conv_args(map, kernel, stride, "conv2d");
    if (padding < 0) throw ShapeError("conv2d: padding must be non-negative");
    const int oh = conv_out_size(map.height(), kernel.k_h, stride, padding);
    const int ow = conv_out_size(map.width(), kernel.k_w, stride, padding);
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: degenerate output size");

    const std::size_t q = static_cast<std::size_t>(oh) * ow;
    const std::size_t depth = static_cast<std::size_t>(kernel.in_channels) * kernel.k_h * kernel.k_w;
    const std::vector<double> cols = im2col(map, kernel.k_h, kernel.k_w, stride, padding, oh, ow);
    FeatureMap out(kernel.out_channels, oh, ow);
    for (int o = 0; o < kernel.out_channels; ++o) {
        double* dst = out.channel(o).data();
        std::fill(dst, dst + q, kernel.bias[o]);
        const double* w = kernel.weights.data() + o * depth;
        for (std::size_t c = 0; c < depth; ++c) {
            if (w[c] != 0.0) axpy(w[c], cols.data() + c * q, dst, q);
        }
    }
    return out;
}

ConvGrads conv2d_backward(const FeatureMap& input, const Kernel& kernel, int stride, int padding,
                          const FeatureMap& grad_out) {
    check_conv_args(input, kernel, stride, "conv2d_backward");
    const int oh = conv_out_size(input.height(), kernel.k_h, stride, padding);
    const int ow = conv_out_size(input.width(), kernel.k_w, stride, padding);
    if (grad_out.channels() != kernel.out_channels || grad_out.height() != oh || grad_out.width() != ow) {
        throw ShapeError("conv2d_backward: grad_out shape mismatch");
    }
    ConvGrads g{FeatureMap(input.channels(), input.height(), input.width()),
                Kernel(kernel.out_channels, kernel.in_channels, kernel.k_h, kernel.k_w)};
    const std::size_t q = static_cast<std::size_t>(oh) * ow;
    const std::size_t depth = static_cast<std::size_t>(kernel.in_channels) * kernel.k_h * kernel.k_w;
    const std::vector<double> cols = im2col(input, kernel.k_h, kernel.k_w, stride, padding, oh, ow);
    std::vector<double> dcols(cols.size(), 0.0);
    for (int o = 0; o < kernel.out_channels; ++o) {
        const double* go = grad_out.channel(o).data();
        g.kernel.bias[o] = std::accumulate(go, go + q, 0.0);
        const double* w = kernel.weights.data() + o * depth;
        double* dw = g.kernel.weights.data() + o * depth;
        for (std::size_t c = 0; c < depth; ++c) {
            dw[c] = dot(go, cols.data() + c * q, q);
            if (w[c] != 0.0) axpy(w[c], go, dcols.data() + c * q, q);
        }
    }
    col2im_add(dcols, g.input, kernel.k_h, kernel.k_w, stride, padding, oh, ow);
    return g;
}

FeatureMap deconv2d(const FeatureMap& map, const Kernel& kernel, int stride) {
    check_conv_args(map, kernel, stride, "deconv2d");
    const int oh = (map.height() - 1) * stride + kernel.k_h;
    const int ow = (map.width() - 1) * stride + kernel.k_w;
    const std::size_t p = map.plane();
    const std::size_t rows = static_cast<std::size_t>(kernel.out_channels) * kernel.k_h * kernel.k_w;
    // taps[r] = sum_i w(r, i) * map[i]: one input-sized plane per (o, ky, kx)
    std::vector<double> taps(rows * p, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (int i = 0; i < kernel.in_channels; ++i) {
            const double wv = deconv_weight(kernel, r, i);
            if (wv != 0.0) axpy(wv, map.channel(i).data(), taps.data() + r * p, p);
        }
    }
    FeatureMap out(kernel.out_channels, oh, ow);
    const double* src = taps.data();
    for (int o = 0; o < kernel.out_channels; ++o) {
        std::span<double> dst = out.channel(o);
        std::fill(dst.begin(), dst.end(), kernel.bias[o]);
        for (int ky = 0; ky < kernel.k_h; ++ky) {
            for (int kx = 0; kx < kernel.k_w; ++kx, src += p) {
                for (int y = 0; y < map.height(); ++y) {
                    double* row = dst.data() + static_cast<std::size_t>(y * stride + ky) * ow + kx;
                    const double* in = src + static_cast<std::size_t>(y) * map.width();
                    for (int x = 0; x < map.width(); ++x) row[x * stride] += in[x];
                }
            }
        }
    }
    return out;
}

ConvGrads deconv2d_backward(const FeatureMap& input, const Kernel& kernel, int stride,
                            const FeatureMap& grad_out) {
    check_conv_args(input, kernel, stride, "deconv2d_backward");
    const int oh = (input.height() - 1) * stride + kernel.k_h;
    const int ow = (input.width() - 1) * stride + kernel.k_w;
    if (grad_out.channels() != kernel.out_channels || grad_out.height() != oh || grad_out.width() != ow) {
        throw ShapeError("deconv2d_backward: grad_out shape mismatch");
    }
    ConvGrads g{FeatureMap(input.channels(), input.height(), input.width()),
                Kernel(kernel.out_channels, kernel.in_channels, kernel.k_h, kernel.k_w)};
    const std::size_t p = input.plane();
    const std::size_t rows = static_cast<std::size_t>(kernel.out_channels) * kernel.k_h * kernel.k_w;
    // gathered[r] = grad_out samples that tap (o, ky, kx) wrote, laid out like the input
    std::vector<double> gathered(rows * p);
    double* dst = gathered.data();
    for (int o = 0; o < kernel.out_channels; ++o) {
        std::span<const double> go = grad_out.channel(o);
        g.kernel.bias[o] = std::accumulate(go.begin(), go.end(), 0.0);
        for (int ky = 0; ky < kernel.k_h; ++ky) {
            for (int kx = 0; kx < kernel.k_w; ++kx, dst += p) {
                for (int y = 0; y < input.height(); ++y) {
                    const double* row = go.data() + static_cast<std::size_t>(y * stride + ky) * ow + kx;
                    double* out = dst + static_cast<std::size_t>(y) * input.width();
                    for (int x = 0; x < input.width(); ++x) out[x] = row[x * stride];
                }
            }
        }
    }
    const int taps = kernel.k_h * kernel.k_w;
    for (std::size_t r = 0; r < rows; ++r) {
        const int o = static_cast<int>(r) / taps;
        const int t = static_cast<int>(r) % taps;
        const double* gr = gathered.data() + r * p;
        for (int i = 0; i < kernel.in_channels; ++i) {
            g.kernel.w(o, i, t / kernel.k_w, t % kernel.k_w) = dot(gr, input.channel(i).data(), p);
            const double wv = kernel.w(o, i, t / kernel.k_w, t % kernel.k_w);
            if (wv != 0.0) axpy(wv, gr, g.input.channel(i).data(), p);
        }
    }
    return g;
}

FeatureMap concat_channels(std::span<const FeatureMap> maps) {
    if (maps.empty()) throw ShapeError("concat_channels: empty list");
    const int h = maps.front().height();
    const int w = maps.front().width();
    int total = 0;
    for (const FeatureMap& m : maps) {
        if (m.empty()) throw ShapeError("concat_channels: empty map");
        if (m.height() != h || m.width() != w) throw ShapeError("concat_channels: spatial size mismatch");
        total += m.channels();
    }
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(total) * h * w);
    for (const FeatureMap& m : maps) data.insert(data.end(), m.data().begin(), m.data().end());
    return FeatureMap(total, h, w, std::move(data));
}

std::vector<FeatureMap> split_channels(const FeatureMap& grad, std::span<const int> channel_counts) {
    int total = std::accumulate(channel_counts.begin(), channel_counts.end(), 0);
    if (total != grad.channels()) throw ShapeError("split_channels: channel counts do not sum to map channels");
    std::vector<FeatureMap> parts;
    parts.reserve(channel_counts.size());
    auto it = grad.data().begin();
    for (int c : channel_counts) {
        auto n = static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * grad.plane());
        parts.emplace_back(c, grad.height(), grad.width(), std::vector<double>(it, it + n));
        it += n;
    }
    return parts;
}

double frobenius_dot(const FeatureMap& a, const FeatureMap& b) {
    if (!a.same_shape(b)) throw ShapeError("frobenius_dot: shape mismatch");
    return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

void to_json(nlohmann::json& j, const FeatureMap& map) {
    j = nlohmann::json{{"channels", map.channels()},
                       {"height", map.height()},
                       {"width", map.width()},
                       {"data", map.data()}};
}

void from_json(const nlohmann::json& j, FeatureMap& map) {
    map = FeatureMap(j.at("channels").get<int>(), j.at("height").get<int>(), j.at("width").get<int>(),
                     j.at("data").get<std::vector<double>>());
}

void to_json(nlohmann::json& j, const Kernel& kernel) {
    j = nlohmann::json{{"out_channels", kernel.out_channels},
                       {"in_channels", kernel.in_channels},
                       {"k_h", kernel.k_h},
                       {"k_w", kernel.k_w},
                       {"weights", kernel.weights},
                       {"bias", kernel.bias}};
}

void from_json(const nlohmann::json& j, Kernel& kernel) {
    kernel.out_channels = j.at("out_channels").get<int>();
    kernel.in_channels = j.at("in_channels").get<int>();
    kernel.k_h = j.at("k_h").get<int>();
    kernel.k_w = j.at("k_w").get<int>();
    kernel.weights = j.at("weights").get<std::vector<double>>();
    kernel.bias = j.at("bias").get<std::vector<double>>();
    kernel.validate();
}

}  // namespace regionlens
