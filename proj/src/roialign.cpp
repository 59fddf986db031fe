#include "regionlens/roialign.hpp"

#include <algorithm>
#include <cmath>

namespace regionlens {

Box Box::make(double x1, double y1, double x2, double y2, std::optional<double> score, std::optional<int> label) {
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    Box b{clamp01(x1), clamp01(y1), clamp01(x2), clamp01(y2), score, label};
    if (!(b.x1 <= b.x2 && b.y1 <= b.y2)) throw ShapeError("Box: corners inverted");
    return b;
}

bool Box::valid() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    return in01(x1) && in01(y1) && in01(x2) && in01(y2) && x1 <= x2 && y1 <= y2;
}

void to_json(nlohmann::json& j, const Box& box) {
    j = nlohmann::json::array({box.x1, box.y1, box.x2, box.y2});
    j.push_back(box.score ? nlohmann::json(*box.score) : nlohmann::json(nullptr));
    j.push_back(box.label ? nlohmann::json(*box.label) : nlohmann::json(nullptr));
}

void from_json(const nlohmann::json& j, Box& box) {
    if (!j.is_array() || j.size() < 4 || j.size() > 6) throw ShapeError("Box: expected [x1,y1,x2,y2,score,label]");
    std::optional<double> score;
    std::optional<int> label;
    if (j.size() > 4 && !j[4].is_null()) score = j[4].get<double>();
    if (j.size() > 5 && !j[5].is_null()) label = j[5].get<int>();
    box = Box::make(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), score, label);
}

void RoiConfig::validate() const {
    if (pool_size < 1) throw ShapeError("RoiConfig: pool_size must be >= 1");
    if (sampling_ratio < 1) throw ShapeError("RoiConfig: sampling_ratio must be >= 1");
}

namespace {

struct Sample {
    int lo;
    int hi;
    double frac;
};

// One sample coordinate along an axis of length `extent` pixels.
Sample clamp_sample(double pos, int extent) {
    pos = std::clamp(pos, 0.0, static_cast<double>(extent - 1));
    int lo = static_cast<int>(std::floor(pos));
    int hi = std::min(lo + 1, extent - 1);
    return {lo, hi, pos - lo};
}

// Sample positions along one axis, grouped by bin: P * s entries.
std::vector<Sample> axis_samples(double lo_norm, double hi_norm, int extent, const RoiConfig& cfg) {
    const double start = lo_norm * extent - 0.5;
    const double bin = (hi_norm - lo_norm) * extent / cfg.pool_size;
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(cfg.pool_size) * cfg.sampling_ratio);
    for (int p = 0; p < cfg.pool_size; ++p) {
        for (int s = 0; s < cfg.sampling_ratio; ++s) {
            out.push_back(clamp_sample(start + p * bin + (s + 0.5) * bin / cfg.sampling_ratio, extent));
        }
    }
    return out;
}

// Per-pixel weight of the mean over all samples along one axis, with the
// half-open index range [lo, hi) outside of which every weight is zero.
struct AxisWeights {
    std::vector<double> w;
    int lo = 0;
    int hi = 0;
};

AxisWeights axis_weights(const std::vector<Sample>& samples, int extent) {
    AxisWeights a{std::vector<double>(static_cast<std::size_t>(extent), 0.0), extent, 0};
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (const Sample& s : samples) {
        a.w[s.lo] += (1.0 - s.frac) * inv;
        a.w[s.hi] += s.frac * inv;
        a.lo = std::min(a.lo, s.lo);
        a.hi = std::max(a.hi, s.hi + 1);
    }
    return a;
}

void check_inputs(const FeatureMap& map, const Box& box, const RoiConfig& cfg) {
    cfg.validate();
    if (map.empty()) throw ShapeError("roi_align: degenerate map");
    if (!box.valid()) throw ShapeError("roi_align: invalid box");
}

}  // namespace

FeatureMap roi_align(const FeatureMap& map, const Box& box, const RoiConfig& cfg) {
    check_inputs(map, box, cfg);
    const int P = cfg.pool_size;
    const int S = cfg.sampling_ratio;
    const auto ys = axis_samples(box.y1, box.y2, map.height(), cfg);
    const auto xs = axis_samples(box.x1, box.x2, map.width(), cfg);
    FeatureMap out(map.channels(), P, P);
    const double inv = 1.0 / (S * S);
    for (int c = 0; c < map.channels(); ++c) {
        for (int py = 0; py < P; ++py) {
            for (int px = 0; px < P; ++px) {
                double acc = 0.0;
                for (int sy = 0; sy < S; ++sy) {
                    const Sample& a = ys[py * S + sy];
                    for (int sx = 0; sx < S; ++sx) {
                        const Sample& b = xs[px * S + sx];
                        double top = map.at(c, a.lo, b.lo) * (1 - b.frac) + map.at(c, a.lo, b.hi) * b.frac;
                        double bot = map.at(c, a.hi, b.lo) * (1 - b.frac) + map.at(c, a.hi, b.hi) * b.frac;
                        acc += top * (1 - a.frac) + bot * a.frac;
                    }
                }
                out.at(c, py, px) = acc * inv;
            }
        }
    }
    return out;
}

Matrix roi_align_pooled(const FeatureMap& map, std::span<const Box> boxes, const RoiConfig& cfg) {
    if (boxes.empty()) throw ShapeError("roi_align_pooled: empty box list");
    Matrix rows(boxes.size(), static_cast<std::size_t>(map.channels()));
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        check_inputs(map, boxes[i], cfg);
        // The mean over a Cartesian sample grid factorizes into per-axis weights.
        const auto wy = axis_weights(axis_samples(boxes[i].y1, boxes[i].y2, map.height(), cfg), map.height());
        const auto wx = axis_weights(axis_samples(boxes[i].x1, boxes[i].x2, map.width(), cfg), map.width());
        for (int c = 0; c < map.channels(); ++c) {
            double acc = 0.0;
            for (int y = wy.lo; y < wy.hi; ++y) {
                double row = 0.0;
                for (int x = wx.lo; x < wx.hi; ++x) row += wx.w[x] * map.at(c, y, x);
                acc += wy.w[y] * row;
            }
            rows(i, c) = acc;
        }
    }
    return rows;
}

FeatureMap roi_align_pooled_backward(int channels, int height, int width, std::span<const Box> boxes,
                                     const Matrix& grad_rows, const RoiConfig& cfg) {
    cfg.validate();
    if (grad_rows.rows != boxes.size() || grad_rows.cols != static_cast<std::size_t>(channels)) {
        throw ShapeError("roi_align_pooled_backward: gradient shape mismatch");
    }
    FeatureMap grad(channels, height, width);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (!boxes[i].valid()) throw ShapeError("roi_align_pooled_backward: invalid box");
        const auto wy = axis_weights(axis_samples(boxes[i].y1, boxes[i].y2, height, cfg), height);
        const auto wx = axis_weights(axis_samples(boxes[i].x1, boxes[i].x2, width, cfg), width);
        for (int c = 0; c < channels; ++c) {
            const double g = grad_rows(i, c);
            if (g == 0.0) continue;
            for (int y = wy.lo; y < wy.hi; ++y) {
                const double gy = g * wy.w[y];
                for (int x = wx.lo; x < wx.hi; ++x) grad.at(c, y, x) += gy * wx.w[x];
            }
        }
    }
    return grad;
}

}  // namespace regionlens
