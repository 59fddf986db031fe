#pragma once
// Brute-force reference implementations. Each one re-derives its formula with
// plain loops and never calls the library routine it is compared against.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "regionlens/gridops.hpp"
#include "regionlens/metrics.hpp"
#include "regionlens/roialign.hpp"

namespace oracle {

using regionlens::Box;
using regionlens::FeatureMap;
using regionlens::Kernel;

// Continuous bilinear surface through pixel centers, coordinates clamped to the map.
inline double sample(const FeatureMap& m, int c, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(m.height() - 1));
    x = std::clamp(x, 0.0, static_cast<double>(m.width() - 1));
    double acc = 0.0;
    for (int py = 0; py < m.height(); ++py) {
        for (int px = 0; px < m.width(); ++px) {
            const double wy = std::max(0.0, 1.0 - std::abs(y - py));
            const double wx = std::max(0.0, 1.0 - std::abs(x - px));
            acc += wy * wx * m.at(c, py, px);
        }
    }
    return acc;
}

inline FeatureMap resize(const FeatureMap& m, int oh, int ow) {
    FeatureMap out(m.channels(), oh, ow);
    for (int c = 0; c < m.channels(); ++c) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const double sy = (y + 0.5) * m.height() / oh - 0.5;
                const double sx = (x + 0.5) * m.width() / ow - 0.5;
                out.at(c, y, x) = sample(m, c, sy, sx);
            }
        }
    }
    return out;
}

inline FeatureMap conv(const FeatureMap& m, const Kernel& k, int stride, int pad) {
    const int oh = (m.height() + 2 * pad - k.k_h) / stride + 1;
    const int ow = (m.width() + 2 * pad - k.k_w) / stride + 1;
    FeatureMap out(k.out_channels, oh, ow);
    for (int o = 0; o < k.out_channels; ++o)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double acc = k.bias[o];
                for (int i = 0; i < k.in_channels; ++i)
                    for (int ky = 0; ky < k.k_h; ++ky)
                        for (int kx = 0; kx < k.k_w; ++kx) {
                            const int iy = y * stride - pad + ky, ix = x * stride - pad + kx;
                            if (iy < 0 || ix < 0 || iy >= m.height() || ix >= m.width()) continue;
                            acc += k.w(o, i, ky, kx) * m.at(i, iy, ix);
                        }
                out.at(o, y, x) = acc;
            }
    return out;
}

inline FeatureMap roi_align(const FeatureMap& m, const Box& b, int P, int S) {
    FeatureMap out(m.channels(), P, P);
    const double x0 = b.x1 * m.width() - 0.5, y0 = b.y1 * m.height() - 0.5;
    const double bw = (b.x2 - b.x1) * m.width() / P, bh = (b.y2 - b.y1) * m.height() / P;
    for (int c = 0; c < m.channels(); ++c)
        for (int py = 0; py < P; ++py)
            for (int px = 0; px < P; ++px) {
                double acc = 0.0;
                for (int sy = 0; sy < S; ++sy)
                    for (int sx = 0; sx < S; ++sx) {
                        const double y = y0 + py * bh + (sy + 0.5) * bh / S;
                        const double x = x0 + px * bw + (sx + 0.5) * bw / S;
                        acc += sample(m, c, y, x);
                    }
                out.at(c, py, px) = acc / (S * S);
            }
    return out;
}

inline std::vector<double> roi_pooled(const FeatureMap& m, const Box& b, int P, int S) {
    const FeatureMap bins = roi_align(m, b, P, S);
    std::vector<double> out(static_cast<std::size_t>(m.channels()), 0.0);
    for (int c = 0; c < m.channels(); ++c) {
        for (double v : bins.channel(c)) out[c] += v;
        out[c] /= P * P;
    }
    return out;
}

// Intersection-over-union by summing cells of a fine regular grid.
inline double iou_by_area(const Box& a, const Box& b, int n = 400) {
    long inter = 0, uni = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double cx = (x + 0.5) / n, cy = (y + 0.5) / n;
            const bool ia = cx >= a.x1 && cx < a.x2 && cy >= a.y1 && cy < a.y2;
            const bool ib = cx >= b.x1 && cx < b.x2 && cy >= b.y1 && cy < b.y2;
            inter += ia && ib;
            uni += ia || ib;
        }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

inline double box_iou(const Box& a, const Box& b) {
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

// Single-category AP: greedy matching then brute-force 101-point interpolation
// over the explicit precision/recall staircase.
inline double ap(std::vector<regionlens::EvalDetection> dets, const std::vector<regionlens::GroundTruth>& gts, double t) {
    if (gts.empty()) return 0.0;
    std::stable_sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    std::vector<bool> used(gts.size(), false);
    std::vector<double> prec, rec;
    int tp = 0;
    for (std::size_t k = 0; k < dets.size(); ++k) {
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g] || gts[g].image_id != dets[k].image_id) continue;
            const double v = box_iou(dets[k].box, gts[g].box);
            if (v >= t && v > best_iou) {
                best = static_cast<int>(g);
                best_iou = v;
            }
        }
        if (best >= 0) {
            used[best] = true;
            ++tp;
        }
        prec.push_back(static_cast<double>(tp) / (k + 1));
        rec.push_back(static_cast<double>(tp) / gts.size());
    }
    double sum = 0.0;
    for (int r = 0; r <= 100; ++r) {
        double best = 0.0;
        for (std::size_t k = 0; k < prec.size(); ++k) {
            if (rec[k] >= r / 100.0 - 1e-12) best = std::max(best, prec[k]);
        }
        sum += best;
    }
    return sum / 101.0;
}

// Macro mean over categories with ground truth of the mean AP over 0.50:0.05:0.95.
inline double coco_ap_mean(const std::vector<regionlens::EvalDetection>& dets,
                           const std::vector<regionlens::GroundTruth>& gts) {
    std::set<std::string> cats;
    for (const auto& g : gts) cats.insert(g.category);
    if (cats.empty()) return 0.0;
    double total = 0.0;
    for (const std::string& c : cats) {
        std::vector<regionlens::EvalDetection> d;
        std::vector<regionlens::GroundTruth> g;
        for (const auto& x : dets)
            if (x.category == c) d.push_back(x);
        for (const auto& x : gts)
            if (x.category == c) g.push_back(x);
        double s = 0.0;
        for (int k = 0; k < 10; ++k) s += ap(d, g, 0.5 + 0.05 * k);
        total += s / 10.0;
    }
    return total / cats.size();
}

inline FeatureMap random_map(int c, int h, int w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FeatureMap m(c, h, w);
    for (double& v : m.data()) v = u(rng);
    return m;
}

inline Kernel random_kernel(int o, int i, int kh, int kw, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Kernel k(o, i, kh, kw);
    for (double& v : k.weights) v = u(rng);
    for (double& v : k.bias) v = u(rng);
    return k;
}

inline Box random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    return Box::make(std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d));
}

}  // namespace oracle
