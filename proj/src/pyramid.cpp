#include "regionlens/pyramid.hpp"

#include <cmath>
#include <random>

namespace regionlens {

void PyramidConfig::validate() const {
    if (in_channels < 1 || fp_channels < 1) throw ShapeError("PyramidConfig: channel counts must be positive");
}

Kernel init_kernel(int out_c, int in_c, int kh, int kw, std::uint64_t seed) {
    Kernel k(out_c, in_c, kh, kw);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_c) * kh * kw);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : k.weights) w = dist(rng);
    for (double& b : k.bias) b = dist(rng);
    return k;
}

SimpleFpParams SimpleFpParams::init(const PyramidConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int in = cfg.in_channels;
    const int fp = cfg.fp_channels;
    return {init_kernel(fp, in, 3, 3, seed + 1), init_kernel(fp, in, 1, 1, seed + 2),
            init_kernel(fp, in, 2, 2, seed + 3), init_kernel(fp, in, 2, 2, seed + 4),
            init_kernel(fp, fp, 2, 2, seed + 5)};
}

SimpleFpParams SimpleFpParams::zeros(const PyramidConfig& cfg) {
    cfg.validate();
    const int in = cfg.in_channels;
    const int fp = cfg.fp_channels;
    return {Kernel(fp, in, 3, 3), Kernel(fp, in, 1, 1), Kernel(fp, in, 2, 2), Kernel(fp, in, 2, 2),
            Kernel(fp, fp, 2, 2)};
}

void to_json(nlohmann::json& j, const SimpleFpParams& p) {
    j = nlohmann::json{{"down", p.down}, {"same", p.same}, {"up2", p.up2}, {"up4a", p.up4a}, {"up4b", p.up4b}};
}

void from_json(const nlohmann::json& j, SimpleFpParams& p) {
    p.down = j.at("down").get<Kernel>();
    p.same = j.at("same").get<Kernel>();
    p.up2 = j.at("up2").get<Kernel>();
    p.up4a = j.at("up4a").get<Kernel>();
    p.up4b = j.at("up4b").get<Kernel>();
}

std::array<FeatureMap, kPyramidLevels> simple_fp(const FeatureMap& last_map, const PyramidConfig& cfg,
                                                 const SimpleFpParams& params) {
    cfg.validate();
    if (last_map.channels() != cfg.in_channels) throw ShapeError("simple_fp: input channels mismatch");
    if (last_map.height() < 4 || last_map.width() < 4) throw ShapeError("simple_fp: input smaller than 4x4");
    if (last_map.height() % 2 != 0 || last_map.width() % 2 != 0) {
        throw ShapeError("simple_fp: stride-2 branch needs even spatial size");
    }
    return {conv2d(last_map, params.down, 2, 1), conv2d(last_map, params.same, 1, 0),
            deconv2d(last_map, params.up2, 2), deconv2d(deconv2d(last_map, params.up4a, 2), params.up4b, 2)};
}

SimpleFpGrads simple_fp_backward(const FeatureMap& last_map, const SimpleFpParams& params,
                                 const std::array<FeatureMap, kPyramidLevels>& grad_levels) {
    ConvGrads down = conv2d_backward(last_map, params.down, 2, 1, grad_levels[0]);
    ConvGrads same = conv2d_backward(last_map, params.same, 1, 0, grad_levels[1]);
    ConvGrads up2 = deconv2d_backward(last_map, params.up2, 2, grad_levels[2]);
    const FeatureMap mid = deconv2d(last_map, params.up4a, 2);
    ConvGrads up4b = deconv2d_backward(mid, params.up4b, 2, grad_levels[3]);
    ConvGrads up4a = deconv2d_backward(last_map, params.up4a, 2, up4b.input);

    FeatureMap input = down.input;
    for (const FeatureMap* g : {&same.input, &up2.input, &up4a.input}) {
        for (std::size_t k = 0; k < input.size(); ++k) input.data()[k] += g->data()[k];
    }
    return {{std::move(down.kernel), std::move(same.kernel), std::move(up2.kernel), std::move(up4a.kernel),
             std::move(up4b.kernel)},
            std::move(input)};
}

namespace {

std::size_t largest_index(std::span<const FeatureMap> maps) {
    if (maps.size() != static_cast<std::size_t>(kPyramidLevels)) {
        throw ShapeError("aux_fuse: expected exactly 4 maps, got " + std::to_string(maps.size()));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < maps.size(); ++i) {
        if (maps[i].plane() > maps[best].plane()) best = i;
    }
    for (const FeatureMap& m : maps) {
        if (m.empty()) throw ShapeError("aux_fuse: empty map");
        if (m.plane() == maps[best].plane() &&
            (m.height() != maps[best].height() || m.width() != maps[best].width())) {
            throw ShapeError("aux_fuse: no unique largest spatial size");
        }
    }
    return best;
}

}  // namespace

FeatureMap aux_fuse(std::span<const FeatureMap> maps) {
    const FeatureMap& big = maps[largest_index(maps)];
    std::vector<FeatureMap> resized;
    resized.reserve(maps.size());
    for (const FeatureMap& m : maps) {
        if (m.height() == big.height() && m.width() == big.width()) {
            resized.push_back(m);
        } else {
            resized.push_back(bilinear_resize(m, big.height(), big.width()));
        }
    }
    return concat_channels(resized);
}

std::vector<FeatureMap> aux_fuse_backward(std::span<const FeatureMap> maps, const FeatureMap& grad_fused) {
    const FeatureMap& big = maps[largest_index(maps)];
    std::vector<int> counts;
    for (const FeatureMap& m : maps) counts.push_back(m.channels());
    if (grad_fused.height() != big.height() || grad_fused.width() != big.width()) {
        throw ShapeError("aux_fuse_backward: gradient spatial size mismatch");
    }
    std::vector<FeatureMap> parts = split_channels(grad_fused, counts);
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps[i].height() != big.height() || maps[i].width() != big.width()) {
            parts[i] = bilinear_resize_backward(parts[i], maps[i].height(), maps[i].width());
        }
    }
    return parts;
}

}  // namespace regionlens
