#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "regionlens/gridops.hpp"

namespace regionlens {

inline constexpr int kPyramidLevels = 4;

struct PyramidConfig {
    int in_channels = 512;
    int fp_channels = 512;

    int primary_dim() const { return kPyramidLevels * fp_channels; }
    void validate() const;
};

/// SimpleFP branches, output scales {1/2, 1, 2, 4} relative to the input.
/// down: 3x3 conv stride 2 pad 1; same: 1x1 conv; up2: 2x2 deconv stride 2;
/// up4a/up4b: two chained 2x2 deconvs stride 2.
struct SimpleFpParams {
    Kernel down;
    Kernel same;
    Kernel up2;
    Kernel up4a;
    Kernel up4b;

    static SimpleFpParams init(const PyramidConfig& cfg, std::uint64_t seed);
    static SimpleFpParams zeros(const PyramidConfig& cfg);

    bool operator==(const SimpleFpParams&) const = default;
};

void to_json(nlohmann::json& j, const SimpleFpParams& p);
void from_json(const nlohmann::json& j, SimpleFpParams& p);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in = in * k_h * k_w.
Kernel init_kernel(int out_c, int in_c, int kh, int kw, std::uint64_t seed);

std::array<FeatureMap, kPyramidLevels> simple_fp(const FeatureMap& last_map, const PyramidConfig& cfg,
                                                 const SimpleFpParams& params);

struct SimpleFpGrads {
    SimpleFpParams params;
    FeatureMap input;
};

SimpleFpGrads simple_fp_backward(const FeatureMap& last_map, const SimpleFpParams& params,
                                 const std::array<FeatureMap, kPyramidLevels>& grad_levels);

/// Resizes every map to the largest (by area) and concatenates in list order.
FeatureMap aux_fuse(std::span<const FeatureMap> maps);

/// Gradient of aux_fuse w.r.t. each input map.
std::vector<FeatureMap> aux_fuse_backward(std::span<const FeatureMap> maps, const FeatureMap& grad_fused);

}  // namespace regionlens
