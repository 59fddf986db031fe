#pragma once

#include <optional>
#include <span>
#include <vector>

#include "regionlens/gridops.hpp"

namespace regionlens {

/// Axis-aligned rectangle in normalized image coordinates.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;
    std::optional<double> score;
    std::optional<int> label;

    /// Clamps every coordinate into [0,1]; throws if the corners are inverted.
    static Box make(double x1, double y1, double x2, double y2, std::optional<double> score = std::nullopt,
                    std::optional<int> label = std::nullopt);

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    bool valid() const;

    bool operator==(const Box&) const = default;
};

/// Serialized as [x1, y1, x2, y2, score, label] with null for absent fields.
void to_json(nlohmann::json& j, const Box& box);
void from_json(const nlohmann::json& j, Box& box);

struct RoiConfig {
    int pool_size = 7;
    int sampling_ratio = 2;

    void validate() const;
};

/// channels x P x P bins; each bin averages sampling_ratio^2 bilinear samples.
/// Box corners map to continuous pixel coordinates as x * W - 0.5, and
/// samples outside the map are clamped to the border.
FeatureMap roi_align(const FeatureMap& map, const Box& box, const RoiConfig& cfg = {});

/// Row i is the mean over all bins of roi_align(map, boxes[i]).
Matrix roi_align_pooled(const FeatureMap& map, std::span<const Box> boxes, const RoiConfig& cfg = {});

/// Gradient w.r.t. the map given dL/d(pooled rows). Shape of the result
/// matches (channels, height, width).
FeatureMap roi_align_pooled_backward(int channels, int height, int width, std::span<const Box> boxes,
                                     const Matrix& grad_rows, const RoiConfig& cfg = {});

}  // namespace regionlens
