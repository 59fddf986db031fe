#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "regionlens/hfre.hpp"
#include "regionlens/metrics.hpp"
#include "regionlens/simworld.hpp"

namespace regionlens {

/// Coordinate-generation baseline: an MLP reads a grid-pooled global feature of
/// the primary map and emits `slots` boxes, each with category logits plus a
/// trailing no-object logit.
/// How ground-truth objects are assigned to output slots. Raster fills slots in
/// reading order of object centers; Greedy matches on box and class cost.
enum class SlotMatching { Raster, Greedy };

struct BaselineConfig {
    int slots = 10;
    int grid = 8;
    int hidden = 64;
    double box_weight = 5.0;
    SlotMatching matching = SlotMatching::Raster;

    void validate() const;
};

void to_json(nlohmann::json& j, const BaselineConfig& c);
void from_json(const nlohmann::json& j, BaselineConfig& c);

struct BaselineModel {
    BaselineConfig cfg;
    int n_categories = 0;
    Connector mlp;  // absent (zero-sized) when slots == 0
    long steps_trained = 0;
    // Per-dimension standardization of the global feature, fitted on the training pool.
    std::vector<double> input_mean;
    std::vector<double> input_scale;

    static BaselineModel init(const BaselineConfig& cfg, int primary_channels, int n_categories, std::uint64_t seed);
    int slot_width() const { return 4 + n_categories + 1; }
    void fit_standardizer(const std::vector<std::vector<double>>& features);
    std::vector<double> standardize(std::span<const double> feature) const;
};

void to_json(nlohmann::json& j, const BaselineModel& m);
void from_json(const nlohmann::json& j, BaselineModel& m);

/// Global feature: roi_align_pooled over a grid x grid tiling of the map, flattened.
std::vector<double> global_feature(const FeatureMap& primary, int grid);

struct SlotPrediction {
    Box box;
    int category = 0;
    double confidence = 0.0;
};

/// `feature` is already standardized.
std::vector<SlotPrediction> baseline_predict(const BaselineModel& model, std::span<const double> feature);

/// Slot-to-object assignment, squared-error box regression on (cx, cy, w, h) plus
/// cross-entropy over categories and no-object. Gradients accumulate into `grad`.
double baseline_loss_and_grad(const BaselineModel& model, std::span<const double> feature, const Scene& scene,
                              Connector& grad);
double baseline_loss(const BaselineModel& model, std::span<const double> feature, const Scene& scene);

/// Evaluates a trained baseline on held-out scenes with coco_map.
EvalReport regression_baseline_eval(std::span<const Scene> scenes, const WorldConfig& world,
                                    const EncoderParams& encoders, const BaselineModel& model);

/// The detection records regression_baseline_eval scores, for reuse by callers.
std::vector<EvalDetection> baseline_detections(const Scene& scene, const WorldConfig& world,
                                               const EncoderParams& encoders, const BaselineModel& model);

}  // namespace regionlens
