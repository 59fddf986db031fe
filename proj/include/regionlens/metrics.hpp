#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regionlens/roialign.hpp"

namespace regionlens {

struct EvalDetection {
    int image_id = 0;
    std::string category;
    Box box;
    double score = 0.0;
};

struct GroundTruth {
    int image_id = 0;
    std::string category;
    Box box;
};

double iou(const Box& a, const Box& b);

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

/// Greedy one-to-one matching within each image: detections in descending
/// score (stable), each takes the unmatched ground truth of highest IoU >= t.
/// Returns, per detection in sorted order, whether it matched.
struct MatchResult {
    std::vector<std::size_t> order;  // detection indices in ranking order
    std::vector<bool> is_tp;         // aligned with order
    std::size_t n_gt = 0;
    std::size_t n_matched = 0;
};

MatchResult greedy_match(std::span<const EvalDetection> dets, std::span<const GroundTruth> gts, double iou_threshold);

/// 101-point interpolated AP for a single category. Categories are not
/// filtered here; callers pass one category's records. Zero ground truth -> 0.
double average_precision(std::span<const EvalDetection> dets, std::span<const GroundTruth> gts, double iou_threshold);

struct CategoryReport {
    std::vector<double> ap_per_iou;
    double ap_mean = 0.0;
    double recall = 0.0;
    std::size_t n_gt = 0;
};

struct EvalReport {
    std::vector<std::pair<double, double>> ap_per_iou;  // (threshold, AP)
    double ap_mean = 0.0;
    double recall = 0.0;  // macro recall at IoU 0.5
    std::optional<double> counting_accuracy;
    std::map<std::string, CategoryReport> per_category;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    /// Tab-separated: ap_mean, ap50, ap75, recall, counting_accuracy.
    std::string tsv_line(const std::string& name) const;
    static std::string tsv_header();
};

/// Macro-averaged over categories that have ground truth. Detections naming a
/// category outside `categories` are rejected.
EvalReport coco_map(std::span<const EvalDetection> dets, std::span<const GroundTruth> gts,
                    std::span<const std::string> categories);

double counting_accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Fraction of ground-truth boxes covered by at least one candidate box at
/// IoU >= t. With `match_category`, a candidate only covers same-category GT.
double coverage_recall(std::span<const EvalDetection> candidates, std::span<const GroundTruth> gts, double iou_threshold,
                       bool match_category);

}  // namespace regionlens
