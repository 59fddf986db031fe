#pragma once

#include <string>
#include <vector>

#include "regionlens/metrics.hpp"
#include "regionlens/retrieval.hpp"
#include "regionlens/trainer.hpp"

namespace regionlens {

/// Score floor used when ranking detections for AP. Decoding for counting and
/// rejection uses the configured tau instead.
inline constexpr double kRankingTau = 0.01;

struct EvalSet {
    std::vector<Scene> scenes;
    std::vector<std::vector<Box>> proposals;
};

/// Held-out scenes on a seed stream disjoint from the training pool.
EvalSet make_eval_set(const ExperimentConfig& cfg, int n_scenes, const ProposalSimConfig& opn,
                      std::uint64_t stream = 200);

/// Every category is queried against every proposal.
std::vector<Detection> retrieval_detections(const TrainedBundle& bundle, const Scene& scene,
                                            std::span<const Box> proposals, double tau);

EvalReport evaluate_retrieval(const TrainedBundle& bundle, const EvalSet& set);
EvalReport evaluate_baseline(const TrainedBundle& bundle, const EvalSet& set);

struct RecallPoint {
    double iou_threshold = 0.0;
    double detection_recall = 0.0;
    double proposal_recall = 0.0;
};

/// Category-aware detection recall vs category-agnostic proposal recall per COCO threshold.
std::vector<RecallPoint> recall_ceiling(const TrainedBundle& bundle, const EvalSet& set);

/// Fraction of (scene, absent-category query) pairs that emit at least one
/// detection at tau.
double rejection_fp_rate(const TrainedBundle& bundle, int n_scenes);

/// Exact-match accuracy of detect-then-count over the present categories of
/// noiseless scenes (proposals equal the ground-truth boxes).
double counting_accuracy_noiseless(const TrainedBundle& bundle, int n_scenes);

struct BenchmarkResult {
    EvalReport retrieval;
    EvalReport baseline;
    double rejection_fp_rate = 0.0;
    double counting_accuracy = 0.0;

    nlohmann::json to_json() const;
    std::string tsv() const;
};

BenchmarkResult run_benchmark(const TrainedBundle& bundle);

struct AblationVariant {
    std::string name;
    bool use_primary = true;
    bool use_auxiliary = true;
    bool use_simplefp = true;
};

/// Hybrid and primary-only with/without SimpleFP, plus auxiliary-only.
std::vector<AblationVariant> ablation_variants();

struct AblationRow {
    std::string name;
    std::vector<std::uint64_t> seeds;
    std::vector<double> ap;
    double mean_ap = 0.0;
};

std::vector<AblationRow> run_ablations(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds);
nlohmann::json ablations_to_json(const std::vector<AblationRow>& rows);
std::string ablations_tsv(const std::vector<AblationRow>& rows);

}  // namespace regionlens
