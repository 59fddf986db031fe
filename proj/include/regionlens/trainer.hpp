#pragma once

#include <map>
#include <string>
#include <vector>

#include "regionlens/baseline.hpp"
#include "regionlens/config.hpp"
#include "regionlens/model.hpp"

namespace regionlens {

struct StageRecord {
    int stage = 0;  // 1 or 2
    int steps = 0;
    double lr = 0.0;
    std::map<std::string, std::string> checksums_before;  // group name -> hex FNV-1a
    std::map<std::string, std::string> checksums_after;
};

struct TrainLog {
    std::vector<double> stage1_loss;
    std::vector<double> stage2_loss;
    std::vector<StageRecord> stages;
    std::vector<double> baseline_loss;

    nlohmann::json to_json() const;
};

struct TrainedBundle {
    ExperimentConfig config;
    ModelParams params;
    BaselineModel baseline;
    bool has_baseline = false;

    nlohmann::json to_json() const;
    static TrainedBundle from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static TrainedBundle load(const std::string& path);
};

struct TrainResult {
    TrainedBundle bundle;
    TrainLog log;
};

/// Thrown when a step produces a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::map<std::string, std::string> group_checksums(const ModelParams& p);

/// The training pool both paradigms draw from, one scene per step.
std::vector<TrainingSample> training_pool(const ExperimentConfig& cfg);

/// Two-stage retrieval training under the freeze schedule. With
/// `with_baseline`, the coordinate-regression baseline is also trained on the
/// same pool with the same total step budget.
TrainResult train(const ExperimentConfig& cfg, bool with_baseline = true);

/// Baseline only; appends its per-step losses to `log` when given.
BaselineModel train_baseline(const ExperimentConfig& cfg, const EncoderParams& encoders,
                             const std::vector<TrainingSample>& pool, TrainLog* log = nullptr);

struct GroupCheck {
    std::string group;
    bool trainable = false;
    int coords_checked = 0;
    double max_rel_error = 0.0;   // norm-based over the sampled coordinates
    double analytic_norm = 0.0;   // whole-group analytic gradient norm
};

struct GradCheckReport {
    int stage = 0;
    std::vector<GroupCheck> groups;
    double max_rel_error = 0.0;  // over trainable groups
    bool frozen_groups_zero = true;

    nlohmann::json to_json() const;
};

/// Central finite differences (step h) against model_loss_and_grad on one
/// training sample, for every group trainable in `stage`.
GradCheckReport grad_check(const ExperimentConfig& cfg, int stage = 2, int coords_per_tensor = 12, double h = 1e-5);

}  // namespace regionlens
