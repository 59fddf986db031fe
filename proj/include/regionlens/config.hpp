#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "regionlens/baseline.hpp"
#include "regionlens/params.hpp"
#include "regionlens/simworld.hpp"

namespace regionlens {

struct ExperimentConfig {
    std::uint64_t seed = 7;
    WorldConfig world;
    ProposalSimConfig opn;
    ModelConfig model;
    BaselineConfig baseline;
    int stage1_steps = 2000;
    double stage1_lr = 1e-3;
    int stage2_steps = 2000;
    double stage2_lr = 1e-5;
    double baseline_lr = 1e-3;
    double tau = 0.5;
    double rejection_fraction = 0.2;
    int train_scenes = 2000;  // training steps cycle through this pool
    int eval_scenes = 100;
    bool unfreeze_primary = false;
    bool unfreeze_aux_stage2 = true;

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::string& path);

/// Trainable groups per stage. Everything outside a stage's mask is frozen.
struct FreezeSchedule {
    std::array<GroupMask, 2> trainable{};

    static FreezeSchedule from_config(const ExperimentConfig& cfg);
    bool trains(int stage, ParamGroup g) const { return in_mask(trainable.at(static_cast<std::size_t>(stage)), g); }
    /// The default schedule's invariants. Ablations that unfreeze the primary
    /// encoder skip this check.
    void validate() const;
};

}  // namespace regionlens
