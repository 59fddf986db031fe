#include "regionlens/config.hpp"

#include <fstream>
#include <stdexcept>

namespace regionlens {

void ExperimentConfig::validate() const {
    if (!(stage1_lr > 0.0) || !(stage2_lr > 0.0) || !(baseline_lr > 0.0)) {
        throw std::invalid_argument("ExperimentConfig: learning rates must be positive");
    }
    if (stage1_steps < 0 || stage2_steps < 0) throw std::invalid_argument("ExperimentConfig: steps must be >= 0");
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("ExperimentConfig: tau must lie in (0,1)");
    if (!(rejection_fraction >= 0.0 && rejection_fraction <= 1.0)) {
        throw std::invalid_argument("ExperimentConfig: rejection_fraction must lie in [0,1]");
    }
    if (train_scenes < 1 || eval_scenes < 1) throw std::invalid_argument("ExperimentConfig: scene counts must be >= 1");
    if (world.n_categories != model.n_categories) {
        throw std::invalid_argument("ExperimentConfig: world.n_categories and model.n_categories differ");
    }
    world.validate();
    opn.validate();
    model.validate();
    baseline.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{{"seed", c.seed},
                       {"world", c.world},
                       {"opn", c.opn},
                       {"model", c.model},
                       {"baseline", c.baseline},
                       {"stage1_steps", c.stage1_steps},
                       {"stage1_lr", c.stage1_lr},
                       {"stage2_steps", c.stage2_steps},
                       {"stage2_lr", c.stage2_lr},
                       {"baseline_lr", c.baseline_lr},
                       {"tau", c.tau},
                       {"rejection_fraction", c.rejection_fraction},
                       {"train_scenes", c.train_scenes},
                       {"eval_scenes", c.eval_scenes},
                       {"unfreeze_primary", c.unfreeze_primary},
                       {"unfreeze_aux_stage2", c.unfreeze_aux_stage2}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    static const char* known[] = {"seed",         "world",       "opn",
                                  "model",        "baseline",    "stage1_steps",
                                  "stage1_lr",    "stage2_steps", "stage2_lr",
                                  "baseline_lr",  "tau",         "rejection_fraction",
                                  "train_scenes", "eval_scenes", "unfreeze_primary",
                                  "unfreeze_aux_stage2"};
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    const ExperimentConfig d;
    c.seed = j.value("seed", d.seed);
    c.world = j.value("world", d.world);
    c.opn = j.value("opn", d.opn);
    c.model = j.value("model", d.model);
    c.baseline = j.value("baseline", d.baseline);
    c.stage1_steps = j.value("stage1_steps", d.stage1_steps);
    c.stage1_lr = j.value("stage1_lr", d.stage1_lr);
    c.stage2_steps = j.value("stage2_steps", d.stage2_steps);
    c.stage2_lr = j.value("stage2_lr", d.stage2_lr);
    c.baseline_lr = j.value("baseline_lr", d.baseline_lr);
    c.tau = j.value("tau", d.tau);
    c.rejection_fraction = j.value("rejection_fraction", d.rejection_fraction);
    c.train_scenes = j.value("train_scenes", d.train_scenes);
    c.eval_scenes = j.value("eval_scenes", d.eval_scenes);
    c.unfreeze_primary = j.value("unfreeze_primary", d.unfreeze_primary);
    c.unfreeze_aux_stage2 = j.value("unfreeze_aux_stage2", d.unfreeze_aux_stage2);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    ExperimentConfig c = nlohmann::json::parse(in).get<ExperimentConfig>();
    c.validate();
    return c;
}

FreezeSchedule FreezeSchedule::from_config(const ExperimentConfig& cfg) {
    FreezeSchedule s;
    auto set = [&](int stage, ParamGroup g) { s.trainable[static_cast<std::size_t>(stage)][static_cast<std::size_t>(g)] = true; };
    for (int stage = 0; stage < 2; ++stage) {
        set(stage, ParamGroup::Hfre);
        set(stage, ParamGroup::Connector);
        set(stage, ParamGroup::Protocol);
        if (cfg.unfreeze_primary) set(stage, ParamGroup::PrimaryEncoder);
    }
    set(1, ParamGroup::Llm);
    if (cfg.unfreeze_aux_stage2) set(1, ParamGroup::AuxEncoder);
    return s;
}

void FreezeSchedule::validate() const {
    for (int stage = 0; stage < 2; ++stage) {
        if (trains(stage, ParamGroup::PrimaryEncoder)) {
            throw std::invalid_argument("FreezeSchedule: primary encoder must stay frozen");
        }
    }
    if (trains(0, ParamGroup::AuxEncoder) || trains(0, ParamGroup::Llm)) {
        throw std::invalid_argument("FreezeSchedule: stage 1 may only train hfre, connector and protocol");
    }
}

}  // namespace regionlens
