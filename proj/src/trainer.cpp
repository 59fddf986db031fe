#include "regionlens/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace regionlens {

nlohmann::json TrainLog::to_json() const {
    nlohmann::json j;
    j["stage1_loss"] = stage1_loss;
    j["stage2_loss"] = stage2_loss;
    j["baseline_loss"] = baseline_loss;
    j["stages"] = nlohmann::json::array();
    for (const StageRecord& s : stages) {
        j["stages"].push_back({{"stage", s.stage},
                               {"steps", s.steps},
                               {"lr", s.lr},
                               {"checksums_before", s.checksums_before},
                               {"checksums_after", s.checksums_after}});
    }
    return j;
}

nlohmann::json TrainedBundle::to_json() const {
    nlohmann::json j{{"config", config}, {"params", params_to_json(params)}, {"checksums", group_checksums(params)}};
    if (has_baseline) j["baseline"] = baseline;
    return j;
}

TrainedBundle TrainedBundle::from_json(const nlohmann::json& j) {
    TrainedBundle b;
    b.config = j.at("config").get<ExperimentConfig>();
    b.config.validate();
    b.params = params_from_json(j.at("params"));
    if (j.contains("checksums") && j.at("checksums").get<std::map<std::string, std::string>>() != group_checksums(b.params)) {
        throw std::runtime_error("bundle checksum mismatch");
    }
    if (j.contains("baseline")) {
        b.baseline = j.at("baseline").get<BaselineModel>();
        b.has_baseline = true;
    }
    return b;
}

void TrainedBundle::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json().dump(1) << '\n';
}

TrainedBundle TrainedBundle::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing bundle: " + path);
    return from_json(nlohmann::json::parse(in));
}

std::map<std::string, std::string> group_checksums(const ModelParams& p) {
    std::map<std::string, std::string> out;
    for (ParamGroup g : kAllGroups) out[std::string(group_name(g))] = hex64(group_checksum(p, g));
    return out;
}

std::vector<TrainingSample> training_pool(const ExperimentConfig& cfg) {
    return make_training_set(cfg.train_scenes, cfg.rejection_fraction, derive_seed(cfg.seed, 100), cfg.world, cfg.opn);
}

namespace {

// Samples with no proposals carry no signal; skip them when cycling the pool.
const TrainingSample& pick(const std::vector<TrainingSample>& pool, long step) {
    const std::size_t n = pool.size();
    for (std::size_t k = 0; k < n; ++k) {
        const TrainingSample& s = pool[(static_cast<std::size_t>(step) + k) % n];
        if (!s.proposals.empty() && !s.queries.empty()) return s;
    }
    throw std::runtime_error("training pool has no usable samples");
}

void run_stage(const ExperimentConfig& cfg, ModelParams& params, const std::vector<TrainingSample>& pool,
               const GroupMask& mask, int stage, int steps, double lr, long step_offset, std::vector<double>& losses,
               TrainLog& log) {
    StageRecord rec;
    rec.stage = stage;
    rec.steps = steps;
    rec.lr = lr;
    rec.checksums_before = group_checksums(params);
    for (int t = 0; t < steps; ++t) {
        const TrainingSample& s = pick(pool, step_offset + t);
        const RawScene raw = render_scene(s.scene, cfg.world);
        ModelParams grad = params.zeros_like();
        const double loss = model_loss_and_grad(cfg.model, params, raw, s.proposals, s.queries, s.targets, mask, grad);
        if (!std::isfinite(loss)) {
            throw DivergenceError("non-finite loss at stage " + std::to_string(stage) + " step " + std::to_string(t) +
                                  " (scene " + std::to_string(s.scene.image_id) + ", lr " + std::to_string(lr) + ")");
        }
        losses.push_back(loss);
        sgd_step(params, grad, mask, lr);
    }
    rec.checksums_after = group_checksums(params);
    log.stages.push_back(std::move(rec));
}

}  // namespace

BaselineModel train_baseline(const ExperimentConfig& cfg, const EncoderParams& encoders,
                             const std::vector<TrainingSample>& pool, TrainLog* log) {
    BaselineModel m = BaselineModel::init(cfg.baseline, cfg.model.encoder.primary_channels, cfg.world.n_categories,
                                          derive_seed(cfg.seed, 30));
    const long steps = static_cast<long>(cfg.stage1_steps) + cfg.stage2_steps;
    if (cfg.baseline.slots == 0) {
        m.steps_trained = steps;
        return m;
    }
    // Features depend only on the frozen primary encoder, so compute them once.
    std::vector<std::vector<double>> features;
    features.reserve(pool.size());
    for (const TrainingSample& s : pool) {
        features.push_back(global_feature(toy_encode(s.scene, cfg.world, encoders).primary, cfg.baseline.grid));
    }
    m.fit_standardizer(features);
    for (auto& f : features) f = m.standardize(f);
    for (long t = 0; t < steps; ++t) {
        const std::size_t k = static_cast<std::size_t>(t) % pool.size();
        Connector grad = Connector::zeros(m.mlp.in_dim(), m.mlp.hidden_dim(), m.mlp.out_dim());
        const double loss = baseline_loss_and_grad(m, features[k], pool[k].scene, grad);
        if (!std::isfinite(loss)) throw DivergenceError("baseline: non-finite loss at step " + std::to_string(t));
        if (log != nullptr) log->baseline_loss.push_back(loss);
        for (std::size_t i = 0; i < m.mlp.w1.data.size(); ++i) m.mlp.w1.data[i] -= cfg.baseline_lr * grad.w1.data[i];
        for (std::size_t i = 0; i < m.mlp.b1.size(); ++i) m.mlp.b1[i] -= cfg.baseline_lr * grad.b1[i];
        for (std::size_t i = 0; i < m.mlp.w2.data.size(); ++i) m.mlp.w2.data[i] -= cfg.baseline_lr * grad.w2.data[i];
        for (std::size_t i = 0; i < m.mlp.b2.size(); ++i) m.mlp.b2[i] -= cfg.baseline_lr * grad.b2[i];
    }
    m.steps_trained = steps;
    return m;
}

TrainResult train(const ExperimentConfig& cfg, bool with_baseline) {
    cfg.validate();
    const FreezeSchedule schedule = FreezeSchedule::from_config(cfg);
    if (!cfg.unfreeze_primary) schedule.validate();

    TrainResult r;
    r.bundle.config = cfg;
    r.bundle.params = ModelParams::init(cfg.model, cfg.world, cfg.seed);
    const std::vector<TrainingSample> pool = training_pool(cfg);
    run_stage(cfg, r.bundle.params, pool, schedule.trainable[0], 1, cfg.stage1_steps, cfg.stage1_lr, 0,
              r.log.stage1_loss, r.log);
    run_stage(cfg, r.bundle.params, pool, schedule.trainable[1], 2, cfg.stage2_steps, cfg.stage2_lr, cfg.stage1_steps,
              r.log.stage2_loss, r.log);
    if (with_baseline) {
        r.bundle.baseline = train_baseline(cfg, r.bundle.params.encoders, pool, &r.log);
        r.bundle.has_baseline = true;
    }
    return r;
}

nlohmann::json GradCheckReport::to_json() const {
    nlohmann::json j{{"stage", stage}, {"max_rel_error", max_rel_error}, {"frozen_groups_zero", frozen_groups_zero}};
    j["groups"] = nlohmann::json::array();
    for (const GroupCheck& g : groups) {
        j["groups"].push_back({{"group", g.group},
                               {"trainable", g.trainable},
                               {"coords_checked", g.coords_checked},
                               {"max_rel_error", g.max_rel_error},
                               {"analytic_norm", g.analytic_norm}});
    }
    return j;
}

GradCheckReport grad_check(const ExperimentConfig& cfg, int stage, int coords_per_tensor, double h) {
    cfg.validate();
    if (stage != 1 && stage != 2) throw std::invalid_argument("grad_check: stage must be 1 or 2");
    if (cfg.model.d_llm > 64 || cfg.model.hidden_dim() > 64 || cfg.model.hybrid_dim() > 64 * 4) {
        throw std::invalid_argument("grad_check: dimensions too large for finite differences");
    }
    const GroupMask mask = FreezeSchedule::from_config(cfg).trainable[static_cast<std::size_t>(stage - 1)];
    ModelParams params = ModelParams::init(cfg.model, cfg.world, cfg.seed);
    // Move off the initial point so the vocabulary/protocol interaction and
    // the auxiliary branch all carry non-trivial gradients.
    std::mt19937_64 rng(derive_seed(cfg.seed, 40));
    std::normal_distribution<double> noise(0.0, 0.1);
    for (double& v : params.ground) v = noise(rng);
    params.score_bias[0] = noise(rng);

    const std::vector<TrainingSample> pool = make_training_set(4, 0.5, derive_seed(cfg.seed, 41), cfg.world, cfg.opn);
    const TrainingSample& s = pick(pool, 0);
    const RawScene raw = render_scene(s.scene, cfg.world);
    ModelParams grad = params.zeros_like();
    model_loss_and_grad(cfg.model, params, raw, s.proposals, s.queries, s.targets, mask, grad);

    GradCheckReport rep;
    rep.stage = stage;
    for (ParamGroup g : kAllGroups) {
        GroupCheck gc;
        gc.group = std::string(group_name(g));
        gc.trainable = in_mask(mask, g);
        auto analytic = group_tensors(grad, g);
        double norm2 = 0.0;
        for (const NamedTensor& t : analytic) {
            for (double v : t.data) norm2 += v * v;
        }
        gc.analytic_norm = std::sqrt(norm2);
        if (!gc.trainable) {
            if (norm2 != 0.0) rep.frozen_groups_zero = false;
            rep.groups.push_back(gc);
            continue;
        }
        auto values = group_tensors(params, g);
        double diff2 = 0.0, ref2 = 0.0;
        for (std::size_t ti = 0; ti < values.size(); ++ti) {
            const std::size_t n = values[ti].data.size();
            std::vector<std::size_t> coords(n);
            for (std::size_t k = 0; k < n; ++k) coords[k] = k;
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(std::min<std::size_t>(n, static_cast<std::size_t>(coords_per_tensor)));
            for (std::size_t k : coords) {
                double& p = values[ti].data[k];
                const double saved = p;
                p = saved + h;
                const double up = model_loss(cfg.model, params, raw, s.proposals, s.queries, s.targets);
                p = saved - h;
                const double down = model_loss(cfg.model, params, raw, s.proposals, s.queries, s.targets);
                p = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double a = analytic[ti].data[k];
                diff2 += (a - numeric) * (a - numeric);
                ref2 += std::max(a * a, numeric * numeric);
                ++gc.coords_checked;
            }
        }
        gc.max_rel_error = ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
        rep.max_rel_error = std::max(rep.max_rel_error, gc.max_rel_error);
        rep.groups.push_back(gc);
    }
    return rep;
}

}  // namespace regionlens
