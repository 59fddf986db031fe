#include "regionlens/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "regionlens/retrieval.hpp"

namespace regionlens {

void BaselineConfig::validate() const {
    if (slots < 0) throw std::invalid_argument("BaselineConfig: slots must be >= 0");
    if (grid < 1 || hidden < 1) throw std::invalid_argument("BaselineConfig: grid and hidden must be positive");
    if (!(box_weight > 0.0)) throw std::invalid_argument("BaselineConfig: box_weight must be positive");
}

void to_json(nlohmann::json& j, const BaselineConfig& c) {
    j = nlohmann::json{{"slots", c.slots},
                       {"grid", c.grid},
                       {"hidden", c.hidden},
                       {"box_weight", c.box_weight},
                       {"matching", c.matching == SlotMatching::Raster ? "raster" : "greedy"}};
}

void from_json(const nlohmann::json& j, BaselineConfig& c) {
    const BaselineConfig d;
    c.slots = j.value("slots", d.slots);
    c.grid = j.value("grid", d.grid);
    c.hidden = j.value("hidden", d.hidden);
    c.box_weight = j.value("box_weight", d.box_weight);
    const std::string m = j.value("matching", std::string(d.matching == SlotMatching::Raster ? "raster" : "greedy"));
    if (m != "raster" && m != "greedy") throw std::invalid_argument("BaselineConfig: matching must be raster or greedy");
    c.matching = m == "raster" ? SlotMatching::Raster : SlotMatching::Greedy;
}

BaselineModel BaselineModel::init(const BaselineConfig& cfg, int primary_channels, int n_categories,
                                  std::uint64_t seed) {
    cfg.validate();
    BaselineModel m;
    m.cfg = cfg;
    m.n_categories = n_categories;
    if (cfg.slots > 0) {
        m.mlp = Connector::init(primary_channels * cfg.grid * cfg.grid, cfg.hidden, cfg.slots * m.slot_width(), seed);
    }
    return m;
}

void BaselineModel::fit_standardizer(const std::vector<std::vector<double>>& features) {
    if (features.empty()) throw std::invalid_argument("fit_standardizer: no features");
    const std::size_t d = features.front().size();
    input_mean.assign(d, 0.0);
    input_scale.assign(d, 0.0);
    for (const auto& f : features) {
        for (std::size_t k = 0; k < d; ++k) input_mean[k] += f[k];
    }
    for (double& m : input_mean) m /= static_cast<double>(features.size());
    for (const auto& f : features) {
        for (std::size_t k = 0; k < d; ++k) input_scale[k] += (f[k] - input_mean[k]) * (f[k] - input_mean[k]);
    }
    for (double& v : input_scale) v = 1.0 / std::sqrt(v / static_cast<double>(features.size()) + 1e-6);
}

std::vector<double> BaselineModel::standardize(std::span<const double> feature) const {
    std::vector<double> out(feature.begin(), feature.end());
    if (input_mean.empty()) return out;
    if (input_mean.size() != out.size()) throw ShapeError("standardize: feature width mismatch");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (out[k] - input_mean[k]) * input_scale[k];
    return out;
}

void to_json(nlohmann::json& j, const BaselineModel& m) {
    j = nlohmann::json{{"config", m.cfg},
                       {"n_categories", m.n_categories},
                       {"steps_trained", m.steps_trained},
                       {"input_mean", m.input_mean},
                       {"input_scale", m.input_scale}};
    if (m.cfg.slots > 0) j["mlp"] = m.mlp;
}

void from_json(const nlohmann::json& j, BaselineModel& m) {
    m.cfg = j.at("config").get<BaselineConfig>();
    m.n_categories = j.at("n_categories").get<int>();
    m.steps_trained = j.at("steps_trained").get<long>();
    m.input_mean = j.value("input_mean", std::vector<double>{});
    m.input_scale = j.value("input_scale", std::vector<double>{});
    if (m.cfg.slots > 0) m.mlp = j.at("mlp").get<Connector>();
}

std::vector<double> global_feature(const FeatureMap& primary, int grid) {
    std::vector<Box> cells;
    for (int y = 0; y < grid; ++y) {
        for (int x = 0; x < grid; ++x) {
            cells.push_back(Box::make(static_cast<double>(x) / grid, static_cast<double>(y) / grid,
                                      static_cast<double>(x + 1) / grid, static_cast<double>(y + 1) / grid));
        }
    }
    const Matrix pooled = roi_align_pooled(primary, cells);
    return pooled.data;
}

namespace {

constexpr double kRasterBands = 4.0;

double sigmoid(double x) { return logistic(x); }

struct SlotDecode {
    double geom[4];  // cx, cy, w, h
    std::vector<double> probs;
};

std::vector<SlotDecode> decode_slots(const BaselineModel& model, std::span<const double> feature, Matrix& raw) {
    Matrix in(1, feature.size());
    std::copy(feature.begin(), feature.end(), in.data.begin());
    raw = connector_forward(model.mlp, in);
    std::vector<SlotDecode> out(static_cast<std::size_t>(model.cfg.slots));
    const int w = model.slot_width();
    for (int k = 0; k < model.cfg.slots; ++k) {
        const double* r = raw.data.data() + static_cast<std::size_t>(k) * w;
        for (int a = 0; a < 4; ++a) out[k].geom[a] = sigmoid(r[a]);
        const int nc = model.n_categories + 1;
        double mx = r[4];
        for (int c = 1; c < nc; ++c) mx = std::max(mx, r[4 + c]);
        double z = 0.0;
        out[k].probs.resize(nc);
        for (int c = 0; c < nc; ++c) z += out[k].probs[c] = std::exp(r[4 + c] - mx);
        for (double& p : out[k].probs) p /= z;
    }
    return out;
}

Box geom_to_box(const double g[4]) {
    const double x1 = std::clamp(g[0] - 0.5 * g[2], 0.0, 1.0);
    const double x2 = std::clamp(g[0] + 0.5 * g[2], 0.0, 1.0);
    const double y1 = std::clamp(g[1] - 0.5 * g[3], 0.0, 1.0);
    const double y2 = std::clamp(g[1] + 0.5 * g[3], 0.0, 1.0);
    return Box::make(x1, y1, x2, y2);
}

std::array<double, 4> box_geom(const Box& b) {
    return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.width(), b.height()};
}

// Greedy matching on L1 geometry cost minus class probability. match[k] = object index or -1.
std::vector<int> match_slots(const std::vector<SlotDecode>& slots, const Scene& scene) {
    struct Pair {
        double cost;
        int slot;
        int obj;
    };
    std::vector<Pair> pairs;
    for (int k = 0; k < static_cast<int>(slots.size()); ++k) {
        for (int g = 0; g < static_cast<int>(scene.objects.size()); ++g) {
            const auto gt = box_geom(scene.objects[g].box);
            double cost = -slots[k].probs[scene.objects[g].category];
            for (int a = 0; a < 4; ++a) cost += std::abs(slots[k].geom[a] - gt[a]);
            pairs.push_back({cost, k, g});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.cost < b.cost; });
    std::vector<int> match(slots.size(), -1);
    std::vector<bool> used(scene.objects.size(), false);
    for (const Pair& p : pairs) {
        if (match[p.slot] >= 0 || used[p.obj]) continue;
        match[p.slot] = p.obj;
        used[p.obj] = true;
    }
    return match;
}

// Reading order: objects sorted by center row band, then center x, fill slots in turn.
std::vector<int> raster_slots(std::size_t n_slots, const Scene& scene) {
    std::vector<int> order(scene.objects.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    auto key = [&](int k) {
        const Box& b = scene.objects[k].box;
        return std::pair{std::floor(0.5 * (b.y1 + b.y2) * kRasterBands), 0.5 * (b.x1 + b.x2)};
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
    std::vector<int> match(n_slots, -1);
    for (std::size_t k = 0; k < n_slots && k < order.size(); ++k) match[k] = order[k];
    return match;
}

double slot_loss(const BaselineModel& model, std::span<const double> feature, const Scene& scene, Matrix* draw) {
    if (model.cfg.slots == 0) return 0.0;
    Matrix raw;
    const auto slots = decode_slots(model, feature, raw);
    const auto match = model.cfg.matching == SlotMatching::Raster ? raster_slots(slots.size(), scene)
                                                                   : match_slots(slots, scene);
    const int w = model.slot_width();
    const int no_object = model.n_categories;
    if (draw != nullptr) *draw = Matrix(1, raw.cols);
    double loss = 0.0;
    for (int k = 0; k < model.cfg.slots; ++k) {
        const int target = match[k] >= 0 ? scene.objects[match[k]].category : no_object;
        loss -= std::log(std::max(slots[k].probs[target], 1e-300));
        if (draw != nullptr) {
            for (int c = 0; c <= no_object; ++c) {
                draw->data[static_cast<std::size_t>(k) * w + 4 + c] = slots[k].probs[c] - (c == target ? 1.0 : 0.0);
            }
        }
        if (match[k] < 0) continue;
        const auto gt = box_geom(scene.objects[match[k]].box);
        for (int a = 0; a < 4; ++a) {
            const double diff = slots[k].geom[a] - gt[a];
            loss += model.cfg.box_weight * diff * diff;
            if (draw != nullptr) {
                const double s = slots[k].geom[a];
                draw->data[static_cast<std::size_t>(k) * w + a] = model.cfg.box_weight * 2.0 * diff * s * (1.0 - s);
            }
        }
    }
    return loss;
}

}  // namespace

std::vector<SlotPrediction> baseline_predict(const BaselineModel& model, std::span<const double> feature) {
    std::vector<SlotPrediction> out;
    if (model.cfg.slots == 0) return out;
    Matrix raw;
    for (const SlotDecode& s : decode_slots(model, feature, raw)) {
        const auto best = std::max_element(s.probs.begin(), s.probs.end() - 1);
        out.push_back({geom_to_box(s.geom), static_cast<int>(best - s.probs.begin()), *best});
    }
    return out;
}

double baseline_loss(const BaselineModel& model, std::span<const double> feature, const Scene& scene) {
    return slot_loss(model, feature, scene, nullptr);
}

double baseline_loss_and_grad(const BaselineModel& model, std::span<const double> feature, const Scene& scene,
                              Connector& grad) {
    if (model.cfg.slots == 0) return 0.0;
    Matrix draw;
    const double loss = slot_loss(model, feature, scene, &draw);
    Matrix in(1, feature.size());
    std::copy(feature.begin(), feature.end(), in.data.begin());
    const ConnectorGrads g = connector_backward(model.mlp, in, draw);
    for (std::size_t k = 0; k < g.params.w1.data.size(); ++k) grad.w1.data[k] += g.params.w1.data[k];
    for (std::size_t k = 0; k < g.params.b1.size(); ++k) grad.b1[k] += g.params.b1[k];
    for (std::size_t k = 0; k < g.params.w2.data.size(); ++k) grad.w2.data[k] += g.params.w2.data[k];
    for (std::size_t k = 0; k < g.params.b2.size(); ++k) grad.b2[k] += g.params.b2[k];
    return loss;
}

std::vector<EvalDetection> baseline_detections(const Scene& scene, const WorldConfig& world,
                                               const EncoderParams& encoders, const BaselineModel& model) {
    std::vector<EvalDetection> out;
    if (model.cfg.slots == 0) return out;
    const EncodedScene enc = toy_encode(scene, world, encoders);
    for (const SlotPrediction& p : baseline_predict(model, model.standardize(global_feature(enc.primary, model.cfg.grid)))) {
        out.push_back({scene.image_id, category_name(p.category), p.box, p.confidence});
    }
    return out;
}

EvalReport regression_baseline_eval(std::span<const Scene> scenes, const WorldConfig& world,
                                    const EncoderParams& encoders, const BaselineModel& model) {
    if (model.cfg.slots > 0 && model.steps_trained <= 0) {
        throw std::logic_error("regression_baseline_eval: baseline has not been trained");
    }
    std::vector<EvalDetection> dets;
    std::vector<GroundTruth> gts;
    for (const Scene& s : scenes) {
        for (EvalDetection& d : baseline_detections(s, world, encoders, model)) dets.push_back(std::move(d));
        for (const SceneObject& o : s.objects) gts.push_back({s.image_id, category_name(o.category), o.box});
    }
    return coco_map(dets, gts, category_names(world.n_categories));
}

}  // namespace regionlens
