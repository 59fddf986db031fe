#include "regionlens/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "regionlens/metrics.hpp"

namespace regionlens {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ stream) ^ index);
}

void WorldConfig::validate() const {
    if (n_categories < 1) throw std::invalid_argument("WorldConfig: n_categories must be >= 1");
    if (!category_weights.empty()) {
        if (category_weights.size() != static_cast<std::size_t>(n_categories)) {
            throw std::invalid_argument("WorldConfig: category_weights length must equal n_categories");
        }
        if (std::any_of(category_weights.begin(), category_weights.end(), [](double w) { return !(w >= 0.0); }) ||
            std::accumulate(category_weights.begin(), category_weights.end(), 0.0) <= 0.0) {
            throw std::invalid_argument("WorldConfig: category_weights must be non-negative with positive sum");
        }
    }
    if (min_objects < 0 || max_objects < min_objects) throw std::invalid_argument("WorldConfig: bad object count range");
    if (!(min_size > 0.0 && min_size <= max_size && max_size <= 1.0)) {
        throw std::invalid_argument("WorldConfig: sizes must satisfy 0 < min_size <= max_size <= 1");
    }
    if (min_size * min_size < 1e-4) throw std::invalid_argument("WorldConfig: min_size too small (area < 1e-4)");
    if (clutter_density < 0.0) throw std::invalid_argument("WorldConfig: clutter_density must be >= 0");
    if (!(max_overlap >= 0.0 && max_overlap <= 1.0)) throw std::invalid_argument("WorldConfig: max_overlap must lie in [0,1]");
    if (primary_res < 4 || primary_res % 2 != 0) throw std::invalid_argument("WorldConfig: primary_res must be even and >= 4");
    if (aux_res < 8 || aux_res % 8 != 0) throw std::invalid_argument("WorldConfig: aux_res must be a multiple of 8");
    if (aux_code_dim < 1) throw std::invalid_argument("WorldConfig: aux_code_dim must be >= 1");
}

std::vector<double> WorldConfig::normalized_weights() const {
    std::vector<double> w = category_weights.empty() ? std::vector<double>(n_categories, 1.0) : category_weights;
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= s;
    return w;
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
    j = nlohmann::json{{"n_categories", c.n_categories}, {"category_weights", c.category_weights},
                       {"min_objects", c.min_objects},   {"max_objects", c.max_objects},
                       {"min_size", c.min_size},         {"max_size", c.max_size},
                       {"clutter_density", c.clutter_density}, {"max_overlap", c.max_overlap}, {"primary_res", c.primary_res},
                       {"aux_res", c.aux_res},           {"aux_code_dim", c.aux_code_dim},
                       {"code_seed", c.code_seed}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
    const WorldConfig d;
    c.n_categories = j.value("n_categories", d.n_categories);
    c.category_weights = j.value("category_weights", d.category_weights);
    c.min_objects = j.value("min_objects", d.min_objects);
    c.max_objects = j.value("max_objects", d.max_objects);
    c.min_size = j.value("min_size", d.min_size);
    c.max_size = j.value("max_size", d.max_size);
    c.clutter_density = j.value("clutter_density", d.clutter_density);
    c.max_overlap = j.value("max_overlap", d.max_overlap);
    c.primary_res = j.value("primary_res", d.primary_res);
    c.aux_res = j.value("aux_res", d.aux_res);
    c.aux_code_dim = j.value("aux_code_dim", d.aux_code_dim);
    c.code_seed = j.value("code_seed", d.code_seed);
}

std::string category_name(int category) {
    static const char* kNames[] = {"person", "car", "dog", "cup", "chair", "bottle", "bird", "boat"};
    if (category >= 0 && category < 8) return kNames[category];
    return "category" + std::to_string(category);
}

std::vector<std::string> category_names(int n_categories) {
    std::vector<std::string> out;
    for (int c = 0; c < n_categories; ++c) out.push_back(category_name(c));
    return out;
}

constexpr int kPlacementAttempts = 50;

Scene generate_scene(std::uint64_t seed, const WorldConfig& cfg, int image_id) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(seed, 1));
    std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
    const auto weights = cfg.normalized_weights();
    std::discrete_distribution<int> category(weights.begin(), weights.end());
    std::uniform_real_distribution<double> size(cfg.min_size, cfg.max_size);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Scene s;
    s.image_id = image_id;
    s.grid_res = cfg.aux_res;
    s.clutter_density = cfg.clutter_density;
    s.seed = seed;
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
        const int c = category(rng);
        Box b;
        // Resample the placement while it hides too much of an earlier object
        // (or is too hidden itself); the last attempt is kept regardless.
        for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
            const double w = size(rng);
            const double h = size(rng);
            const double x1 = unit(rng) * (1.0 - w);
            const double y1 = unit(rng) * (1.0 - h);
            b = Box::make(x1, y1, x1 + w, y1 + h, std::nullopt, c);
            bool ok = true;
            for (const SceneObject& o : s.objects) {
                const double ix = std::max(0.0, std::min(b.x2, o.box.x2) - std::max(b.x1, o.box.x1));
                const double iy = std::max(0.0, std::min(b.y2, o.box.y2) - std::max(b.y1, o.box.y1));
                if (ix * iy > cfg.max_overlap * std::min(b.area(), o.box.area())) ok = false;
            }
            if (ok) break;
        }
        s.objects.push_back({c, b});
    }
    return s;
}

int primary_raw_channels(const WorldConfig& cfg) { return 3 * cfg.n_categories + 1; }
int aux_raw_channels(const WorldConfig& cfg) { return cfg.aux_code_dim + 3; }

namespace {

double overlap_1d(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

// Integral of (t - center) over [a, b].
double first_moment(double a, double b, double center) {
    return 0.5 * ((b - center) * (b - center) - (a - center) * (a - center));
}

void blur_channel(FeatureMap& map, int c) {
    const int h = map.height();
    const int w = map.width();
    std::vector<double> tmp(map.plane());
    auto src = map.channel(c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int xl = std::max(x - 1, 0);
            const int xr = std::min(x + 1, w - 1);
            tmp[y * w + x] = 0.25 * src[y * w + xl] + 0.5 * src[y * w + x] + 0.25 * src[y * w + xr];
        }
    }
    for (int y = 0; y < h; ++y) {
        const int yu = std::max(y - 1, 0);
        const int yd = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
            src[y * w + x] = 0.25 * tmp[yu * w + x] + 0.5 * tmp[y * w + x] + 0.25 * tmp[yd * w + x];
        }
    }
}

FeatureMap render_primary(const Scene& scene, const WorldConfig& cfg) {
    const int r = cfg.primary_res;
    const double cell = 1.0 / r;
    FeatureMap map(primary_raw_channels(cfg), r, r);
    for (int y = 0; y < r; ++y) {
        const double cy0 = y * cell;
        const double cyc = cy0 + 0.5 * cell;
        for (int x = 0; x < r; ++x) {
            const double cx0 = x * cell;
            const double cxc = cx0 + 0.5 * cell;
            for (const SceneObject& o : scene.objects) {
                const double ox = overlap_1d(cx0, cx0 + cell, o.box.x1, o.box.x2);
                const double oy = overlap_1d(cy0, cy0 + cell, o.box.y1, o.box.y2);
                if (ox <= 0.0 || oy <= 0.0) continue;
                const double xa = std::max(cx0, o.box.x1), xb = std::min(cx0 + cell, o.box.x2);
                const double ya = std::max(cy0, o.box.y1), yb = std::min(cy0 + cell, o.box.y2);
                const double area = cell * cell;
                map.at(3 * o.category, y, x) += ox * oy / area;
                // Moments scaled to [-1, 1] per unit mass.
                map.at(3 * o.category + 1, y, x) += 2.0 * first_moment(xa, xb, cxc) * oy / (area * cell);
                map.at(3 * o.category + 2, y, x) += 2.0 * first_moment(ya, yb, cyc) * ox / (area * cell);
            }
        }
    }
    const int bg = 3 * cfg.n_categories;
    for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
            double total = 0.0;
            for (int c = 0; c < cfg.n_categories; ++c) {
                double& m = map.at(3 * c, y, x);
                m = std::min(m, 1.0);
                total += m;
            }
            map.at(bg, y, x) = std::max(0.0, 1.0 - total);
        }
    }
    for (int c = 0; c < bg; ++c) blur_channel(map, c);

    std::mt19937_64 rng(derive_seed(scene.seed, 2));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double& v : map.data()) v += cfg.clutter_density * noise(rng);
    return map;
}

Matrix category_codes(const WorldConfig& cfg) {
    std::mt19937_64 rng(cfg.code_seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix codes(cfg.n_categories, cfg.aux_code_dim);
    for (int c = 0; c < cfg.n_categories; ++c) {
        double norm = 0.0;
        for (int k = 0; k < cfg.aux_code_dim; ++k) {
            codes(c, k) = n(rng);
            norm += codes(c, k) * codes(c, k);
        }
        norm = std::sqrt(norm);
        for (int k = 0; k < cfg.aux_code_dim; ++k) codes(c, k) /= norm;
    }
    return codes;
}

FeatureMap render_aux_level(const Scene& scene, const WorldConfig& cfg, const Matrix& codes, int res,
                            std::mt19937_64& rng) {
    const int code_dim = cfg.aux_code_dim;
    const int objectness = code_dim;
    const int edge_v = code_dim + 1;
    const int edge_h = code_dim + 2;
    const double pix = 1.0 / res;
    const double band = 0.75 * pix;
    FeatureMap map(aux_raw_channels(cfg), res, res);
    std::vector<double> cov(static_cast<std::size_t>(cfg.n_categories));
    for (int y = 0; y < res; ++y) {
        const double py0 = y * pix;
        const double pyc = py0 + 0.5 * pix;
        for (int x = 0; x < res; ++x) {
            const double px0 = x * pix;
            const double pxc = px0 + 0.5 * pix;
            std::fill(cov.begin(), cov.end(), 0.0);
            double ev = 0.0, eh = 0.0;
            for (const SceneObject& o : scene.objects) {
                cov[o.category] += overlap_1d(px0, px0 + pix, o.box.x1, o.box.x2) *
                                   overlap_1d(py0, py0 + pix, o.box.y1, o.box.y2) / (pix * pix);
                auto bump = [&](double d) { return std::exp(-d * d / (2.0 * band * band)); };
                if (pyc >= o.box.y1 - band && pyc <= o.box.y2 + band) ev += bump(pxc - o.box.x1) + bump(pxc - o.box.x2);
                if (pxc >= o.box.x1 - band && pxc <= o.box.x2 + band) eh += bump(pyc - o.box.y1) + bump(pyc - o.box.y2);
            }
            double total = 0.0;
            for (int c = 0; c < cfg.n_categories; ++c) {
                const double v = std::min(cov[c], 1.0);
                total += v;
                for (int k = 0; k < code_dim; ++k) map.at(k, y, x) += v * codes(c, k);
            }
            map.at(objectness, y, x) = std::min(total, 1.0);
            map.at(edge_v, y, x) = std::min(ev, 1.0);
            map.at(edge_h, y, x) = std::min(eh, 1.0);
        }
    }
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int c = 0; c < map.channels(); ++c) {
        const double sigma = (c < code_dim ? 2.0 : 1.0) * cfg.clutter_density;
        for (double& v : map.channel(c)) v += sigma * noise(rng);
    }
    return map;
}

}  // namespace

RawScene render_scene(const Scene& scene, const WorldConfig& cfg) {
    cfg.validate();
    const Matrix codes = category_codes(cfg);
    std::mt19937_64 rng(derive_seed(scene.seed, 3));
    RawScene raw;
    raw.primary = render_primary(scene, cfg);
    for (int l = 0; l < kPyramidLevels; ++l) raw.aux[l] = render_aux_level(scene, cfg, codes, cfg.aux_res >> l, rng);
    return raw;
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = nlohmann::json{{"primary_channels", c.primary_channels}, {"aux_channels", c.aux_channels}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
    const EncoderConfig d;
    c.primary_channels = j.value("primary_channels", d.primary_channels);
    c.aux_channels = j.value("aux_channels", d.aux_channels);
}

EncoderParams EncoderParams::init(const WorldConfig& world, const EncoderConfig& cfg, std::uint64_t seed) {
    const int raw_p = primary_raw_channels(world);
    EncoderParams p;
    // Near-identity on the raw signature channels, random mixing beyond them.
    p.primary = init_kernel(cfg.primary_channels, raw_p, 1, 1, derive_seed(seed, 10));
    for (int o = 0; o < std::min(cfg.primary_channels, raw_p); ++o) {
        for (int i = 0; i < raw_p; ++i) p.primary.w(o, i, 0, 0) *= 0.05 * std::sqrt(static_cast<double>(raw_p));
        p.primary.w(o, o, 0, 0) += 1.0;
        p.primary.bias[o] = 0.0;
    }
    for (int l = 0; l < kPyramidLevels; ++l) {
        p.aux[l] = init_kernel(cfg.aux_channels[l], aux_raw_channels(world), 1, 1, derive_seed(seed, 11, l));
    }
    return p;
}

EncodedScene encode_raw(const RawScene& raw, const EncoderParams& params) {
    EncodedScene e;
    e.primary = conv2d(raw.primary, params.primary, 1, 0);
    for (int l = 0; l < kPyramidLevels; ++l) e.aux[l] = conv2d(raw.aux[l], params.aux[l], 1, 0);
    return e;
}

EncodedScene toy_encode(const Scene& scene, const WorldConfig& cfg, const EncoderParams& params) {
    return encode_raw(render_scene(scene, cfg), params);
}

void ProposalSimConfig::validate() const {
    if (max_proposals < 1) throw std::invalid_argument("ProposalSimConfig: max_proposals must be >= 1");
    if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw std::invalid_argument("ProposalSimConfig: drop_rate not in [0,1]");
    if (!(jitter_sigma >= 0.0)) throw std::invalid_argument("ProposalSimConfig: jitter_sigma must be >= 0");
    if (!(clutter_rate >= 0.0)) throw std::invalid_argument("ProposalSimConfig: clutter_rate must be >= 0");
}

void to_json(nlohmann::json& j, const ProposalSimConfig& c) {
    j = nlohmann::json{{"jitter_sigma", c.jitter_sigma},
                       {"drop_rate", c.drop_rate},
                       {"clutter_rate", c.clutter_rate},
                       {"max_proposals", c.max_proposals}};
}

void from_json(const nlohmann::json& j, ProposalSimConfig& c) {
    const ProposalSimConfig d;
    c.jitter_sigma = j.value("jitter_sigma", d.jitter_sigma);
    c.drop_rate = j.value("drop_rate", d.drop_rate);
    c.clutter_rate = j.value("clutter_rate", d.clutter_rate);
    c.max_proposals = j.value("max_proposals", d.max_proposals);
}

std::vector<Box> simulate_opn(const Scene& scene, const ProposalSimConfig& cfg, std::uint64_t seed,
                              const WorldConfig& world) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(seed, 4));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Box> out;
    for (const SceneObject& o : scene.objects) {
        const bool dropped = unit(rng) < cfg.drop_rate;
        double d[4];
        for (double& v : d) v = cfg.jitter_sigma * gauss(rng);
        if (dropped) continue;
        const double ax = std::clamp(o.box.x1 + d[0], 0.0, 1.0), bx = std::clamp(o.box.x2 + d[2], 0.0, 1.0);
        const double ay = std::clamp(o.box.y1 + d[1], 0.0, 1.0), by = std::clamp(o.box.y2 + d[3], 0.0, 1.0);
        const double mag = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3]);
        const double score = 0.3 + 0.7 * std::exp(-mag / 0.05);
        out.push_back(Box::make(std::min(ax, bx), std::min(ay, by), std::max(ax, bx), std::max(ay, by), score));
    }
    std::poisson_distribution<int> n_clutter(cfg.clutter_rate);
    std::uniform_real_distribution<double> size(world.min_size, world.max_size);
    const int k = cfg.clutter_rate > 0.0 ? n_clutter(rng) : 0;
    for (int i = 0; i < k; ++i) {
        const double w = size(rng);
        const double h = size(rng);
        const double x1 = unit(rng) * (1.0 - w);
        const double y1 = unit(rng) * (1.0 - h);
        out.push_back(Box::make(x1, y1, x1 + w, y1 + h, 0.3 * unit(rng)));
    }
    std::stable_sort(out.begin(), out.end(), [](const Box& a, const Box& b) { return *a.score > *b.score; });
    if (out.size() > static_cast<std::size_t>(cfg.max_proposals)) out.resize(static_cast<std::size_t>(cfg.max_proposals));
    return out;
}

std::vector<int> present_categories(const Scene& scene) {
    std::set<int> s;
    for (const SceneObject& o : scene.objects) s.insert(o.category);
    return {s.begin(), s.end()};
}

Matrix assign_targets(const Scene& scene, const std::vector<Box>& proposals, const std::vector<int>& queries) {
    Matrix t(proposals.size(), queries.size());
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        for (std::size_t q = 0; q < queries.size(); ++q) {
            for (const SceneObject& o : scene.objects) {
                if (o.category == queries[q] && iou(proposals[i], o.box) > kPositiveIou) {
                    t(i, q) = 1.0;
                    break;
                }
            }
        }
    }
    return t;
}

std::vector<TrainingSample> make_training_set(int n_scenes, double rejection_fraction, std::uint64_t seed,
                                              const WorldConfig& world, const ProposalSimConfig& opn) {
    if (!(rejection_fraction >= 0.0 && rejection_fraction <= 1.0)) {
        throw std::invalid_argument("make_training_set: rejection_fraction must be in [0,1]");
    }
    std::vector<TrainingSample> out;
    out.reserve(static_cast<std::size_t>(std::max(n_scenes, 0)));
    for (int i = 0; i < n_scenes; ++i) {
        std::mt19937_64 rng(derive_seed(seed, 5, i));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        TrainingSample s;
        s.scene = generate_scene(derive_seed(seed, 6, i), world, i);
        s.proposals = simulate_opn(s.scene, opn, derive_seed(seed, 7, i), world);
        s.queries = present_categories(s.scene);
        const bool wants_rejection = unit(rng) < rejection_fraction;
        std::vector<int> absent;
        for (int c = 0; c < world.n_categories; ++c) {
            if (std::find(s.queries.begin(), s.queries.end(), c) == s.queries.end()) absent.push_back(c);
        }
        if (wants_rejection && !absent.empty()) {
            std::shuffle(absent.begin(), absent.end(), rng);
            absent.resize(std::min<std::size_t>(absent.size(), 2));
            s.queries.insert(s.queries.end(), absent.begin(), absent.end());
            s.rejection = true;
        }
        s.targets = assign_targets(s.scene, s.proposals, s.queries);
        out.push_back(std::move(s));
    }
    return out;
}

nlohmann::json scenes_to_json(const std::vector<Scene>& scenes, const std::vector<std::vector<Box>>& proposals) {
    nlohmann::json j;
    j["images"] = nlohmann::json::array();
    for (const Scene& s : scenes) {
        nlohmann::json objs = nlohmann::json::array();
        for (const SceneObject& o : s.objects) {
            objs.push_back({{"category", category_name(o.category)},
                            {"bbox", {o.box.x1, o.box.y1, o.box.width(), o.box.height()}}});
        }
        j["images"].push_back({{"id", s.image_id}, {"seed", s.seed}, {"objects", objs}});
    }
    j["proposals"] = nlohmann::json::object();
    for (std::size_t i = 0; i < proposals.size() && i < scenes.size(); ++i) {
        j["proposals"][std::to_string(scenes[i].image_id)] = proposals[i];
    }
    return j;
}

}  // namespace regionlens
