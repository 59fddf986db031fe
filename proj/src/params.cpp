#include "regionlens/params.hpp"

#include <cstdio>
#include <random>
#include <stdexcept>

namespace regionlens {

std::string_view group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::PrimaryEncoder: return "primary_encoder";
        case ParamGroup::AuxEncoder: return "aux_encoder";
        case ParamGroup::Hfre: return "hfre";
        case ParamGroup::Connector: return "connector";
        case ParamGroup::Protocol: return "protocol";
        case ParamGroup::Llm: return "llm";
    }
    return "unknown";
}

ParamGroup group_from_name(std::string_view name) {
    for (ParamGroup g : kAllGroups) {
        if (group_name(g) == name) return g;
    }
    throw std::invalid_argument("unknown parameter group: " + std::string(name));
}

int ModelConfig::primary_dim() const {
    if (!use_primary) return 0;
    return use_simplefp ? kPyramidLevels * fp_channels : encoder.primary_channels;
}

int ModelConfig::aux_dim() const { return use_auxiliary ? encoder.aux_dim() : 0; }

void ModelConfig::validate() const {
    if (!use_primary && !use_auxiliary) {
        throw std::invalid_argument("ModelConfig: at least one of use_primary/use_auxiliary must be enabled");
    }
    if (n_categories < 1 || fp_channels < 1 || d_llm < 1 || encoder.primary_channels < 1) {
        throw std::invalid_argument("ModelConfig: dimensions must be positive");
    }
    for (int c : encoder.aux_channels) {
        if (c < 1) throw std::invalid_argument("ModelConfig: aux channels must be positive");
    }
    if (hybrid_dim() % 8 != 0) {
        throw std::invalid_argument("ModelConfig: hybrid feature dim " + std::to_string(hybrid_dim()) +
                                    " must be a multiple of 8 for the positional embedding");
    }
    roi.validate();
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"n_categories", c.n_categories},
                       {"encoder", c.encoder},
                       {"fp_channels", c.fp_channels},
                       {"d_llm", c.d_llm},
                       {"connector_hidden", c.connector_hidden},
                       {"roi_pool_size", c.roi.pool_size},
                       {"roi_sampling_ratio", c.roi.sampling_ratio},
                       {"use_primary", c.use_primary},
                       {"use_auxiliary", c.use_auxiliary},
                       {"use_simplefp", c.use_simplefp}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    const ModelConfig d;
    c.n_categories = j.value("n_categories", d.n_categories);
    c.encoder = j.value("encoder", d.encoder);
    c.fp_channels = j.value("fp_channels", d.fp_channels);
    c.d_llm = j.value("d_llm", d.d_llm);
    c.connector_hidden = j.value("connector_hidden", d.connector_hidden);
    c.roi.pool_size = j.value("roi_pool_size", d.roi.pool_size);
    c.roi.sampling_ratio = j.value("roi_sampling_ratio", d.roi.sampling_ratio);
    c.use_primary = j.value("use_primary", d.use_primary);
    c.use_auxiliary = j.value("use_auxiliary", d.use_auxiliary);
    c.use_simplefp = j.value("use_simplefp", d.use_simplefp);
}

ModelParams ModelParams::init(const ModelConfig& cfg, const WorldConfig& world, std::uint64_t seed) {
    cfg.validate();
    if (world.n_categories != cfg.n_categories) {
        throw std::invalid_argument("ModelParams: world and model disagree on n_categories");
    }
    ModelParams p;
    p.encoders = EncoderParams::init(world, cfg.encoder, derive_seed(seed, 20));
    p.simplefp = SimpleFpParams::init({cfg.encoder.primary_channels, cfg.fp_channels}, derive_seed(seed, 21));
    p.connector = Connector::init(cfg.hybrid_dim(), cfg.hidden_dim(), cfg.d_llm, derive_seed(seed, 22));
    p.ground.assign(static_cast<std::size_t>(cfg.d_llm), 0.0);
    p.vocab = Matrix(cfg.n_categories, cfg.d_llm);
    std::mt19937_64 rng(derive_seed(seed, 23));
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : p.vocab.data) v = n(rng);
    return p;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = *this;
    for (ParamGroup g : kAllGroups) {
        for (NamedTensor& t : group_tensors(z, g)) std::fill(t.data.begin(), t.data.end(), 0.0);
    }
    return z;
}

namespace {

void add_kernel(std::vector<NamedTensor>& out, const std::string& name, Kernel& k) {
    out.push_back({name + ".weights", k.weights});
    out.push_back({name + ".bias", k.bias});
}

}  // namespace

std::vector<NamedTensor> group_tensors(ModelParams& p, ParamGroup g) {
    std::vector<NamedTensor> out;
    switch (g) {
        case ParamGroup::PrimaryEncoder: add_kernel(out, "proj", p.encoders.primary); break;
        case ParamGroup::AuxEncoder:
            for (int l = 0; l < kPyramidLevels; ++l) add_kernel(out, "level" + std::to_string(l), p.encoders.aux[l]);
            break;
        case ParamGroup::Hfre:
            add_kernel(out, "down", p.simplefp.down);
            add_kernel(out, "same", p.simplefp.same);
            add_kernel(out, "up2", p.simplefp.up2);
            add_kernel(out, "up4a", p.simplefp.up4a);
            add_kernel(out, "up4b", p.simplefp.up4b);
            break;
        case ParamGroup::Connector:
            out.push_back({"w1", p.connector.w1.data});
            out.push_back({"b1", p.connector.b1});
            out.push_back({"w2", p.connector.w2.data});
            out.push_back({"b2", p.connector.b2});
            break;
        case ParamGroup::Protocol: out.push_back({"ground", p.ground}); break;
        case ParamGroup::Llm:
            out.push_back({"vocab", p.vocab.data});
            out.push_back({"score_bias", p.score_bias});
            break;
    }
    for (NamedTensor& t : out) t.name = std::string(group_name(g)) + "." + t.name;
    return out;
}

std::vector<ConstNamedTensor> group_tensors(const ModelParams& p, ParamGroup g) {
    std::vector<ConstNamedTensor> out;
    for (const NamedTensor& t : group_tensors(const_cast<ModelParams&>(p), g)) out.push_back({t.name, t.data});
    return out;
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t group_checksum(const ModelParams& p, ParamGroup g) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const ConstNamedTensor& t : group_tensors(p, g)) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(t.data.data());
        h = fnv1a({bytes, t.data.size_bytes()}, h);
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void sgd_step(ModelParams& p, const ModelParams& grad, const GroupMask& mask, double lr) {
    for (ParamGroup g : kAllGroups) {
        if (!in_mask(mask, g)) continue;
        auto dst = group_tensors(p, g);
        const auto src = group_tensors(grad, g);
        for (std::size_t t = 0; t < dst.size(); ++t) {
            if (dst[t].data.size() != src[t].data.size()) throw ShapeError("sgd_step: gradient shape mismatch");
            for (std::size_t k = 0; k < dst[t].data.size(); ++k) dst[t].data[k] -= lr * src[t].data[k];
        }
    }
}

nlohmann::json params_to_json(const ModelParams& p) {
    nlohmann::json j;
    j["primary_encoder.proj"] = p.encoders.primary;
    for (int l = 0; l < kPyramidLevels; ++l) j["aux_encoder.level" + std::to_string(l)] = p.encoders.aux[l];
    j["hfre.down"] = p.simplefp.down;
    j["hfre.same"] = p.simplefp.same;
    j["hfre.up2"] = p.simplefp.up2;
    j["hfre.up4a"] = p.simplefp.up4a;
    j["hfre.up4b"] = p.simplefp.up4b;
    j["connector"] = p.connector;
    j["protocol.ground"] = p.ground;
    j["llm.vocab"] = {{"rows", p.vocab.rows}, {"cols", p.vocab.cols}, {"data", p.vocab.data}};
    j["llm.score_bias"] = p.score_bias;
    return j;
}

ModelParams params_from_json(const nlohmann::json& j) {
    ModelParams p;
    p.encoders.primary = j.at("primary_encoder.proj").get<Kernel>();
    for (int l = 0; l < kPyramidLevels; ++l) p.encoders.aux[l] = j.at("aux_encoder.level" + std::to_string(l)).get<Kernel>();
    p.simplefp.down = j.at("hfre.down").get<Kernel>();
    p.simplefp.same = j.at("hfre.same").get<Kernel>();
    p.simplefp.up2 = j.at("hfre.up2").get<Kernel>();
    p.simplefp.up4a = j.at("hfre.up4a").get<Kernel>();
    p.simplefp.up4b = j.at("hfre.up4b").get<Kernel>();
    p.connector = j.at("connector").get<Connector>();
    p.ground = j.at("protocol.ground").get<std::vector<double>>();
    const auto& v = j.at("llm.vocab");
    p.vocab = Matrix(v.at("rows").get<std::size_t>(), v.at("cols").get<std::size_t>());
    p.vocab.data = v.at("data").get<std::vector<double>>();
    if (p.vocab.data.size() != p.vocab.rows * p.vocab.cols) throw ShapeError("params_from_json: vocab size mismatch");
    p.score_bias = j.at("llm.score_bias").get<std::vector<double>>();
    if (p.score_bias.size() != 1) throw ShapeError("params_from_json: score_bias must have one entry");
    return p;
}

}  // namespace regionlens
