#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regionlens/hfre.hpp"
#include "regionlens/pyramid.hpp"
#include "regionlens/simworld.hpp"

namespace regionlens {

/// Trainable parameter groups. PrimaryEncoder is the frozen anchor; Llm holds
/// the original-vocabulary category embeddings and the scoring bias; Protocol
/// holds the newly added protocol-symbol embeddings.
enum class ParamGroup { PrimaryEncoder, AuxEncoder, Hfre, Connector, Protocol, Llm };

inline constexpr std::array<ParamGroup, 6> kAllGroups = {ParamGroup::PrimaryEncoder, ParamGroup::AuxEncoder,
                                                        ParamGroup::Hfre,           ParamGroup::Connector,
                                                        ParamGroup::Protocol,       ParamGroup::Llm};

std::string_view group_name(ParamGroup g);
ParamGroup group_from_name(std::string_view name);

using GroupMask = std::array<bool, kAllGroups.size()>;
inline bool in_mask(const GroupMask& m, ParamGroup g) { return m[static_cast<std::size_t>(g)]; }

struct ModelConfig {
    int n_categories = 8;
    EncoderConfig encoder;
    int fp_channels = 32;
    int d_llm = 64;
    int connector_hidden = 0;  // 0 -> d_llm
    RoiConfig roi;
    bool use_primary = true;
    bool use_auxiliary = true;
    bool use_simplefp = true;

    int primary_dim() const;
    int aux_dim() const;
    int hybrid_dim() const { return primary_dim() + aux_dim(); }
    int hidden_dim() const { return connector_hidden > 0 ? connector_hidden : d_llm; }
    void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ModelParams {
    EncoderParams encoders;
    SimpleFpParams simplefp;
    Connector connector;
    std::vector<double> ground;  // <ground> symbol embedding, d_llm
    Matrix vocab;                // n_categories x d_llm
    std::vector<double> score_bias{0.0};

    static ModelParams init(const ModelConfig& cfg, const WorldConfig& world, std::uint64_t seed);
    /// Same shapes, all zeros. Used as a gradient accumulator.
    ModelParams zeros_like() const;

    bool operator==(const ModelParams&) const = default;
};

struct NamedTensor {
    std::string name;
    std::span<double> data;
};

struct ConstNamedTensor {
    std::string name;
    std::span<const double> data;
};

std::vector<NamedTensor> group_tensors(ModelParams& p, ParamGroup g);
std::vector<ConstNamedTensor> group_tensors(const ModelParams& p, ParamGroup g);

/// FNV-1a over the IEEE-754 bytes of every tensor in the group.
std::uint64_t group_checksum(const ModelParams& p, ParamGroup g);
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// p[g] -= lr * grad[g] for every group in `mask`.
void sgd_step(ModelParams& p, const ModelParams& grad, const GroupMask& mask, double lr);

/// Parameter bundle keyed "group.branch".
nlohmann::json params_to_json(const ModelParams& p);
ModelParams params_from_json(const nlohmann::json& j);

}  // namespace regionlens
