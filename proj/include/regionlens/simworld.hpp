#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "regionlens/gridops.hpp"
#include "regionlens/pyramid.hpp"
#include "regionlens/roialign.hpp"

namespace regionlens {

/// splitmix64 mix of (seed, stream, index); every random stream derives from it.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

struct WorldConfig {
    int n_categories = 8;
    std::vector<double> category_weights;  // empty -> uniform
    int min_objects = 5;
    int max_objects = 8;
    double min_size = 0.08;
    double max_size = 0.30;
    double clutter_density = 0.05;  // std of the per-pixel noise floor
    double max_overlap = 0.3;       // cap on intersection / smaller area between objects
    int primary_res = 16;
    int aux_res = 64;
    int aux_code_dim = 4;
    std::uint64_t code_seed = 20240917;  // fixes the auxiliary category codes

    void validate() const;
    std::vector<double> normalized_weights() const;
};

void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);

std::string category_name(int category);
std::vector<std::string> category_names(int n_categories);

struct SceneObject {
    int category = 0;
    Box box;
    bool operator==(const SceneObject&) const = default;
};

struct Scene {
    int image_id = 0;
    int grid_res = 0;
    std::vector<SceneObject> objects;
    double clutter_density = 0.0;
    std::uint64_t seed = 0;

    bool operator==(const Scene&) const = default;
};

Scene generate_scene(std::uint64_t seed, const WorldConfig& cfg, int image_id = 0);

// ---------------------------------------------------------------------------
// Toy dual encoders
// ---------------------------------------------------------------------------

/// Channel layout of the primary raw render: for each category c,
/// [mass, x-moment, y-moment] at 3c..3c+2, then one background channel.
int primary_raw_channels(const WorldConfig& cfg);
/// Auxiliary raw render: aux_code_dim category-code channels, objectness, two edge bands.
int aux_raw_channels(const WorldConfig& cfg);

struct RawScene {
    FeatureMap primary;                          // primary_res^2
    std::array<FeatureMap, kPyramidLevels> aux;  // aux_res / {1, 2, 4, 8}
};

RawScene render_scene(const Scene& scene, const WorldConfig& cfg);

struct EncoderConfig {
    int primary_channels = 32;
    std::array<int, kPyramidLevels> aux_channels{8, 8, 8, 8};

    int aux_dim() const { return aux_channels[0] + aux_channels[1] + aux_channels[2] + aux_channels[3]; }
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

/// The primary projection is frozen everywhere; the auxiliary projections are
/// the auxiliary-encoder parameter group.
struct EncoderParams {
    Kernel primary;
    std::array<Kernel, kPyramidLevels> aux;

    static EncoderParams init(const WorldConfig& world, const EncoderConfig& cfg, std::uint64_t seed);
    bool operator==(const EncoderParams&) const = default;
};

struct EncodedScene {
    FeatureMap primary;                          // last map of the primary encoder
    std::array<FeatureMap, kPyramidLevels> aux;  // four auxiliary levels
};

EncodedScene encode_raw(const RawScene& raw, const EncoderParams& params);
EncodedScene toy_encode(const Scene& scene, const WorldConfig& cfg, const EncoderParams& params);

// ---------------------------------------------------------------------------
// Simulated proposal network
// ---------------------------------------------------------------------------

struct ProposalSimConfig {
    double jitter_sigma = 0.005;
    double drop_rate = 0.05;
    double clutter_rate = 6.0;  // Poisson mean of spurious boxes per image
    int max_proposals = 100;

    void validate() const;
};

void to_json(nlohmann::json& j, const ProposalSimConfig& c);
void from_json(const nlohmann::json& j, ProposalSimConfig& c);

/// Score-sorted, truncated proposals. True objects score in (0.3, 1], clutter in [0, 0.3).
std::vector<Box> simulate_opn(const Scene& scene, const ProposalSimConfig& cfg, std::uint64_t seed,
                              const WorldConfig& world = {});

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

inline constexpr double kPositiveIou = 0.5;

struct TrainingSample {
    Scene scene;
    std::vector<Box> proposals;
    std::vector<int> queries;  // category ids
    Matrix targets;            // proposals x queries, 0/1
    bool rejection = false;
};

/// Positive iff IoU with a same-category ground truth exceeds kPositiveIou.
Matrix assign_targets(const Scene& scene, const std::vector<Box>& proposals, const std::vector<int>& queries);

std::vector<TrainingSample> make_training_set(int n_scenes, double rejection_fraction, std::uint64_t seed,
                                              const WorldConfig& world, const ProposalSimConfig& opn);

/// Present categories in ascending order.
std::vector<int> present_categories(const Scene& scene);

/// COCO-like scene/proposal dump: {images:[{id, objects:[{category, bbox}]}], proposals:{id:[...]}}.
nlohmann::json scenes_to_json(const std::vector<Scene>& scenes, const std::vector<std::vector<Box>>& proposals);

}  // namespace regionlens
