#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "regionlens/gridops.hpp"
#include "regionlens/roialign.hpp"

namespace regionlens {

/// Per-region fused vector: f_hybrid = concat(f_pri, f_aux) + e_pos.
struct HybridRegionFeature {
    std::vector<double> f_pri;
    std::vector<double> f_aux;
    std::vector<double> e_pos;
    std::vector<double> f_hybrid;
};

struct RegionToken {
    std::vector<double> embedding;
    int index = 0;
};

/// Concatenates roi_align_pooled over every primary pyramid level, in level order.
Matrix extract_primary_features(std::span<const FeatureMap> pri_pyramid, std::span<const Box> boxes,
                                const RoiConfig& cfg = {});

/// (N x D_p, N x D_a) primary and auxiliary region features.
std::pair<Matrix, Matrix> extract_region_features(std::span<const FeatureMap> pri_pyramid,
                                                  const FeatureMap& aux_fused, std::span<const Box> boxes,
                                                  const RoiConfig& cfg = {});

/// Sine-cosine embedding of (x1, y1, x2, y2): dim/4 entries per coordinate,
/// pairs (sin, cos) of v * 2pi * 10000^(-2i/(dim/4)).
std::vector<double> positional_embedding(const Box& box, int dim);

std::vector<HybridRegionFeature> fuse_hybrid(const Matrix& f_pri, const Matrix& f_aux, std::span<const Box> boxes);

/// Row-wise concat(parts...) + e_pos(box). Any part may have zero columns.
Matrix hybrid_matrix(const Matrix& f_pri, const Matrix& f_aux, std::span<const Box> boxes);

enum class Activation { Gelu, Identity };

/// Region-language connector: affine -> activation -> affine.
struct Connector {
    Matrix w1;  // hidden x in
    std::vector<double> b1;
    Matrix w2;  // out x hidden
    std::vector<double> b2;
    Activation activation = Activation::Gelu;
    bool trainable = true;

    static Connector init(int in_dim, int hidden_dim, int out_dim, std::uint64_t seed);
    static Connector zeros(int in_dim, int hidden_dim, int out_dim);

    int in_dim() const { return static_cast<int>(w1.cols); }
    int hidden_dim() const { return static_cast<int>(w1.rows); }
    int out_dim() const { return static_cast<int>(w2.rows); }
    void validate() const;

    bool operator==(const Connector&) const = default;
};

void to_json(nlohmann::json& j, const Connector& c);
void from_json(const nlohmann::json& j, Connector& c);

Matrix connector_forward(const Connector& conn, const Matrix& f_hybrid);

struct ConnectorGrads {
    Connector params;  // holds dL/dW1, dL/db1, dL/dW2, dL/db2
    Matrix input;
};

ConnectorGrads connector_backward(const Connector& conn, const Matrix& f_hybrid, const Matrix& upstream);

std::vector<RegionToken> make_region_tokens(const Matrix& token_rows);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace regionlens
