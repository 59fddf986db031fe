#include "regionlens/hfre.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace regionlens {

Matrix extract_primary_features(std::span<const FeatureMap> pri_pyramid, std::span<const Box> boxes,
                                const RoiConfig& cfg) {
    if (boxes.empty()) throw ShapeError("extract_region_features: empty box list");
    if (pri_pyramid.empty()) throw ShapeError("extract_region_features: empty primary pyramid");
    std::size_t width = 0;
    for (const FeatureMap& m : pri_pyramid) width += static_cast<std::size_t>(m.channels());
    Matrix out(boxes.size(), width);
    std::size_t offset = 0;
    for (const FeatureMap& level : pri_pyramid) {
        Matrix pooled = roi_align_pooled(level, boxes, cfg);
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            std::copy(pooled.row(i).begin(), pooled.row(i).end(), out.row(i).begin() + offset);
        }
        offset += pooled.cols;
    }
    return out;
}

std::pair<Matrix, Matrix> extract_region_features(std::span<const FeatureMap> pri_pyramid,
                                                  const FeatureMap& aux_fused, std::span<const Box> boxes,
                                                  const RoiConfig& cfg) {
    return {extract_primary_features(pri_pyramid, boxes, cfg), roi_align_pooled(aux_fused, boxes, cfg)};
}

std::vector<double> positional_embedding(const Box& box, int dim) {
    if (dim <= 0 || dim % 8 != 0) throw ShapeError("positional_embedding: dim must be a positive multiple of 8");
    const int block = dim / 4;
    const double coords[4] = {box.x1, box.y1, box.x2, box.y2};
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int c = 0; c < 4; ++c) {
        const double v = coords[c] * 2.0 * std::numbers::pi;
        for (int i = 0; i < block / 2; ++i) {
            const double omega = std::pow(10000.0, -2.0 * i / block);
            out[c * block + 2 * i] = std::sin(v * omega);
            out[c * block + 2 * i + 1] = std::cos(v * omega);
        }
    }
    return out;
}

std::vector<HybridRegionFeature> fuse_hybrid(const Matrix& f_pri, const Matrix& f_aux, std::span<const Box> boxes) {
    if (f_pri.rows != boxes.size() || f_aux.rows != boxes.size()) {
        throw ShapeError("fuse_hybrid: row count does not match box count");
    }
    const int dim = static_cast<int>(f_pri.cols + f_aux.cols);
    std::vector<HybridRegionFeature> out;
    out.reserve(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        HybridRegionFeature h;
        h.f_pri.assign(f_pri.row(i).begin(), f_pri.row(i).end());
        h.f_aux.assign(f_aux.row(i).begin(), f_aux.row(i).end());
        h.e_pos = positional_embedding(boxes[i], dim);
        h.f_hybrid = h.f_pri;
        h.f_hybrid.insert(h.f_hybrid.end(), h.f_aux.begin(), h.f_aux.end());
        for (int k = 0; k < dim; ++k) h.f_hybrid[k] += h.e_pos[k];
        out.push_back(std::move(h));
    }
    return out;
}

Matrix hybrid_matrix(const Matrix& f_pri, const Matrix& f_aux, std::span<const Box> boxes) {
    const std::size_t n = boxes.size();
    if ((f_pri.cols > 0 && f_pri.rows != n) || (f_aux.cols > 0 && f_aux.rows != n)) {
        throw ShapeError("hybrid_matrix: row count does not match box count");
    }
    const std::size_t dim = f_pri.cols + f_aux.cols;
    Matrix out(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto e = positional_embedding(boxes[i], static_cast<int>(dim));
        for (std::size_t k = 0; k < f_pri.cols; ++k) out(i, k) = f_pri(i, k) + e[k];
        for (std::size_t k = 0; k < f_aux.cols; ++k) out(i, f_pri.cols + k) = f_aux(i, k) + e[f_pri.cols + k];
    }
    return out;
}

double gelu(double x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

double gelu_derivative(double x) {
    constexpr double c = 0.7978845608028654;
    const double u = c * (x + 0.044715 * x * x * x);
    const double t = std::tanh(u);
    const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

namespace {

double activate(Activation a, double x) { return a == Activation::Gelu ? gelu(x) : x; }
double activate_grad(Activation a, double x) { return a == Activation::Gelu ? gelu_derivative(x) : 1.0; }

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

}  // namespace

Connector Connector::init(int in_dim, int hidden_dim, int out_dim, std::uint64_t seed) {
    if (in_dim < 1 || hidden_dim < 1 || out_dim < 1) throw ShapeError("Connector: dimensions must be positive");
    std::mt19937_64 rng(seed);
    Connector c;
    const double b1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    c.w1 = uniform_matrix(hidden_dim, in_dim, b1, rng);
    c.b1 = uniform_matrix(1, hidden_dim, b1, rng).data;
    c.w2 = uniform_matrix(out_dim, hidden_dim, b2, rng);
    c.b2 = uniform_matrix(1, out_dim, b2, rng).data;
    return c;
}

Connector Connector::zeros(int in_dim, int hidden_dim, int out_dim) {
    if (in_dim < 1 || hidden_dim < 1 || out_dim < 1) throw ShapeError("Connector: dimensions must be positive");
    Connector c;
    c.w1 = Matrix(hidden_dim, in_dim);
    c.b1.assign(hidden_dim, 0.0);
    c.w2 = Matrix(out_dim, hidden_dim);
    c.b2.assign(out_dim, 0.0);
    return c;
}

void Connector::validate() const {
    if (w1.rows == 0 || w1.cols == 0 || w2.rows == 0) throw ShapeError("Connector: empty layer");
    if (w1.data.size() != w1.rows * w1.cols || w2.data.size() != w2.rows * w2.cols) {
        throw ShapeError("Connector: weight storage mismatch");
    }
    if (b1.size() != w1.rows || w2.cols != w1.rows || b2.size() != w2.rows) {
        throw ShapeError("Connector: inconsistent layer shapes");
    }
}

void to_json(nlohmann::json& j, const Connector& c) {
    j = nlohmann::json{{"in_dim", c.in_dim()},
                       {"hidden_dim", c.hidden_dim()},
                       {"out_dim", c.out_dim()},
                       {"activation", c.activation == Activation::Gelu ? "gelu" : "identity"},
                       {"w1", c.w1.data},
                       {"b1", c.b1},
                       {"w2", c.w2.data},
                       {"b2", c.b2}};
}

void from_json(const nlohmann::json& j, Connector& c) {
    const auto in = j.at("in_dim").get<std::size_t>();
    const auto hidden = j.at("hidden_dim").get<std::size_t>();
    const auto out = j.at("out_dim").get<std::size_t>();
    c.w1 = Matrix(hidden, in);
    c.w1.data = j.at("w1").get<std::vector<double>>();
    c.b1 = j.at("b1").get<std::vector<double>>();
    c.w2 = Matrix(out, hidden);
    c.w2.data = j.at("w2").get<std::vector<double>>();
    c.b2 = j.at("b2").get<std::vector<double>>();
    c.activation = j.value("activation", std::string("gelu")) == "identity" ? Activation::Identity : Activation::Gelu;
    c.validate();
}

Matrix connector_forward(const Connector& conn, const Matrix& f_hybrid) {
    conn.validate();
    if (f_hybrid.cols != conn.w1.cols) {
        throw ShapeError("connector_forward: input width " + std::to_string(f_hybrid.cols) + " != connector input " +
                         std::to_string(conn.w1.cols));
    }
    const std::size_t h = conn.w1.rows;
    const std::size_t o = conn.w2.rows;
    Matrix out(f_hybrid.rows, o);
    std::vector<double> hidden(h);
    for (std::size_t n = 0; n < f_hybrid.rows; ++n) {
        const auto x = f_hybrid.row(n);
        for (std::size_t r = 0; r < h; ++r) {
            double acc = conn.b1[r];
            const auto w = conn.w1.row(r);
            for (std::size_t k = 0; k < x.size(); ++k) acc += w[k] * x[k];
            hidden[r] = activate(conn.activation, acc);
        }
        for (std::size_t r = 0; r < o; ++r) {
            double acc = conn.b2[r];
            const auto w = conn.w2.row(r);
            for (std::size_t k = 0; k < h; ++k) acc += w[k] * hidden[k];
            out(n, r) = acc;
        }
    }
    return out;
}

ConnectorGrads connector_backward(const Connector& conn, const Matrix& f_hybrid, const Matrix& upstream) {
    conn.validate();
    if (f_hybrid.cols != conn.w1.cols) throw ShapeError("connector_backward: input width mismatch");
    if (upstream.rows != f_hybrid.rows || upstream.cols != conn.w2.rows) {
        throw ShapeError("connector_backward: upstream gradient shape mismatch");
    }
    const std::size_t h = conn.w1.rows;
    const std::size_t o = conn.w2.rows;
    ConnectorGrads g{Connector::zeros(conn.in_dim(), conn.hidden_dim(), conn.out_dim()),
                     Matrix(f_hybrid.rows, f_hybrid.cols)};
    g.params.activation = conn.activation;
    std::vector<double> pre(h), hidden(h), dhidden(h);
    for (std::size_t n = 0; n < f_hybrid.rows; ++n) {
        const auto x = f_hybrid.row(n);
        const auto up = upstream.row(n);
        for (std::size_t r = 0; r < h; ++r) {
            double acc = conn.b1[r];
            const auto w = conn.w1.row(r);
            for (std::size_t k = 0; k < x.size(); ++k) acc += w[k] * x[k];
            pre[r] = acc;
            hidden[r] = activate(conn.activation, acc);
        }
        std::fill(dhidden.begin(), dhidden.end(), 0.0);
        for (std::size_t r = 0; r < o; ++r) {
            const double u = up[r];
            if (u == 0.0) continue;
            g.params.b2[r] += u;
            auto dw = g.params.w2.row(r);
            const auto w = conn.w2.row(r);
            for (std::size_t k = 0; k < h; ++k) {
                dw[k] += u * hidden[k];
                dhidden[k] += u * w[k];
            }
        }
        auto dx = g.input.row(n);
        for (std::size_t r = 0; r < h; ++r) {
            const double d = dhidden[r] * activate_grad(conn.activation, pre[r]);
            if (d == 0.0) continue;
            g.params.b1[r] += d;
            auto dw = g.params.w1.row(r);
            const auto w = conn.w1.row(r);
            for (std::size_t k = 0; k < x.size(); ++k) {
                dw[k] += d * x[k];
                dx[k] += d * w[k];
            }
        }
    }
    return g;
}

std::vector<RegionToken> make_region_tokens(const Matrix& token_rows) {
    std::vector<RegionToken> tokens;
    tokens.reserve(token_rows.rows);
    for (std::size_t i = 0; i < token_rows.rows; ++i) {
        tokens.push_back({std::vector<double>(token_rows.row(i).begin(), token_rows.row(i).end()), static_cast<int>(i)});
    }
    return tokens;
}

}  // namespace regionlens
