#include "regionlens/model.hpp"

#include <cmath>

namespace regionlens {

ForwardState model_forward(const ModelConfig& cfg, const ModelParams& params, const RawScene& raw,
                           std::span<const Box> proposals, std::span<const int> queries) {
    if (proposals.empty()) throw ShapeError("model_forward: no proposals");
    ForwardState s;
    s.enc = encode_raw(raw, params.encoders);
    const std::size_t n = proposals.size();

    s.f_pri = Matrix(n, 0);
    if (cfg.use_primary) {
        if (cfg.use_simplefp) {
            s.pyramid = simple_fp(s.enc.primary, {cfg.encoder.primary_channels, cfg.fp_channels}, params.simplefp);
            s.f_pri = extract_primary_features(s.pyramid, proposals, cfg.roi);
        } else {
            s.f_pri = roi_align_pooled(s.enc.primary, proposals, cfg.roi);
        }
    }
    s.f_aux = Matrix(n, 0);
    if (cfg.use_auxiliary) {
        s.fused = aux_fuse(s.enc.aux);
        s.f_aux = roi_align_pooled(s.fused, proposals, cfg.roi);
    }
    s.hybrid = hybrid_matrix(s.f_pri, s.f_aux, proposals);
    s.tokens = connector_forward(params.connector, s.hybrid);

    const std::size_t d = static_cast<std::size_t>(cfg.d_llm);
    s.queries = Matrix(queries.size(), d);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const int c = queries[q];
        if (c < 0 || c >= cfg.n_categories) throw ShapeError("model_forward: query category out of range");
        for (std::size_t k = 0; k < d; ++k) s.queries(q, k) = params.vocab(c, k) + params.ground[k];
    }
    s.logits = Matrix(n, queries.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < queries.size(); ++q) {
            double z = params.score_bias[0];
            for (std::size_t k = 0; k < d; ++k) z += s.tokens(i, k) * s.queries(q, k);
            s.logits(i, q) = z;
        }
    }
    return s;
}

std::vector<CategoryQuery> category_queries(const ModelConfig& cfg, const ModelParams& params,
                                            std::span<const int> categories) {
    std::vector<CategoryQuery> out;
    for (int c : categories) {
        if (c < 0 || c >= cfg.n_categories) throw ShapeError("category_queries: category out of range");
        CategoryQuery q{category_name(c), std::vector<double>(params.vocab.row(c).begin(), params.vocab.row(c).end())};
        for (std::size_t k = 0; k < q.embedding.size(); ++k) q.embedding[k] += params.ground[k];
        out.push_back(std::move(q));
    }
    return out;
}

double bce_loss(const Matrix& logits, const Matrix& targets) {
    if (logits.rows != targets.rows || logits.cols != targets.cols) throw ShapeError("bce_loss: shape mismatch");
    double loss = 0.0;
    for (std::size_t k = 0; k < logits.data.size(); ++k) {
        const double z = logits.data[k];
        loss += std::max(z, 0.0) - z * targets.data[k] + std::log1p(std::exp(-std::abs(z)));
    }
    return loss;
}

double model_loss(const ModelConfig& cfg, const ModelParams& params, const RawScene& raw,
                  std::span<const Box> proposals, std::span<const int> queries, const Matrix& targets) {
    return bce_loss(model_forward(cfg, params, raw, proposals, queries).logits, targets);
}

Matrix model_scores(const ModelConfig& cfg, const ModelParams& params, const RawScene& raw,
                    std::span<const Box> proposals, std::span<const int> queries) {
    Matrix z = model_forward(cfg, params, raw, proposals, queries).logits;
    for (double& v : z.data) v = logistic(v);
    return z;
}

namespace {

void add_into(Kernel& dst, const Kernel& src) {
    for (std::size_t k = 0; k < dst.weights.size(); ++k) dst.weights[k] += src.weights[k];
    for (std::size_t k = 0; k < dst.bias.size(); ++k) dst.bias[k] += src.bias[k];
}

// Columns [offset, offset + width) of m.
Matrix column_block(const Matrix& m, std::size_t offset, std::size_t width) {
    Matrix out(m.rows, width);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t k = 0; k < width; ++k) out(i, k) = m(i, offset + k);
    }
    return out;
}

}  // namespace

double model_loss_and_grad(const ModelConfig& cfg, const ModelParams& params, const RawScene& raw,
                           std::span<const Box> proposals, std::span<const int> queries, const Matrix& targets,
                           const GroupMask& trainable, ModelParams& grad) {
    const ForwardState s = model_forward(cfg, params, raw, proposals, queries);
    const double loss = bce_loss(s.logits, targets);
    const std::size_t n = proposals.size();
    const std::size_t nq = queries.size();
    const std::size_t d = static_cast<std::size_t>(cfg.d_llm);

    Matrix dz(n, nq);
    for (std::size_t k = 0; k < dz.data.size(); ++k) dz.data[k] = logistic(s.logits.data[k]) - targets.data[k];

    const bool train_llm = in_mask(trainable, ParamGroup::Llm);
    const bool train_protocol = in_mask(trainable, ParamGroup::Protocol);
    if (train_llm || train_protocol) {
        for (std::size_t q = 0; q < nq; ++q) {
            for (std::size_t k = 0; k < d; ++k) {
                double g = 0.0;
                for (std::size_t i = 0; i < n; ++i) g += dz(i, q) * s.tokens(i, k);
                if (train_llm) grad.vocab(queries[q], k) += g;
                if (train_protocol) grad.ground[k] += g;
            }
        }
        if (train_llm) {
            for (double v : dz.data) grad.score_bias[0] += v;
        }
    }

    const bool train_conn = in_mask(trainable, ParamGroup::Connector);
    const bool train_hfre = in_mask(trainable, ParamGroup::Hfre) && cfg.use_primary && cfg.use_simplefp;
    const bool train_pri = in_mask(trainable, ParamGroup::PrimaryEncoder) && cfg.use_primary;
    const bool train_aux = in_mask(trainable, ParamGroup::AuxEncoder) && cfg.use_auxiliary;
    if (!(train_conn || train_hfre || train_pri || train_aux)) return loss;

    Matrix dtok(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < nq; ++q) {
            const double g = dz(i, q);
            if (g == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) dtok(i, k) += g * s.queries(q, k);
        }
    }
    ConnectorGrads cg = connector_backward(params.connector, s.hybrid, dtok);
    if (train_conn) {
        for (std::size_t k = 0; k < cg.params.w1.data.size(); ++k) grad.connector.w1.data[k] += cg.params.w1.data[k];
        for (std::size_t k = 0; k < cg.params.b1.size(); ++k) grad.connector.b1[k] += cg.params.b1[k];
        for (std::size_t k = 0; k < cg.params.w2.data.size(); ++k) grad.connector.w2.data[k] += cg.params.w2.data[k];
        for (std::size_t k = 0; k < cg.params.b2.size(); ++k) grad.connector.b2[k] += cg.params.b2[k];
    }

    // The positional embedding is constant in the parameters, so d(hybrid) splits
    // directly into the primary and auxiliary blocks.
    const std::size_t dp = s.f_pri.cols;
    if (train_hfre || train_pri) {
        const Matrix dpri = column_block(cg.input, 0, dp);
        FeatureMap d_last;
        if (cfg.use_simplefp) {
            std::array<FeatureMap, kPyramidLevels> dlev;
            std::size_t off = 0;
            for (int l = 0; l < kPyramidLevels; ++l) {
                const FeatureMap& m = s.pyramid[l];
                dlev[l] = roi_align_pooled_backward(m.channels(), m.height(), m.width(), proposals,
                                                    column_block(dpri, off, static_cast<std::size_t>(m.channels())),
                                                    cfg.roi);
                off += static_cast<std::size_t>(m.channels());
            }
            SimpleFpGrads fg = simple_fp_backward(s.enc.primary, params.simplefp, dlev);
            if (train_hfre) {
                add_into(grad.simplefp.down, fg.params.down);
                add_into(grad.simplefp.same, fg.params.same);
                add_into(grad.simplefp.up2, fg.params.up2);
                add_into(grad.simplefp.up4a, fg.params.up4a);
                add_into(grad.simplefp.up4b, fg.params.up4b);
            }
            d_last = std::move(fg.input);
        } else {
            const FeatureMap& m = s.enc.primary;
            d_last = roi_align_pooled_backward(m.channels(), m.height(), m.width(), proposals, dpri, cfg.roi);
        }
        if (train_pri) {
            ConvGrads pg = conv2d_backward(raw.primary, params.encoders.primary, 1, 0, d_last);
            add_into(grad.encoders.primary, pg.kernel);
        }
    }

    if (train_aux) {
        const Matrix daux = column_block(cg.input, dp, s.f_aux.cols);
        const FeatureMap dfused =
            roi_align_pooled_backward(s.fused.channels(), s.fused.height(), s.fused.width(), proposals, daux, cfg.roi);
        const std::vector<FeatureMap> dlev = aux_fuse_backward(s.enc.aux, dfused);
        for (int l = 0; l < kPyramidLevels; ++l) {
            ConvGrads ag = conv2d_backward(raw.aux[l], params.encoders.aux[l], 1, 0, dlev[l]);
            add_into(grad.encoders.aux[l], ag.kernel);
        }
    }
    return loss;
}

}  // namespace regionlens
