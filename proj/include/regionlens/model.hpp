#pragma once

#include <array>
#include <span>
#include <vector>

#include "regionlens/params.hpp"
#include "regionlens/retrieval.hpp"
#include "regionlens/simworld.hpp"

namespace regionlens {

/// Everything computed on the way from a rendered scene to (region, query) logits.
struct ForwardState {
    EncodedScene enc;
    std::array<FeatureMap, kPyramidLevels> pyramid;  // only with use_simplefp
    FeatureMap fused;                                // only with use_auxiliary
    Matrix f_pri;
    Matrix f_aux;
    Matrix hybrid;
    Matrix tokens;   // N x d_llm region tokens
    Matrix queries;  // Q x d_llm, vocab[c] + ground
    Matrix logits;   // N x Q
};

ForwardState model_forward(const ModelConfig& cfg, const ModelParams& params, const RawScene& raw,
                           std::span<const Box> proposals, std::span<const int> queries);

/// Category queries as the retrieval head sees them: vocab[c] + <ground>.
std::vector<CategoryQuery> category_queries(const ModelConfig& cfg, const ModelParams& params,
                                            std::span<const int> categories);

/// Sum over (region, query) of binary cross-entropy with logits.
double bce_loss(const Matrix& logits, const Matrix& targets);

/// Loss of one sample, accumulating gradients of every group in `trainable`
/// into `grad`. Groups outside the mask receive exactly zero.
double model_loss_and_grad(const ModelConfig& cfg, const ModelParams& params, const RawScene& raw,
                           std::span<const Box> proposals, std::span<const int> queries, const Matrix& targets,
                           const GroupMask& trainable, ModelParams& grad);

double model_loss(const ModelConfig& cfg, const ModelParams& params, const RawScene& raw,
                  std::span<const Box> proposals, std::span<const int> queries, const Matrix& targets);

/// Scores in [0,1] for every (proposal, query) pair.
Matrix model_scores(const ModelConfig& cfg, const ModelParams& params, const RawScene& raw,
                    std::span<const Box> proposals, std::span<const int> queries);

}  // namespace regionlens
