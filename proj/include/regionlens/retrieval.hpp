#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "regionlens/hfre.hpp"
#include "regionlens/tokenproto.hpp"

namespace regionlens {

struct CategoryQuery {
    std::string name;
    std::vector<double> embedding;
};

/// Names unique, embeddings finite and of equal width.
void validate_queries(std::span<const CategoryQuery> queries);

struct Detection {
    Box box;  // always a copy of proposals[source_region]
    std::string label;
    double confidence = 0.0;
    int source_region = 0;
};

double logistic(double z);

/// (i, q) -> logistic(<token_i, query_q> + bias).
Matrix score_regions(std::span<const RegionToken> tokens, std::span<const CategoryQuery> queries, double bias = 0.0);

struct DecodeOptions {
    double tau = 0.5;
    bool nms = false;  // proposals are assumed deduplicated upstream
    double nms_iou = 0.7;
};

/// One detection per (region, query) with score > tau, sorted by confidence
/// descending, then region index, then query order.
std::vector<Detection> decode_detections(const Matrix& scores, std::span<const Box> proposals,
                                         std::span<const CategoryQuery> queries, const DecodeOptions& opts = {});

/// Number of decoded detections whose label is `query_name`.
int detect_then_count(const Matrix& scores, std::span<const Box> proposals, std::span<const CategoryQuery> queries,
                      const std::string& query_name, const DecodeOptions& opts = {});

/// Every grounded span's regions become confidence-1 detections. Phrases not in
/// phrase_to_label are used verbatim as labels.
std::vector<Detection> grounded_to_detections(const GroundedResponse& resp, std::span<const Box> proposals,
                                              const std::map<std::string, std::string>& phrase_to_label = {});

/// Template emitter: one grounded span per label, regions in ascending index.
GroundedResponse detections_to_grounded(std::span<const Detection> detections);

/// COCO-result style record: {image_id, category, bbox [x, y, w, h], score}.
nlohmann::json detections_to_json(int image_id, std::span<const Detection> detections);

}  // namespace regionlens
