#include "regionlens/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "regionlens/metrics.hpp"

namespace regionlens {

void validate_queries(std::span<const CategoryQuery> queries) {
    std::set<std::string> names;
    for (const CategoryQuery& q : queries) {
        if (!names.insert(q.name).second) throw ShapeError("duplicate category query name: " + q.name);
        if (q.embedding.size() != queries.front().embedding.size()) {
            throw ShapeError("category query embeddings differ in width");
        }
        for (double v : q.embedding) {
            if (!std::isfinite(v)) throw ShapeError("non-finite embedding in query " + q.name);
        }
    }
}

double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Matrix score_regions(std::span<const RegionToken> tokens, std::span<const CategoryQuery> queries, double bias) {
    validate_queries(queries);
    Matrix scores(tokens.size(), queries.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i].embedding;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            const auto& e = queries[q].embedding;
            if (e.size() != t.size()) {
                throw ShapeError("score_regions: token width " + std::to_string(t.size()) + " != query width " +
                                 std::to_string(e.size()));
            }
            double dot = bias;
            for (std::size_t k = 0; k < t.size(); ++k) dot += t[k] * e[k];
            scores(i, q) = logistic(dot);
        }
    }
    return scores;
}

namespace {

void check_decode_args(const Matrix& scores, std::span<const Box> proposals, std::span<const CategoryQuery> queries,
                       const DecodeOptions& opts) {
    if (!(opts.tau > 0.0 && opts.tau < 1.0)) throw std::invalid_argument("decode_detections: tau must be in (0,1)");
    if (scores.rows != proposals.size() || scores.cols != queries.size()) {
        throw ShapeError("decode_detections: score matrix shape does not match proposals x queries");
    }
}

std::vector<Detection> class_nms(std::vector<Detection> dets, double iou_threshold) {
    std::vector<Detection> kept;
    for (Detection& d : dets) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return k.label == d.label && iou(k.box, d.box) > iou_threshold;
        });
        if (!suppressed) kept.push_back(std::move(d));
    }
    return kept;
}

}  // namespace

std::vector<Detection> decode_detections(const Matrix& scores, std::span<const Box> proposals,
                                         std::span<const CategoryQuery> queries, const DecodeOptions& opts) {
    check_decode_args(scores, proposals, queries, opts);
    struct Hit {
        double score;
        std::size_t region;
        std::size_t query;
    };
    std::vector<Hit> hits;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        for (std::size_t q = 0; q < scores.cols; ++q) {
            if (scores(i, q) > opts.tau) hits.push_back({scores(i, q), i, q});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.region != b.region) return a.region < b.region;
        return a.query < b.query;
    });
    std::vector<Detection> out;
    out.reserve(hits.size());
    for (const Hit& h : hits) {
        out.push_back({proposals[h.region], queries[h.query].name, h.score, static_cast<int>(h.region)});
    }
    if (opts.nms) out = class_nms(std::move(out), opts.nms_iou);
    return out;
}

int detect_then_count(const Matrix& scores, std::span<const Box> proposals, std::span<const CategoryQuery> queries,
                      const std::string& query_name, const DecodeOptions& opts) {
    const auto dets = decode_detections(scores, proposals, queries, opts);
    return static_cast<int>(
        std::count_if(dets.begin(), dets.end(), [&](const Detection& d) { return d.label == query_name; }));
}

std::vector<Detection> grounded_to_detections(const GroundedResponse& resp, std::span<const Box> proposals,
                                              const std::map<std::string, std::string>& phrase_to_label) {
    std::vector<Detection> out;
    for (const auto& [phrase, regions] : bindings(resp)) {
        const auto it = phrase_to_label.find(phrase);
        const std::string& label = it == phrase_to_label.end() ? phrase : it->second;
        for (int r : regions) {
            if (r < 0 || static_cast<std::size_t>(r) >= proposals.size()) {
                throw ProtocolError("grounded_to_detections: region " + std::to_string(r) + " out of range for " +
                                    std::to_string(proposals.size()) + " proposals");
            }
            out.push_back({proposals[r], label, 1.0, r});
        }
    }
    return out;
}

GroundedResponse detections_to_grounded(std::span<const Detection> detections) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<int>> regions;
    for (const Detection& d : detections) {
        auto [it, inserted] = regions.try_emplace(d.label);
        if (inserted) order.push_back(d.label);
        if (std::find(it->second.begin(), it->second.end(), d.source_region) == it->second.end()) {
            it->second.push_back(d.source_region);
        }
    }
    GroundedResponse resp;
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto& idx = regions[order[k]];
        std::sort(idx.begin(), idx.end());
        resp.nodes.emplace_back(Text{k == 0 ? "Found " : ", "});
        resp.nodes.emplace_back(GroundedSpan{order[k], idx});
    }
    if (!resp.nodes.empty()) resp.nodes.emplace_back(Text{"."});
    return resp;
}

nlohmann::json detections_to_json(int image_id, std::span<const Detection> detections) {
    nlohmann::json out = nlohmann::json::array();
    for (const Detection& d : detections) {
        out.push_back({{"image_id", image_id},
                       {"category", d.label},
                       {"bbox", {d.box.x1, d.box.y1, d.box.width(), d.box.height()}},
                       {"score", d.confidence},
                       {"source_region", d.source_region}});
    }
    return out;
}

}  // namespace regionlens
