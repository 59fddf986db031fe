#include "regionlens/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace regionlens {

double iou(const Box& a, const Box& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<double> coco_iou_thresholds() {
    std::vector<double> t;
    for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
    return t;
}

MatchResult greedy_match(std::span<const EvalDetection> dets, std::span<const GroundTruth> gts, double iou_threshold) {
    MatchResult r;
    r.n_gt = gts.size();
    r.order.resize(dets.size());
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    std::vector<bool> taken(gts.size(), false);
    r.is_tp.reserve(dets.size());
    for (std::size_t d : r.order) {
        double best = -1.0;
        std::size_t best_g = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g] || gts[g].image_id != dets[d].image_id) continue;
            const double v = iou(dets[d].box, gts[g].box);
            if (v >= iou_threshold && v > best) {
                best = v;
                best_g = g;
            }
        }
        if (best_g < gts.size()) {
            taken[best_g] = true;
            ++r.n_matched;
        }
        r.is_tp.push_back(best_g < gts.size());
    }
    return r;
}

namespace {

double interpolated_ap(const MatchResult& m) {
    if (m.n_gt == 0) return 0.0;
    std::vector<double> precision, recall;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < m.is_tp.size(); ++k) {
        if (m.is_tp[k]) ++tp;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(m.n_gt));
    }
    // Monotone precision envelope from the right.
    for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
    double sum = 0.0;
    std::size_t k = 0;
    for (int step = 0; step <= 100; ++step) {
        const double r = step / 100.0;
        while (k < recall.size() && recall[k] < r - 1e-12) ++k;
        if (k == recall.size()) break;
        sum += precision[k];
    }
    return sum / 101.0;
}

}  // namespace

double average_precision(std::span<const EvalDetection> dets, std::span<const GroundTruth> gts, double iou_threshold) {
    return interpolated_ap(greedy_match(dets, gts, iou_threshold));
}

EvalReport coco_map(std::span<const EvalDetection> dets, std::span<const GroundTruth> gts,
                    std::span<const std::string> categories) {
    const std::set<std::string> known(categories.begin(), categories.end());
    for (const EvalDetection& d : dets) {
        if (!known.contains(d.category)) throw std::invalid_argument("coco_map: unknown category '" + d.category + "'");
    }
    for (const GroundTruth& g : gts) {
        if (!known.contains(g.category)) throw std::invalid_argument("coco_map: unknown GT category '" + g.category + "'");
    }
    const auto thresholds = coco_iou_thresholds();
    EvalReport report;
    for (double t : thresholds) report.ap_per_iou.emplace_back(t, 0.0);

    for (const std::string& cat : known) {
        std::vector<EvalDetection> cd;
        std::vector<GroundTruth> cg;
        std::copy_if(dets.begin(), dets.end(), std::back_inserter(cd), [&](const auto& d) { return d.category == cat; });
        std::copy_if(gts.begin(), gts.end(), std::back_inserter(cg), [&](const auto& g) { return g.category == cat; });
        if (cg.empty()) continue;
        CategoryReport cr;
        cr.n_gt = cg.size();
        for (double t : thresholds) {
            const MatchResult m = greedy_match(cd, cg, t);
            cr.ap_per_iou.push_back(interpolated_ap(m));
            if (t == thresholds.front()) cr.recall = static_cast<double>(m.n_matched) / static_cast<double>(m.n_gt);
        }
        cr.ap_mean = std::accumulate(cr.ap_per_iou.begin(), cr.ap_per_iou.end(), 0.0) / thresholds.size();
        report.per_category.emplace(cat, std::move(cr));
    }
    if (report.per_category.empty()) return report;

    const double n = static_cast<double>(report.per_category.size());
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        double s = 0.0;
        for (const auto& [_, cr] : report.per_category) s += cr.ap_per_iou[k];
        report.ap_per_iou[k].second = s / n;
    }
    double s = 0.0;
    for (const auto& [_, ap] : report.ap_per_iou) s += ap;
    report.ap_mean = s / static_cast<double>(thresholds.size());
    double r = 0.0;
    for (const auto& [_, cr] : report.per_category) r += cr.recall;
    report.recall = r / n;
    return report;
}

double counting_accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("counting_accuracy: length mismatch");
    if (truth.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double coverage_recall(std::span<const EvalDetection> candidates, std::span<const GroundTruth> gts, double iou_threshold,
                       bool match_category) {
    if (gts.empty()) return 0.0;
    std::size_t covered = 0;
    for (const GroundTruth& g : gts) {
        const bool hit = std::any_of(candidates.begin(), candidates.end(), [&](const EvalDetection& c) {
            return c.image_id == g.image_id && (!match_category || c.category == g.category) &&
                   iou(c.box, g.box) >= iou_threshold;
        });
        covered += hit;
    }
    return static_cast<double>(covered) / static_cast<double>(gts.size());
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["ap_per_iou"] = nlohmann::json::array();
    for (const auto& [t, ap] : ap_per_iou) j["ap_per_iou"].push_back({{"iou", t}, {"ap", ap}});
    j["ap_mean"] = ap_mean;
    j["recall"] = recall;
    j["counting_accuracy"] = counting_accuracy ? nlohmann::json(*counting_accuracy) : nlohmann::json(nullptr);
    j["per_category"] = nlohmann::json::object();
    for (const auto& [name, cr] : per_category) {
        j["per_category"][name] = {{"ap_per_iou", cr.ap_per_iou}, {"ap_mean", cr.ap_mean}, {"recall", cr.recall},
                                   {"n_gt", cr.n_gt}};
    }
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    for (const auto& e : j.at("ap_per_iou")) r.ap_per_iou.emplace_back(e.at("iou").get<double>(), e.at("ap").get<double>());
    r.ap_mean = j.at("ap_mean").get<double>();
    r.recall = j.at("recall").get<double>();
    if (!j.at("counting_accuracy").is_null()) r.counting_accuracy = j.at("counting_accuracy").get<double>();
    for (const auto& [name, c] : j.at("per_category").items()) {
        CategoryReport cr;
        cr.ap_per_iou = c.at("ap_per_iou").get<std::vector<double>>();
        cr.ap_mean = c.at("ap_mean").get<double>();
        cr.recall = c.at("recall").get<double>();
        cr.n_gt = c.at("n_gt").get<std::size_t>();
        r.per_category.emplace(name, std::move(cr));
    }
    return r;
}

std::string EvalReport::tsv_header() { return "name\tap_mean\tap50\tap75\trecall\tcounting_accuracy"; }

std::string EvalReport::tsv_line(const std::string& name) const {
    auto ap_at = [&](double t) {
        for (const auto& [th, ap] : ap_per_iou) {
            if (std::abs(th - t) < 1e-9) return ap;
        }
        return 0.0;
    };
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << name << '\t' << ap_mean << '\t' << ap_at(0.5) << '\t' << ap_at(0.75) << '\t' << recall << '\t';
    if (counting_accuracy) {
        os << *counting_accuracy;
    } else {
        os << "NA";
    }
    return os.str();
}

}  // namespace regionlens
