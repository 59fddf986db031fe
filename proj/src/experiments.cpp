#include "regionlens/experiments.hpp"

#include <algorithm>
#include <sstream>

namespace regionlens {

EvalSet make_eval_set(const ExperimentConfig& cfg, int n_scenes, const ProposalSimConfig& opn, std::uint64_t stream) {
    EvalSet set;
    for (int i = 0; i < n_scenes; ++i) {
        set.scenes.push_back(generate_scene(derive_seed(cfg.seed, stream, i), cfg.world, i));
        set.proposals.push_back(simulate_opn(set.scenes.back(), opn, derive_seed(cfg.seed, stream + 1, i), cfg.world));
    }
    return set;
}

namespace {

std::vector<int> all_categories(int n) {
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) out[c] = c;
    return out;
}

std::vector<GroundTruth> ground_truth(const Scene& s) {
    std::vector<GroundTruth> out;
    for (const SceneObject& o : s.objects) out.push_back({s.image_id, category_name(o.category), o.box});
    return out;
}

}  // namespace

std::vector<Detection> retrieval_detections(const TrainedBundle& bundle, const Scene& scene,
                                            std::span<const Box> proposals, double tau) {
    if (proposals.empty()) return {};
    const ExperimentConfig& cfg = bundle.config;
    const std::vector<int> cats = all_categories(cfg.world.n_categories);
    const RawScene raw = render_scene(scene, cfg.world);
    const Matrix scores = model_scores(cfg.model, bundle.params, raw, proposals, cats);
    const auto queries = category_queries(cfg.model, bundle.params, cats);
    return decode_detections(scores, proposals, queries, {tau});
}

EvalReport evaluate_retrieval(const TrainedBundle& bundle, const EvalSet& set) {
    std::vector<EvalDetection> dets;
    std::vector<GroundTruth> gts;
    for (std::size_t i = 0; i < set.scenes.size(); ++i) {
        const Scene& s = set.scenes[i];
        for (const Detection& d : retrieval_detections(bundle, s, set.proposals[i], kRankingTau)) {
            dets.push_back({s.image_id, d.label, d.box, d.confidence});
        }
        for (GroundTruth& g : ground_truth(s)) gts.push_back(std::move(g));
    }
    return coco_map(dets, gts, category_names(bundle.config.world.n_categories));
}

EvalReport evaluate_baseline(const TrainedBundle& bundle, const EvalSet& set) {
    if (!bundle.has_baseline) throw std::runtime_error("bundle has no trained baseline");
    return regression_baseline_eval(set.scenes, bundle.config.world, bundle.params.encoders, bundle.baseline);
}

std::vector<RecallPoint> recall_ceiling(const TrainedBundle& bundle, const EvalSet& set) {
    std::vector<EvalDetection> dets, props;
    std::vector<GroundTruth> gts;
    for (std::size_t i = 0; i < set.scenes.size(); ++i) {
        const Scene& s = set.scenes[i];
        for (const Detection& d : retrieval_detections(bundle, s, set.proposals[i], bundle.config.tau)) {
            dets.push_back({s.image_id, d.label, d.box, d.confidence});
        }
        for (const Box& b : set.proposals[i]) props.push_back({s.image_id, "", b, 1.0});
        for (GroundTruth& g : ground_truth(s)) gts.push_back(std::move(g));
    }
    std::vector<RecallPoint> out;
    for (double t : coco_iou_thresholds()) {
        out.push_back({t, coverage_recall(dets, gts, t, true), coverage_recall(props, gts, t, false)});
    }
    return out;
}

double rejection_fp_rate(const TrainedBundle& bundle, int n_scenes) {
    const ExperimentConfig& cfg = bundle.config;
    const EvalSet set = make_eval_set(cfg, n_scenes, cfg.opn, 300);
    int queries = 0, false_positive = 0;
    for (std::size_t i = 0; i < set.scenes.size(); ++i) {
        const std::vector<int> present = present_categories(set.scenes[i]);
        std::vector<int> absent;
        for (int c = 0; c < cfg.world.n_categories; ++c) {
            if (!std::binary_search(present.begin(), present.end(), c)) absent.push_back(c);
        }
        if (absent.empty() || set.proposals[i].empty()) continue;
        const RawScene raw = render_scene(set.scenes[i], cfg.world);
        const Matrix scores = model_scores(cfg.model, bundle.params, raw, set.proposals[i], absent);
        const auto q = category_queries(cfg.model, bundle.params, absent);
        const auto dets = decode_detections(scores, set.proposals[i], q, {cfg.tau});
        for (const CategoryQuery& query : q) {
            ++queries;
            if (std::any_of(dets.begin(), dets.end(), [&](const Detection& d) { return d.label == query.name; })) {
                ++false_positive;
            }
        }
    }
    return queries == 0 ? 0.0 : static_cast<double>(false_positive) / queries;
}

double counting_accuracy_noiseless(const TrainedBundle& bundle, int n_scenes) {
    const ExperimentConfig& cfg = bundle.config;
    std::vector<int> predicted, truth;
    for (int i = 0; i < n_scenes; ++i) {
        const Scene s = generate_scene(derive_seed(cfg.seed, 400, i), cfg.world, i);
        std::vector<Box> proposals;
        for (const SceneObject& o : s.objects) proposals.push_back(o.box);
        const std::vector<int> present = present_categories(s);
        const RawScene raw = render_scene(s, cfg.world);
        const Matrix scores = model_scores(cfg.model, bundle.params, raw, proposals, present);
        const auto q = category_queries(cfg.model, bundle.params, present);
        for (std::size_t k = 0; k < present.size(); ++k) {
            predicted.push_back(detect_then_count(scores, proposals, q, q[k].name, {cfg.tau}));
            truth.push_back(static_cast<int>(std::count_if(s.objects.begin(), s.objects.end(), [&](const SceneObject& o) {
                return o.category == present[k];
            })));
        }
    }
    return counting_accuracy(predicted, truth);
}

nlohmann::json BenchmarkResult::to_json() const {
    return {{"retrieval", retrieval.to_json()},
            {"baseline", baseline.to_json()},
            {"rejection_fp_rate", rejection_fp_rate},
            {"counting_accuracy", counting_accuracy},
            {"ap_gap", retrieval.ap_mean - baseline.ap_mean}};
}

std::string BenchmarkResult::tsv() const {
    return EvalReport::tsv_header() + "\n" + retrieval.tsv_line("retrieval") + "\n" + baseline.tsv_line("baseline") +
           "\n";
}

BenchmarkResult run_benchmark(const TrainedBundle& bundle) {
    const ExperimentConfig& cfg = bundle.config;
    const EvalSet set = make_eval_set(cfg, cfg.eval_scenes, cfg.opn);
    BenchmarkResult r;
    r.retrieval = evaluate_retrieval(bundle, set);
    r.baseline = evaluate_baseline(bundle, set);
    r.rejection_fp_rate = rejection_fp_rate(bundle, cfg.eval_scenes);
    r.counting_accuracy = counting_accuracy_noiseless(bundle, cfg.eval_scenes);
    r.retrieval.counting_accuracy = r.counting_accuracy;
    return r;
}

std::vector<AblationVariant> ablation_variants() {
    return {{"hybrid", true, true, true},
            {"hybrid_no_simplefp", true, true, false},
            {"primary_only", true, false, true},
            {"primary_only_no_simplefp", true, false, false},
            {"auxiliary_only", false, true, true}};
}

std::vector<AblationRow> run_ablations(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds) {
    std::vector<AblationRow> rows;
    for (const AblationVariant& v : ablation_variants()) {
        AblationRow row{v.name, seeds, {}, 0.0};
        for (std::uint64_t seed : seeds) {
            ExperimentConfig c = cfg;
            c.seed = seed;
            c.model.use_primary = v.use_primary;
            c.model.use_auxiliary = v.use_auxiliary;
            c.model.use_simplefp = v.use_simplefp;
            const TrainResult tr = train(c, false);
            row.ap.push_back(evaluate_retrieval(tr.bundle, make_eval_set(c, c.eval_scenes, c.opn)).ap_mean);
        }
        for (double a : row.ap) row.mean_ap += a;
        row.mean_ap /= static_cast<double>(std::max<std::size_t>(row.ap.size(), 1));
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json ablations_to_json(const std::vector<AblationRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const AblationRow& r : rows) j.push_back({{"variant", r.name}, {"seeds", r.seeds}, {"ap", r.ap}, {"mean_ap", r.mean_ap}});
    return j;
}

std::string ablations_tsv(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "variant\tmean_ap";
    if (!rows.empty()) {
        for (std::uint64_t s : rows.front().seeds) out << "\tseed" << s;
    }
    out << '\n';
    for (const AblationRow& r : rows) {
        out << r.name << '\t' << r.mean_ap;
        for (double a : r.ap) out << '\t' << a;
        out << '\n';
    }
    return out.str();
}

}  // namespace regionlens
