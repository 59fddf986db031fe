#include <doctest.h>

#include "regionlens/experiments.hpp"
#include "small_config.hpp"

using namespace regionlens;

TEST_SUITE("experiments") {

TEST_CASE("recall ceiling holds for a briefly trained model") {
    const TrainResult r = train(small_config(), true);
    const EvalSet set = make_eval_set(r.bundle.config, 10, r.bundle.config.opn);
    const auto points = recall_ceiling(r.bundle, set);
    REQUIRE(points.size() == 10);
    for (const auto& p : points) CHECK(p.detection_recall <= p.proposal_recall);
    for (const Detection& d : retrieval_detections(r.bundle, set.scenes[0], set.proposals[0], 0.01)) {
        CHECK(std::any_of(set.proposals[0].begin(), set.proposals[0].end(), [&](const Box& b) { return b == d.box; }));
    }
}

TEST_CASE("eval sets are reproducible and disjoint from training") {
    const ExperimentConfig c = small_config();
    const EvalSet a = make_eval_set(c, 5, c.opn), b = make_eval_set(c, 5, c.opn);
    CHECK(a.scenes == b.scenes);
    const auto pool = training_pool(c);
    for (const auto& s : a.scenes)
        for (const auto& t : pool) CHECK_FALSE(s.seed == t.scene.seed);
}

TEST_CASE("benchmark report fields are in range") {
    const TrainResult r = train(small_config(), true);
    TrainedBundle b = r.bundle;
    b.config.eval_scenes = 4;
    const BenchmarkResult res = run_benchmark(b);
    for (double v : {res.retrieval.ap_mean, res.baseline.ap_mean, res.rejection_fp_rate, res.counting_accuracy}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    const nlohmann::json j = res.to_json();
    CHECK(j.contains("ap_gap"));
    CHECK(res.tsv().find('\t') != std::string::npos);
}

TEST_CASE("ablation variants") {
    const auto v = ablation_variants();
    REQUIRE(v.size() == 5);
    for (const auto& a : v) CHECK((a.use_primary || a.use_auxiliary));
    ExperimentConfig c = small_config();
    c.stage1_steps = 2;
    c.stage2_steps = 1;
    c.eval_scenes = 2;
    const auto rows = run_ablations(c, {1, 2});
    REQUIRE(rows.size() == 5);
    for (const auto& r : rows) {
        CHECK(r.ap.size() == 2);
        CHECK(std::abs(r.mean_ap - (r.ap[0] + r.ap[1]) / 2) < 1e-12);
    }
    CHECK(ablations_to_json(rows).size() == 5);
}

}
