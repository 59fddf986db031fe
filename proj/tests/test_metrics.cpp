#include <doctest.h>

#include "oracles.hpp"
#include "regionlens/metrics.hpp"
#include "sweeps.hpp"

using namespace regionlens;

namespace {

const std::vector<std::string> kCats{"a", "b", "c"};

EvalDetection det(int img, const std::string& c, Box b, double s) { return {img, c, b, s}; }
GroundTruth gt(int img, const std::string& c, Box b) { return {img, c, b}; }

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("iou of hand-computed configurations") {
    const Box a = Box::make(0, 0, 0.5, 0.5), b = Box::make(0, 0.25, 0.5, 0.75);
    CHECK(std::abs(iou(a, b) - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(oracle::iou_by_area(a, b) - 1.0 / 3.0) < 1e-3);
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, Box::make(0.6, 0.6, 0.9, 0.9)) == 0.0);
    CHECK(iou(Box::make(0.2, 0.2, 0.2, 0.2), Box::make(0.2, 0.2, 0.2, 0.2)) == 0.0);
}

TEST_CASE("iou agrees with area summation on random boxes") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        const Box a = oracle::random_box(rng), b = oracle::random_box(rng);
        const double v = iou(a, b);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v == iou(b, a));
        CHECK(std::abs(v - oracle::iou_by_area(a, b)) < 0.02);
    }
}

TEST_CASE("thresholds are 0.50 to 0.95 in steps of 0.05") {
    const auto t = coco_iou_thresholds();
    REQUIRE(t.size() == 10);
    for (int k = 0; k < 10; ++k) CHECK(std::abs(t[k] - (0.5 + 0.05 * k)) < 1e-12);
}

TEST_CASE("basic AP cases") {
    const Box b = Box::make(0.1, 0.1, 0.4, 0.4), c = Box::make(0.6, 0.6, 0.9, 0.9);
    const std::vector<GroundTruth> one{gt(0, "a", b)};
    CHECK(average_precision(std::vector{det(0, "a", b, 0.9)}, one, 0.5) == 1.0);
    CHECK(average_precision(std::vector<EvalDetection>{}, one, 0.5) == 0.0);
    CHECK(average_precision(std::vector{det(0, "a", b, 0.9)}, std::vector<GroundTruth>{}, 0.5) == 0.0);
    // detection on the wrong image does not match
    CHECK(average_precision(std::vector{det(1, "a", b, 0.9)}, one, 0.5) == 0.0);

    const std::vector<GroundTruth> two{gt(0, "a", b), gt(0, "a", c)};
    const double half = average_precision(std::vector{det(0, "a", b, 0.9)}, two, 0.5);
    CHECK(std::abs(half - 51.0 / 101.0) < 1e-12);
    CHECK(std::abs(oracle::ap({det(0, "a", b, 0.9)}, two, 0.5) - 51.0 / 101.0) < 1e-12);
}

TEST_CASE("greedy matching: duplicates become false positives") {
    const Box b = Box::make(0.1, 0.1, 0.4, 0.4);
    const std::vector<GroundTruth> g{gt(0, "a", b)};
    const std::vector<EvalDetection> d{det(0, "a", b, 0.5), det(0, "a", b, 0.9)};
    const MatchResult m = greedy_match(d, g, 0.5);
    CHECK(m.order == std::vector<std::size_t>{1, 0});
    CHECK(m.is_tp == std::vector<bool>{true, false});
    CHECK(m.n_matched == 1);
    CHECK(m.n_gt == 1);
}

TEST_CASE("coco_map on perfect and empty detections") {
    std::mt19937_64 rng(2);
    std::vector<GroundTruth> g;
    std::vector<EvalDetection> d;
    for (int i = 0; i < 12; ++i) {
        const Box b = oracle::random_box(rng);
        g.push_back(gt(i % 3, kCats[i % 3], b));
        d.push_back(det(i % 3, kCats[i % 3], b, 0.5 + 0.01 * i));
    }
    const EvalReport perfect = coco_map(d, g, kCats);
    CHECK(perfect.ap_mean == 1.0);
    CHECK(perfect.recall == 1.0);
    const EvalReport none = coco_map(std::vector<EvalDetection>{}, g, kCats);
    CHECK(none.ap_mean == 0.0);
    CHECK(none.recall == 0.0);
    for (const auto& [t, v] : none.ap_per_iou) CHECK(v == 0.0);
    d.push_back(det(0, "zebra", oracle::random_box(rng), 0.3));
    CHECK_THROWS(coco_map(d, g, kCats));
}

TEST_CASE("report invariants and serialization") {
    std::mt19937_64 rng(3);
    std::vector<GroundTruth> g;
    std::vector<EvalDetection> d;
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 20; ++i) {
        const Box b = oracle::random_box(rng);
        g.push_back(gt(i % 4, kCats[i % 2], b));
        d.push_back(det(i % 4, kCats[i % 2], Box::make(b.x1, b.y1, std::min(1.0, b.x2 + 0.05 * u(rng)), b.y2), u(rng)));
        d.push_back(det(i % 4, kCats[(i + 1) % 3], oracle::random_box(rng), u(rng)));
    }
    const EvalReport r = coco_map(d, g, kCats);
    double mean = 0.0;
    for (const auto& [t, v] : r.ap_per_iou) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        mean += v / r.ap_per_iou.size();
    }
    CHECK(std::abs(mean - r.ap_mean) < 1e-12);
    CHECK(r.per_category.size() == 2);
    const EvalReport back = EvalReport::from_json(r.to_json());
    CHECK(back.ap_mean == r.ap_mean);
    CHECK(back.ap_per_iou == r.ap_per_iou);
    const std::string line = r.tsv_line("x"), header = EvalReport::tsv_header();
    CHECK(std::count(line.begin(), line.end(), '\t') == std::count(header.begin(), header.end(), '\t'));
}

TEST_CASE("AP depends only on score ranks and falls with the threshold") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 50; ++t) {
        std::vector<GroundTruth> g;
        std::vector<EvalDetection> d;
        for (int i = 0; i < 6; ++i) {
            const Box b = oracle::random_box(rng);
            g.push_back(gt(i % 2, "a", b));
            const double s = 0.1 * u(rng);
            d.push_back(det(i % 2, "a", Box::make(std::max(0.0, b.x1 - s), b.y1, b.x2, std::min(1.0, b.y2 + s)), u(rng)));
            d.push_back(det(i % 2, "a", oracle::random_box(rng), u(rng)));
        }
        std::vector<EvalDetection> scaled = d;
        for (auto& x : scaled) x.score *= 3.7;
        double prev = 2.0;
        for (double th : coco_iou_thresholds()) {
            const double a = average_precision(d, g, th);
            CHECK(a == average_precision(scaled, g, th));
            CHECK(a <= prev + 1e-15);
            prev = a;
        }
    }
}

TEST_CASE("exhaustive small-case sweep matches the naive evaluator") {
    const sweep::Result r = sweep::exhaustive_ap();
    CHECK(r.cases > 10000);
    CHECK(r.max_diff < 1e-9);
}

TEST_CASE("counting accuracy") {
    const std::vector<int> a{1, 2, 3, 4};
    CHECK(counting_accuracy(a, a) == 1.0);
    CHECK(counting_accuracy(a, std::vector<int>{0, 0, 0, 0}) == 0.0);
    CHECK(counting_accuracy(a, std::vector<int>{1, 2, 3, 5}) == 0.75);
    CHECK_THROWS(counting_accuracy(a, std::vector<int>{1}));
}

TEST_CASE("coverage recall with and without categories") {
    const Box b = Box::make(0.1, 0.1, 0.4, 0.4);
    const std::vector<GroundTruth> g{gt(0, "a", b), gt(0, "b", Box::make(0.5, 0.5, 0.9, 0.9))};
    const std::vector<EvalDetection> c{det(0, "b", b, 1.0)};
    CHECK(coverage_recall(c, g, 0.5, false) == 0.5);
    CHECK(coverage_recall(c, g, 0.5, true) == 0.0);
}

}
