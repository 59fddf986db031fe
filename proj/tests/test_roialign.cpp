#include <doctest.h>

#include "oracles.hpp"
#include "regionlens/roialign.hpp"

using namespace regionlens;

TEST_SUITE("roialign") {

TEST_CASE("box construction clamps and rejects inverted corners") {
    const Box b = Box::make(-0.2, 0.1, 1.3, 0.9, 0.7, 3);
    CHECK(b.x1 == 0.0);
    CHECK(b.x2 == 1.0);
    CHECK(b.valid());
    CHECK_THROWS(Box::make(0.6, 0.1, 0.5, 0.9));
    const nlohmann::json j = b;
    CHECK(j.size() == 6);
    CHECK(j.get<Box>() == b);
    CHECK(nlohmann::json(Box::make(0, 0, 1, 1))[4].is_null());
}

TEST_CASE("constant map gives constant bins and rows") {
    const FeatureMap m(2, 6, 5, 5.0);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        const Box b = oracle::random_box(rng);
        const FeatureMap bins = roi_align(m, b);
        for (double v : bins.data()) CHECK(v == doctest::Approx(5.0));
    }
    const std::vector<Box> boxes{oracle::random_box(rng), oracle::random_box(rng)};
    const Matrix rows = roi_align_pooled(m, boxes);
    for (double v : rows.data) CHECK(v == doctest::Approx(5.0));
}

TEST_CASE("zero-area box at a pixel center samples that pixel") {
    std::mt19937_64 rng(2);
    const FeatureMap m = oracle::random_map(3, 8, 8, rng);
    // pixel (y=5, x=2) has center (2.5/8, 5.5/8) in normalized coordinates
    const Box b = Box::make(2.5 / 8, 5.5 / 8, 2.5 / 8, 5.5 / 8);
    const FeatureMap out = roi_align(m, b);
    for (int c = 0; c < 3; ++c)
        for (double v : out.channel(c)) CHECK(std::abs(v - m.at(c, 5, 2)) < 1e-12);
}

TEST_CASE("roi_align matches the naive oracle on random cases") {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const FeatureMap m = oracle::random_map(3, 8, 8, rng);
        const Box b = oracle::random_box(rng);
        const RoiConfig cfg{1 + t % 7, 1 + t % 3};
        const FeatureMap a = roi_align(m, b, cfg);
        const FeatureMap o = oracle::roi_align(m, b, cfg.pool_size, cfg.sampling_ratio);
        for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a.data()[k] - o.data()[k]));
        const std::vector<Box> one{b};
        const Matrix p = roi_align_pooled(m, one, cfg);
        const auto op = oracle::roi_pooled(m, b, cfg.pool_size, cfg.sampling_ratio);
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(p(0, c) - op[c]));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("full-image box on a 2x2 map pools to the oracle mean") {
    const FeatureMap m(1, 2, 2, std::vector<double>{1, 2, 3, 4});
    const std::vector<Box> full{Box::make(0, 0, 1, 1)};
    const double v = roi_align_pooled(m, full)(0, 0);
    CHECK(std::abs(v - oracle::roi_pooled(m, full[0], 7, 2)[0]) < 1e-12);
    CHECK(v == doctest::Approx(2.5).epsilon(0.01));
}

TEST_CASE("pooled rows follow box order; identical boxes give identical rows") {
    std::mt19937_64 rng(4);
    const FeatureMap m = oracle::random_map(4, 8, 8, rng);
    const Box a = oracle::random_box(rng), b = oracle::random_box(rng);
    const std::vector<Box> boxes{a, b, a};
    const Matrix p = roi_align_pooled(m, boxes);
    CHECK(p.rows == 3);
    for (int c = 0; c < 4; ++c) CHECK(p(0, c) == p(2, c));
    CHECK_THROWS_AS(roi_align_pooled(m, std::vector<Box>{}), ShapeError);
}

TEST_CASE("pooled features are convex combinations of map values") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const FeatureMap m = oracle::random_map(2, 7, 9, rng);
        const std::vector<Box> b{oracle::random_box(rng)};
        const Matrix p = roi_align_pooled(m, b);
        for (int c = 0; c < 2; ++c) {
            const auto ch = m.channel(c);
            CHECK(p(0, c) >= *std::min_element(ch.begin(), ch.end()) - 1e-12);
            CHECK(p(0, c) <= *std::max_element(ch.begin(), ch.end()) + 1e-12);
        }
    }
}

TEST_CASE("whole-pixel translation of content and box leaves the pooled vector unchanged") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.2, 0.4);
    for (int t = 0; t < 30; ++t) {
        const FeatureMap m = oracle::random_map(2, 16, 16, rng);
        FeatureMap shifted(2, 16, 16);
        const int dx = 3, dy = 2;
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) shifted.at(c, y, x) = m.at(c, (y - dy + 16) % 16, (x - dx + 16) % 16);
        const double x1 = u(rng), y1 = u(rng);
        const std::vector<Box> a{Box::make(x1, y1, x1 + 0.3, y1 + 0.25)};
        const std::vector<Box> b{Box::make(x1 + dx / 16.0, y1 + dy / 16.0, x1 + 0.3 + dx / 16.0, y1 + 0.25 + dy / 16.0)};
        const Matrix pa = roi_align_pooled(m, a), pb = roi_align_pooled(shifted, b);
        for (int c = 0; c < 2; ++c) CHECK(std::abs(pa(0, c) - pb(0, c)) < 1e-9);
    }
}

TEST_CASE("pooled backward is the adjoint of pooled forward") {
    std::mt19937_64 rng(7);
    const FeatureMap m = oracle::random_map(3, 6, 5, rng);
    const std::vector<Box> boxes{oracle::random_box(rng), oracle::random_box(rng), Box::make(0, 0, 1, 1)};
    Matrix g(3, 3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (double& v : g.data) v = u(rng);
    const Matrix p = roi_align_pooled(m, boxes);
    double lhs = 0.0;
    for (std::size_t k = 0; k < p.data.size(); ++k) lhs += p.data[k] * g.data[k];
    const FeatureMap back = roi_align_pooled_backward(3, 6, 5, boxes, g);
    CHECK(std::abs(lhs - frobenius_dot(m, back)) < 1e-10);
}

TEST_CASE("config validation") {
    CHECK_THROWS((RoiConfig{0, 2}.validate()));
    CHECK_THROWS((RoiConfig{7, 0}.validate()));
    CHECK_NOTHROW((RoiConfig{}.validate()));
}

}
