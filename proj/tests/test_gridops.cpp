#include <doctest.h>

#include "oracles.hpp"
#include "regionlens/gridops.hpp"

using namespace regionlens;

TEST_SUITE("gridops") {

TEST_CASE("feature map construction validates shape") {
    CHECK_THROWS_AS(FeatureMap(0, 2, 2), ShapeError);
    CHECK_THROWS_AS(FeatureMap(1, 2, 2, std::vector<double>(3)), ShapeError);
    FeatureMap m(2, 3, 4, 1.5);
    CHECK(m.size() == 24);
    CHECK(m.all_finite());
    m.at(1, 2, 3) = std::nan("");
    CHECK_FALSE(m.all_finite());
}

TEST_CASE("bilinear resize of a constant map stays constant") {
    FeatureMap m(2, 5, 7, 5.0);
    for (auto [h, w] : {std::pair{1, 1}, {3, 9}, {10, 14}, {5, 7}}) {
        const FeatureMap r = bilinear_resize(m, h, w);
        CHECK(r.height() == h);
        for (double v : r.data()) CHECK(v == doctest::Approx(5.0).epsilon(1e-15));
    }
    // down then up on a constant is the identity on values
    const FeatureMap back = bilinear_resize(bilinear_resize(m, 2, 3), 5, 7);
    for (double v : back.data()) CHECK(std::abs(v - 5.0) < 1e-12);
}

TEST_CASE("bilinear resize to the same size is the identity") {
    std::mt19937_64 rng(1);
    const FeatureMap m = oracle::random_map(3, 6, 5, rng);
    const FeatureMap r = bilinear_resize(m, 6, 5);
    for (std::size_t k = 0; k < m.size(); ++k) CHECK(std::abs(r.data()[k] - m.data()[k]) < 1e-12);
}

TEST_CASE("bilinear resize matches the dense sampling oracle") {
    FeatureMap m(1, 2, 2, std::vector<double>{1, 2, 3, 4});
    CHECK(std::abs(bilinear_resize(m, 1, 1).at(0, 0, 0) - oracle::resize(m, 1, 1).at(0, 0, 0)) < 1e-9);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 30; ++t) {
        std::uniform_int_distribution<int> d(1, 9);
        const FeatureMap x = oracle::random_map(2, d(rng), d(rng), rng);
        const int oh = d(rng), ow = d(rng);
        const FeatureMap a = bilinear_resize(x, oh, ow), b = oracle::resize(x, oh, ow);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a.data()[k] - b.data()[k]) < 1e-9);
    }
    CHECK_THROWS_AS(bilinear_resize(m, 0, 3), ShapeError);
}

TEST_CASE("conv2d identity and zero kernels") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        const FeatureMap m = oracle::random_map(3, 4 + t, 5, rng);
        Kernel id(3, 3, 1, 1);
        for (int c = 0; c < 3; ++c) id.w(c, c, 0, 0) = 1.0;
        CHECK(conv2d(m, id, 1, 0) == m);
    }
    Kernel z(2, 1, 3, 3);
    z.bias = {0.25, -1.0};
    const FeatureMap out = conv2d(FeatureMap(1, 4, 4, 7.0), z, 1, 1);
    for (int y = 0; y < 4; ++y) {
        CHECK(out.at(0, y, 2) == 0.25);
        CHECK(out.at(1, y, 1) == -1.0);
    }
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    std::mt19937_64 rng(4);
    const FeatureMap m = oracle::random_map(2, 5, 5, rng);
    for (int stride : {1, 2}) {
        for (int pad : {0, 1, 2}) {
            const Kernel k = oracle::random_kernel(3, 2, 3, 3, rng);
            const FeatureMap a = conv2d(m, k, stride, pad), b = oracle::conv(m, k, stride, pad);
            REQUIRE(a.same_shape(b));
            for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-9);
        }
    }
    CHECK_THROWS_AS(conv2d(m, oracle::random_kernel(1, 3, 1, 1, rng), 1, 0), ShapeError);
    CHECK_THROWS_AS(conv2d(m, oracle::random_kernel(1, 2, 7, 7, rng), 1, 0), ShapeError);
}

TEST_CASE("deconv2d expansion, identity and output size") {
    Kernel ones(1, 1, 2, 2);
    std::fill(ones.weights.begin(), ones.weights.end(), 1.0);
    ones.bias = {0.5};
    const FeatureMap out = deconv2d(FeatureMap(1, 1, 1, 3.0), ones, 2);
    CHECK(out.height() == 2);
    for (double v : out.data()) CHECK(v == 3.5);

    std::mt19937_64 rng(5);
    const FeatureMap m = oracle::random_map(2, 3, 4, rng);
    Kernel id(2, 2, 1, 1);
    id.w(0, 0, 0, 0) = id.w(1, 1, 0, 0) = 1.0;
    CHECK(deconv2d(m, id, 1) == m);
    const FeatureMap big = deconv2d(m, oracle::random_kernel(4, 2, 3, 2, rng), 3);
    CHECK(big.height() == (3 - 1) * 3 + 3);
    CHECK(big.width() == (4 - 1) * 3 + 2);
    CHECK_THROWS_AS(deconv2d(m, oracle::random_kernel(1, 3, 2, 2, rng), 2), ShapeError);
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 40; ++t) {
        std::uniform_int_distribution<int> d(1, 3);
        const int s = d(rng), k = d(rng) + 1, ci = d(rng), co = d(rng);
        const int h = 2 + 2 * d(rng), w = 3 + d(rng);
        Kernel K = oracle::random_kernel(co, ci, k, k, rng);
        std::fill(K.bias.begin(), K.bias.end(), 0.0);
        const FeatureMap x = oracle::random_map(ci, h, w, rng);
        const FeatureMap cx = conv2d(x, K, s, 0);
        const FeatureMap y = oracle::random_map(co, cx.height(), cx.width(), rng);
        const FeatureMap dy = deconv2d(y, K.transposed(), s);
        // rows and columns past the deconv extent are never read by the conv
        REQUIRE(dy.height() <= h);
        REQUIRE(dy.width() <= w);
        double rhs = 0.0;
        for (int c = 0; c < ci; ++c)
            for (int yy = 0; yy < dy.height(); ++yy)
                for (int xx = 0; xx < dy.width(); ++xx) rhs += x.at(c, yy, xx) * dy.at(c, yy, xx);
        CHECK(std::abs(frobenius_dot(cx, y) - rhs) < 1e-8);
    }
}

TEST_CASE("concat channels preserves order and values") {
    std::mt19937_64 rng(7);
    const FeatureMap a = oracle::random_map(2, 3, 3, rng), b = oracle::random_map(3, 3, 3, rng);
    CHECK(concat_channels(std::vector{a}) == a);
    const FeatureMap ab = concat_channels(std::vector{a, b});
    CHECK(ab.channels() == 5);
    for (int c = 0; c < 5; ++c)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) CHECK(ab.at(c, y, x) == (c < 2 ? a.at(c, y, x) : b.at(c - 2, y, x)));
    std::vector<FeatureMap> four{FeatureMap(1, 2, 2), FeatureMap(2, 2, 2), FeatureMap(3, 2, 2), FeatureMap(4, 2, 2)};
    CHECK(concat_channels(four).channels() == 10);
    CHECK_THROWS_AS(concat_channels(std::vector<FeatureMap>{}), ShapeError);
    CHECK_THROWS_AS(concat_channels(std::vector{a, FeatureMap(1, 2, 3)}), ShapeError);
    const std::vector<int> counts{2, 3};
    const auto parts = split_channels(ab, counts);
    CHECK(parts[0] == a);
    CHECK(parts[1] == b);
}

TEST_CASE("backward ops agree with finite differences") {
    std::mt19937_64 rng(8);
    const FeatureMap x = oracle::random_map(2, 5, 4, rng);
    const Kernel K = oracle::random_kernel(3, 2, 3, 3, rng);
    const FeatureMap y = conv2d(x, K, 2, 1);
    const FeatureMap g = oracle::random_map(3, y.height(), y.width(), rng);
    const ConvGrads cg = conv2d_backward(x, K, 2, 1, g);
    const double h = 1e-6;
    for (std::size_t i = 0; i < K.weights.size(); i += 5) {
        Kernel kp = K, km = K;
        kp.weights[i] += h;
        km.weights[i] -= h;
        const double fd = (frobenius_dot(conv2d(x, kp, 2, 1), g) - frobenius_dot(conv2d(x, km, 2, 1), g)) / (2 * h);
        CHECK(std::abs(fd - cg.kernel.weights[i]) < 1e-6);
    }
    for (std::size_t i = 0; i < x.size(); i += 3) {
        FeatureMap xp = x, xm = x;
        xp.data()[i] += h;
        xm.data()[i] -= h;
        const double fd = (frobenius_dot(conv2d(xp, K, 2, 1), g) - frobenius_dot(conv2d(xm, K, 2, 1), g)) / (2 * h);
        CHECK(std::abs(fd - cg.input.data()[i]) < 1e-6);
    }
    const FeatureMap gr = oracle::random_map(2, 9, 7, rng);
    const FeatureMap br = bilinear_resize_backward(gr, 5, 4);
    const FeatureMap probe = oracle::random_map(2, 5, 4, rng);
    CHECK(std::abs(frobenius_dot(bilinear_resize(probe, 9, 7), gr) - frobenius_dot(probe, br)) < 1e-9);

    const Kernel D = oracle::random_kernel(2, 2, 2, 2, rng);
    const FeatureMap dg = oracle::random_map(2, 10, 8, rng);
    const ConvGrads dgr = deconv2d_backward(x, D, 2, dg);
    for (std::size_t i = 0; i < D.weights.size(); i += 3) {
        Kernel kp = D, km = D;
        kp.weights[i] += h;
        km.weights[i] -= h;
        const double fd = (frobenius_dot(deconv2d(x, kp, 2), dg) - frobenius_dot(deconv2d(x, km, 2), dg)) / (2 * h);
        CHECK(std::abs(fd - dgr.kernel.weights[i]) < 1e-6);
    }
}

TEST_CASE("feature map and kernel JSON round trip") {
    std::mt19937_64 rng(9);
    const FeatureMap m = oracle::random_map(2, 3, 4, rng);
    const nlohmann::json j = m;
    CHECK(j.at("channels") == 2);
    CHECK(j.get<FeatureMap>() == m);
    const Kernel k = oracle::random_kernel(2, 3, 1, 2, rng);
    CHECK(nlohmann::json(k).get<Kernel>() == k);
    CHECK_THROWS(nlohmann::json{{"channels", 1}, {"height", 2}, {"width", 2}, {"data", {1, 2, 3}}}.get<FeatureMap>());
}

}
