#include <doctest.h>

#include "generators.hpp"
#include "regionlens/tokenproto.hpp"

using namespace regionlens;

namespace {

const char* kExample = "The <ground>people</ground><object><region2><region10></object> are dancing.";

std::vector<RegionToken> tokens(std::vector<int> idx) {
    std::vector<RegionToken> out;
    for (int i : idx) out.push_back({{0.0, 1.0}, i});
    return out;
}

GrammarError expect_error(std::string_view s, int n) {
    try {
        parse_grounded(s, n);
    } catch (const GrammarError& e) {
        return e;
    }
    FAIL("expected a GrammarError for: " << std::string(s));
    return GrammarError(0, "", "");
}

}  // namespace

TEST_SUITE("tokenproto") {

TEST_CASE("input sequence layout") {
    const auto empty = build_input_sequence(4, {}, {"hi"});
    REQUIRE(empty.elements.size() == 4);
    CHECK(std::holds_alternative<ImageTokenBlock>(empty.elements[0]));
    CHECK(std::holds_alternative<Newline>(empty.elements[1]));
    CHECK(std::holds_alternative<Newline>(empty.elements[2]));
    CHECK(std::get<TextToken>(empty.elements[3]).text == "hi");

    const auto two = build_input_sequence(1, tokens({0, 1}), {"a", "b"});
    CHECK(two.region_count == 2);
    CHECK(two.elements[2] == SequenceElement{RegionIndexToken{0}});
    CHECK(two.elements[3] == SequenceElement{RegionTokenSlot{0}});
    CHECK(two.elements[4] == SequenceElement{RegionIndexToken{1}});
    CHECK(two.elements[5] == SequenceElement{RegionTokenSlot{1}});
    CHECK_NOTHROW(two.validate());
    CHECK(two.render().find("<region0><region_token><region1><region_token>") != std::string::npos);
}

TEST_CASE("input sequence rejects bad region orderings unless canonicalizing") {
    CHECK_THROWS_AS(build_input_sequence(1, tokens({1, 0}), {}), ProtocolError);
    CHECK_THROWS_AS(build_input_sequence(1, tokens({0, 0}), {}), ProtocolError);
    CHECK_THROWS_AS(build_input_sequence(1, tokens({0, 2}), {}), ProtocolError);
    const auto canon = build_input_sequence(1, tokens({2, 0, 1}), {}, RegionOrder::Canonicalize);
    CHECK(canon.elements[2] == SequenceElement{RegionIndexToken{0}});
    CHECK(canon.elements[6] == SequenceElement{RegionIndexToken{2}});
    CHECK_THROWS_AS(build_input_sequence(1, tokens({0, 0}), {}, RegionOrder::Canonicalize), ProtocolError);

    RegionTokenSequence broken = build_input_sequence(1, tokens({0, 1}), {});
    std::swap(broken.elements[2], broken.elements[3]);
    CHECK_THROWS_AS(broken.validate(), ProtocolError);
}

TEST_CASE("parse the reference example") {
    const auto r = parse_grounded(kExample, 11);
    REQUIRE(r.nodes.size() == 3);
    CHECK(r.nodes[0] == ResponseNode{Text{"The "}});
    CHECK(r.nodes[1] == ResponseNode{GroundedSpan{"people", {2, 10}}});
    CHECK(r.nodes[2] == ResponseNode{Text{" are dancing."}});
    CHECK(serialize_grounded(r) == kExample);
    const auto b = bindings(r);
    REQUIRE(b.size() == 1);
    CHECK(b[0].first == "people");
    CHECK(b[0].second == std::vector<int>{2, 10});
    // region 10 does not exist among 10 regions
    CHECK(expect_error(kExample, 10).production() == "region_ref");
}

TEST_CASE("simple parses and serializations") {
    CHECK(parse_grounded("hello", 0).nodes == std::vector<ResponseNode>{Text{"hello"}});
    CHECK(parse_grounded("", 0).nodes.empty());
    CHECK(serialize_grounded({{Text{"hi"}}}) == "hi");
    CHECK(serialize_grounded({{GroundedSpan{"people", {2, 10}}}}) ==
          "<ground>people</ground><object><region2><region10></object>");
    const auto bare = parse_grounded("see <region3> there", 4);
    CHECK(bare.nodes[1] == ResponseNode{BareRegionRef{3}});
    const auto two = parse_grounded("<ground>a</ground><object><region0></object> and "
                                    "<ground>b</ground><object><region1></object>", 2);
    const auto b = bindings(two);
    REQUIRE(b.size() == 2);
    CHECK(b[0].first == "a");
    CHECK(b[1].first == "b");
    CHECK(bindings(parse_grounded("nothing here", 0)).empty());
}

TEST_CASE("grammar violations produce structured errors") {
    struct Case {
        const char* text;
        int n;
        std::size_t offset;
        const char* production;
    };
    const Case cases[] = {
        {"<ground>x</ground>", 3, 18, "grounded_span"},
        {"<ground>x</ground> <object><region0></object>", 3, 18, "grounded_span"},
        {"<ground>x", 3, 0, "grounded_span"},
        {"<ground>x</ground><object></object>", 3, 26, "grounded_span"},
        {"<ground>x</ground><object><region0>", 3, 18, "grounded_span"},
        {"<ground>a<ground>b</ground></ground>", 3, 9, "grounded_span"},
        {"<ground></ground><object><region0></object>", 3, 8, "grounded_span"},
        {"<ground>x</ground><object><region1><region1></object>", 3, 35, "grounded_span"},
        {"<region5>", 3, 0, "region_ref"},
        {"<region>", 3, 7, "region_ref"},
        {"<region01>", 3, 7, "region_ref"},
        {"<region 1>", 3, 7, "region_ref"},
        {"a > b", 3, 2, "text"},
        {"a </object>", 3, 2, "response"},
        {"<b>", 3, 0, "response"},
    };
    for (const Case& c : cases) {
        CAPTURE(c.text);
        const GrammarError e = expect_error(c.text, c.n);
        CHECK(e.offset() == c.offset);
        CHECK(e.production() == c.production);
    }
}

TEST_CASE("serializer rejects ASTs with no valid string") {
    CHECK_THROWS_AS(serialize_grounded({{GroundedSpan{"x", {}}}}), GrammarError);
    CHECK_THROWS_AS(serialize_grounded({{GroundedSpan{"", {0}}}}), GrammarError);
    CHECK_THROWS_AS(serialize_grounded({{GroundedSpan{"x", {1, 1}}}}), GrammarError);
    CHECK_THROWS_AS(serialize_grounded({{Text{"a<b"}}}), GrammarError);
    CHECK_THROWS_AS(serialize_grounded({{Text{"a"}, Text{"b"}}}), GrammarError);
    CHECK_THROWS_AS(serialize_grounded({{Text{""}}}), GrammarError);
    CHECK_THROWS_AS(serialize_grounded({{BareRegionRef{-1}}}), GrammarError);
}

TEST_CASE("round trip over 10k generated responses") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 10000; ++t) {
        const int n = 1 + static_cast<int>(rng() % 16);
        const GroundedResponse ast = gen::random_response(rng, n);
        const std::string s = serialize_grounded(ast);
        const GroundedResponse back = parse_grounded(s, n);
        REQUIRE(back == ast);
        REQUIRE(serialize_grounded(back) == s);
    }
}

TEST_CASE("mutated strings either parse and round trip or fail with an in-range offset") {
    std::mt19937_64 rng(77);
    int errors = 0;
    for (int t = 0; t < 10000; ++t) {
        const std::string m = gen::mutate(serialize_grounded(gen::random_response(rng, 12)), rng);
        try {
            const GroundedResponse r = parse_grounded(m, 12);
            REQUIRE(serialize_grounded(r) == m);
        } catch (const GrammarError& e) {
            REQUIRE(e.offset() <= m.size());
            REQUIRE_FALSE(e.production().empty());
            ++errors;
        }
    }
    CHECK(errors > 5000);
}

TEST_CASE("invalidating mutations never parse") {
    std::mt19937_64 rng(78);
    for (int t = 0; t < 10000; ++t) {
        const std::string m = gen::invalidate(serialize_grounded(gen::random_response(rng, 12)), 12, rng);
        CAPTURE(m);
        CHECK_THROWS_AS(parse_grounded(m, 12), GrammarError);
    }
}

TEST_CASE("responses validate against the paired input sequence") {
    const auto seq = build_input_sequence(1, tokens({0, 1, 2}), {});
    CHECK_NOTHROW(validate_against(parse_grounded("<region2>", 3), seq));
    CHECK_THROWS_AS(validate_against(parse_grounded(kExample, 11), seq), ProtocolError);
    CHECK(region_tag(17) == "<region17>");
}

}
