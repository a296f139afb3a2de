// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "ghr/scene_graph.hpp"
#include "support.hpp"

using namespace ghr;
using ghr::testing::error_code_of;

namespace {

Vocabulary small_vocab() { return Vocabulary({"person", "cup", "food", "table"}, {"holding", "eating", "on"}); }

json person_cup() {
    return json::parse(R"({"frame_id": "f0",
        "objects": [{"id": 1, "label": "person", "bbox": [0.1, 0.1, 0.5, 0.8]},
                    {"id": 2, "label": "cup", "bbox": [0.4, 0.5, 0.1, 0.1]}],
        "relationships": [{"subject": 1, "predicate": "holding", "object": 2}]})");
}

}  // namespace

TEST_CASE("vocabulary indices follow list order") {
    const Vocabulary v = parse_vocabulary(json::parse(R"({"objects": ["person", "cup"], "predicates": ["holding"]})"));
    CHECK(v.num_objects() == 2);
    CHECK(v.object_index("person") == 0);
    CHECK(v.object_index("cup") == 1);
    CHECK(v.object_index("plate") == -1);
    CHECK(v.predicate_index("holding") == 0);
    CHECK(v.is_human(0));
    CHECK_FALSE(v.is_human(1));
}

TEST_CASE("vocabulary of reference size") {
    json doc;
    doc["objects"] = json::array({"person"});
    for (int i = 1; i < 150; ++i) doc["objects"].push_back("o" + std::to_string(i));
    doc["predicates"] = json::array();
    for (int i = 0; i < 50; ++i) doc["predicates"].push_back("p" + std::to_string(i));
    const Vocabulary v = parse_vocabulary(doc);
    CHECK(v.num_objects() == 150);
    CHECK(v.num_predicates() == 50);
    for (int i = 0; i < 150; ++i) CHECK(v.object_index(v.object_classes()[i]) == i);
}

TEST_CASE("vocabulary errors") {
    CHECK(error_code_of([] {
              parse_vocabulary(json::parse(R"({"objects": ["person", "cup", "cup"], "predicates": ["on"]})"));
          }) == ErrorCode::DuplicateClass);
    CHECK(error_code_of([] {
              parse_vocabulary(json::parse(R"({"objects": ["cup"], "predicates": ["on"]})"));
          }) == ErrorCode::UnknownHumanClass);
    CHECK(error_code_of([] { parse_vocabulary(json::parse(R"({"objects": ["person"]})")); }) ==
          ErrorCode::MalformedDocument);
    CHECK(error_code_of([] {
              parse_vocabulary(json::parse(R"({"objects": ["person", 3], "predicates": []})"));
          }) == ErrorCode::MalformedDocument);
}

TEST_CASE("frame with one human holding a cup") {
    const Vocabulary v = small_vocab();
    const FrameSceneGraph g = parse_frame_graph(person_cup(), v);
    REQUIRE(g.nodes.size() == 2);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0] == RelationEdge{1, 0, 2});
    CHECK(frame_stats(g, v) == FrameStats{2, 1, 1});
}

TEST_CASE("frame stats of person, food and table") {
    const Vocabulary v = small_vocab();
    const json doc = json::parse(R"({"frame_id": "g", "objects": [
        {"id": 4, "label": "person", "bbox": [0.0, 0.0, 0.4, 0.9]},
        {"id": 5, "label": "food", "bbox": [0.5, 0.5, 0.1, 0.1]},
        {"id": 6, "label": "table", "bbox": [0.3, 0.6, 0.6, 0.3]}],
        "relationships": [{"subject": 4, "predicate": "eating", "object": 5},
                          {"subject": 5, "predicate": "on", "object": 6}]})");
    CHECK(frame_stats(parse_frame_graph(doc, v), v) == FrameStats{3, 2, 1});
}

TEST_CASE("edge to an absent node is dangling") {
    json doc = person_cup();
    doc["relationships"][0]["object"] = 99;
    CHECK(error_code_of([&] { parse_frame_graph(doc, small_vocab()); }) == ErrorCode::DanglingEdge);
}

TEST_CASE("empty frame is valid") {
    const Vocabulary v = small_vocab();
    const FrameSceneGraph g = parse_frame_graph(json::parse(R"({"frame_id": "e", "objects": []})"), v);
    CHECK(frame_stats(g, v) == FrameStats{0, 0, 0});
}

TEST_CASE("frame validation errors") {
    const Vocabulary v = small_vocab();
    auto code = [&](const json& doc) { return error_code_of([&] { parse_frame_graph(doc, v); }); };

    json unknown = person_cup();
    unknown["objects"][1]["label"] = "plate";
    CHECK(code(unknown) == ErrorCode::UnknownClass);

    json unknown_pred = person_cup();
    unknown_pred["relationships"][0]["predicate"] = "throwing";
    CHECK(code(unknown_pred) == ErrorCode::UnknownClass);

    json dup = person_cup();
    dup["objects"][1]["id"] = 1;
    CHECK(code(dup) == ErrorCode::DuplicateNodeId);

    json loop = person_cup();
    loop["relationships"][0]["object"] = 1;
    CHECK(code(loop) == ErrorCode::SelfLoop);

    for (const auto& box : {json::array({0.7, 0.1, 0.5, 0.2}), json::array({0.1, 0.1, 0.0, 0.2}),
                            json::array({-0.1, 0.1, 0.2, 0.2}), json::array({0.1, 0.1, 0.2})}) {
        json bad = person_cup();
        bad["objects"][1]["bbox"] = box;
        const auto c = code(bad);
        CHECK((c == ErrorCode::MalformedBBox || c == ErrorCode::MalformedDocument));
    }

    json missing = person_cup();
    missing.erase("objects");
    CHECK(code(missing) == ErrorCode::MalformedDocument);
}

TEST_CASE("boxes within tolerance of the border are accepted") {
    json doc = person_cup();
    doc["objects"][1]["bbox"] = json::array({0.5, 0.5, 0.5 + 5e-7, 0.5});
    CHECK_NOTHROW(parse_frame_graph(doc, small_vocab()));
    doc["objects"][1]["bbox"] = json::array({0.5, 0.5, 0.5 + 5e-6, 0.5});
    CHECK(error_code_of([&] { parse_frame_graph(doc, small_vocab()); }) == ErrorCode::MalformedBBox);
}

TEST_CASE("pixel boxes are normalized by width and height") {
    json doc = person_cup();
    doc["width"] = 200;
    doc["height"] = 100;
    doc["objects"][0]["bbox"] = json::array({20, 10, 100, 80});
    const FrameSceneGraph g = parse_frame_graph(doc, small_vocab());
    CHECK(g.nodes[0].bbox.x == doctest::Approx(0.1));
    CHECK(g.nodes[0].bbox.w == doctest::Approx(0.5));
    CHECK(g.nodes[0].bbox.h == doctest::Approx(0.8));
}

TEST_CASE("property: serialization round trip") {
    std::mt19937_64 rng(11);
    const Vocabulary v = ghr::testing::make_vocab(6, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const FrameSceneGraph g = ghr::testing::random_frame(rng, v, 6, 0.4, trial % 3 != 0, trial % 5 == 0, "f");
        const json doc = frame_to_json(g, v);
        CHECK(parse_frame_graph(json::parse(doc.dump()), v) == g);
    }
}

TEST_CASE("property: validation is total") {
    // Any mutation of a valid document either parses or raises ghr::Error.
    std::mt19937_64 rng(5);
    const Vocabulary v = small_vocab();
    const std::vector<json> junk{json(), json(-1), json(3.5), json("x"), json::array(), json::object(),
                                 json(true), json::array({1, 2}), json(1e300)};
    std::uniform_int_distribution<std::size_t> pick(0, junk.size() - 1);
    for (int trial = 0; trial < 500; ++trial) {
        json doc = person_cup();
        const int where = trial % 6;
        const json val = junk[pick(rng)];
        if (where == 0) doc["objects"] = val;
        if (where == 1) doc["objects"][0]["id"] = val;
        if (where == 2) doc["objects"][1]["bbox"] = val;
        if (where == 3) doc["objects"][1]["bbox"][2] = val;
        if (where == 4) doc["relationships"][0]["subject"] = val;
        if (where == 5) doc["relationships"] = val;
        try {
            const FrameSceneGraph g = parse_frame_graph(doc, v);
            CHECK_NOTHROW(validate_frame(g, v));
        } catch (const Error&) {
        } catch (...) {
            FAIL("non-library exception for mutation " << where << " value " << val.dump());
        }
    }
}

TEST_CASE("property: every parsed frame satisfies the invariants") {
    std::mt19937_64 rng(3);
    const Vocabulary v = ghr::testing::make_vocab(5, 2);
    for (int trial = 0; trial < 200; ++trial) {
        const FrameSceneGraph g = ghr::testing::random_frame(rng, v, 6, 0.5, true, false, "f");
        const FrameSceneGraph parsed = parse_frame_graph(frame_to_json(g, v), v);
        for (const auto& e : parsed.edges) {
            CHECK(parsed.position_of(e.subject_id) >= 0);
            CHECK(parsed.position_of(e.object_id) >= 0);
            CHECK(e.subject_id != e.object_id);
        }
        for (const auto& n : parsed.nodes) {
            CHECK(n.bbox.x + n.bbox.w <= 1.0 + kBBoxTolerance);
            CHECK(n.bbox.y + n.bbox.h <= 1.0 + kBBoxTolerance);
            CHECK(n.bbox.w > 0.0);
        }
    }
}
