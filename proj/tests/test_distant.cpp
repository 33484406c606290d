#include <doctest.h>

#include "bond/distant_labeler.hpp"
#include "support.hpp"

using namespace bond;

namespace {

const LabelSchema kSchema({"PER", "LOC", "ORG", "MISC"});

LabelId L(const char* name) { return *kSchema.find_label(name); }

Gazetteer gaz(std::initializer_list<std::pair<const char*, const char*>> entries) {
    Gazetteer g;
    for (const auto& [type, phrase] : entries) g.add(type, phrase);
    return g;
}

std::vector<CandidateSpan> spans_of(const std::string& text) {
    return generate_candidates(Sentence::from_text(text));
}

}  // namespace

TEST_CASE("load_gazetteer reads and dedups case-folded phrases") {
    testing::TempDir dir("gaz");
    dir.write("a.txt", "New York\nParis\n");
    dir.write("dup.txt", "Paris\nparis\n\n# comment\n");
    auto g = load_gazetteer((dir / "a.txt").string(), "LOC");
    CHECK(g.entries["LOC"].size() == 2);
    CHECK(g.entries["LOC"].count(Phrase{"new", "york"}) == 1);
    auto d = load_gazetteer((dir / "dup.txt").string(), "LOC");
    CHECK(d.size() == 1);

    dir.write("b.txt", "Rome\nParis\n");
    g.merge(load_gazetteer((dir / "b.txt").string(), "LOC"));
    CHECK(g.entries["LOC"].size() == 3);

    std::string warning;
    dir.write("empty.txt", "\n# nothing\n");
    CHECK(load_gazetteer((dir / "empty.txt").string(), "LOC", &warning).size() == 0);
    CHECK_FALSE(warning.empty());
    CHECK_THROWS_AS(load_gazetteer((dir / "missing.txt").string(), "LOC"), IoError);
}

TEST_CASE("load_gazetteer_dir maps file stems to schema types") {
    testing::TempDir dir("gazdir");
    dir.write("LOC.txt", "Paris\n");
    dir.write("LOC_extra.txt", "Rome\n");
    dir.write("ORG.txt", "Acme\n");
    dir.write("notes.md", "ignored\n");
    auto g = load_gazetteer_dir(dir.path().string(), kSchema);
    CHECK(g.entries["LOC"].size() == 2);
    CHECK(g.entries["ORG"].size() == 1);
}

TEST_CASE("generate_candidates") {
    CHECK(spans_of("I love New York .") == std::vector<CandidateSpan>{{2, 3, CandidateOrigin::Rule}});
    CHECK(spans_of("hello world").empty());
    CHECK(spans_of("EU rejects German call") ==
          std::vector<CandidateSpan>{{0, 0, CandidateOrigin::Rule}, {2, 2, CandidateOrigin::Rule}});
    // The sentence-initial token joins a following capitalized run.
    CHECK(spans_of("Acme Corp. said") == std::vector<CandidateSpan>{{0, 1, CandidateOrigin::Rule}});
}

TEST_CASE("match_gazetteer") {
    const auto s1 = Sentence::from_text("I love New York .");
    GazetteerMatcher loc({gaz({{"LOC", "new york"}})}, kSchema);
    auto m = match_gazetteer(s1, loc);
    REQUIRE(m.size() == 1);
    CHECK(m[0].start == 2);
    CHECK(m[0].end == 3);
    CHECK(m[0].type == 1);
    CHECK_FALSE(m[0].ambiguous);

    GazetteerMatcher longest({gaz({{"LOC", "new york"}, {"ORG", "new york times"}})}, kSchema);
    m = match_gazetteer(Sentence::from_text("he reads the New York Times daily"), longest);
    REQUIRE(m.size() == 1);
    CHECK(m[0].start == 3);
    CHECK(m[0].end == 5);
    CHECK(m[0].type == 2);

    GazetteerMatcher amb({gaz({{"LOC", "liverpool"}, {"ORG", "liverpool"}})}, kSchema);
    m = match_gazetteer(Sentence::from_text("Liverpool won"), amb);
    REQUIRE(m.size() == 1);
    CHECK(m[0].ambiguous);
    CHECK(m[0].candidate_types == std::set<std::size_t>{1, 2});
}

TEST_CASE("match_gazetteer resolves partial overlaps by length then position") {
    GazetteerMatcher g({gaz({{"LOC", "a b"}, {"ORG", "b c d"}, {"PER", "d e"}})}, kSchema);
    auto m = match_gazetteer(Sentence::from_text("a b c d e"), g);
    REQUIRE(m.size() == 1);
    CHECK(m[0].start == 1);
    CHECK(m[0].end == 3);
}

TEST_CASE("apply_stamp_rules") {
    const auto rules = parse_stamp_rules("Inc.\tORG\ttail\nDr.\tPER\thead\n", kSchema);
    REQUIRE(rules.size() == 2);
    const auto s = Sentence::from_text("Acme Inc. hired Dr. Who Inc.");
    auto out = apply_stamp_rules({{0, 1, CandidateOrigin::Rule}}, rules, s);
    CHECK(out == std::vector<EntitySpan>{{0, 1, 2}});
    CHECK(apply_stamp_rules({{3, 3, CandidateOrigin::Rule}}, rules, Sentence::from_text("a b c Acme")).empty());
    // Head says PER, tail says ORG.
    CHECK(apply_stamp_rules({{3, 5, CandidateOrigin::Rule}}, rules, s).empty());
    CHECK_THROWS(parse_stamp_rules("Inc.\tDATE\ttail\n", kSchema));
    CHECK_THROWS(parse_stamp_rules("Inc.\tORG\tmiddle\n", kSchema));
}

TEST_CASE("distant_labels composition") {
    GazetteerMatcher g({gaz({{"LOC", "new york"}, {"LOC", "liverpool"}, {"ORG", "liverpool"}})}, kSchema);
    const auto rules = parse_stamp_rules("Inc.\tORG\ttail\n", kSchema);
    CHECK(distant_labels(Sentence::from_text("I love New York ."), g, rules, kSchema) ==
          LabelSequence{0, 0, L("B-LOC"), L("I-LOC"), 0});
    CHECK(distant_labels(Sentence::from_text("Liverpool won"), g, rules, kSchema) == LabelSequence{0, 0});
    // The rule must not fire on a span the gazetteer already decided, even
    // an ambiguous one.
    CHECK(distant_labels(Sentence::from_text("Liverpool Inc. won"), g, rules, kSchema) ==
          LabelSequence{0, 0, 0});
    CHECK(distant_labels(Sentence::from_text("we met Acme Inc. today"), g, rules, kSchema) ==
          LabelSequence{0, 0, L("B-ORG"), L("I-ORG"), 0});

    Corpus c(kSchema);
    c.add_sentence(Sentence::from_text("Paris and Rome"));
    c.add_sentence(Sentence::from_text("ACME rocks"));
    GazetteerMatcher none({}, kSchema);
    const auto labeled = generate_distant_labels(c, none, {});
    for (const auto& seq : labeled.layer(LabelLayer::Distant)) {
        for (auto l : seq) CHECK(l == 0);
    }
}

TEST_CASE("match_report") {
    Corpus c(kSchema);
    c.add_labeled(Sentence::from_text("John Smith saw Paris"), LabelLayer::Gold,
                  {L("B-PER"), L("I-PER"), 0, L("B-LOC")});
    c.set_layer(LabelLayer::Distant, c.layer(LabelLayer::Gold));
    auto r = match_report(c);
    CHECK(r.entity.precision() == 1.0);
    CHECK(r.entity.recall() == 1.0);
    CHECK(r.token_f1 == 1.0);

    c.set_layer(LabelLayer::Distant, {{0, 0, 0, 0}});
    r = match_report(c);
    CHECK(r.entity.precision() == 0.0);
    CHECK(r.entity.recall() == 0.0);
    CHECK(r.entity.f1() == 0.0);

    c.set_layer(LabelLayer::Distant, {{L("B-PER"), L("I-PER"), 0, 0}});
    r = match_report(c);
    CHECK(r.entity.precision() == 1.0);
    CHECK(r.entity.recall() == 0.5);
    CHECK(r.entity.f1() == doctest::Approx(2.0 / 3.0));
    CHECK(r.per_type[1].unmatched == 1);
    const auto json = r.to_json();
    CHECK(json.find("\"precision\"") != std::string::npos);
    CHECK(json.find("\"recall\"") != std::string::npos);
    CHECK(json.find("\"f1\"") != std::string::npos);
}
