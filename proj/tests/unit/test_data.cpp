#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "qdren/babi.hpp"
#include "qdren/synth.hpp"
#include "qdren/vocab.hpp"

using namespace qdren;

namespace {

std::vector<RawStory> parse(const std::string& text) {
    std::istringstream in(text);
    return parse_babi(in);
}

using Tokens = std::vector<std::string>;

/// Where the queried person last moved, read back from the story text.
std::string replay_single_fact(const RawStory& s) {
    const std::string& who = s.question.at(2);
    std::string where;
    for (const auto& sentence : s.sentences) {
        if (sentence.at(0) == who) where = sentence.back();
    }
    return where;
}

/// The entity of the one sentence stating the question's relation and object.
std::string solve_cloze(const RawStory& s) {
    std::vector<std::string> hits;
    for (const auto& sentence : s.sentences) {
        const std::size_t n = sentence.size();
        if (sentence[n - 2] == s.question[1] && sentence[n - 1] == s.question[2]) hits.push_back(sentence[n - 3]);
    }
    return hits.size() == 1 ? hits[0] : std::string();
}

}  // namespace

TEST_CASE("parses the apple/office/kitchen story") {
    const auto stories = parse(
        "1 John picked up the apple.\n"
        "2 John went to the office.\n"
        "3 John went to the kitchen.\n"
        "4 John dropped the apple.\n"
        "5 Where was the apple before the kitchen?\toffice\t4 2\n");
    REQUIRE(stories.size() == 1);
    CHECK(stories[0].sentences.size() == 4);
    CHECK(stories[0].answer == "office");
    CHECK(stories[0].sentences[1] == Tokens{"john", "went", "to", "the", "office"});
    CHECK(stories[0].supporting == std::vector<std::size_t>{3, 1});
    CHECK(stories[0].question == Tokens{"where", "was", "the", "apple", "before", "the", "kitchen"});
}

TEST_CASE("two questions in one story share the preceding facts") {
    const auto stories = parse(
        "1 Mary moved to the bathroom.\n"
        "2 John went to the hallway.\n"
        "3 Where is Mary?\tbathroom\t1\n"
        "4 Daniel went back to the hallway.\n"
        "5 Sandra moved to the garden.\n"
        "6 Where is Daniel?\thallway\t4\n");
    REQUIRE(stories.size() == 2);
    CHECK(stories[0].sentences.size() == 2);
    CHECK(stories[1].sentences.size() == 4);
    CHECK(std::equal(stories[0].sentences.begin(), stories[0].sentences.end(), stories[1].sentences.begin()));
    CHECK(stories[0].supporting == std::vector<std::size_t>{0});
    CHECK(stories[1].supporting == std::vector<std::size_t>{2});
    CHECK(stories[1].answer == "hallway");
}

TEST_CASE("story boundaries, empty input and malformed lines") {
    CHECK(parse("").empty());
    const auto two = parse("1 a b.\n2 q?\tb\t1\n1 c d.\n2 q?\td\t1\n");
    REQUIRE(two.size() == 2);
    CHECK(two[1].sentences.size() == 1);

    try {
        parse("1 fine.\nnot a numbered line\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse("1 where?\tx\n"), ParseError);
    CHECK_THROWS_AS(parse("1 a.\n2 where\tx\t1\n"), ParseError);
    CHECK_THROWS_AS(parse("CANDIDATES\t@entity1\n"), ParseError);
}

TEST_CASE("a sentence is split on the dot token") {
    const auto stories = parse("1 a b . c d.\n2 q?\td\t1\n");
    REQUIRE(stories.size() == 1);
    CHECK(stories[0].sentences.size() == 2);
}

TEST_CASE("serialise then parse reproduces every story") {
    auto stories = gen_single_fact(5, 30, 5, 6, 6);
    auto cloze = gen_entity_cloze(6, 30, 8, 5);
    stories.insert(stories.end(), cloze.begin(), cloze.end());
    std::ostringstream out;
    const std::vector<std::string> header{"generator test"};
    write_babi(out, stories, header);
    std::istringstream in(out.str());
    const auto back = parse_babi(in);
    REQUIRE(back.size() == stories.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == stories[i]);
}

TEST_CASE("vocabulary contracts") {
    RawStory s;
    s.sentences = {{"b", "a", "c", "a"}, {"c", "b"}};
    s.question = {"d"};
    s.answer = "a";
    const std::vector<RawStory> data{s};

    const Vocabulary big = build_vocab(std::span<const RawStory>(data), 100);
    CHECK(big.size() == 6);
    CHECK(big.token(kPadId) == kPadToken);
    CHECK(big.token(kUnkId) == kUnkToken);
    for (const auto& tok : {"a", "b", "c", "d"}) CHECK(big.find(tok).has_value());

    // a:3, b:2, c:2, d:1 -> keep a, then the b/c tie goes to b.
    const Vocabulary small = build_vocab(std::span<const RawStory>(data), 4);
    CHECK(small.tokens() == std::vector<std::string>{"<pad>", "<unk>", "a", "b"});
    CHECK(small.id("c") == kUnkId);

    RawStory rep;
    rep.sentences = {{"x", "x", "x"}};
    rep.question = {"x"};
    rep.answer = "x";
    const std::vector<RawStory> one{rep};
    CHECK(build_vocab(std::span<const RawStory>(one), 10).tokens() == std::vector<std::string>{"<pad>", "<unk>", "x"});
    CHECK_THROWS_AS(build_vocab(std::span<const RawStory>(one), 2), ArgumentError);
    CHECK(Vocabulary(big.tokens()) == big);
}

TEST_CASE("encoded stories keep their invariants") {
    RawStory s;
    s.sentences = {{"@entity1", "left", "rome"}};
    s.question = {"@placeholder", "left", "rome"};
    s.answer = "@entity1";
    s.candidates = {"@entity1"};
    s.supporting = {0};
    const std::vector<RawStory> data{s};
    const Vocabulary v = build_vocab(std::span<const RawStory>(data), 100);
    const Story e = encode_story(s, v);
    CHECK(e.answer == v.id("@entity1"));
    CHECK(v.is_entity(e.answer));
    CHECK_FALSE(v.is_entity(v.id("rome")));

    RawStory bad = s;
    bad.candidates = {"rome"};
    CHECK_THROWS(encode_story(bad, v));
    bad = s;
    bad.supporting = {3};
    CHECK_THROWS(encode_story(bad, v));
}

TEST_CASE("single-fact generator") {
    const auto one = gen_single_fact(3, 50, 5, 6, 1);
    for (const auto& s : one) {
        REQUIRE(s.sentences.size() == 1);
        CHECK(s.answer == s.sentences[0].back());
    }

    const auto samples = generate_single_fact(8, 500, {5, 6, 6});
    const auto places = location_names(6);
    const auto people = entity_names(5);
    for (const auto& s : samples) {
        // Replay the event log.
        std::map<std::size_t, std::size_t> at;
        for (const auto& e : s.events) at[e.entity] = e.location;
        REQUIRE(at.count(s.queried_entity));
        CHECK(s.story.answer == places[at[s.queried_entity]]);
        CHECK(s.story.question[2] == people[s.queried_entity]);
        CHECK(s.story.sentences[s.story.supporting.at(0)].back() == s.story.answer);
    }
    CHECK(gen_single_fact(8, 100, 5, 6, 6) == gen_single_fact(8, 100, 5, 6, 6));
    CHECK_FALSE(gen_single_fact(8, 100, 5, 6, 6) == gen_single_fact(9, 100, 5, 6, 6));
    CHECK_THROWS_AS(gen_single_fact(1, 10, 1, 6, 6), ArgumentError);
    CHECK_THROWS_AS(gen_single_fact(1, 10, 5, 1, 6), ArgumentError);
}

TEST_CASE("entity-cloze generator") {
    const auto samples = generate_entity_cloze(12, 2000, {});
    for (const auto& s : samples) {
        const auto& st = s.story;
        CHECK(std::find(st.candidates.begin(), st.candidates.end(), st.answer) != st.candidates.end());
        CHECK(std::is_sorted(st.candidates.begin(), st.candidates.end(), [](const auto& a, const auto& b) {
            return std::stoul(a.substr(7)) < std::stoul(b.substr(7));
        }));
        CHECK(std::count(st.question.begin(), st.question.end(), std::string(kPlaceholderToken)) == 1);

        // A different anonymisation maps back to the same underlying answer.
        std::vector<std::size_t> other(s.permutation.size());
        std::iota(other.begin(), other.end(), 0);
        std::reverse(other.begin(), other.end());
        const RawStory renamed = render_cloze(s.plan, other);
        auto slot_of = [](const std::string& tok, const std::vector<std::size_t>& perm) {
            const std::size_t id = std::stoul(tok.substr(std::string(kEntityPrefix).size()));
            return static_cast<std::size_t>(std::find(perm.begin(), perm.end(), id) - perm.begin());
        };
        CHECK(slot_of(st.answer, s.permutation) == slot_of(renamed.answer, other));
        CHECK(slot_of(st.answer, s.permutation) == s.plan.facts[s.plan.query_fact].slot);
    }
    CHECK(gen_entity_cloze(4, 50, 8, 5) == gen_entity_cloze(4, 50, 8, 5));
    CHECK_THROWS_AS(gen_entity_cloze(4, 50, 2, 5), ArgumentError);
    CHECK_THROWS_AS(gen_entity_cloze(4, 50, 8, 4), ArgumentError);
}

TEST_CASE("cloze answers are uniform over entity ids") {
    const std::size_t n = 10000, k = 8;
    const auto stories = gen_entity_cloze(77, n, k, 5);
    std::vector<double> counts(k, 0.0);
    for (const auto& s : stories) counts[std::stoul(s.answer.substr(7))] += 1.0;
    const double expected = static_cast<double>(n) / k;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 7 degrees of freedom; 24.32 is the 0.999 quantile.
    CHECK(chi2 < 24.32);
}

TEST_CASE("global entity-id frequencies carry no answer information") {
    const auto train = gen_entity_cloze(100, 10000, 8, 5);
    const auto test = gen_entity_cloze(200, 10000, 8, 5);
    std::map<std::string, std::size_t> freq;
    for (const auto& s : train) ++freq[s.answer];
    double correct = 0.0, chance = 0.0;
    for (const auto& s : test) {
        const auto best = *std::max_element(s.candidates.begin(), s.candidates.end(),
                                            [&](const auto& a, const auto& b) { return freq[a] < freq[b]; });
        correct += best == s.answer ? 1.0 : 0.0;
        chance += 1.0 / static_cast<double>(s.candidates.size());
    }
    const double acc = correct / test.size();
    const double base = chance / test.size();
    // Standard error is about 0.0045 at this size.
    CHECK(std::abs(acc - base) < 0.02);
}

TEST_CASE("rule-based readers answer every generated story") {
    for (const auto& s : gen_single_fact(31, 1000, 5, 6, 6)) CHECK(replay_single_fact(s) == s.answer);
    for (const auto& s : gen_entity_cloze(32, 1000, 8, 5)) CHECK(solve_cloze(s) == s.answer);
}

TEST_CASE("splits use distinct seeds and carry provenance") {
    SynthSpec spec;
    spec.n_train = 20;
    spec.n_valid = 5;
    spec.n_test = 5;
    const auto a = generate_splits(spec);
    CHECK(a.train.size() == 20);
    CHECK(a.valid.size() == 5);
    CHECK(split_seed(1, 0) != split_seed(1, 1));
    CHECK(split_seed(1, 1) != split_seed(1, 2));
    const auto header = provenance_header(spec, 1);
    CHECK(header[0] == "generator: " + std::string(kGeneratorVersion));
    CHECK(parse_synth_task("entity-cloze") == SynthTask::entity_cloze);
    CHECK_THROWS_AS(parse_synth_task("cnn"), ArgumentError);
}
