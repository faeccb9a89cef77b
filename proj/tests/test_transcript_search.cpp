#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "egqa/model_client.hpp"
#include "egqa/transcript_search.hpp"
#include "oracles.hpp"

using namespace egqa;

namespace {

Utterance utt(const std::string& id, int day, int start, int end, const std::string& text,
              std::optional<std::string> speaker = std::nullopt) {
    return {id, speaker, {{day, start}, {day, end}}, text};
}

std::vector<Utterance> random_corpus(std::mt19937& rng, int n) {
    static const std::vector<std::string> words{"jake",  "phone",   "kitchen", "guitar",
                                               "lunch", "luggage", "morning", "trip",
                                               "music", "plan",    "tomorrow"};
    std::vector<Utterance> out;
    std::uniform_int_distribution<int> day(1, 3), hour(8, 20), ms(0, 59), len(1, 8),
        wi(0, int(words.size()) - 1);
    for (int i = 0; i < n; ++i) {
        std::string text;
        int L = len(rng);
        for (int w = 0; w < L; ++w) {
            if (!text.empty()) text += " ";
            text += words[size_t(wi(rng))];
        }
        int start = encode_time(hour(rng), ms(rng), ms(rng));
        out.push_back(utt("u" + std::to_string(i), day(rng), start, start, text));
    }
    return out;
}

}  // namespace

TEST_CASE("tokenization: lowercase alphanumeric word splits") {
    CHECK(tokenize("Hello, World!") == std::vector<std::string>{"hello", "world"});
    CHECK(tokenize("it's 9 o'clock") == std::vector<std::string>{"it", "s", "9", "o", "clock"});
    CHECK(tokenize("   ") == std::vector<std::string>{});
}

TEST_CASE("add_utterances validates ids and text") {
    TranscriptIndex index;
    CHECK(index.add_utterances({utt("a", 1, 100000, 100005, "hello"),
                                utt("b", 1, 100010, 100015, "world")}) == 2);
    CHECK_THROWS_AS(index.add_utterances({utt("a", 1, 110000, 110005, "again")}),
                    ValidationError);
    CHECK_THROWS_AS(index.add_utterances({utt("c", 1, 110000, 110005, "")}), ValidationError);
    CHECK(index.size() == 2);
}

TEST_CASE("bm25: unique term ranks its utterance first") {
    TranscriptIndex index;
    index.add_utterances({utt("a", 1, 100000, 100005, "we talked about the trip"),
                          utt("b", 1, 100010, 100015, "the microwave beeped twice"),
                          utt("c", 1, 100020, 100025, "the phone rang")});
    auto hits = index.bm25_search("microwave", std::nullopt, 3);
    REQUIRE_FALSE(hits.empty());
    CHECK(hits[0].utterance.utt_id == "b");

    // range excluding all matches
    auto none = index.bm25_search("microwave",
                                  std::make_pair(DayTime{2, 0}, DayTime{2, 235959}), 3);
    CHECK(none.empty());

    CHECK_THROWS_AS(index.bm25_search("...", std::nullopt, 3), ValidationError);
    CHECK_THROWS_AS(index.bm25_search("phone", std::nullopt, 0), ValidationError);
}

TEST_CASE("bm25 matches the independent oracle to 1e-9") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        auto corpus = random_corpus(rng, std::uniform_int_distribution<int>(5, 20)(rng));
        TranscriptIndex index;
        index.add_utterances(corpus);
        for (const std::string& query :
             {"jake phone", "kitchen", "luggage trip music", "tomorrow plan", "guitar"}) {
            auto want = oracle::bm25_scores(corpus, query);
            std::map<std::string, double> want_by_id(want.begin(), want.end());
            auto hits = index.bm25_search(query, std::nullopt, int(corpus.size()));
            // every positive-scoring utterance is returned with the same score
            size_t positive = 0;
            for (auto& [id, s] : want_by_id)
                if (s > 0) ++positive;
            REQUIRE(hits.size() == positive);
            double prev = std::numeric_limits<double>::infinity();
            for (const auto& h : hits) {
                REQUIRE_THAT(h.score,
                             Catch::Matchers::WithinAbs(want_by_id[h.utterance.utt_id], 1e-9));
                REQUIRE(h.score <= prev);
                prev = h.score;
            }
        }
    }
}

TEST_CASE("range soundness: every hit intersects the requested range") {
    std::mt19937 rng(37);
    auto corpus = random_corpus(rng, 40);
    TranscriptIndex index;
    index.add_utterances(corpus);
    auto range = std::make_pair(DayTime{2, 90000}, DayTime{2, 180000});
    for (const auto& h : index.bm25_search("jake kitchen phone", range, 40)) {
        CHECK(h.utterance.when.day() == 2);
        CHECK(h.utterance.when.start.t <= 180000);
        CHECK(h.utterance.when.end.t >= 90000);
    }
}

TEST_CASE("context_window returns the hit plus neighbors in time order") {
    TranscriptIndex index;
    index.add_utterances({utt("a", 1, 100000, 100005, "one"), utt("b", 1, 100010, 100015, "two"),
                          utt("c", 1, 100020, 100025, "three"),
                          utt("d", 1, 100030, 100035, "four"),
                          utt("e", 2, 100040, 100045, "other day")});
    auto ctx = index.context_window("b", 1);
    REQUIRE(ctx.size() == 3);
    CHECK(ctx[0].utt_id == "a");
    CHECK(ctx[1].utt_id == "b");
    CHECK(ctx[2].utt_id == "c");
    // clipped at the day edge
    CHECK(index.context_window("a", 2).size() == 3);
}

TEST_CASE("llm_search parses cited timestamps and degrades gracefully") {
    TranscriptIndex index;
    index.add_utterances({utt("a", 2, 155021, 155022, "Got it.")});

    ScriptedClient client;
    client.add_entry(CallKind::TranscriptLlmSearch, "day-2",
                     json{{"analysis", "Shure spoke to Alice at D2 15:50:21."}});
    auto note = index.llm_search("who spoke", "", 2, client);
    REQUIRE(note.cited_timestamps.size() == 1);
    CHECK(note.cited_timestamps[0] == DayTime{2, 155021});

    client.add_entry(CallKind::TranscriptLlmSearch, "day-2",
                     json{{"analysis", "They discussed the trip but timing is unclear."}});
    auto vague = index.llm_search("who spoke", "", 2, client);
    CHECK(vague.cited_timestamps.empty());  // prose-only analysis, not an error
}

TEST_CASE("llm fan-out issues one call per day, merged in day order") {
    TranscriptIndex index;
    index.add_utterances({utt("a", 1, 100000, 100001, "day one"),
                          utt("b", 2, 100000, 100001, "day two"),
                          utt("c", 3, 100000, 100001, "day three")});

    struct CountingClient : ModelClient {
        int calls = 0;
        std::vector<int> days_seen;
        ClientResponse call(const ClientRequest& req) override {
            ++calls;
            days_seen.push_back(req.payload.at("day").get<int>());
            return {json{{"analysis", "nothing"}}, {}};
        }
    } client;

    auto notes = index.llm_search_days("task", "", {3, 1, 2, 2}, client);
    CHECK(client.calls == 3);  // deduped days, one call each
    REQUIRE(notes.size() == 3);
    CHECK(notes[0].day == 1);
    CHECK(notes[1].day == 2);
    CHECK(notes[2].day == 3);
}

TEST_CASE("utterance jsonl round trip") {
    std::mt19937 rng(41);
    auto corpus = random_corpus(rng, 15);
    TranscriptIndex index;
    index.add_utterances(corpus);
    std::stringstream buf;
    index.save_jsonl(buf);
    TranscriptIndex loaded = TranscriptIndex::load_jsonl(buf);
    CHECK(loaded.size() == index.size());
    auto a = index.bm25_search("jake", std::nullopt, 5);
    auto b = loaded.bm25_search("jake", std::nullopt, 5);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].utterance.utt_id == b[i].utterance.utt_id);
        CHECK(a[i].score == b[i].score);
    }
}
