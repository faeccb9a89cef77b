#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "egqa/agent.hpp"
#include "oracles.hpp"

using namespace egqa;

namespace {

json step(const std::string& tool, const std::string& desc, json args = json::object()) {
    return {{"tool", tool}, {"description", desc}, {"args", args}};
}

struct Fixture {
    GraphStore graph;
    VisualIndex frames{8};
    TranscriptIndex transcripts;
    ScriptedClient client;

    Fixture() {
        graph.insert_edges(
            {{0, {"Jake", EntityType::Person}, {"phone", EntityType::Object},
              RelationType::Uses, {{2, 100000}, {2, 100500}}, "let me grab the phone"},
             {0, {"Shure", EntityType::Person}, {"Alice", EntityType::Person},
              RelationType::TalksTo, {{3, 155000}, {3, 155100}}, "Got it."}});

        std::vector<FrameRecord> batch;
        for (int i = 0; i < 30; ++i) {
            FrameRecord f;
            f.frame_id = "f" + std::to_string(i);
            f.when = {1 + i % 3, encode_time(9 + i % 10, 0, 0)};
            if (i % 2 == 0) f.location = "kitchen";
            f.embedding = detail::pseudo_embedding("frame " + std::to_string(i), 8);
            batch.push_back(std::move(f));
        }
        frames.add_frames(batch);

        transcripts.add_utterances(
            {{"u1", std::nullopt, {{2, 100000}, {2, 100010}}, "let me grab the phone"},
             {"u2", std::nullopt, {{2, 100020}, {2, 100030}}, "the microwave beeped"},
             {"u3", std::nullopt, {{3, 155000}, {3, 155010}}, "we talked about the trip"}});
    }

    Stores stores() { return {&graph, &frames, &transcripts}; }
};

}  // namespace

TEST_CASE("router maps each tool to its fixed name") {
    CHECK(route(ToolKind::EntityGraph) == "eg");
    CHECK(route(ToolKind::Visual) == "visual");
    CHECK(route(ToolKind::Audio) == "audio");
    CHECK(parse_tool_kind("eg") == ToolKind::EntityGraph);
    CHECK(parse_tool_kind("visual") == ToolKind::Visual);
    CHECK(parse_tool_kind("audio") == ToolKind::Audio);
    CHECK_FALSE(parse_tool_kind("graph").has_value());
    CHECK_FALSE(parse_tool_kind("").has_value());
}

TEST_CASE("answer letter extraction: first standalone A-D") {
    CHECK(Agent::extract_choice_letter("the answer is (C)") == 2);
    CHECK(Agent::extract_choice_letter("B.") == 1);
    CHECK(Agent::extract_choice_letter("answer: d") == 3);
    CHECK(Agent::extract_choice_letter("A B") == 0);     // first wins
    CHECK(Agent::extract_choice_letter("Option\nC") == 2);
    CHECK_FALSE(Agent::extract_choice_letter("").has_value());
    CHECK_FALSE(Agent::extract_choice_letter("no letters here!").has_value());
    CHECK_FALSE(Agent::extract_choice_letter("CD4 EF").has_value());  // glued to alnums
}

TEST_CASE("planner caps at five steps and drops unusable ones") {
    Fixture fx;
    json steps = json::array();
    steps.push_back(step("teleport", "unknown tool"));
    steps.push_back(step("eg", "no constraint", json{{"day", 2}}));  // unlowerable
    steps.push_back(step("eg", "bad rel", json{{"source_id", "Jake"}, {"rel_type", "LIKES"}}));
    for (int i = 0; i < 7; ++i)
        steps.push_back(step("eg", "q" + std::to_string(i), json{{"source_id", "Jake"}}));
    fx.client.add_entry(CallKind::Plan, "q-cap", json{{"steps", steps}});

    Agent agent(fx.stores(), fx.client);
    AgentState state;
    state.qid = "q-cap";
    state.question = "?";
    state.query_time = {4, 120000};
    auto plan = agent.plan(state);

    REQUIRE(plan.size() == size_t(kMaxPlanSteps));
    for (size_t i = 0; i < plan.size(); ++i) {
        CHECK(plan[i].index == int(i) + 1);
        CHECK(plan[i].tool == ToolKind::EntityGraph);
    }
    int dropped = 0, truncated = 0;
    for (const auto& line : state.trace) {
        if (line.find("dropped") != std::string::npos) ++dropped;
        if (line.find("truncated") != std::string::npos) ++truncated;
    }
    CHECK(dropped == 3);
    CHECK(truncated == 1);
}

TEST_CASE("disabled tools are dropped at planning time") {
    Fixture fx;
    fx.client.add_entry(CallKind::Plan, "q-abl",
                        json{{"steps", json::array({
                                  step("eg", "graph", json{{"source_id", "Jake"}}),
                                  step("visual", "frames", json{{"queries", {"a kitchen"}}}),
                                  step("audio", "speech", json{{"task", "who spoke"}}),
                              })}});
    AgentConfig cfg;
    cfg.enabled_tools = {ToolKind::Visual};
    Agent agent(fx.stores(), fx.client, cfg);
    AgentState state;
    state.qid = "q-abl";
    state.query_time = {4, 120000};
    auto plan = agent.plan(state);
    REQUIRE(plan.size() == 1);
    CHECK(plan[0].tool == ToolKind::Visual);
}

TEST_CASE("tool failures become error notes, not aborts") {
    Fixture fx;
    fx.client.add_entry(CallKind::Plan, "q-err",
                        json{{"steps", json::array({
                                  step("visual", "frames", json{{"queries", {"a kitchen"}}}),
                                  step("eg", "graph", json{{"source_id", "Jake"}}),
                              })}});
    Stores missing_frames = fx.stores();
    missing_frames.frames = nullptr;  // visual tool will fail
    Agent agent(missing_frames, fx.client);
    auto trace = agent.run("q-err", "what happened?", {"w", "x", "y", "z"}, {4, 120000});

    REQUIRE(trace.state.working_memory.size() == 2);
    CHECK(trace.state.working_memory[0].error);
    CHECK(trace.state.working_memory[0].summary.find("tool error") == 0);
    CHECK_FALSE(trace.state.working_memory[1].error);  // second subtask still ran
    CHECK(trace.state.working_memory[1].retrieved_count == 1);
    CHECK(trace.choice >= 0);
}

TEST_CASE("grading: only a clean complete verdict exits early") {
    Fixture fx;
    json steps = json::array();
    for (int i = 0; i < 4; ++i)
        steps.push_back(step("eg", "s" + std::to_string(i), json{{"source_id", "Jake"}}));
    fx.client.add_entry(CallKind::Plan, "q-grade", json{{"steps", steps}});
    // complete after the second subtask; earlier verdicts are junk
    fx.client.add_entry(CallKind::Grade, "q-grade#1", json("probably fine??"));
    fx.client.add_entry(CallKind::Grade, "q-grade#2", json{{"verdict", " Complete "}});

    Agent agent(fx.stores(), fx.client);
    auto trace = agent.run("q-grade", "?", {"w", "x", "y", "z"}, {4, 120000});
    CHECK(trace.state.current == 2);  // early exit: 2 of 4 subtasks executed
    CHECK(trace.state.working_memory.size() == 2);
    bool exited = false;
    for (const auto& line : trace.state.trace)
        exited |= line.find("early exit") != std::string::npos;
    CHECK(exited);
}

TEST_CASE("unparseable grader output is the safe default, incomplete") {
    Fixture fx;
    json steps = json::array();
    for (int i = 0; i < 3; ++i)
        steps.push_back(step("eg", "s" + std::to_string(i), json{{"source_id", "Jake"}}));
    fx.client.add_entry(CallKind::Plan, "q-inc", json{{"steps", steps}});
    fx.client.add_default(CallKind::Grade, json(42));  // kind-level default: not a string

    Agent agent(fx.stores(), fx.client);
    auto trace = agent.run("q-inc", "?", {"w", "x", "y", "z"}, {4, 120000});
    CHECK(trace.state.current == 3);  // all subtasks ran
}

TEST_CASE("full run: five-step plan over all three tools is deterministic") {
    Fixture fx;
    fx.client.add_entry(
        CallKind::Plan, "q1",
        json{{"steps",
              json::array({
                  step("eg", "who did Jake talk to", json{{"source_id", "Jake"}}),
                  step("visual", "find the kitchen",
                       json{{"queries", {"a kitchen counter"}}, {"location", "kitchen"}}),
                  step("audio", "what was said about the phone", json{{"query", "phone"}}),
                  step("eg", "what does Shure use",
                       json{{"source_id", "Shure"}, {"rel_type", "TALKS_TO"}}),
                  step("audio", "trip plans", json{{"task", "trip"}}),
              })}});
    fx.client.add_entry(CallKind::Analyze, "q1#1",
                        json{{"summary", "Jake used the phone on D2 at 10:00:00."}});
    fx.client.add_entry(CallKind::Analyze, "q1#3",
                        json{{"summary", "phone talk"},
                             {"cited_timestamps", {"D2 10:00:20"}},
                             {"cited_edges", {1, 999}}});
    fx.client.add_entry(CallKind::Answer, "q1", json("the best option is (B)"));

    Agent agent(fx.stores(), fx.client);
    auto t1 = agent.run("q1", "what happened?", {"w", "x", "y", "z"}, {4, 120000});
    CHECK(t1.choice == 1);
    REQUIRE(t1.state.working_memory.size() == 5);
    // analyzer citations: regex from the summary, explicit list, edge ids
    CHECK(t1.state.working_memory[0].cited_timestamps ==
          std::vector<DayTime>{{2, 100000}});
    CHECK(t1.state.working_memory[2].cited_timestamps ==
          std::vector<DayTime>{{2, 100020}});
    CHECK(t1.state.working_memory[2].cited_edges ==
          std::vector<std::int64_t>{1});  // 999 does not exist and is dropped
    // per-phase timings are zeroed for reproducibility
    for (const auto& [phase, secs] : t1.phase_seconds) CHECK(secs == 0.0);

    // byte-identical traces across reruns
    auto t2 = agent.run("q1", "what happened?", {"w", "x", "y", "z"}, {4, 120000});
    auto t3 = agent.run("q1", "what happened?", {"w", "x", "y", "z"}, {4, 120000});
    CHECK(trace_to_json(t1).dump() == trace_to_json(t2).dump());
    CHECK(trace_to_json(t1).dump() == trace_to_json(t3).dump());
}

TEST_CASE("working memory is append-only across the run") {
    Fixture fx;
    json steps = json::array();
    for (int i = 0; i < 3; ++i)
        steps.push_back(step("eg", "s" + std::to_string(i), json{{"source_id", "Jake"}}));
    fx.client.add_entry(CallKind::Plan, "q-mem", json{{"steps", steps}});
    fx.client.add_entry(CallKind::Analyze, "q-mem#1", json{{"summary", "first note"}});
    fx.client.add_entry(CallKind::Analyze, "q-mem#2", json{{"summary", "second note"}});
    fx.client.add_entry(CallKind::Analyze, "q-mem#3", json{{"summary", "third note"}});

    Agent agent(fx.stores(), fx.client);
    AgentState state;
    state.qid = "q-mem";
    state.question = "?";
    state.candidates = {"w", "x", "y", "z"};
    state.query_time = {4, 120000};
    state.plan = agent.plan(state);
    std::vector<std::string> seen;
    while (state.current < int(state.plan.size())) {
        agent.execute_subtask(state);
        // prior notes never change
        REQUIRE(state.working_memory.size() == size_t(state.current));
        for (size_t i = 0; i < seen.size(); ++i)
            REQUIRE(state.working_memory[i].summary == seen[i]);
        seen.clear();
        for (const auto& n : state.working_memory) seen.push_back(n.summary);
    }
    CHECK(seen == std::vector<std::string>{"first note", "second note", "third note"});
}

TEST_CASE("token ledger accounts for every call and both image presets") {
    struct FixedUsageClient : ModelClient {
        ScriptedClient inner;
        ClientResponse call(const ClientRequest& req) override {
            ClientResponse resp = inner.call(req);
            resp.usage = {100, 10, req.kind == CallKind::Answer ? 4 : 0};
            return resp;
        }
    };

    Fixture fx;
    FixedUsageClient client;
    client.inner.add_entry(
        CallKind::Plan, "q-tok",
        json{{"steps", json::array({
                  step("eg", "graph", json{{"source_id", "Jake"}}),
                  step("visual", "frames", json{{"queries", {"a kitchen", "the yard"}}}),
              })}});

    for (int rate : {85, 258}) {
        AgentConfig cfg;
        cfg.image_token_rate = rate;
        Agent agent(fx.stores(), client, cfg);
        auto trace = agent.run("q-tok", "?", {"w", "x", "y", "z"}, {4, 120000});
        const TokenLedger& ledger = trace.state.token_ledger;

        // plan + analyze x2 + embed x2 + grade + answer = 7 client calls
        REQUIRE(ledger.entries.size() == 7);
        std::map<std::string, int> by_kind;
        for (const auto& e : ledger.entries) ++by_kind[e.call_kind];
        CHECK(by_kind["plan"] == 1);
        CHECK(by_kind["analyze"] == 2);
        CHECK(by_kind["embed_text"] == 2);
        CHECK(by_kind["grade"] == 1);
        CHECK(by_kind["answer"] == 1);

        CHECK(ledger.total_prompt() == 700);
        CHECK(ledger.total_completion() == 70);
        CHECK(ledger.total_images() == 4);
        CHECK(ledger.image_tokens() == 4 * rate);
        CHECK(ledger.total_tokens() == 770 + 4 * rate);
    }
}

TEST_CASE("run validates its inputs") {
    Fixture fx;
    Agent agent(fx.stores(), fx.client);
    CHECK_THROWS_AS(agent.run("q", "?", {"a", "b"}, {1, 0}), ValidationError);
    CHECK_THROWS_AS(agent.run("q", "?", {"a", "b", "c", "d"}, {1, 236000}), ValidationError);
}

TEST_CASE("empty plan still produces an answer") {
    Fixture fx;  // builtin plan default
    fx.client.add_entry(CallKind::Plan, "q-empty", json{{"steps", json::array()}});
    Agent agent(fx.stores(), fx.client);
    auto trace = agent.run("q-empty", "?", {"w", "x", "y", "z"}, {2, 90000});
    CHECK(trace.state.working_memory.empty());
    CHECK(trace.choice == 0);  // builtin answer default "A"
}
