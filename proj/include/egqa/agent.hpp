#pragma once
// The question-answering state machine: a planner decomposes the MCQ
// into at most five sub-tasks, a router dispatches each to one of the
// three retriever tools, the analyzer distills retrieved content into
// append-only working memory, a completion grader allows early exit,
// and the VQA step picks the final candidate.

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "egqa/graph_store.hpp"
#include "egqa/model_client.hpp"
#include "egqa/transcript_search.hpp"
#include "egqa/visual_index.hpp"

namespace egqa {

enum class ToolKind { EntityGraph, Visual, Audio };

constexpr int kMaxPlanSteps = 5;

inline std::string_view to_string(ToolKind t) {
    switch (t) {
        case ToolKind::EntityGraph: return "eg";
        case ToolKind::Visual: return "visual";
        case ToolKind::Audio: return "audio";
    }
    return "?";
}

inline std::optional<ToolKind> parse_tool_kind(std::string_view s) {
    if (s == "eg") return ToolKind::EntityGraph;
    if (s == "visual") return ToolKind::Visual;
    if (s == "audio") return ToolKind::Audio;
    return std::nullopt;
}

// Router: pure function of the sub-task's tool.
inline std::string route(ToolKind tool) { return std::string(to_string(tool)); }

enum class TranscriptVariant { Bm25, Llm };

struct VisualToolArgs {
    std::vector<std::string> queries;  // 1-3 concise text queries
    FrameFilter filter;                // `before` is filled in at run time
};

struct AudioToolArgs {
    std::string task;
    std::string query;                 // bm25 query; falls back to task text
    std::vector<int> days;             // llm fan-out; empty = all days <= query day
    std::optional<TranscriptVariant> variant;  // overrides the run config
};

using ToolArgs = std::variant<GraphQueryIntent, VisualToolArgs, AudioToolArgs>;

struct SubTask {
    int index = 1;  // 1-based
    std::string description;
    ToolKind tool = ToolKind::EntityGraph;
    ToolArgs args;
};

// One working-memory entry: what a sub-task found and what it cited.
struct AnalysisNote {
    int subtask_index = 0;
    ToolKind tool = ToolKind::EntityGraph;
    std::string summary;
    std::vector<DayTime> cited_timestamps;
    std::vector<std::int64_t> cited_edges;
    int retrieved_count = 0;
    bool error = false;
};

struct LedgerEntry {
    std::string call_kind;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    int image_count = 0;
};

struct TokenLedger {
    std::vector<LedgerEntry> entries;
    int image_token_rate = 85;  // per-image token preset

    void add(CallKind kind, const Usage& u) {
        entries.push_back({std::string(to_string(kind)), u.prompt_tokens, u.completion_tokens,
                           u.image_count});
    }

    std::int64_t total_prompt() const {
        std::int64_t s = 0;
        for (const auto& e : entries) s += e.prompt_tokens;
        return s;
    }
    std::int64_t total_completion() const {
        std::int64_t s = 0;
        for (const auto& e : entries) s += e.completion_tokens;
        return s;
    }
    std::int64_t total_images() const {
        std::int64_t s = 0;
        for (const auto& e : entries) s += e.image_count;
        return s;
    }
    std::int64_t image_tokens() const { return total_images() * image_token_rate; }
    std::int64_t total_tokens() const {
        return total_prompt() + total_completion() + image_tokens();
    }
};

struct AgentState {
    std::string qid;
    std::string question;
    std::vector<std::string> candidates;
    DayTime query_time;
    std::vector<SubTask> plan;
    int current = 0;  // index of the next unexecuted sub-task
    std::vector<AnalysisNote> working_memory;
    std::optional<int> answer;
    TokenLedger token_ledger;
    std::vector<std::string> trace;
};

struct Stores {
    GraphStore* graph = nullptr;
    VisualIndex* frames = nullptr;
    TranscriptIndex* transcripts = nullptr;
};

struct AgentConfig {
    int k_total = 50;        // visual retrieval budget, "1 FPS -> 50"
    int max_rows = 50;       // ladder result cap
    int bm25_k = 10;
    int bm25_context_radius = 2;
    TranscriptVariant tsearch = TranscriptVariant::Bm25;
    int image_token_rate = 85;
    std::set<ToolKind> enabled_tools{ToolKind::EntityGraph, ToolKind::Visual, ToolKind::Audio};
    bool measure_wall_clock = false;  // keep traces byte-identical when off
};

struct AnswerTrace {
    AgentState state;
    int choice = 0;
    std::map<std::string, double> phase_seconds;
};

// --- serialization -------------------------------------------------------

inline void to_json(nlohmann::json& j, const DayTime& dt) {
    j = nlohmann::json{{"day", dt.day}, {"t", dt.t}};
}

inline void from_json(const nlohmann::json& j, DayTime& dt) {
    dt.day = j.at("day").get<int>();
    dt.t = j.at("t").get<int>();
}

inline void to_json(nlohmann::json& j, const AnalysisNote& n) {
    j = nlohmann::json{{"subtask_index", n.subtask_index},
                       {"tool", std::string(to_string(n.tool))},
                       {"summary", n.summary},
                       {"cited_timestamps", n.cited_timestamps},
                       {"cited_edges", n.cited_edges},
                       {"retrieved_count", n.retrieved_count},
                       {"error", n.error}};
}

inline void to_json(nlohmann::json& j, const LedgerEntry& e) {
    j = nlohmann::json{{"call_kind", e.call_kind},
                       {"prompt_tokens", e.prompt_tokens},
                       {"completion_tokens", e.completion_tokens},
                       {"image_count", e.image_count}};
}

inline void to_json(nlohmann::json& j, const TokenLedger& l) {
    j = nlohmann::json{{"entries", l.entries},
                       {"image_token_rate", l.image_token_rate},
                       {"total_prompt", l.total_prompt()},
                       {"total_completion", l.total_completion()},
                       {"image_tokens", l.image_tokens()},
                       {"total_tokens", l.total_tokens()}};
}

inline nlohmann::json subtask_to_json(const SubTask& s) {
    nlohmann::json j{{"index", s.index},
                     {"description", s.description},
                     {"tool", std::string(to_string(s.tool))}};
    if (const auto* g = std::get_if<GraphQueryIntent>(&s.args)) {
        nlohmann::json a = nlohmann::json::object();
        if (g->day) a["day"] = *g->day;
        if (g->time_range) {
            a["start_t"] = g->time_range->first;
            a["end_t"] = g->time_range->second;
        }
        if (g->source_id) a["source_id"] = *g->source_id;
        if (g->source_type) a["source_type"] = std::string(to_string(*g->source_type));
        if (g->target_id) a["target_id"] = *g->target_id;
        if (g->target_type) a["target_type"] = std::string(to_string(*g->target_type));
        if (g->rel) a["rel_type"] = std::string(to_string(*g->rel));
        if (g->evidence_substring) a["evidence"] = *g->evidence_substring;
        j["args"] = a;
    } else if (const auto* v = std::get_if<VisualToolArgs>(&s.args)) {
        nlohmann::json a{{"queries", v->queries}};
        if (v->filter.day) a["day"] = *v->filter.day;
        if (v->filter.time_range) {
            a["t_ge"] = v->filter.time_range->first;
            a["t_le"] = v->filter.time_range->second;
        }
        if (v->filter.location) a["location"] = *v->filter.location;
        j["args"] = a;
    } else if (const auto* au = std::get_if<AudioToolArgs>(&s.args)) {
        nlohmann::json a{{"task", au->task}};
        if (!au->query.empty()) a["query"] = au->query;
        if (!au->days.empty()) a["days"] = au->days;
        if (au->variant)
            a["variant"] = *au->variant == TranscriptVariant::Bm25 ? "bm25" : "llm";
        j["args"] = a;
    }
    return j;
}

inline nlohmann::json trace_to_json(const AnswerTrace& t) {
    nlohmann::json plan = nlohmann::json::array();
    for (const SubTask& s : t.state.plan) plan.push_back(subtask_to_json(s));
    return nlohmann::json{{"qid", t.state.qid},
                          {"question", t.state.question},
                          {"candidates", t.state.candidates},
                          {"query_time", t.state.query_time},
                          {"plan", plan},
                          {"executed_subtasks", t.state.current},
                          {"working_memory", t.state.working_memory},
                          {"choice", t.choice},
                          {"token_ledger", t.state.token_ledger},
                          {"trace", t.state.trace},
                          {"phase_seconds", t.phase_seconds}};
}

// --- planner output parsing ---------------------------------------------

namespace detail {

inline std::optional<GraphQueryIntent> parse_graph_args(const nlohmann::json& a) {
    GraphQueryIntent q;
    if (a.contains("day")) q.day = a.at("day").get<int>();
    if (a.contains("start_t") && a.contains("end_t"))
        q.time_range = {a.at("start_t").get<int>(), a.at("end_t").get<int>()};
    if (a.contains("source_id")) q.source_id = a.at("source_id").get<std::string>();
    if (a.contains("target_id")) q.target_id = a.at("target_id").get<std::string>();
    if (a.contains("source_type")) {
        std::string t = a.at("source_type").get<std::string>();
        if (!is_entity_type(t)) return std::nullopt;
        q.source_type = parse_entity_type(t);
    }
    if (a.contains("target_type")) {
        std::string t = a.at("target_type").get<std::string>();
        if (!is_entity_type(t)) return std::nullopt;
        q.target_type = parse_entity_type(t);
    }
    if (a.contains("rel_type")) {
        std::string r = a.at("rel_type").get<std::string>();
        if (!is_relation_type(r)) return std::nullopt;
        q.rel = parse_relation_type(r);
    }
    if (a.contains("evidence")) q.evidence_substring = a.at("evidence").get<std::string>();
    if (!q.has_core_constraint()) return std::nullopt;
    return q;
}

inline std::optional<VisualToolArgs> parse_visual_args(const nlohmann::json& a,
                                                       const std::string& fallback_query) {
    VisualToolArgs v;
    if (a.contains("queries"))
        for (const auto& q : a.at("queries")) v.queries.push_back(q.get<std::string>());
    if (v.queries.empty() && !fallback_query.empty()) v.queries.push_back(fallback_query);
    if (v.queries.empty() || v.queries.size() > 3) return std::nullopt;
    if (a.contains("day")) v.filter.day = a.at("day").get<int>();
    if (a.contains("t_ge") && a.contains("t_le"))
        v.filter.time_range = {a.at("t_ge").get<int>(), a.at("t_le").get<int>()};
    if (a.contains("location")) v.filter.location = a.at("location").get<std::string>();
    return v;
}

inline std::optional<AudioToolArgs> parse_audio_args(const nlohmann::json& a,
                                                     const std::string& description) {
    AudioToolArgs au;
    au.task = a.value("task", description);
    au.query = a.value("query", "");
    if (a.contains("days"))
        for (const auto& d : a.at("days")) au.days.push_back(d.get<int>());
    if (a.contains("variant")) {
        std::string v = a.at("variant").get<std::string>();
        if (v == "bm25")
            au.variant = TranscriptVariant::Bm25;
        else if (v == "llm")
            au.variant = TranscriptVariant::Llm;
        else
            return std::nullopt;
    }
    if (au.task.empty() && au.query.empty()) return std::nullopt;
    return au;
}

inline std::vector<DayTime> parse_timestamp_list(const nlohmann::json& arr, int default_day) {
    std::vector<DayTime> out;
    if (!arr.is_array()) return out;
    for (const auto& item : arr) {
        try {
            if (item.is_string()) {
                for (const DayTime& dt : parse_cited_timestamps(item.get<std::string>(),
                                                                default_day))
                    out.push_back(dt);
            } else if (item.is_object()) {
                DayTime dt = item.get<DayTime>();
                dt.validate();
                out.push_back(dt);
            }
        } catch (const std::exception&) {
            // malformed citation: skip
        }
    }
    return out;
}

class PhaseTimer {
  public:
    explicit PhaseTimer(bool enabled) : enabled_(enabled) {}

    void measure(const std::string& phase, const std::function<void()>& fn,
                 std::map<std::string, double>& out) {
        if (!enabled_) {
            fn();
            out.emplace(phase, 0.0);
            return;
        }
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        out[phase] += std::chrono::duration<double>(t1 - t0).count();
    }

  private:
    bool enabled_;
};

}  // namespace detail

// --- agent ---------------------------------------------------------------

class Agent {
  public:
    Agent(Stores stores, ModelClient& client, AgentConfig config = {})
        : stores_(stores), client_(&client), config_(std::move(config)) {}

    // Decompose the question into at most five tool-typed sub-tasks.
    // Over-long plans are truncated; steps with unknown tools, disabled
    // tools, or unlowerable arguments are dropped with a trace note.
    std::vector<SubTask> plan(AgentState& state) {
        ClientRequest req;
        req.kind = CallKind::Plan;
        nlohmann::json tools = nlohmann::json::array();
        for (ToolKind t : config_.enabled_tools) tools.push_back(std::string(to_string(t)));
        req.payload = {{"question", state.question},
                       {"candidates", state.candidates},
                       {"query_time", state.query_time},
                       {"tools", tools}};
        req.fixture_key = state.qid;
        ClientResponse resp = client_->call(req);
        state.token_ledger.add(CallKind::Plan, resp.usage);

        std::vector<SubTask> out;
        const nlohmann::json steps = resp.output.is_object()
                                         ? resp.output.value("steps", nlohmann::json::array())
                                         : nlohmann::json::array();
        for (const auto& step : steps) {
            if (!step.is_object()) continue;
            std::string tool_name = step.value("tool", "");
            std::optional<ToolKind> tool = parse_tool_kind(tool_name);
            if (!tool) {
                state.trace.push_back("plan: dropped step with unknown tool \"" + tool_name +
                                      "\"");
                continue;
            }
            if (!config_.enabled_tools.count(*tool)) {
                state.trace.push_back("plan: dropped step for disabled tool \"" + tool_name +
                                      "\"");
                continue;
            }
            std::string description = step.value("description", "");
            nlohmann::json args = step.value("args", nlohmann::json::object());
            std::optional<ToolArgs> lowered;
            try {
                switch (*tool) {
                    case ToolKind::EntityGraph:
                        if (auto g = detail::parse_graph_args(args)) lowered = *g;
                        break;
                    case ToolKind::Visual:
                        if (auto v = detail::parse_visual_args(args, description)) lowered = *v;
                        break;
                    case ToolKind::Audio:
                        if (auto a = detail::parse_audio_args(args, description)) lowered = *a;
                        break;
                }
            } catch (const std::exception&) {
                lowered.reset();
            }
            if (!lowered) {
                state.trace.push_back("plan: dropped step with unlowerable args (tool " +
                                      tool_name + ")");
                continue;
            }
            if (static_cast<int>(out.size()) == kMaxPlanSteps) {
                state.trace.push_back("plan: truncated to " + std::to_string(kMaxPlanSteps) +
                                      " steps");
                break;
            }
            out.push_back({static_cast<int>(out.size()) + 1, description, *tool, *lowered});
        }
        if (out.empty()) state.trace.push_back("plan: no usable steps; answering from empty memory");
        return out;
    }

    // Run the sub-task at state.current: retrieve, analyze, append to
    // working memory. Tool failures become error notes; the run goes on.
    void execute_subtask(AgentState& state) {
        const SubTask& task = state.plan[static_cast<size_t>(state.current)];
        AnalysisNote note;
        note.subtask_index = task.index;
        note.tool = task.tool;
        try {
            nlohmann::json retrieved = retrieve(state, task, note);
            analyze(state, task, retrieved, note);
        } catch (const std::exception& e) {
            note.summary = std::string("tool error: ") + e.what();
            note.cited_timestamps.clear();
            note.cited_edges.clear();
            note.error = true;
            state.trace.push_back("subtask " + std::to_string(task.index) +
                                  ": error isolated: " + e.what());
        }
        state.working_memory.push_back(std::move(note));
        ++state.current;
    }

    enum class Completion { Complete, Incomplete };

    // Early-exit check: does working memory already answer the remaining
    // sub-tasks? Anything unparseable is the safe default, incomplete.
    Completion grade_completion(AgentState& state) {
        nlohmann::json remaining = nlohmann::json::array();
        for (size_t i = static_cast<size_t>(state.current); i < state.plan.size(); ++i)
            remaining.push_back(state.plan[i].description);
        ClientRequest req;
        req.kind = CallKind::Grade;
        req.payload = {{"question", state.question},
                       {"plan_size", state.plan.size()},
                       {"executed", state.current},
                       {"remaining", remaining},
                       {"memory", memory_json(state)}};
        req.fixture_key = state.qid + "#" + std::to_string(state.current);
        try {
            ClientResponse resp = client_->call(req);
            state.token_ledger.add(CallKind::Grade, resp.usage);
            std::string verdict;
            if (resp.output.is_string())
                verdict = resp.output.get<std::string>();
            else if (resp.output.is_object())
                verdict = resp.output.value("verdict", "");
            if (lower_copy(trim_copy(verdict)) == "complete") return Completion::Complete;
        } catch (const std::exception& e) {
            state.trace.push_back("grade: client failure, treating as incomplete: " +
                                  std::string(e.what()));
        }
        return Completion::Incomplete;
    }

    // Final synthesis: send question, candidates and working memory,
    // parse the first standalone A-D letter. Unparseable output falls
    // back to candidate 0, recorded in the trace.
    int answer(AgentState& state) {
        ClientRequest req;
        req.kind = CallKind::Answer;
        req.payload = {{"question", state.question},
                       {"candidates", state.candidates},
                       {"query_time", state.query_time},
                       {"memory", memory_json(state)}};
        req.fixture_key = state.qid;
        std::string text;
        try {
            ClientResponse resp = client_->call(req);
            state.token_ledger.add(CallKind::Answer, resp.usage);
            if (resp.output.is_string())
                text = resp.output.get<std::string>();
            else if (resp.output.is_object())
                text = resp.output.value("answer", "");
        } catch (const std::exception& e) {
            state.trace.push_back("answer: client failure: " + std::string(e.what()));
        }
        std::optional<int> choice = extract_choice_letter(text);
        if (!choice) {
            state.trace.push_back("answer: fallback to candidate 0");
            return 0;
        }
        return *choice;
    }

    AnswerTrace run(const std::string& qid, const std::string& question,
                    const std::vector<std::string>& candidates, DayTime query_time) {
        if (candidates.size() != 4)
            throw ValidationError("run: expected 4 candidates, got " +
                                  std::to_string(candidates.size()));
        query_time.validate();
        AnswerTrace trace;
        AgentState& state = trace.state;
        state.qid = qid;
        state.question = question;
        state.candidates = candidates;
        state.query_time = query_time;
        state.token_ledger.image_token_rate = config_.image_token_rate;

        detail::PhaseTimer timer(config_.measure_wall_clock);
        timer.measure("planning", [&] { state.plan = plan(state); }, trace.phase_seconds);

        for (const char* phase : {"retrieval_eg", "retrieval_visual", "retrieval_audio",
                                  "grading"})
            trace.phase_seconds.emplace(phase, 0.0);

        while (state.current < static_cast<int>(state.plan.size())) {
            const SubTask& task = state.plan[static_cast<size_t>(state.current)];
            std::string phase = "retrieval_" + route(task.tool);
            timer.measure(phase, [&] { execute_subtask(state); }, trace.phase_seconds);
            if (state.current < static_cast<int>(state.plan.size())) {
                Completion c = Completion::Incomplete;
                timer.measure("grading", [&] { c = grade_completion(state); },
                              trace.phase_seconds);
                if (c == Completion::Complete) {
                    state.trace.push_back("grade: early exit after subtask " +
                                          std::to_string(state.current));
                    break;
                }
            }
        }

        timer.measure("vqa", [&] { trace.choice = answer(state); }, trace.phase_seconds);
        state.answer = trace.choice;
        return trace;
    }

    // First standalone A-D letter, case-insensitive: "the answer is (C)"
    // -> 2. A letter adjacent to other alphanumerics does not count.
    static std::optional<int> extract_choice_letter(const std::string& text) {
        for (size_t i = 0; i < text.size(); ++i) {
            char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i])));
            if (c < 'A' || c > 'D') continue;
            bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
            bool right_ok =
                i + 1 == text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]));
            if (left_ok && right_ok) return c - 'A';
        }
        return std::nullopt;
    }

  private:
    nlohmann::json memory_json(const AgentState& state) const {
        nlohmann::json m = nlohmann::json::array();
        for (const AnalysisNote& n : state.working_memory) m.push_back(nlohmann::json(n));
        return m;
    }

    nlohmann::json retrieve(AgentState& state, const SubTask& task, AnalysisNote& note) {
        switch (task.tool) {
            case ToolKind::EntityGraph: {
                if (!stores_.graph) throw ValidationError("graph store not available");
                GraphQueryIntent intent = std::get<GraphQueryIntent>(task.args);
                intent.query_time = state.query_time;
                LadderResult result = stores_.graph->run_ladder(intent, config_.max_rows);
                note.retrieved_count = static_cast<int>(result.rows.size());
                nlohmann::json rows = nlohmann::json::array();
                for (const RelationEdge& e : result.rows) {
                    nlohmann::json r(e);
                    r["id"] = e.row_id;
                    rows.push_back(r);
                }
                return nlohmann::json{{"kind", "eg"},
                                      {"stage_used", std::string(to_string(result.stage_used))},
                                      {"queries_issued", result.queries_issued},
                                      {"rows", rows}};
            }
            case ToolKind::Visual: {
                if (!stores_.frames) throw ValidationError("frame index not available");
                const auto& args = std::get<VisualToolArgs>(task.args);
                std::vector<VisualQuery> queries;
                for (const std::string& text : args.queries) {
                    ClientRequest req;
                    req.kind = CallKind::EmbedText;
                    req.payload = {{"text", text}, {"dim", stores_.frames->dim()}};
                    req.fixture_key = text;
                    ClientResponse resp = client_->call(req);
                    state.token_ledger.add(CallKind::EmbedText, resp.usage);
                    VisualQuery vq;
                    vq.vec = resp.output.at("embedding").get<std::vector<float>>();
                    vq.filter = args.filter;
                    vq.filter.before = state.query_time;
                    queries.push_back(std::move(vq));
                }
                std::vector<FrameHit> hits =
                    stores_.frames->multi_query_search(queries, config_.k_total);
                note.retrieved_count = static_cast<int>(hits.size());
                nlohmann::json frames = nlohmann::json::array();
                for (const FrameHit& h : hits) {
                    nlohmann::json f{{"frame_id", h.frame.frame_id},
                                     {"day", h.frame.when.day},
                                     {"t", h.frame.when.t},
                                     {"score", h.score}};
                    if (h.frame.location) f["location"] = *h.frame.location;
                    frames.push_back(f);
                }
                return nlohmann::json{{"kind", "visual"}, {"frames", frames}};
            }
            case ToolKind::Audio: {
                if (!stores_.transcripts) throw ValidationError("transcript index not available");
                const auto& args = std::get<AudioToolArgs>(task.args);
                TranscriptVariant variant = args.variant.value_or(config_.tsearch);
                if (variant == TranscriptVariant::Llm) {
                    std::vector<int> days = args.days;
                    if (days.empty())
                        for (int d : stores_.transcripts->days())
                            if (d <= state.query_time.day) days.push_back(d);
                    nlohmann::json analyses = nlohmann::json::array();
                    int count = 0;
                    for (const TranscriptAnalysis& a : stores_.transcripts->llm_search_days(
                             args.task, memory_json(state).dump(), days, *client_)) {
                        state.token_ledger.add(CallKind::TranscriptLlmSearch, a.usage);
                        analyses.push_back(nlohmann::json{{"day", a.day},
                                                          {"analysis", a.analysis},
                                                          {"timestamps", a.cited_timestamps}});
                        for (const DayTime& t : a.cited_timestamps)
                            note.cited_timestamps.push_back(t);
                        ++count;
                    }
                    note.retrieved_count = count;
                    return nlohmann::json{{"kind", "audio"},
                                          {"variant", "llm"},
                                          {"analyses", analyses}};
                }
                std::string query = args.query.empty() ? args.task : args.query;
                std::optional<std::pair<DayTime, DayTime>> range =
                    std::make_pair(DayTime{1, 0}, state.query_time);
                std::vector<LexicalHit> hits =
                    stores_.transcripts->bm25_search(query, range, config_.bm25_k);
                note.retrieved_count = static_cast<int>(hits.size());
                nlohmann::json hits_json = nlohmann::json::array();
                for (const LexicalHit& h : hits) {
                    nlohmann::json context = nlohmann::json::array();
                    for (const Utterance& u : stores_.transcripts->context_window(
                             h.utterance.utt_id, config_.bm25_context_radius))
                        context.push_back(nlohmann::json(u));
                    hits_json.push_back(nlohmann::json{{"utterance", h.utterance},
                                                       {"score", h.score},
                                                       {"context", context}});
                }
                return nlohmann::json{{"kind", "audio"},
                                      {"variant", "bm25"},
                                      {"hits", hits_json}};
            }
        }
        throw ValidationError("unreachable tool kind");
    }

    void analyze(AgentState& state, const SubTask& task, const nlohmann::json& retrieved,
                 AnalysisNote& note) {
        ClientRequest req;
        req.kind = CallKind::Analyze;
        req.payload = {{"subtask", subtask_to_json(task)},
                       {"question", state.question},
                       {"retrieved", retrieved},
                       {"retrieved_count", note.retrieved_count}};
        req.fixture_key = state.qid + "#" + std::to_string(task.index);
        ClientResponse resp = client_->call(req);
        state.token_ledger.add(CallKind::Analyze, resp.usage);

        if (resp.output.is_string())
            note.summary = resp.output.get<std::string>();
        else if (resp.output.is_object())
            note.summary = resp.output.value("summary", "");

        int default_day = state.query_time.day;
        for (const DayTime& dt : parse_cited_timestamps(note.summary, default_day))
            note.cited_timestamps.push_back(dt);
        if (resp.output.is_object()) {
            for (const DayTime& dt : detail::parse_timestamp_list(
                     resp.output.value("cited_timestamps", nlohmann::json::array()),
                     default_day))
                note.cited_timestamps.push_back(dt);
            if (resp.output.contains("cited_edges") && stores_.graph) {
                for (const auto& id : resp.output.at("cited_edges")) {
                    if (!id.is_number_integer()) continue;
                    std::int64_t row_id = id.get<std::int64_t>();
                    // Citations must reference rows that actually exist.
                    if (stores_.graph->edge_by_id(row_id))
                        note.cited_edges.push_back(row_id);
                }
            }
        }
        dedup_timestamps(note.cited_timestamps);
    }

    static void dedup_timestamps(std::vector<DayTime>& ts) {
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    }

    Stores stores_;
    ModelClient* client_;
    AgentConfig config_;
};

}  // namespace egqa
