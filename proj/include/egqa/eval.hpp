#pragma once
// Evaluation harness: benchmark loading, MCQ accuracy by category,
// recall@W over tool-selected timestamps, oracle context windows, and
// token/runtime reporting.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "egqa/agent.hpp"
#include "egqa/time.hpp"

namespace egqa {

enum class McqCategory { EntityLog, EventRecall, HabitInsight, RelationMap, TaskMaster };

inline std::string_view to_string(McqCategory c) {
    switch (c) {
        case McqCategory::EntityLog: return "EntityLog";
        case McqCategory::EventRecall: return "EventRecall";
        case McqCategory::HabitInsight: return "HabitInsight";
        case McqCategory::RelationMap: return "RelationMap";
        case McqCategory::TaskMaster: return "TaskMaster";
    }
    return "?";
}

inline std::optional<McqCategory> parse_mcq_category(std::string_view s) {
    for (McqCategory c : {McqCategory::EntityLog, McqCategory::EventRecall,
                          McqCategory::HabitInsight, McqCategory::RelationMap,
                          McqCategory::TaskMaster})
        if (s == to_string(c)) return c;
    return std::nullopt;
}

struct MCQItem {
    std::string qid;
    std::string question;
    std::vector<std::string> candidates;  // exactly 4
    int gold = 0;                         // 0..3
    std::optional<McqCategory> category;  // absent for non-categorized corpora
    DayTime query_time;
    std::vector<DayTime> target_times;    // ground-truth relevant moments

    void validate() const {
        if (candidates.size() != 4)
            throw ValidationError("MCQItem " + qid + ": expected 4 candidates, got " +
                                  std::to_string(candidates.size()));
        if (gold < 0 || gold > 3)
            throw ValidationError("MCQItem " + qid + ": gold index out of range");
        query_time.validate();
        for (const DayTime& t : target_times) {
            t.validate();
            if (query_time < t)
                throw ValidationError("MCQItem " + qid + ": target_time after query_time");
        }
    }
};

inline void from_json(const nlohmann::json& j, MCQItem& item) {
    item.qid = j.at("qid").get<std::string>();
    item.question = j.at("question").get<std::string>();
    item.candidates = j.at("candidates").get<std::vector<std::string>>();
    item.gold = j.at("gold").get<int>();
    if (j.contains("category") && !j.at("category").is_null()) {
        std::string c = j.at("category").get<std::string>();
        item.category = parse_mcq_category(c);
        if (!item.category)
            throw ValidationError("MCQItem " + item.qid + ": unknown category \"" + c + "\"");
    }
    item.query_time = j.at("query_time").get<DayTime>();
    item.target_times.clear();
    if (j.contains("target_times"))
        for (const auto& t : j.at("target_times")) item.target_times.push_back(t.get<DayTime>());
}

inline void to_json(nlohmann::json& j, const MCQItem& item) {
    j = nlohmann::json{{"qid", item.qid},
                       {"question", item.question},
                       {"candidates", item.candidates},
                       {"gold", item.gold},
                       {"query_time", item.query_time},
                       {"target_times", item.target_times}};
    if (item.category) j["category"] = std::string(to_string(*item.category));
}

// Benchmark file: a JSON array of MCQ items. Invalid items are reported
// with their qid.
inline std::vector<MCQItem> load_benchmark(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open benchmark file: " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    if (!doc.is_array()) throw ValidationError("benchmark file must be a JSON array");
    std::vector<MCQItem> items;
    for (const auto& j : doc) {
        MCQItem item;
        std::string qid = j.value("qid", "<missing qid>");
        try {
            item = j.get<MCQItem>();
            item.validate();
        } catch (const std::exception& e) {
            throw ValidationError("benchmark item " + qid + ": " + e.what());
        }
        items.push_back(std::move(item));
    }
    return items;
}

struct AccuracyReport {
    double overall = 0.0;  // percentage, 0..100
    std::map<McqCategory, double> per_category;
    int correct = 0;
    int total = 0;
    std::vector<std::string> warnings;
};

inline double round_pct(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

// Traces align to items by qid; a missing trace counts as incorrect.
inline AccuracyReport accuracy(const std::vector<AnswerTrace>& traces,
                               const std::vector<MCQItem>& items) {
    std::map<std::string, const AnswerTrace*> by_qid;
    for (const AnswerTrace& t : traces) by_qid[t.state.qid] = &t;
    AccuracyReport rep;
    std::map<McqCategory, std::pair<int, int>> cat;  // correct, total
    for (const MCQItem& item : items) {
        ++rep.total;
        bool correct = false;
        auto it = by_qid.find(item.qid);
        if (it == by_qid.end())
            rep.warnings.push_back("missing trace for " + item.qid + "; counted incorrect");
        else
            correct = it->second->choice == item.gold;
        if (correct) ++rep.correct;
        if (item.category) {
            auto& [c, n] = cat[*item.category];
            if (correct) ++c;
            ++n;
        }
    }
    rep.overall = rep.total ? round_pct(static_cast<double>(rep.correct) / rep.total) : 0.0;
    for (const auto& [category, counts] : cat)
        rep.per_category[category] =
            round_pct(static_cast<double>(counts.first) / counts.second);
    return rep;
}

struct RecallConfig {
    std::int64_t window_seconds = 60;  // W
    std::int64_t day_length_s = kSecondsPerDay;

    void validate() const {
        if (window_seconds <= 0) throw ValidationError("RecallConfig: W must be > 0");
        if (day_length_s <= 0) throw ValidationError("RecallConfig: day_length_s must be > 0");
    }
};

// Per-item recall: a target is hit when some selected timestamp on the
// same day lies within W/2 seconds of it (window centered on the ground
// truth). Returns hits / |targets|.
inline double recall_at_w(const std::vector<DayTime>& selected,
                          const std::vector<DayTime>& targets, const RecallConfig& cfg) {
    cfg.validate();
    if (targets.empty()) throw ValidationError("recall_at_w: empty targets");
    int hits = 0;
    for (const DayTime& gt : targets) {
        bool hit = false;
        for (const DayTime& s : selected) {
            if (s.day != gt.day) continue;
            if (2 * seconds_between(s, gt, cfg.day_length_s) <= cfg.window_seconds) {
                hit = true;
                break;
            }
        }
        if (hit) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(targets.size());
}

// Mean of per-item fractions; items with no targets are excluded with a
// warning.
inline double corpus_recall_at_w(const std::vector<std::vector<DayTime>>& selected_per_item,
                                 const std::vector<std::vector<DayTime>>& targets_per_item,
                                 const RecallConfig& cfg,
                                 std::vector<std::string>* warnings = nullptr) {
    if (selected_per_item.size() != targets_per_item.size())
        throw ValidationError("corpus_recall_at_w: size mismatch");
    double sum = 0.0;
    int scored = 0;
    for (size_t i = 0; i < targets_per_item.size(); ++i) {
        if (targets_per_item[i].empty()) {
            if (warnings)
                warnings->push_back("item " + std::to_string(i) +
                                    " has no targets; excluded from recall");
            continue;
        }
        sum += recall_at_w(selected_per_item[i], targets_per_item[i], cfg);
        ++scored;
    }
    return scored ? sum / scored : 0.0;
}

// All timestamps the tools' analyses cited during a run, optionally
// restricted to one tool.
inline std::vector<DayTime> selected_timestamps(const AnswerTrace& trace,
                                                std::optional<ToolKind> tool = std::nullopt) {
    std::vector<DayTime> out;
    for (const AnalysisNote& n : trace.state.working_memory) {
        if (tool && n.tool != *tool) continue;
        out.insert(out.end(), n.cited_timestamps.begin(), n.cited_timestamps.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct FrameWindow {
    int day = 1;
    int t_lo = 0;  // HHMMSS
    int t_hi = 0;
};

struct OracleContext {
    std::vector<FrameWindow> frame_windows;  // one per target, +-25 s
    std::vector<int> transcript_days;        // full gold day(s)
};

// Upper-bound context: 50 frames at 1 FPS centered on each target means
// a 50-second window, clipped at the day's edges; transcripts cover the
// whole gold day.
inline OracleContext oracle_context(const MCQItem& item) {
    if (item.target_times.empty())
        throw ValidationError("oracle_context: item " + item.qid + " has no target_times");
    OracleContext ctx;
    for (const DayTime& t : item.target_times) {
        int center = hhmmss_to_seconds(t.t);
        int lo = std::max(0, center - 25);
        int hi = std::min(kSecondsPerDay - 1, center + 25);
        ctx.frame_windows.push_back({t.day, seconds_to_hhmmss(lo), seconds_to_hhmmss(hi)});
        if (std::find(ctx.transcript_days.begin(), ctx.transcript_days.end(), t.day) ==
            ctx.transcript_days.end())
            ctx.transcript_days.push_back(t.day);
    }
    std::sort(ctx.transcript_days.begin(), ctx.transcript_days.end());
    return ctx;
}

// Machine-readable roll-up of a batch of traces: per-phase wall-clock
// means, token totals and means, and selected-timestamp counts per tool.
inline nlohmann::json report(const std::vector<AnswerTrace>& traces) {
    if (traces.empty()) throw ValidationError("report: need at least one trace");
    std::map<std::string, double> phase_sums;
    std::int64_t token_total = 0;
    std::map<std::string, std::int64_t> selected_per_tool;
    std::map<std::string, std::int64_t> input_per_tool;
    for (const AnswerTrace& t : traces) {
        for (const auto& [phase, sec] : t.phase_seconds) phase_sums[phase] += sec;
        token_total += t.state.token_ledger.total_tokens();
        for (const AnalysisNote& n : t.state.working_memory) {
            selected_per_tool[std::string(to_string(n.tool))] +=
                static_cast<std::int64_t>(n.cited_timestamps.size());
            input_per_tool[std::string(to_string(n.tool))] += n.retrieved_count;
        }
    }
    double n = static_cast<double>(traces.size());
    nlohmann::json phase_means = nlohmann::json::object();
    for (const auto& [phase, sum] : phase_sums) phase_means[phase] = sum / n;
    return nlohmann::json{{"traces", traces.size()},
                          {"phase_seconds_mean", phase_means},
                          {"tokens_total", token_total},
                          {"tokens_mean", static_cast<double>(token_total) / n},
                          {"selected_timestamps_per_tool", selected_per_tool},
                          {"retrieved_items_per_tool", input_per_tool}};
}

// Run every benchmark item through the agent with bounded parallelism.
// Results are collected by index, so the output order (and, with the
// scripted client, the content) is independent of the job count.
inline std::vector<AnswerTrace> run_benchmark(const std::vector<MCQItem>& items, Stores stores,
                                              ModelClient& client, const AgentConfig& config,
                                              int jobs = 1) {
    if (jobs < 1) throw ValidationError("run_benchmark: jobs must be >= 1");
    std::vector<AnswerTrace> traces(items.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) {
            Agent agent(stores, client, config);
            const MCQItem& item = items[i];
            traces[i] = agent.run(item.qid, item.question, item.candidates, item.query_time);
        }
    };
    if (jobs == 1 || items.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        int n = std::min<int>(jobs, static_cast<int>(items.size()));
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return traces;
}

}  // namespace egqa
