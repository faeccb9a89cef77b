#pragma once
// Test-only oracles, independent of the implementations they check.
// Each one re-derives expected results by brute force.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "egqa/graph_store.hpp"
#include "egqa/time.hpp"
#include "egqa/transcript_search.hpp"
#include "egqa/visual_index.hpp"

namespace oracle {

// Re-check every query predicate with a linear scan, written without
// reference to GraphStore::query.
inline bool row_matches(const egqa::RelationEdge& e, const egqa::GraphQueryIntent& q) {
    using egqa::EntityMatch;
    if (e.interval.day() > q.query_time.day) return false;
    if (q.day && e.interval.day() != *q.day) return false;
    if (q.time_range &&
        (e.interval.start.t < q.time_range->first || e.interval.end.t > q.time_range->second))
        return false;
    auto entity_ok = [&](const std::string& row_id_text,
                         const std::optional<std::string>& want) {
        if (!want) return true;
        if (q.entity_match == EntityMatch::Exact) return egqa::iequals(row_id_text, *want);
        return egqa::icontains(row_id_text, *want);
    };
    if (!entity_ok(e.source.id, q.source_id)) return false;
    if (!entity_ok(e.target.id, q.target_id)) return false;
    if (q.source_type && e.source.etype != *q.source_type) return false;
    if (q.target_type && e.target.etype != *q.target_type) return false;
    if (q.rel && e.rel != *q.rel) return false;
    if (q.evidence_substring && !egqa::icontains(e.evidence, *q.evidence_substring))
        return false;
    return true;
}

inline std::vector<egqa::RelationEdge> scan_query(const std::vector<egqa::RelationEdge>& rows,
                                                  const egqa::GraphQueryIntent& q) {
    std::vector<egqa::RelationEdge> out;
    for (const auto& e : rows)
        if (row_matches(e, q)) out.push_back(e);
    std::sort(out.begin(), out.end(), [](const egqa::RelationEdge& a,
                                         const egqa::RelationEdge& b) {
        if (a.interval.day() != b.interval.day()) return a.interval.day() < b.interval.day();
        if (a.interval.start.t != b.interval.start.t)
            return a.interval.start.t < b.interval.start.t;
        return a.row_id < b.row_id;
    });
    return out;
}

// First ladder stage with a non-empty scan result, evaluated per the
// stage definitions (via derive_stage_intent, which is a pure function).
inline std::pair<egqa::LadderStage, std::vector<egqa::RelationEdge>> scan_ladder(
    const std::vector<egqa::RelationEdge>& rows, const egqa::GraphQueryIntent& intent) {
    for (egqa::LadderStage stage : egqa::kLadderStages) {
        auto hits = scan_query(rows, egqa::derive_stage_intent(intent, stage));
        if (!hits.empty()) return {stage, hits};
    }
    return {egqa::LadderStage::RelaxRelType, {}};
}

// Brute-force cosine top-k with the documented tie-break.
inline std::vector<std::pair<std::string, double>> brute_knn(
    const std::vector<egqa::FrameRecord>& frames, std::vector<double> query,
    const egqa::FrameFilter& filter, int k) {
    double n = 0;
    for (double x : query) n += x * x;
    n = std::sqrt(n);
    for (double& x : query) x /= n;
    struct Hit {
        double score;
        egqa::DayTime when;
        std::string id;
    };
    std::vector<Hit> hits;
    for (const auto& f : frames) {
        if (filter.day && f.when.day != *filter.day) continue;
        if (filter.time_range &&
            (f.when.t < filter.time_range->first || f.when.t > filter.time_range->second))
            continue;
        if (filter.location && (!f.location || !egqa::iequals(*f.location, *filter.location)))
            continue;
        if (filter.before && *filter.before < f.when) continue;
        double s = 0;
        for (size_t i = 0; i < query.size(); ++i) s += query[i] * f.embedding[i];
        hits.push_back({s, f.when, f.frame_id});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.when != b.when) return a.when < b.when;
        return a.id < b.id;
    });
    if (hits.size() > size_t(k)) hits.resize(size_t(k));
    std::vector<std::pair<std::string, double>> out;
    for (const auto& h : hits) out.emplace_back(h.id, h.score);
    return out;
}

// Independent Okapi BM25: same textbook formula, separate code path.
inline std::vector<std::pair<std::string, double>> bm25_scores(
    const std::vector<egqa::Utterance>& corpus, const std::string& query, double k1 = 1.2,
    double b = 0.75) {
    std::vector<std::vector<std::string>> docs;
    for (const auto& u : corpus) docs.push_back(egqa::tokenize(u.text));
    std::map<std::string, int> df;
    double total_len = 0;
    for (const auto& d : docs) {
        total_len += double(d.size());
        std::map<std::string, bool> seen;
        for (const auto& t : d)
            if (!seen[t]) {
                seen[t] = true;
                ++df[t];
            }
    }
    double n_docs = double(docs.size());
    double avgdl = n_docs > 0 ? total_len / n_docs : 0;
    std::vector<std::pair<std::string, double>> out;
    auto terms = egqa::tokenize(query);
    for (size_t i = 0; i < docs.size(); ++i) {
        double score = 0;
        for (const auto& term : terms) {
            double tf = double(std::count(docs[i].begin(), docs[i].end(), term));
            if (tf == 0) continue;
            double idf = std::log(1.0 + (n_docs - df[term] + 0.5) / (df[term] + 0.5));
            score += idf * tf * (k1 + 1.0) /
                     (tf + k1 * (1.0 - b + b * double(docs[i].size()) / avgdl));
        }
        out.emplace_back(corpus[i].utt_id, score);
    }
    return out;
}

// Window-centered recall, recomputed directly from the definition.
inline double recall_window(const std::vector<egqa::DayTime>& selected,
                            const std::vector<egqa::DayTime>& targets, long long w,
                            long long day_len = 86400) {
    int hits = 0;
    for (const auto& gt : targets) {
        bool hit = false;
        for (const auto& s : selected) {
            if (s.day != gt.day) continue;
            long long a = (s.day - 1) * day_len + egqa::hhmmss_to_seconds(s.t);
            long long b = (gt.day - 1) * day_len + egqa::hhmmss_to_seconds(gt.t);
            long long d = a > b ? a - b : b - a;
            if (2 * d <= w) hit = true;
        }
        if (hit) ++hits;
    }
    return double(hits) / double(targets.size());
}

// --- randomized fixtures -------------------------------------------------

inline egqa::RelationEdge random_edge(std::mt19937& rng) {
    static const std::vector<std::string> people{"Jake", "Alice", "Shure", "Katrina", "Tasha"};
    static const std::vector<std::string> objects{"phone", "microwave", "guitar",
                                                  "Katrina's luggage", "mobile phone"};
    static const std::vector<std::string> places{"kitchen", "yard", "living room"};
    std::uniform_int_distribution<int> day(1, 7), hour(8, 21), ms(0, 59), pick3(0, 2);
    std::uniform_int_distribution<size_t> pp(0, people.size() - 1), op(0, objects.size() - 1),
        lp(0, places.size() - 1);
    auto entity = [&](int kind) -> egqa::EntityRef {
        switch (kind) {
            case 0: return {people[pp(rng)], egqa::EntityType::Person};
            case 1: return {objects[op(rng)], egqa::EntityType::Object};
            default: return {places[lp(rng)], egqa::EntityType::Location};
        }
    };
    egqa::RelationEdge e;
    e.source = entity(pick3(rng));
    e.target = entity(pick3(rng));
    e.rel = egqa::kAllRelationTypes[std::uniform_int_distribution<size_t>(0, 3)(rng)];
    int d = day(rng);
    int start = egqa::encode_time(hour(rng), ms(rng), ms(rng));
    int end_h = std::min(23, start / 10000 + 1);
    int end = egqa::encode_time(end_h, ms(rng), ms(rng));
    if (end < start) std::swap(end, start);
    e.interval = {{d, start}, {d, end}};
    static const std::vector<std::string> snippets{
        "", "Got it.", "let me grab the phone", "we talked about the trip",
        "the microwave beeped"};
    e.evidence = snippets[std::uniform_int_distribution<size_t>(0, snippets.size() - 1)(rng)];
    return e;
}

inline egqa::GraphQueryIntent random_intent(std::mt19937& rng,
                                            const std::vector<egqa::RelationEdge>& rows) {
    std::uniform_int_distribution<int> coin(0, 1), day(1, 7), qday(1, 7);
    egqa::GraphQueryIntent q;
    q.query_time = {qday(rng), 235959};
    // bias toward fields taken from real rows so stages actually fire
    if (!rows.empty()) {
        const auto& seed = rows[std::uniform_int_distribution<size_t>(0, rows.size() - 1)(rng)];
        if (coin(rng)) q.source_id = seed.source.id;
        if (coin(rng)) q.target_id = seed.target.id;
        if (coin(rng)) q.rel = seed.rel;
        if (coin(rng)) q.day = seed.interval.day();
        if (coin(rng))
            q.time_range = {seed.interval.start.t, seed.interval.end.t};
        if (coin(rng) && !seed.evidence.empty()) q.evidence_substring = seed.evidence;
    }
    if (!q.has_core_constraint()) q.target_id = "phone";
    if (coin(rng) && q.source_id) q.source_type = egqa::EntityType::Person;
    return q;
}

}  // namespace oracle
