#pragma once
// Entity-graph construction: fuse 30-second caption windows with
// overlapping transcript utterances into documents, run the extractor
// through the model client, temporally annotate each raw edge, and
// aggregate everything into the graph store with dedup.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "egqa/graph_store.hpp"
#include "egqa/model_client.hpp"
#include "egqa/transcript_search.hpp"

namespace egqa {

struct CaptionRow {
    std::string doc_id;
    TimeInterval interval;
    std::string text;
};

inline void to_json(nlohmann::json& j, const CaptionRow& c) {
    j = nlohmann::json{{"doc_id", c.doc_id},
                       {"day", c.interval.day()},
                       {"start_t", c.interval.start.t},
                       {"end_t", c.interval.end.t},
                       {"text", c.text}};
}

inline void from_json(const nlohmann::json& j, CaptionRow& c) {
    c.doc_id = j.at("doc_id").get<std::string>();
    int day = j.at("day").get<int>();
    c.interval.start = {day, j.at("start_t").get<int>()};
    c.interval.end = {day, j.at("end_t").get<int>()};
    c.text = j.at("text").get<std::string>();
}

// One fused document: the caption window's text merged with the
// utterances whose span intersects the window.
struct Document {
    std::string doc_id;
    int day = 1;
    TimeInterval interval;
    std::string caption_text;
    std::vector<std::string> utterance_ids;
};

struct RawEdge {
    EntityRef source;
    EntityRef target;
    RelationType rel = RelationType::InteractsWith;
};

struct ExtractionResult {
    std::vector<EntityRef> nodes;
    std::vector<RawEdge> raw_edges;
    std::vector<std::string> warnings;  // dropped out-of-enum items
};

struct BuildReport {
    GraphStats stats;
    std::int64_t edges_inserted = 0;
    std::vector<std::pair<std::string, std::string>> doc_errors;  // (doc_id, message)
};

// Half-open [start, end) intersection: an utterance ending exactly at a
// window's start does not belong to it, so adjacent 30 s windows never
// share an utterance.
inline bool window_covers(const TimeInterval& window, const TimeInterval& span) {
    if (window.day() != span.day()) return false;
    return span.start.t < window.end.t && window.start.t < span.end.t;
}

inline std::vector<Document> fuse_captions(const std::vector<CaptionRow>& captions,
                                           const std::vector<Utterance>& utterances,
                                           ModelClient& client) {
    // Captions must be sorted and non-overlapping within each day.
    std::map<int, const CaptionRow*> last_per_day;
    for (const CaptionRow& c : captions) {
        c.interval.validate();
        auto it = last_per_day.find(c.interval.day());
        if (it != last_per_day.end()) {
            const CaptionRow& prev = *it->second;
            if (c.interval.start < prev.interval.start)
                throw ValidationError("captions not sorted within day " +
                                      std::to_string(c.interval.day()));
            if (c.interval.start.t < prev.interval.end.t)
                throw ValidationError("overlapping caption windows: " + prev.doc_id + " and " +
                                      c.doc_id);
        }
        last_per_day[c.interval.day()] = &c;
    }

    std::vector<Document> docs;
    for (const CaptionRow& c : captions) {
        Document d;
        d.doc_id = c.doc_id;
        d.day = c.interval.day();
        d.interval = c.interval;
        nlohmann::json overlapping = nlohmann::json::array();
        for (const Utterance& u : utterances) {
            if (!window_covers(c.interval, u.when)) continue;
            d.utterance_ids.push_back(u.utt_id);
            overlapping.push_back(nlohmann::json(u));
        }
        ClientRequest req;
        req.kind = CallKind::Fuse;
        req.payload = {{"doc_id", c.doc_id}, {"caption", c.text}, {"utterances", overlapping}};
        req.fixture_key = c.doc_id;
        d.caption_text = client.call(req).output.value("text", c.text);
        docs.push_back(std::move(d));
    }
    return docs;
}

// Extract nodes and raw edges for one document. Client outputs that
// violate the closed enums are dropped with a warning, never stored.
inline ExtractionResult extract_document_graph(const Document& doc, ModelClient& client) {
    ClientRequest req;
    req.kind = CallKind::Extract;
    req.payload = {{"doc_id", doc.doc_id}, {"text", doc.caption_text}};
    req.fixture_key = doc.doc_id;
    ClientResponse resp = client.call(req);

    ExtractionResult out;
    std::map<std::string, EntityType> known;
    for (const auto& n : resp.output.value("nodes", nlohmann::json::array())) {
        std::string id = trim_copy(n.value("id", ""));
        std::string type = n.value("type", "");
        if (id.empty() || !is_entity_type(type)) {
            out.warnings.push_back("dropped node \"" + id + "\" type \"" + type + "\"");
            continue;
        }
        if (known.emplace(id, parse_entity_type(type)).second)
            out.nodes.push_back({id, parse_entity_type(type)});
    }
    for (const auto& e : resp.output.value("edges", nlohmann::json::array())) {
        std::string sid = trim_copy(e.value("source", ""));
        std::string tid = trim_copy(e.value("target", ""));
        std::string rel = e.value("rel", "");
        std::string stype = e.value("source_type", "");
        std::string ttype = e.value("target_type", "");
        auto resolve = [&](const std::string& id, const std::string& type)
            -> std::optional<EntityType> {
            if (is_entity_type(type)) return parse_entity_type(type);
            if (auto it = known.find(id); it != known.end()) return it->second;
            return std::nullopt;
        };
        auto st = resolve(sid, stype);
        auto tt = resolve(tid, ttype);
        if (sid.empty() || tid.empty() || !is_relation_type(rel) || !st || !tt) {
            out.warnings.push_back("dropped edge " + sid + " -[" + rel + "]-> " + tid);
            continue;
        }
        // Every edge endpoint appears in nodes.
        if (known.emplace(sid, *st).second) out.nodes.push_back({sid, *st});
        if (known.emplace(tid, *tt).second) out.nodes.push_back({tid, *tt});
        out.raw_edges.push_back({{sid, *st}, {tid, *tt}, parse_relation_type(rel)});
    }
    return out;
}

// Turn raw edges into stored tuples. When the client cites supporting
// utterances, each maximal cluster of temporally touching citations
// becomes one edge whose interval is the tight hull of the cluster and
// whose evidence is the concatenated cited text. With no (valid)
// citations the edge falls back to the caption window with empty
// evidence, so annotation is total.
inline std::vector<RelationEdge> annotate_temporal(const ExtractionResult& res,
                                                   const Document& doc,
                                                   const std::vector<Utterance>& utterances,
                                                   ModelClient& client) {
    std::map<std::string, const Utterance*> in_doc;
    for (const Utterance& u : utterances)
        for (const std::string& id : doc.utterance_ids)
            if (u.utt_id == id) in_doc[id] = &u;

    nlohmann::json edges_json = nlohmann::json::array();
    for (const RawEdge& e : res.raw_edges)
        edges_json.push_back({{"source", e.source.id},
                              {"target", e.target.id},
                              {"rel", std::string(to_string(e.rel))}});
    ClientRequest req;
    req.kind = CallKind::Annotate;
    req.payload = {{"doc_id", doc.doc_id},
                   {"edges", edges_json},
                   {"utterance_ids", doc.utterance_ids}};
    req.fixture_key = doc.doc_id;
    ClientResponse resp = client.call(req);

    // citations[i] = utterance ids cited for raw edge i
    std::vector<std::vector<const Utterance*>> citations(res.raw_edges.size());
    for (const auto& item : resp.output.value("edges", nlohmann::json::array())) {
        size_t idx = item.value("index", size_t{0});
        if (idx >= res.raw_edges.size()) continue;
        for (const auto& cid : item.value("cites", nlohmann::json::array())) {
            auto it = in_doc.find(cid.get<std::string>());
            if (it != in_doc.end()) citations[idx].push_back(it->second);
        }
    }

    std::vector<RelationEdge> out;
    for (size_t i = 0; i < res.raw_edges.size(); ++i) {
        const RawEdge& raw = res.raw_edges[i];
        auto cited = citations[i];
        if (cited.empty()) {
            out.push_back({0, raw.source, raw.target, raw.rel, doc.interval, ""});
            continue;
        }
        std::sort(cited.begin(), cited.end(), [](const Utterance* a, const Utterance* b) {
            if (a->when.start != b->when.start) return a->when.start < b->when.start;
            return a->utt_id < b->utt_id;
        });
        // Cluster citations whose spans overlap or touch.
        size_t begin = 0;
        for (size_t j = 1; j <= cited.size(); ++j) {
            bool flush = j == cited.size() || cited[j]->when.start > cited[j - 1]->when.end;
            if (!flush) continue;
            TimeInterval hull = cited[begin]->when;
            std::string evidence;
            for (size_t k = begin; k < j; ++k) {
                hull.end = std::max(hull.end, cited[k]->when.end);
                if (!evidence.empty()) evidence += " ";
                evidence += cited[k]->text;
            }
            out.push_back({0, raw.source, raw.target, raw.rel, hull, evidence});
            begin = j;
        }
    }
    return out;
}

// Extract + annotate every document and insert into the store.
// Per-document failures are collected; the run completes for the rest.
// Idempotent: re-running on the same documents inserts nothing new.
inline BuildReport build_graph(const std::vector<Document>& docs,
                               const std::vector<Utterance>& utterances, ModelClient& client,
                               GraphStore& store) {
    BuildReport report;
    std::vector<RelationEdge> batch;
    for (const Document& doc : docs) {
        try {
            ExtractionResult res = extract_document_graph(doc, client);
            std::vector<RelationEdge> edges = annotate_temporal(res, doc, utterances, client);
            batch.insert(batch.end(), edges.begin(), edges.end());
        } catch (const std::exception& e) {
            report.doc_errors.emplace_back(doc.doc_id, e.what());
        }
    }
    report.edges_inserted = store.insert_edges(batch).inserted;
    report.stats = store.stats();
    return report;
}

}  // namespace egqa
