#pragma once
// Audio transcript search: an utterance store with two retrieval
// variants. BM25 lexical search scores against the whole-corpus
// statistics; LLM search ships a full day's transcript to the model
// client and parses cited timestamps out of the analysis.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "egqa/model_client.hpp"
#include "egqa/time.hpp"

namespace egqa {

struct Utterance {
    std::string utt_id;
    std::optional<std::string> speaker;
    TimeInterval when;
    std::string text;
};

inline void to_json(nlohmann::json& j, const Utterance& u) {
    j = nlohmann::json{{"utt_id", u.utt_id},
                       {"day", u.when.day()},
                       {"start_t", u.when.start.t},
                       {"end_t", u.when.end.t},
                       {"text", u.text}};
    if (u.speaker) j["speaker"] = *u.speaker;
}

inline void from_json(const nlohmann::json& j, Utterance& u) {
    u.utt_id = j.at("utt_id").get<std::string>();
    int day = j.at("day").get<int>();
    u.when.start = {day, j.at("start_t").get<int>()};
    u.when.end = {day, j.at("end_t").get<int>()};
    u.text = j.at("text").get<std::string>();
    if (j.contains("speaker") && !j.at("speaker").is_null())
        u.speaker = j.at("speaker").get<std::string>();
    else
        u.speaker.reset();
}

struct LexicalHit {
    Utterance utterance;
    double score = 0.0;  // BM25, non-negative
};

// What an LLM transcript search returns: the model's analysis plus the
// timestamps it explicitly cited.
struct TranscriptAnalysis {
    int day = 0;
    std::string analysis;
    std::vector<DayTime> cited_timestamps;
    Usage usage;
};

// Lowercase word tokenization: runs of alphanumeric characters, with
// non-ASCII bytes treated as word characters.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80)
            cur.push_back(static_cast<char>(std::tolower(c)));
        else
            flush();
    }
    flush();
    return out;
}

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

class TranscriptIndex {
  public:
    size_t add_utterances(const std::vector<Utterance>& utts) {
        for (const Utterance& u : utts) {
            u.when.validate();
            if (u.utt_id.empty()) throw ValidationError("Utterance: empty utt_id");
            if (u.text.empty()) throw ValidationError("Utterance " + u.utt_id + ": empty text");
            if (ids_.count(u.utt_id))
                throw ValidationError("duplicate utt_id: " + u.utt_id);
            ids_.insert(u.utt_id);
        }
        for (const Utterance& u : utts) {
            std::vector<std::string> tokens = tokenize(u.text);
            total_len_ += tokens.size();
            std::unordered_map<std::string, int> tf;
            for (const std::string& t : tokens) ++tf[t];
            for (const auto& [term, n] : tf) ++df_[term];
            docs_.push_back({u, std::move(tf), tokens.size()});
        }
        return utts.size();
    }

    size_t size() const { return docs_.size(); }

    std::vector<Utterance> utterances() const {
        std::vector<Utterance> out;
        out.reserve(docs_.size());
        for (const Doc& d : docs_) out.push_back(d.utt);
        return out;
    }

    std::vector<Utterance> utterances_for_day(int day) const {
        std::vector<Utterance> out;
        for (const Doc& d : docs_)
            if (d.utt.when.day() == day) out.push_back(d.utt);
        std::sort(out.begin(), out.end(), [](const Utterance& a, const Utterance& b) {
            if (a.when.start != b.when.start) return a.when.start < b.when.start;
            return a.utt_id < b.utt_id;
        });
        return out;
    }

    // The hit utterance plus up to `radius` neighbors on each side in
    // day time order, for analyzer context.
    std::vector<Utterance> context_window(const std::string& utt_id, int radius = 2) const {
        std::vector<Utterance> day;
        int target_day = 0;
        for (const Doc& d : docs_)
            if (d.utt.utt_id == utt_id) target_day = d.utt.when.day();
        if (target_day == 0) return {};
        day = utterances_for_day(target_day);
        auto it = std::find_if(day.begin(), day.end(),
                               [&](const Utterance& u) { return u.utt_id == utt_id; });
        size_t idx = static_cast<size_t>(it - day.begin());
        size_t lo = idx >= static_cast<size_t>(radius) ? idx - radius : 0;
        size_t hi = std::min(day.size(), idx + static_cast<size_t>(radius) + 1);
        return {day.begin() + static_cast<long>(lo), day.begin() + static_cast<long>(hi)};
    }

    // Okapi BM25 over utterances whose interval intersects `range`
    // (everything if unset). df and avgdl always come from the whole
    // corpus.
    std::vector<LexicalHit> bm25_search(const std::string& query,
                                        std::optional<std::pair<DayTime, DayTime>> range,
                                        int k, Bm25Params params = {}) const {
        if (k < 1) throw ValidationError("bm25_search: k must be >= 1");
        std::vector<std::string> terms = tokenize(query);
        if (terms.empty()) throw ValidationError("bm25_search: query has no tokens");
        double n_docs = static_cast<double>(docs_.size());
        double avgdl = docs_.empty() ? 0.0 : static_cast<double>(total_len_) / n_docs;
        std::vector<LexicalHit> hits;
        for (const Doc& d : docs_) {
            if (range) {
                bool intersects = !(d.utt.when.end < range->first) &&
                                  !(range->second < d.utt.when.start);
                if (!intersects) continue;
            }
            double score = 0.0;
            for (const std::string& term : terms) {
                auto tf_it = d.tf.find(term);
                if (tf_it == d.tf.end()) continue;
                double tf = tf_it->second;
                double df = static_cast<double>(df_.at(term));
                double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
                double dl = static_cast<double>(d.len);
                score += idf * tf * (params.k1 + 1.0) /
                         (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
            }
            if (score > 0.0) hits.push_back({d.utt, score});
        }
        std::sort(hits.begin(), hits.end(), [](const LexicalHit& a, const LexicalHit& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.utterance.when.start != b.utterance.when.start)
                return a.utterance.when.start < b.utterance.when.start;
            return a.utterance.utt_id < b.utterance.utt_id;
        });
        if (hits.size() > static_cast<size_t>(k)) hits.resize(static_cast<size_t>(k));
        return hits;
    }

    // Ship the whole day's transcript to the model client; one call per
    // day. Timestamp citations ("D2 15:50:21" or bare "15:50:21") are
    // parsed out of the analysis text; a prose-only analysis degrades to
    // an empty timestamp list, never an error.
    TranscriptAnalysis llm_search(const std::string& task, const std::string& memory, int day,
                                  ModelClient& client) const {
        nlohmann::json utts = nlohmann::json::array();
        for (const Utterance& u : utterances_for_day(day)) utts.push_back(nlohmann::json(u));
        ClientRequest req;
        req.kind = CallKind::TranscriptLlmSearch;
        req.payload = {{"task", task}, {"memory", memory}, {"day", day}, {"utterances", utts}};
        req.fixture_key = "day-" + std::to_string(day);
        ClientResponse resp = client.call(req);
        TranscriptAnalysis out;
        out.day = day;
        out.usage = resp.usage;
        if (resp.output.is_object())
            out.analysis = resp.output.value("analysis", "");
        else if (resp.output.is_string())
            out.analysis = resp.output.get<std::string>();
        out.cited_timestamps = parse_cited_timestamps(out.analysis, day);
        return out;
    }

    // Fan out over several days, one client call each, merged in day
    // order.
    std::vector<TranscriptAnalysis> llm_search_days(const std::string& task,
                                                    const std::string& memory,
                                                    std::vector<int> days,
                                                    ModelClient& client) const {
        std::sort(days.begin(), days.end());
        days.erase(std::unique(days.begin(), days.end()), days.end());
        std::vector<TranscriptAnalysis> out;
        for (int day : days) out.push_back(llm_search(task, memory, day, client));
        return out;
    }

    void save_jsonl(std::ostream& out) const {
        for (const Doc& d : docs_) out << nlohmann::json(d.utt).dump() << "\n";
    }

    static TranscriptIndex load_jsonl(std::istream& in) {
        TranscriptIndex index;
        std::vector<Utterance> batch;
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim_copy(line).empty()) continue;
            try {
                batch.push_back(nlohmann::json::parse(line).get<Utterance>());
            } catch (const std::exception& e) {
                throw ValidationError("utterance JSONL line " + std::to_string(lineno) + ": " +
                                      e.what());
            }
        }
        index.add_utterances(batch);
        return index;
    }

    std::vector<int> days() const {
        std::unordered_set<int> seen;
        std::vector<int> out;
        for (const Doc& d : docs_)
            if (seen.insert(d.utt.when.day()).second) out.push_back(d.utt.when.day());
        std::sort(out.begin(), out.end());
        return out;
    }

  private:
    struct Doc {
        Utterance utt;
        std::unordered_map<std::string, int> tf;
        size_t len = 0;
    };

    std::vector<Doc> docs_;
    std::unordered_map<std::string, int> df_;
    std::unordered_set<std::string> ids_;
    size_t total_len_ = 0;
};

}  // namespace egqa
