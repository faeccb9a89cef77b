#pragma once
// The single seam to language/vision models. Every model interaction in
// the pipeline goes through ModelClient::call with one of ten call kinds.
// The scripted client serves deterministic fixtures for offline runs;
// recording/replay wraps any client with a cassette.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "egqa/entities.hpp"
#include "egqa/time.hpp"

namespace egqa {

using json = nlohmann::json;

enum class CallKind {
    Fuse,
    Extract,
    Annotate,
    EmbedText,
    Plan,
    RewriteVisual,
    TranscriptLlmSearch,
    Analyze,
    Grade,
    Answer,
};

inline std::string_view to_string(CallKind k) {
    switch (k) {
        case CallKind::Fuse: return "fuse";
        case CallKind::Extract: return "extract";
        case CallKind::Annotate: return "annotate";
        case CallKind::EmbedText: return "embed_text";
        case CallKind::Plan: return "plan";
        case CallKind::RewriteVisual: return "rewrite_visual";
        case CallKind::TranscriptLlmSearch: return "transcript_llm_search";
        case CallKind::Analyze: return "analyze";
        case CallKind::Grade: return "grade";
        case CallKind::Answer: return "answer";
    }
    return "?";
}

inline CallKind parse_call_kind(std::string_view s) {
    for (CallKind k : {CallKind::Fuse, CallKind::Extract, CallKind::Annotate, CallKind::EmbedText,
                       CallKind::Plan, CallKind::RewriteVisual, CallKind::TranscriptLlmSearch,
                       CallKind::Analyze, CallKind::Grade, CallKind::Answer})
        if (s == to_string(k)) return k;
    throw ValidationError("unknown call kind: \"" + std::string(s) + "\"");
}

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    int image_count = 0;
};

inline void to_json(json& j, const Usage& u) {
    j = json{{"prompt_tokens", u.prompt_tokens},
             {"completion_tokens", u.completion_tokens},
             {"image_count", u.image_count}};
}

inline void from_json(const json& j, Usage& u) {
    u.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
    u.completion_tokens = j.value("completion_tokens", std::int64_t{0});
    u.image_count = j.value("image_count", 0);
}

// Rough token estimate when a backend reports no usage: one token per
// four characters, floor one for non-empty text. Flagged as an estimate
// by callers that surface it.
inline std::int64_t estimate_tokens(std::string_view text) {
    if (text.empty()) return 0;
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(text.size()) / 4);
}

struct ClientRequest {
    CallKind kind = CallKind::Analyze;
    json payload;                // structured record per kind
    std::string fixture_key;     // coarse lookup hint (doc id, day, qid); not hashed

    // Stable digest of (kind, canonical payload). nlohmann::json keeps
    // object keys sorted, so dump() is canonical across platforms.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
        auto mix = [&h](std::string_view s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ull;
            }
        };
        mix(to_string(kind));
        mix("\x1f");
        mix(payload.dump());
        return h;
    }

    std::string hash_hex() const {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
        return buf;
    }
};

struct ClientResponse {
    json output;
    Usage usage;
};

struct ClientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ModelClient {
  public:
    virtual ~ModelClient() = default;
    virtual ClientResponse call(const ClientRequest& req) = 0;
};

namespace detail {

// Deterministic pseudo-embedding for the scripted client: hash the text
// into a d-dimensional unit vector. Stable across platforms.
inline std::vector<float> pseudo_embedding(std::string_view text, int dim) {
    std::vector<float> v(static_cast<size_t>(dim));
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    double norm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        h ^= static_cast<std::uint64_t>(i) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
        // map to [-1, 1)
        double x = static_cast<double>(h >> 11) / static_cast<double>(1ull << 53) * 2.0 - 1.0;
        v[static_cast<size_t>(i)] = static_cast<float>(x);
        norm2 += x * x;
    }
    double inv = norm2 > 0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (auto& x : v) x = static_cast<float>(x * inv);
    return v;
}

}  // namespace detail

// Fixture-backed deterministic client. Fixtures are a JSON document:
//   { "strict": false,
//     "entries": [ {"kind": "extract", "key": "doc-001",
//                   "response": {...}, "usage": {...}},
//                  {"kind": "plan", "hash": "<hex>", "response": {...}},
//                  {"kind": "grade", "response": "incomplete"} ] }
// Lookup order: (kind, hash) -> (kind, key) -> kind-level entry with no
// key -> built-in default. In strict mode a miss is an error naming the
// request hash.
class ScriptedClient : public ModelClient {
  public:
    ScriptedClient() = default;

    explicit ScriptedClient(const json& config) { load(config); }

    static ScriptedClient from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open fixture file: " + path);
        json cfg = json::parse(in);
        return ScriptedClient(cfg);
    }

    void load(const json& config) {
        strict_ = config.value("strict", false);
        if (!config.contains("entries")) return;
        for (const auto& e : config.at("entries")) {
            CallKind kind = parse_call_kind(e.at("kind").get<std::string>());
            Entry entry;
            entry.response = e.value("response", json());
            if (e.contains("usage")) entry.usage = e.at("usage").get<Usage>();
            if (e.contains("hash"))
                by_hash_[{kind, e.at("hash").get<std::string>()}] = entry;
            else if (e.contains("key"))
                by_key_[{kind, e.at("key").get<std::string>()}] = entry;
            else
                by_kind_[kind] = entry;
        }
    }

    void set_strict(bool strict) { strict_ = strict; }

    void add_entry(CallKind kind, const std::string& key, json response, Usage usage = {}) {
        by_key_[{kind, key}] = Entry{std::move(response), usage};
    }

    void add_default(CallKind kind, json response, Usage usage = {}) {
        by_kind_[kind] = Entry{std::move(response), usage};
    }

    ClientResponse call(const ClientRequest& req) override {
        if (auto it = by_hash_.find({req.kind, req.hash_hex()}); it != by_hash_.end())
            return respond(req, it->second);
        if (!req.fixture_key.empty())
            if (auto it = by_key_.find({req.kind, req.fixture_key}); it != by_key_.end())
                return respond(req, it->second);
        if (auto it = by_kind_.find(req.kind); it != by_kind_.end())
            return respond(req, it->second);
        if (strict_)
            throw ClientError("scripted client: no fixture for kind=" +
                              std::string(to_string(req.kind)) + " hash=" + req.hash_hex() +
                              " key=\"" + req.fixture_key + "\"");
        return builtin_default(req);
    }

  private:
    struct Entry {
        json response;
        Usage usage;
    };

    ClientResponse respond(const ClientRequest& req, const Entry& e) const {
        ClientResponse r{e.response, e.usage};
        if (r.usage.prompt_tokens == 0 && r.usage.completion_tokens == 0) {
            r.usage.prompt_tokens = estimate_tokens(req.payload.dump());
            r.usage.completion_tokens = estimate_tokens(r.output.dump());
        }
        return r;
    }

    // Kind-specific deterministic fallbacks, so a partially scripted
    // pipeline still runs end to end.
    ClientResponse builtin_default(const ClientRequest& req) const {
        json out;
        switch (req.kind) {
            case CallKind::Fuse: {
                std::string text = req.payload.value("caption", "");
                if (req.payload.contains("utterances"))
                    for (const auto& u : req.payload.at("utterances"))
                        text += " " + u.value("text", "");
                out = json{{"text", text}};
                break;
            }
            case CallKind::Extract:
                out = json{{"nodes", json::array()}, {"edges", json::array()}};
                break;
            case CallKind::Annotate:
                out = json{{"edges", json::array()}};  // no citations: caption-interval fallback
                break;
            case CallKind::EmbedText: {
                int dim = req.payload.value("dim", 8);
                out = json{{"embedding", detail::pseudo_embedding(
                                             req.payload.value("text", ""), dim)}};
                break;
            }
            case CallKind::Plan:
                out = json{{"steps", json::array()}};
                break;
            case CallKind::RewriteVisual:
                out = json{{"queries", json::array({req.payload.value("task", "")})}};
                break;
            case CallKind::TranscriptLlmSearch:
                out = json{{"analysis", ""}};
                break;
            case CallKind::Analyze:
                out = json{{"summary", "retrieved " +
                                           std::to_string(req.payload.value("retrieved_count", 0)) +
                                           " items"}};
                break;
            case CallKind::Grade:
                out = "incomplete";
                break;
            case CallKind::Answer:
                out = "A";
                break;
        }
        ClientResponse r{std::move(out), {}};
        r.usage.prompt_tokens = estimate_tokens(req.payload.dump());
        r.usage.completion_tokens = estimate_tokens(r.output.dump());
        return r;
    }

    bool strict_ = false;
    std::map<std::pair<CallKind, std::string>, Entry> by_hash_;
    std::map<std::pair<CallKind, std::string>, Entry> by_key_;
    std::map<CallKind, Entry> by_kind_;
};

// Wraps any client and appends every (hash -> response) pair to a
// cassette file: JSONL of {hash, kind, response, usage}.
class RecordingClient : public ModelClient {
  public:
    RecordingClient(std::shared_ptr<ModelClient> inner, std::string cassette_path)
        : inner_(std::move(inner)), path_(std::move(cassette_path)) {}

    ClientResponse call(const ClientRequest& req) override {
        ClientResponse resp = inner_->call(req);
        std::lock_guard<std::mutex> lock(mu_);
        std::ofstream out(path_, std::ios::app);
        if (!out) throw ClientError("cannot open cassette for append: " + path_);
        json line{{"hash", req.hash_hex()},
                  {"kind", std::string(to_string(req.kind))},
                  {"response", resp.output},
                  {"usage", resp.usage}};
        out << line.dump() << "\n";
        return resp;
    }

  private:
    std::shared_ptr<ModelClient> inner_;
    std::string path_;
    std::mutex mu_;
};

// Serves calls only from a cassette; a miss is an error.
class ReplayClient : public ModelClient {
  public:
    explicit ReplayClient(const std::string& cassette_path) {
        std::ifstream in(cassette_path);
        if (!in) throw ClientError("cannot open cassette: " + cassette_path);
        std::string line;
        while (std::getline(in, line)) {
            if (trim_copy(line).empty()) continue;
            json j = json::parse(line);
            Entry e{j.value("response", json()), j.value("usage", Usage{})};
            entries_[j.at("hash").get<std::string>()] = std::move(e);
        }
    }

    ClientResponse call(const ClientRequest& req) override {
        auto it = entries_.find(req.hash_hex());
        if (it == entries_.end())
            throw ClientError("replay miss for kind=" + std::string(to_string(req.kind)) +
                              " hash=" + req.hash_hex());
        return {it->second.response, it->second.usage};
    }

  private:
    struct Entry {
        json response;
        Usage usage;
    };
    std::map<std::string, Entry> entries_;
};

}  // namespace egqa
