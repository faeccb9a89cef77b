#pragma once
// Frame index for the visual search tool: 1 FPS frame records with
// unit-norm embeddings and (day, time, location) attributes. Retrieval
// is exact cosine kNN over the attribute-filtered subset.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "egqa/entities.hpp"
#include "egqa/time.hpp"

namespace egqa {

struct FrameRecord {
    std::string frame_id;
    DayTime when;
    std::optional<std::string> location;
    std::vector<float> embedding;  // unit L2 norm
};

inline void to_json(nlohmann::json& j, const FrameRecord& f) {
    j = nlohmann::json{{"frame_id", f.frame_id},
                       {"day", f.when.day},
                       {"t", f.when.t},
                       {"embedding", f.embedding}};
    if (f.location) j["location"] = *f.location;
}

inline void from_json(const nlohmann::json& j, FrameRecord& f) {
    f.frame_id = j.at("frame_id").get<std::string>();
    f.when = {j.at("day").get<int>(), j.at("t").get<int>()};
    if (j.contains("location") && !j.at("location").is_null())
        f.location = j.at("location").get<std::string>();
    else
        f.location.reset();
    f.embedding = j.at("embedding").get<std::vector<float>>();
}

struct FrameFilter {
    std::optional<int> day;
    std::optional<std::pair<int, int>> time_range;  // HHMMSS, inclusive both ends
    std::optional<std::string> location;            // case-insensitive equality
    std::optional<DayTime> before;                  // query-time cap: when <= before

    void validate() const {
        if (time_range && time_range->first > time_range->second)
            throw ValidationError("FrameFilter: inverted time_range");
    }

    bool matches(const FrameRecord& f) const {
        if (day && f.when.day != *day) return false;
        if (time_range && (f.when.t < time_range->first || f.when.t > time_range->second))
            return false;
        if (location && (!f.location || !iequals(*f.location, *location))) return false;
        if (before && *before < f.when) return false;
        return true;
    }
};

struct FrameHit {
    FrameRecord frame;
    double score = 0.0;  // cosine, in [-1, 1]
};

// One resolved query slot for multi_query_search: an embedded text query
// plus its own attribute filter (the planner picks per-day windows).
struct VisualQuery {
    std::vector<float> vec;
    FrameFilter filter;
};

class VisualIndex {
  public:
    explicit VisualIndex(int dim) : dim_(dim) {
        if (dim < 1) throw ValidationError("VisualIndex: dim must be >= 1");
    }

    int dim() const { return dim_; }
    size_t size() const {
        std::lock_guard<std::mutex> lock(*mu_);
        return frames_.size();
    }

    // Batch add. The whole batch is validated before any record lands,
    // so a failed call leaves the index unchanged.
    size_t add_frames(const std::vector<FrameRecord>& records) {
        std::lock_guard<std::mutex> lock(*mu_);
        std::unordered_set<std::string> batch_ids;
        for (const FrameRecord& f : records) {
            f.when.validate();
            if (f.frame_id.empty()) throw ValidationError("FrameRecord: empty frame_id");
            if (static_cast<int>(f.embedding.size()) != dim_)
                throw ValidationError("FrameRecord " + f.frame_id + ": dimension " +
                                      std::to_string(f.embedding.size()) + " != " +
                                      std::to_string(dim_));
            double n = norm(f.embedding);
            if (std::abs(n - 1.0) > 1e-6)
                throw ValidationError("FrameRecord " + f.frame_id + ": embedding norm " +
                                      std::to_string(n) + " is not 1");
            if (ids_.count(f.frame_id) || !batch_ids.insert(f.frame_id).second)
                throw ValidationError("duplicate frame_id: " + f.frame_id);
        }
        for (const FrameRecord& f : records) {
            ids_.insert(f.frame_id);
            frames_.push_back(f);
        }
        return records.size();
    }

    // Exact top-k by cosine over records passing the filter. Ties break
    // by (when, frame_id) so results are deterministic. The query vector
    // is normalized here if needed.
    std::vector<FrameHit> search(const std::vector<float>& query_vec, const FrameFilter& filter,
                                 int k) const {
        if (k < 1) throw ValidationError("search: k must be >= 1");
        filter.validate();
        // Normalize the query in double precision so scores are exact
        // cosine values, not floats rounded twice.
        if (static_cast<int>(query_vec.size()) != dim_)
            throw ValidationError("query dimension " + std::to_string(query_vec.size()) +
                                  " != " + std::to_string(dim_));
        double qn = norm(query_vec);
        if (qn == 0.0) throw ValidationError("zero query vector");
        std::vector<double> q(query_vec.begin(), query_vec.end());
        for (double& x : q) x /= qn;
        std::lock_guard<std::mutex> lock(*mu_);
        std::vector<FrameHit> hits;
        for (const FrameRecord& f : frames_) {
            if (!filter.matches(f)) continue;
            double s = 0.0;
            for (size_t i = 0; i < q.size(); ++i) s += q[i] * f.embedding[i];
            hits.push_back({f, s});
        }
        std::sort(hits.begin(), hits.end(), hit_less);
        if (hits.size() > static_cast<size_t>(k)) hits.resize(static_cast<size_t>(k));
        return hits;
    }

    // Run 1-3 query slots, merge by max score per frame, dedup by
    // frame_id, truncate to k_total.
    std::vector<FrameHit> multi_query_search(const std::vector<VisualQuery>& queries,
                                             int k_total) const {
        if (queries.empty() || queries.size() > 3)
            throw ValidationError("multi_query_search: need 1 to 3 queries");
        if (k_total < 1) throw ValidationError("multi_query_search: k_total must be >= 1");
        std::unordered_map<std::string, FrameHit> best;
        for (const VisualQuery& vq : queries) {
            for (FrameHit& h : search(vq.vec, vq.filter, k_total)) {
                auto it = best.find(h.frame.frame_id);
                if (it == best.end() || h.score > it->second.score)
                    best[h.frame.frame_id] = std::move(h);
            }
        }
        std::vector<FrameHit> merged;
        merged.reserve(best.size());
        for (auto& [id, h] : best) merged.push_back(std::move(h));
        std::sort(merged.begin(), merged.end(), hit_less);
        if (merged.size() > static_cast<size_t>(k_total))
            merged.resize(static_cast<size_t>(k_total));
        return merged;
    }

    std::vector<float> normalized(const std::vector<float>& v) const {
        if (static_cast<int>(v.size()) != dim_)
            throw ValidationError("query dimension " + std::to_string(v.size()) + " != " +
                                  std::to_string(dim_));
        double n = norm(v);
        if (n == 0.0) throw ValidationError("zero query vector");
        std::vector<float> out(v);
        for (auto& x : out) x = static_cast<float>(x / n);
        return out;
    }

    // File format: header line {"dim": D}, then one FrameRecord per line.
    void save_jsonl(std::ostream& out) const {
        out << nlohmann::json{{"dim", dim_}}.dump() << "\n";
        std::lock_guard<std::mutex> lock(*mu_);
        for (const FrameRecord& f : frames_) out << nlohmann::json(f).dump() << "\n";
    }

    static VisualIndex load_jsonl(std::istream& in) {
        std::string line;
        if (!std::getline(in, line)) throw ValidationError("frame file: missing header");
        nlohmann::json header = nlohmann::json::parse(line);
        VisualIndex index(header.at("dim").get<int>());
        std::vector<FrameRecord> batch;
        size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim_copy(line).empty()) continue;
            try {
                batch.push_back(nlohmann::json::parse(line).get<FrameRecord>());
            } catch (const std::exception& e) {
                throw ValidationError("frame JSONL line " + std::to_string(lineno) + ": " +
                                      e.what());
            }
        }
        index.add_frames(batch);
        return index;
    }

  private:
    static double dot(const std::vector<float>& a, const std::vector<float>& b) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
        return s;
    }

    static double norm(const std::vector<float>& v) {
        double s = 0.0;
        for (float x : v) s += static_cast<double>(x) * x;
        return std::sqrt(s);
    }

    static bool hit_less(const FrameHit& a, const FrameHit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.frame.when != b.frame.when) return a.frame.when < b.frame.when;
        return a.frame.frame_id < b.frame.frame_id;
    }

    int dim_;
    std::vector<FrameRecord> frames_;
    std::unordered_set<std::string> ids_;
    // behind a pointer so the index stays movable
    mutable std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

}  // namespace egqa
