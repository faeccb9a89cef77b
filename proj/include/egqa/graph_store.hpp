#pragma once
// Persistent entity-graph store: one SQLite table `entity_graph_table`
// where each row is one temporally annotated relationship tuple, plus
// the strict-to-relaxed query ladder used by the graph search tool.

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <sqlite3.h>

#include <json.hpp>

#include "egqa/entities.hpp"
#include "egqa/time.hpp"

namespace egqa {

// One stored tuple: source --rel--> target over a day-scoped interval,
// with the supporting text snippet in `evidence` (the table's
// `transcript` column).
struct RelationEdge {
    std::int64_t row_id = 0;
    EntityRef source;
    EntityRef target;
    RelationType rel = RelationType::InteractsWith;
    TimeInterval interval;
    std::string evidence;

    void validate() const {
        source.validate();
        target.validate();
        interval.validate();
    }

    // Equality on everything except the surrogate key; this is the
    // dedup key for inserts.
    bool same_tuple(const RelationEdge& o) const {
        return source == o.source && target == o.target && rel == o.rel &&
               interval == o.interval && evidence == o.evidence;
    }
};

inline void to_json(nlohmann::json& j, const RelationEdge& e) {
    j = nlohmann::json{{"day", e.interval.day()},
                       {"start_t", e.interval.start.t},
                       {"end_t", e.interval.end.t},
                       {"transcript", e.evidence},
                       {"source_id", e.source.id},
                       {"source_type", std::string(to_string(e.source.etype))},
                       {"target_id", e.target.id},
                       {"target_type", std::string(to_string(e.target.etype))},
                       {"rel_type", std::string(to_string(e.rel))}};
}

inline void from_json(const nlohmann::json& j, RelationEdge& e) {
    int day = j.at("day").get<int>();
    e.interval.start = {day, j.at("start_t").get<int>()};
    e.interval.end = {day, j.at("end_t").get<int>()};
    e.evidence = j.value("transcript", "");
    e.source = {j.at("source_id").get<std::string>(),
                parse_entity_type(j.at("source_type").get<std::string>())};
    e.target = {j.at("target_id").get<std::string>(),
                parse_entity_type(j.at("target_type").get<std::string>())};
    e.rel = parse_relation_type(j.at("rel_type").get<std::string>());
}

enum class EntityMatch { Exact, Substring };

// A structured query over the edge table. At least one of source_id /
// target_id / rel / evidence_substring must be set; matched rows always
// satisfy day <= query_time.day.
struct GraphQueryIntent {
    std::optional<int> day;
    std::optional<std::pair<int, int>> time_range;  // start_t >= first, end_t <= second
    std::optional<std::string> source_id;
    std::optional<EntityType> source_type;
    std::optional<std::string> target_id;
    std::optional<EntityType> target_type;
    std::optional<RelationType> rel;
    std::optional<std::string> evidence_substring;
    DayTime query_time{7, 235959};
    EntityMatch entity_match = EntityMatch::Exact;

    bool has_core_constraint() const {
        return source_id || target_id || rel || evidence_substring;
    }

    void validate() const {
        query_time.validate();
        if (!has_core_constraint())
            throw ValidationError(
                "GraphQueryIntent: need at least one of source_id/target_id/rel/"
                "evidence_substring");
        if (time_range && time_range->first > time_range->second)
            throw ValidationError("GraphQueryIntent: inverted time_range");
    }
};

enum class LadderStage { Strict, RelaxTime, RelaxDay, SubstringEntities, RelaxRelType };

inline std::string_view to_string(LadderStage s) {
    switch (s) {
        case LadderStage::Strict: return "strict";
        case LadderStage::RelaxTime: return "relax_time";
        case LadderStage::RelaxDay: return "relax_day";
        case LadderStage::SubstringEntities: return "substring_entities";
        case LadderStage::RelaxRelType: return "relax_rel_type";
    }
    return "?";
}

constexpr std::array<LadderStage, 5> kLadderStages{
    LadderStage::Strict, LadderStage::RelaxTime, LadderStage::RelaxDay,
    LadderStage::SubstringEntities, LadderStage::RelaxRelType};

struct LadderResult {
    LadderStage stage_used = LadderStage::RelaxRelType;
    std::vector<RelationEdge> rows;
    std::vector<std::string> queries_issued;
};

struct GraphStats {
    std::int64_t total_edges = 0;
    std::map<int, std::int64_t> edges_per_day;
    std::map<RelationType, std::int64_t> edges_per_rel;
    std::map<EntityType, std::int64_t> source_type_counts;
    std::map<EntityType, std::int64_t> target_type_counts;

    bool operator==(const GraphStats&) const = default;
};

struct InsertReport {
    std::int64_t inserted = 0;
    // (index into the input batch, reason)
    std::vector<std::pair<size_t, std::string>> rejected;
};

// Derive the intent evaluated at a given ladder stage from the caller's
// strict intent. Relaxation order:
//   strict -> drop time range -> drop day -> single-token substring
//   entity match -> drop relation type (final stage keeps only the
//   target constraint when a target id exists).
inline GraphQueryIntent derive_stage_intent(const GraphQueryIntent& base, LadderStage stage) {
    GraphQueryIntent q = base;
    if (stage == LadderStage::Strict) return q;
    q.time_range.reset();
    if (stage == LadderStage::RelaxTime) return q;
    q.day.reset();
    if (stage == LadderStage::RelaxDay) return q;
    q.entity_match = EntityMatch::Substring;
    if (q.source_id) q.source_id = longest_token(*q.source_id);
    if (q.target_id) q.target_id = longest_token(*q.target_id);
    if (stage == LadderStage::SubstringEntities) return q;
    // Final stage: entity/evidence only. Keep rel when it is the sole
    // constraint left, otherwise the query would be unbounded.
    if (q.source_id || q.target_id || q.evidence_substring) {
        q.rel.reset();
        if (q.target_id) {
            q.source_id.reset();
            q.source_type.reset();
            q.target_type.reset();
        }
    }
    return q;
}

// Canonical text rendering of a stage intent, recorded in
// LadderResult::queries_issued. Equal intents render identically.
inline std::string render_predicate(const GraphQueryIntent& q) {
    std::ostringstream out;
    out << "SELECT * FROM entity_graph_table WHERE day<=" << q.query_time.day;
    if (q.day) out << " AND day=" << *q.day;
    if (q.time_range)
        out << " AND start_t>=" << q.time_range->first << " AND end_t<=" << q.time_range->second;
    auto entity = [&](const char* col, const std::optional<std::string>& id) {
        if (!id) return;
        if (q.entity_match == EntityMatch::Exact)
            out << " AND lower(" << col << ")='" << lower_copy(*id) << "'";
        else
            out << " AND " << col << " LIKE '%" << lower_copy(*id) << "%'";
    };
    entity("source_id", q.source_id);
    if (q.source_type) out << " AND source_type='" << to_string(*q.source_type) << "'";
    entity("target_id", q.target_id);
    if (q.target_type) out << " AND target_type='" << to_string(*q.target_type) << "'";
    if (q.rel) out << " AND rel_type='" << to_string(*q.rel) << "'";
    if (q.evidence_substring)
        out << " AND transcript LIKE '%" << lower_copy(*q.evidence_substring) << "%'";
    out << " ORDER BY day, start_t, id";
    return out.str();
}

class GraphStore {
  public:
    // Pass ":memory:" for an ephemeral store.
    explicit GraphStore(const std::string& path = ":memory:") {
        if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
            std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
            if (db_) sqlite3_close(db_);
            throw ValidationError("cannot open graph store at " + path + ": " + msg);
        }
        exec(R"(CREATE TABLE IF NOT EXISTS entity_graph_table(
                  id INTEGER PRIMARY KEY AUTOINCREMENT,
                  day INTEGER,
                  start_t INTEGER,
                  end_t INTEGER,
                  transcript TEXT,
                  source_id TEXT,
                  source_type TEXT,
                  target_id TEXT,
                  target_type TEXT,
                  rel_type TEXT))");
        exec(R"(CREATE UNIQUE INDEX IF NOT EXISTS entity_graph_dedup
                ON entity_graph_table(day, start_t, end_t, transcript, source_id,
                                      source_type, target_id, target_type, rel_type))");
    }

    ~GraphStore() {
        if (db_) sqlite3_close(db_);
    }

    GraphStore(const GraphStore&) = delete;
    GraphStore& operator=(const GraphStore&) = delete;

    // Batch insert with exact-tuple dedup. Invalid edges are reported
    // per index; the rest of the batch still commits.
    InsertReport insert_edges(const std::vector<RelationEdge>& edges) {
        std::lock_guard<std::mutex> lock(mu_);
        InsertReport report;
        exec("BEGIN");
        sqlite3_stmt* stmt = prepare(
            "INSERT OR IGNORE INTO entity_graph_table(day, start_t, end_t, transcript, "
            "source_id, source_type, target_id, target_type, rel_type) "
            "VALUES(?,?,?,?,?,?,?,?,?)");
        for (size_t i = 0; i < edges.size(); ++i) {
            const RelationEdge& e = edges[i];
            try {
                e.validate();
            } catch (const ValidationError& err) {
                report.rejected.emplace_back(i, err.what());
                continue;
            }
            sqlite3_reset(stmt);
            sqlite3_bind_int(stmt, 1, e.interval.day());
            sqlite3_bind_int(stmt, 2, e.interval.start.t);
            sqlite3_bind_int(stmt, 3, e.interval.end.t);
            bind_text(stmt, 4, e.evidence);
            bind_text(stmt, 5, e.source.id);
            bind_text(stmt, 6, to_string(e.source.etype));
            bind_text(stmt, 7, e.target.id);
            bind_text(stmt, 8, to_string(e.target.etype));
            bind_text(stmt, 9, to_string(e.rel));
            if (sqlite3_step(stmt) != SQLITE_DONE) {
                sqlite3_finalize(stmt);
                exec("ROLLBACK");
                throw ValidationError(std::string("insert failed: ") + sqlite3_errmsg(db_));
            }
            report.inserted += sqlite3_changes(db_);
        }
        sqlite3_finalize(stmt);
        exec("COMMIT");
        return report;
    }

    std::vector<RelationEdge> query(const GraphQueryIntent& intent) const {
        intent.validate();
        std::lock_guard<std::mutex> lock(mu_);
        return query_locked(intent);
    }

    // Evaluate ladder stages in order and return at the first stage with
    // at least one row (truncated to max_rows). Every evaluated stage's
    // rendered predicate is recorded.
    LadderResult run_ladder(const GraphQueryIntent& intent, int max_rows = 50) const {
        intent.validate();
        if (max_rows < 1) throw ValidationError("run_ladder: max_rows must be >= 1");
        std::lock_guard<std::mutex> lock(mu_);
        LadderResult result;
        for (LadderStage stage : kLadderStages) {
            GraphQueryIntent q = derive_stage_intent(intent, stage);
            result.queries_issued.push_back(render_predicate(q));
            std::vector<RelationEdge> rows = query_locked(q);
            result.stage_used = stage;
            if (!rows.empty()) {
                if (rows.size() > static_cast<size_t>(max_rows))
                    rows.resize(static_cast<size_t>(max_rows));
                result.rows = std::move(rows);
                return result;
            }
        }
        return result;  // all stages empty
    }

    GraphStats stats() const {
        std::lock_guard<std::mutex> lock(mu_);
        GraphStats s;
        sqlite3_stmt* stmt = prepare(
            "SELECT day, rel_type, source_type, target_type, COUNT(*) "
            "FROM entity_graph_table GROUP BY day, rel_type, source_type, target_type");
        while (sqlite3_step(stmt) == SQLITE_ROW) {
            int day = sqlite3_column_int(stmt, 0);
            RelationType rel = parse_relation_type(column_text(stmt, 1));
            EntityType st = parse_entity_type(column_text(stmt, 2));
            EntityType tt = parse_entity_type(column_text(stmt, 3));
            std::int64_t n = sqlite3_column_int64(stmt, 4);
            s.total_edges += n;
            s.edges_per_day[day] += n;
            s.edges_per_rel[rel] += n;
            s.source_type_counts[st] += n;
            s.target_type_counts[tt] += n;
        }
        sqlite3_finalize(stmt);
        return s;
    }

    std::vector<RelationEdge> all_edges() const {
        std::lock_guard<std::mutex> lock(mu_);
        sqlite3_stmt* stmt =
            prepare("SELECT * FROM entity_graph_table ORDER BY day, start_t, id");
        std::vector<RelationEdge> out;
        while (sqlite3_step(stmt) == SQLITE_ROW) out.push_back(read_row(stmt));
        sqlite3_finalize(stmt);
        return out;
    }

    std::optional<RelationEdge> edge_by_id(std::int64_t row_id) const {
        std::lock_guard<std::mutex> lock(mu_);
        sqlite3_stmt* stmt = prepare("SELECT * FROM entity_graph_table WHERE id=?");
        sqlite3_bind_int64(stmt, 1, row_id);
        std::optional<RelationEdge> out;
        if (sqlite3_step(stmt) == SQLITE_ROW) out = read_row(stmt);
        sqlite3_finalize(stmt);
        return out;
    }

    void export_jsonl(std::ostream& out) const {
        for (const RelationEdge& e : all_edges()) out << nlohmann::json(e).dump() << "\n";
    }

    InsertReport import_jsonl(std::istream& in) {
        std::vector<RelationEdge> edges;
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim_copy(line).empty()) continue;
            try {
                edges.push_back(nlohmann::json::parse(line).get<RelationEdge>());
            } catch (const std::exception& e) {
                throw ValidationError("edge JSONL line " + std::to_string(lineno) + ": " +
                                      e.what());
            }
        }
        return insert_edges(edges);
    }

  private:
    void exec(const char* sql) const {
        char* err = nullptr;
        if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown sqlite error";
            sqlite3_free(err);
            throw ValidationError("sqlite: " + msg);
        }
    }

    sqlite3_stmt* prepare(const std::string& sql) const {
        sqlite3_stmt* stmt = nullptr;
        if (sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
            throw ValidationError(std::string("sqlite prepare: ") + sqlite3_errmsg(db_));
        return stmt;
    }

    static void bind_text(sqlite3_stmt* stmt, int idx, std::string_view s) {
        sqlite3_bind_text(stmt, idx, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
    }

    static std::string column_text(sqlite3_stmt* stmt, int col) {
        const unsigned char* p = sqlite3_column_text(stmt, col);
        return p ? reinterpret_cast<const char*>(p) : "";
    }

    static RelationEdge read_row(sqlite3_stmt* stmt) {
        RelationEdge e;
        e.row_id = sqlite3_column_int64(stmt, 0);
        int day = sqlite3_column_int(stmt, 1);
        e.interval.start = {day, sqlite3_column_int(stmt, 2)};
        e.interval.end = {day, sqlite3_column_int(stmt, 3)};
        e.evidence = column_text(stmt, 4);
        e.source = {column_text(stmt, 5), parse_entity_type(column_text(stmt, 6))};
        e.target = {column_text(stmt, 7), parse_entity_type(column_text(stmt, 8))};
        e.rel = parse_relation_type(column_text(stmt, 9));
        return e;
    }

    std::vector<RelationEdge> query_locked(const GraphQueryIntent& q) const {
        std::string sql = "SELECT * FROM entity_graph_table WHERE day<=?";
        std::vector<std::string> texts;
        std::vector<int> ints{q.query_time.day};
        std::string order;  // bind order tracking: 'i' int, 't' text
        order.push_back('i');
        if (q.day) {
            sql += " AND day=?";
            ints.push_back(*q.day);
            order.push_back('i');
        }
        if (q.time_range) {
            sql += " AND start_t>=? AND end_t<=?";
            ints.push_back(q.time_range->first);
            ints.push_back(q.time_range->second);
            order += "ii";
        }
        auto add_entity = [&](const char* col, const std::optional<std::string>& id) {
            if (!id) return;
            if (q.entity_match == EntityMatch::Exact)
                sql += std::string(" AND lower(") + col + ")=?";
            else
                sql += std::string(" AND instr(lower(") + col + "), ?)>0";
            texts.push_back(lower_copy(*id));
            order.push_back('t');
        };
        add_entity("source_id", q.source_id);
        if (q.source_type) {
            sql += " AND source_type=?";
            texts.emplace_back(to_string(*q.source_type));
            order.push_back('t');
        }
        add_entity("target_id", q.target_id);
        if (q.target_type) {
            sql += " AND target_type=?";
            texts.emplace_back(to_string(*q.target_type));
            order.push_back('t');
        }
        if (q.rel) {
            sql += " AND rel_type=?";
            texts.emplace_back(to_string(*q.rel));
            order.push_back('t');
        }
        if (q.evidence_substring) {
            sql += " AND instr(lower(transcript), ?)>0";
            texts.push_back(lower_copy(*q.evidence_substring));
            order.push_back('t');
        }
        sql += " ORDER BY day, start_t, id";

        sqlite3_stmt* stmt = prepare(sql);
        size_t ii = 0, ti = 0;
        for (size_t k = 0; k < order.size(); ++k) {
            int idx = static_cast<int>(k) + 1;
            if (order[k] == 'i')
                sqlite3_bind_int(stmt, idx, ints[ii++]);
            else
                bind_text(stmt, idx, texts[ti++]);
        }
        std::vector<RelationEdge> out;
        while (sqlite3_step(stmt) == SQLITE_ROW) out.push_back(read_row(stmt));
        sqlite3_finalize(stmt);
        return out;
    }

    sqlite3* db_ = nullptr;
    mutable std::mutex mu_;
};

}  // namespace egqa
