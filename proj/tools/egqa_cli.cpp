// Command-line front end: ingestion, frame indexing, graph building,
// single-question answering, and benchmark evaluation over a store
// directory. Exit codes: 0 success, 1 empty/degenerate result, 2
// input/config error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "egqa/agent.hpp"
#include "egqa/eval.hpp"
#include "egqa/graph_extraction.hpp"
#include "egqa/http_client.hpp"

namespace fs = std::filesystem;
using namespace egqa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitEmpty = 1;
constexpr int kExitUsage = 2;

struct ClientOptions {
    std::string mode = "scripted";  // scripted | live | record | replay
    std::string fixtures;           // scripted-client config JSON
    std::string cassette;           // record/replay JSONL
    std::string url;                // live endpoint
};

void add_client_options(CLI::App* cmd, ClientOptions& opt) {
    cmd->add_option("--client", opt.mode, "Client mode")
        ->check(CLI::IsMember({"scripted", "live", "record", "replay"}))
        ->capture_default_str();
    cmd->add_option("--fixtures", opt.fixtures, "Scripted-client config JSON");
    cmd->add_option("--cassette", opt.cassette, "Cassette JSONL for record/replay");
    cmd->add_option("--url", opt.url, "Live endpoint base URL");
}

std::shared_ptr<ModelClient> make_client(const ClientOptions& opt) {
    auto scripted = [&]() -> std::shared_ptr<ModelClient> {
        if (opt.fixtures.empty()) return std::make_shared<ScriptedClient>();
        return std::make_shared<ScriptedClient>(ScriptedClient::from_file(opt.fixtures));
    };
    if (opt.mode == "scripted") return scripted();
    if (opt.mode == "live") {
        if (opt.url.empty()) throw ValidationError("--client live requires --url");
        return std::make_shared<HttpClient>(opt.url);
    }
    if (opt.mode == "record") {
        if (opt.cassette.empty()) throw ValidationError("--client record requires --cassette");
        std::shared_ptr<ModelClient> inner =
            opt.url.empty() ? scripted()
                            : std::shared_ptr<ModelClient>(std::make_shared<HttpClient>(opt.url));
        return std::make_shared<RecordingClient>(inner, opt.cassette);
    }
    if (opt.cassette.empty()) throw ValidationError("--client replay requires --cassette");
    return std::make_shared<ReplayClient>(opt.cassette);
}

struct StorePaths {
    fs::path dir;
    fs::path graph() const { return dir / "graph.sqlite3"; }
    fs::path frames() const { return dir / "frames.jsonl"; }
    fs::path transcripts() const { return dir / "transcripts.jsonl"; }
    fs::path captions() const { return dir / "captions.jsonl"; }
};

// Parse a JSONL file line by line so schema violations name their line.
template <typename T>
std::vector<T> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::vector<T> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_copy(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<T>());
        } catch (const std::exception& e) {
            throw ValidationError(path.filename().string() + " line " +
                                  std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <typename T>
void write_jsonl(const fs::path& path, const std::vector<T>& rows) {
    std::ofstream out(path);
    for (const T& r : rows) out << nlohmann::json(r).dump() << "\n";
}

std::vector<Utterance> load_store_transcripts(const StorePaths& store) {
    if (!fs::exists(store.transcripts())) return {};
    return read_jsonl<Utterance>(store.transcripts());
}

TranscriptIndex open_transcripts(const StorePaths& store) {
    TranscriptIndex index;
    index.add_utterances(load_store_transcripts(store));
    return index;
}

VisualIndex open_frames(const StorePaths& store) {
    std::ifstream in(store.frames());
    if (!in) throw ValidationError("cannot open " + store.frames().string());
    return VisualIndex::load_jsonl(in);
}

// Merge new rows into a store JSONL, skipping ids already present, so
// re-ingesting the same file is a no-op.
template <typename T, typename IdFn>
std::pair<size_t, size_t> merge_jsonl(const fs::path& store_file, std::vector<T> incoming,
                                      IdFn id_of) {
    std::vector<T> rows;
    if (fs::exists(store_file)) rows = read_jsonl<T>(store_file);
    std::set<std::string> known;
    for (const T& r : rows) known.insert(id_of(r));
    size_t added = 0, skipped = 0;
    for (T& r : incoming) {
        if (known.insert(id_of(r)).second) {
            rows.push_back(std::move(r));
            ++added;
        } else {
            ++skipped;
        }
    }
    write_jsonl(store_file, rows);
    return {added, skipped};
}

size_t index_frames_file(const StorePaths& store, const std::string& input, int dim) {
    auto incoming = read_jsonl<FrameRecord>(fs::path(input));
    // Validate through a real index before touching the store file.
    std::vector<FrameRecord> rows;
    if (fs::exists(store.frames())) {
        std::ifstream in(store.frames());
        std::string header;
        std::getline(in, header);
        int stored_dim = nlohmann::json::parse(header).at("dim").get<int>();
        if (dim != 0 && dim != stored_dim)
            throw ValidationError("--dim " + std::to_string(dim) + " conflicts with stored dim " +
                                  std::to_string(stored_dim));
        dim = stored_dim;
        std::string line;
        while (std::getline(in, line))
            if (!trim_copy(line).empty())
                rows.push_back(nlohmann::json::parse(line).get<FrameRecord>());
    }
    if (dim == 0) {
        if (incoming.empty()) throw ValidationError("cannot infer --dim from an empty file");
        dim = static_cast<int>(incoming[0].embedding.size());
    }
    VisualIndex index(dim);
    index.add_frames(rows);
    std::set<std::string> known;
    for (const FrameRecord& f : rows) known.insert(f.frame_id);
    std::vector<FrameRecord> fresh;
    for (FrameRecord& f : incoming)
        if (!known.count(f.frame_id)) fresh.push_back(std::move(f));
    size_t added = index.add_frames(fresh);
    std::ofstream out(store.frames());
    index.save_jsonl(out);
    return added;
}

std::optional<ToolKind> tool_from_name(const std::string& name) { return parse_tool_kind(name); }

AgentConfig make_agent_config(const std::string& tools_csv, const std::string& tsearch, int k,
                              int image_token_rate) {
    AgentConfig cfg;
    cfg.k_total = k;
    cfg.image_token_rate = image_token_rate;
    cfg.tsearch = tsearch == "llm" ? TranscriptVariant::Llm : TranscriptVariant::Bm25;
    if (!tools_csv.empty()) {
        cfg.enabled_tools.clear();
        std::stringstream ss(tools_csv);
        std::string name;
        while (std::getline(ss, name, ',')) {
            auto tool = tool_from_name(trim_copy(name));
            if (!tool) throw ValidationError("--tools: unknown tool \"" + name + "\"");
            cfg.enabled_tools.insert(*tool);
        }
        if (cfg.enabled_tools.empty()) throw ValidationError("--tools: empty tool list");
    }
    return cfg;
}

std::vector<std::int64_t> parse_windows(const std::string& csv) {
    std::vector<std::int64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim_copy(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoll(item));
        } catch (const std::exception&) {
            throw ValidationError("--recall-windows: not an integer: \"" + item + "\"");
        }
        if (out.back() <= 0) throw ValidationError("--recall-windows: windows must be > 0");
    }
    if (out.empty()) throw ValidationError("--recall-windows: empty list");
    return out;
}

int cmd_ingest(const StorePaths& store, const std::string& transcripts,
               const std::string& captions, const std::string& frames, int dim) {
    fs::create_directories(store.dir);
    if (!transcripts.empty()) {
        auto incoming = read_jsonl<Utterance>(fs::path(transcripts));
        {  // schema check beyond JSON parsing (ids, text, intervals)
            TranscriptIndex probe;
            probe.add_utterances(incoming);
        }
        auto [added, skipped] =
            merge_jsonl(store.transcripts(), std::move(incoming),
                        [](const Utterance& u) { return u.utt_id; });
        std::cout << "transcripts: " << added << " added, " << skipped << " already present\n";
    }
    if (!captions.empty()) {
        auto incoming = read_jsonl<CaptionRow>(fs::path(captions));
        for (const CaptionRow& c : incoming) c.interval.validate();
        auto [added, skipped] = merge_jsonl(store.captions(), std::move(incoming),
                                            [](const CaptionRow& c) { return c.doc_id; });
        std::cout << "captions: " << added << " added, " << skipped << " already present\n";
    }
    if (!frames.empty()) {
        size_t added = index_frames_file(store, frames, dim);
        std::cout << "frames: " << added << " added\n";
    }
    if (transcripts.empty() && captions.empty() && frames.empty())
        throw ValidationError("ingest: nothing to do (give --transcripts/--captions/--frames)");
    return kExitOk;
}

int cmd_extract_graph(const StorePaths& store, const ClientOptions& client_opt) {
    if (!fs::exists(store.captions()))
        throw ValidationError("no captions ingested at " + store.captions().string());
    auto captions = read_jsonl<CaptionRow>(store.captions());
    auto utterances = load_store_transcripts(store);
    auto client = make_client(client_opt);

    fs::create_directories(store.dir);
    GraphStore graph(store.graph().string());
    std::vector<Document> docs = fuse_captions(captions, utterances, *client);
    BuildReport report = build_graph(docs, utterances, *client, graph);

    GraphStats stats = graph.stats();
    std::cout << "documents: " << docs.size() << ", edges inserted: " << report.edges_inserted
              << ", total edges: " << stats.total_edges << "\n";
    for (const auto& [day, n] : stats.edges_per_day)
        std::cout << "  day " << day << ": " << n << " edges\n";
    for (const auto& [rel, n] : stats.edges_per_rel)
        std::cout << "  " << to_string(rel) << ": " << n << "\n";
    for (const auto& [doc_id, msg] : report.doc_errors)
        std::cerr << "warning: " << doc_id << ": " << msg << "\n";
    return stats.total_edges == 0 ? kExitEmpty : kExitOk;
}

Stores open_stores(const StorePaths& store, GraphStore& graph,
                   std::optional<VisualIndex>& frames, std::optional<TranscriptIndex>& transcripts,
                   const std::set<ToolKind>& tools) {
    Stores s;
    s.graph = &graph;
    if (tools.count(ToolKind::Visual) && fs::exists(store.frames())) {
        frames.emplace(open_frames(store));
        s.frames = &*frames;
    }
    if (tools.count(ToolKind::Audio) || fs::exists(store.transcripts())) {
        transcripts.emplace(open_transcripts(store));
        s.transcripts = &*transcripts;
    }
    return s;
}

int cmd_answer(const StorePaths& store, const ClientOptions& client_opt, const std::string& qid,
               const std::string& question, std::vector<std::string> candidates,
               const std::string& query_time_str, const AgentConfig& cfg,
               const std::string& trace_out) {
    if (!fs::exists(store.graph()))
        throw ValidationError("no graph store at " + store.graph().string() +
                              " (run extract-graph first)");
    DayTime query_time = parse_daytime(query_time_str);
    auto client = make_client(client_opt);
    GraphStore graph(store.graph().string());
    std::optional<VisualIndex> frames;
    std::optional<TranscriptIndex> transcripts;
    Stores stores = open_stores(store, graph, frames, transcripts, cfg.enabled_tools);

    Agent agent(stores, *client, cfg);
    AnswerTrace trace = agent.run(qid, question, candidates, query_time);
    std::cout << "answer: " << static_cast<char>('A' + trace.choice) << "\n";
    if (!trace_out.empty()) {
        std::ofstream out(trace_out);
        out << trace_to_json(trace).dump(2) << "\n";
        std::cout << "trace written to " << trace_out << "\n";
    }
    return kExitOk;
}

int cmd_eval(const StorePaths& store, const ClientOptions& client_opt,
             const std::string& benchmark, const AgentConfig& cfg,
             const std::string& windows_csv, int jobs, const std::string& report_out) {
    std::vector<MCQItem> items = load_benchmark(benchmark);
    if (items.empty()) throw ValidationError("benchmark is empty: " + benchmark);
    std::vector<std::int64_t> windows = parse_windows(windows_csv);

    auto client = make_client(client_opt);
    GraphStore graph(fs::exists(store.graph()) ? store.graph().string() : ":memory:");
    std::optional<VisualIndex> frames;
    std::optional<TranscriptIndex> transcripts;
    Stores stores = open_stores(store, graph, frames, transcripts, cfg.enabled_tools);

    std::vector<AnswerTrace> traces = run_benchmark(items, stores, *client, cfg, jobs);
    AccuracyReport acc = accuracy(traces, items);

    std::cout << "accuracy: " << std::fixed << std::setprecision(1) << acc.overall << "% ("
              << acc.correct << "/" << acc.total << ")\n";
    for (const auto& [category, pct] : acc.per_category)
        std::cout << "  " << to_string(category) << ": " << pct << "%\n";
    for (const std::string& w : acc.warnings) std::cerr << "warning: " << w << "\n";

    std::vector<std::vector<DayTime>> selected, targets;
    for (size_t i = 0; i < items.size(); ++i) {
        selected.push_back(selected_timestamps(traces[i]));
        targets.push_back(items[i].target_times);
    }
    nlohmann::json recall_json = nlohmann::json::object();
    std::cout << "recall@W:\n";
    for (std::int64_t w : windows) {
        RecallConfig rc;
        rc.window_seconds = w;
        std::vector<std::string> warnings;
        double r = corpus_recall_at_w(selected, targets, rc, &warnings);
        std::cout << "  W=" << w << "s: " << std::setprecision(3) << r << "\n";
        recall_json[std::to_string(w)] = r;
    }

    nlohmann::json rep = report(traces);
    rep["accuracy_overall"] = acc.overall;
    nlohmann::json per_cat = nlohmann::json::object();
    for (const auto& [category, pct] : acc.per_category)
        per_cat[std::string(to_string(category))] = pct;
    rep["accuracy_per_category"] = per_cat;
    rep["recall_at_w"] = recall_json;
    std::cout << "tokens: total " << rep.at("tokens_total") << ", mean "
              << rep.at("tokens_mean") << "\n";
    if (!report_out.empty()) {
        std::ofstream out(report_out);
        out << rep.dump(2) << "\n";
        std::cout << "report written to " << report_out << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-day egocentric question answering engine"};
    app.require_subcommand(1);

    std::string store_dir;
    ClientOptions client_opt;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load transcripts/captions/frames into a store");
    std::string in_transcripts, in_captions, in_frames;
    int in_dim = 0;
    ingest->add_option("--store", store_dir, "Store directory")->required();
    ingest->add_option("--transcripts", in_transcripts, "Utterance JSONL");
    ingest->add_option("--captions", in_captions, "Caption JSONL");
    ingest->add_option("--frames", in_frames, "Frame JSONL");
    ingest->add_option("--dim", in_dim, "Embedding dimension for frames");

    // index-frames
    auto* idx = app.add_subcommand("index-frames", "Add frame embeddings to the store");
    std::string idx_frames;
    int idx_dim = 0;
    idx->add_option("--store", store_dir, "Store directory")->required();
    idx->add_option("--frames", idx_frames, "Frame JSONL")->required();
    idx->add_option("--dim", idx_dim, "Embedding dimension");

    // extract-graph
    auto* extract = app.add_subcommand("extract-graph", "Build the entity graph");
    extract->add_option("--store", store_dir, "Store directory")->required();
    add_client_options(extract, client_opt);

    // answer
    auto* answer = app.add_subcommand("answer", "Answer one question");
    std::string qid = "q", question, query_time_str, trace_out, tools_csv, tsearch = "bm25";
    std::vector<std::string> candidates;
    int k = 50, image_token_rate = 85;
    answer->add_option("--store", store_dir, "Store directory")->required();
    add_client_options(answer, client_opt);
    answer->add_option("--qid", qid, "Question id (fixture key)");
    answer->add_option("--question", question, "Question text")->required();
    answer->add_option("--candidate", candidates, "Candidate answer (give exactly 4)")
        ->expected(4)->required();
    answer->add_option("--query-time", query_time_str, "Query time, e.g. \"D4 11:34:00\"")
        ->required();
    answer->add_option("--tools", tools_csv, "Enabled tools, e.g. eg,visual,audio");
    answer->add_option("--tsearch", tsearch, "Transcript search variant")
        ->check(CLI::IsMember({"bm25", "llm"}));
    answer->add_option("--k", k, "Visual retrieval budget")->capture_default_str();
    answer->add_option("--image-token-rate", image_token_rate, "Tokens per image")
        ->capture_default_str();
    answer->add_option("--trace-out", trace_out, "Write the answer trace JSON here");

    // eval
    auto* eval = app.add_subcommand("eval", "Run a benchmark");
    std::string benchmark, windows_csv = "60", report_out;
    int jobs = 1;
    eval->add_option("--store", store_dir, "Store directory")->required();
    add_client_options(eval, client_opt);
    eval->add_option("--benchmark", benchmark, "Benchmark JSON")->required();
    eval->add_option("--tools", tools_csv, "Enabled tools, e.g. eg,visual,audio");
    eval->add_option("--tsearch", tsearch, "Transcript search variant")
        ->check(CLI::IsMember({"bm25", "llm"}));
    eval->add_option("--k", k, "Visual retrieval budget")->capture_default_str();
    eval->add_option("--image-token-rate", image_token_rate, "Tokens per image")
        ->capture_default_str();
    eval->add_option("--recall-windows", windows_csv, "Comma-separated window sizes (seconds)")
        ->capture_default_str();
    eval->add_option("--jobs", jobs, "Parallel workers")->capture_default_str();
    eval->add_option("--report-out", report_out, "Write the report JSON here");

    CLI11_PARSE(app, argc, argv);

    try {
        StorePaths store{fs::path(store_dir)};
        if (ingest->parsed())
            return cmd_ingest(store, in_transcripts, in_captions, in_frames, in_dim);
        if (idx->parsed()) {
            size_t added = index_frames_file(store, idx_frames, idx_dim);
            std::cout << "frames: " << added << " added\n";
            return kExitOk;
        }
        if (extract->parsed()) return cmd_extract_graph(store, client_opt);
        AgentConfig cfg = make_agent_config(tools_csv, tsearch, k, image_token_rate);
        if (answer->parsed())
            return cmd_answer(store, client_opt, qid, question, candidates, query_time_str, cfg,
                              trace_out);
        return cmd_eval(store, client_opt, benchmark, cfg, windows_csv, jobs, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
