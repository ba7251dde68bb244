#include "pacrr/app.hpp"

#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "pacrr/error.hpp"
#include "pacrr/gradcheck.hpp"
#include "pacrr/synth.hpp"

namespace pacrr {

std::map<std::string, std::string> load_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open split file {}", path.string()));
    }
    std::map<std::string, std::string> roles;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string query_id;
        std::string role;
        std::string extra;
        if (!(fields >> query_id)) {
            continue;
        }
        if (!(fields >> role) || (fields >> extra)) {
            throw DataError(fmt::format("{}:{}: expected 'query_id role'", path.string(), line_no));
        }
        if (role != "train" && role != "validation" && role != "test") {
            throw DataError(fmt::format("{}:{}: unknown role '{}'", path.string(), line_no, role));
        }
        if (!roles.emplace(query_id, role).second) {
            throw DataError(fmt::format("{}:{}: query {} listed twice", path.string(), line_no, query_id));
        }
    }
    return roles;
}

namespace {

const std::filesystem::path& require_path(const std::filesystem::path& path, const char* key) {
    if (path.empty()) {
        throw ConfigError(fmt::format("'{}' is not set; add '{} = PATH' to the config", key, key));
    }
    if (!std::filesystem::exists(path)) {
        throw ConfigError(fmt::format("{} path does not exist: {}", key, path.string()));
    }
    return path;
}

std::filesystem::path checkpoint_path(const CommandOptions& options) {
    auto path = options.checkpoint.empty() ? options.config.output_dir / "best.pacrr" : options.checkpoint;
    if (!std::filesystem::exists(path)) {
        throw ConfigError(fmt::format("checkpoint does not exist: {} (train first or pass --checkpoint)",
                                      path.string()));
    }
    return path;
}

struct Inputs {
    bool run = false;
    bool split = false;
};

// Checks every referenced path first, then parses.
Dataset load_dataset(const RunConfig& config, Inputs wanted, std::size_t l_q) {
    require_path(config.corpus, "corpus");
    require_path(config.queries, "queries");
    require_path(config.embeddings, "embeddings");
    require_path(config.qrels, "qrels");
    if (wanted.run) {
        require_path(config.run, "run");
    }
    if (wanted.split) {
        require_path(config.split, "split");
    }
    const GradeMap grades = parse_grade_map(config.grade_map);

    Dataset data;
    data.corpus = load_corpus(config.corpus);
    data.queries = load_queries(config.queries, l_q);
    data.embeddings = load_embeddings(config.embeddings);
    data.qrels = load_qrels(config.qrels, grades);
    if (wanted.run) {
        data.runs = load_run(config.run);
        std::set<std::string> known;
        for (const auto& query : data.queries) {
            known.insert(query.query_id);
        }
        for (const auto& run : data.runs) {
            if (!known.contains(run.query_id)) {
                throw DataError(fmt::format("run query {} is not in the query file", run.query_id));
            }
        }
    }
    if (wanted.split) {
        for (const auto& [query_id, role] : load_split(config.split)) {
            if (role == "train") {
                data.train_queries.push_back(query_id);
            } else if (role == "validation") {
                data.validation_queries.push_back(query_id);
            }
        }
    }
    return data;
}

// Query ids admitted by --queries; empty optional means every query.
std::optional<std::set<std::string>> query_filter(const CommandOptions& options) {
    if (options.query_set == "all") {
        return std::nullopt;
    }
    if (options.query_set != "train" && options.query_set != "validation" && options.query_set != "test") {
        throw ConfigError(fmt::format("unknown query set '{}'; use all, train, validation or test", options.query_set));
    }
    std::set<std::string> ids;
    for (const auto& [query_id, role] : load_split(require_path(options.config.split, "split"))) {
        if (role == options.query_set) {
            ids.insert(query_id);
        }
    }
    return ids;
}

bool admitted(const std::optional<std::set<std::string>>& filter, const std::string& query_id) {
    return !filter || filter->contains(query_id);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(fmt::format("cannot write {}", path.string()));
    }
    out << text;
}

TrainOptions train_options(const RunConfig& config) {
    TrainOptions options;
    options.iterations = config.iterations;
    options.batches_per_iteration = config.batches_per_iteration;
    options.batch_size = config.batch_size;
    options.k = config.k;
    options.g_max = config.g_max;
    options.out_dir = config.output_dir;
    return options;
}

// Scores every admitted run's documents; unknown documents are skipped.
struct ScoredRuns {
    std::vector<RunRanking> runs;
    std::vector<std::map<std::string, double>> scores;
    std::size_t missing = 0;
};

ScoredRuns score_runs(const Checkpoint& model, const Dataset& data,
                      const std::optional<std::set<std::string>>& filter) {
    FeatureStore features(data, model.config);
    ScoredRuns scored;
    for (const auto& run : data.runs) {
        if (!admitted(filter, run.query_id)) {
            continue;
        }
        for (const auto& entry : run.entries) {
            scored.missing += features.prepare(run.query_id, entry.doc_id) ? 0 : 1;
        }
        scored.scores.push_back(score_run(model.config, model.params, features, run));
        scored.runs.push_back(run);
    }
    if (scored.missing > 0) {
        spdlog::warn("{} run documents are missing from the corpus and were skipped", scored.missing);
    }
    return scored;
}

}  // namespace

int cmd_synth(const CommandOptions& options, std::ostream& out) {
    const RunConfig& config = options.config;
    const SyntheticData data = generate_synthetic(config.synth);
    const auto& dir = config.output_dir;
    write_synthetic(data, dir);

    RunConfig generated = config;
    generated.corpus = "corpus.jsonl";
    generated.queries = "queries.jsonl";
    generated.qrels = "qrels.txt";
    generated.run = "run.txt";
    generated.embeddings = "embeddings.txt";
    generated.split = "split.txt";
    generated.output_dir = "model";
    write_text(dir / "pacrr.conf", render_run_config(generated));

    std::map<int, std::size_t> grades;
    for (const auto& [query_id, docs] : data.qrels.by_query()) {
        for (const auto& [doc_id, grade] : docs) {
            ++grades[grade];
        }
    }
    out << fmt::format("wrote {} documents, {} queries to {}\n", data.corpus.size(), data.queries.size(),
                       dir.string());
    out << fmt::format("grades: 0={} 1={} 2={}\n", grades[0], grades[1], grades[2]);
    return kExitOk;
}

int cmd_train(const CommandOptions& options, std::ostream& out) {
    const RunConfig& config = options.config;
    const Dataset data = load_dataset(config, {.run = true, .split = true}, config.model.l_q);
    if (data.train_queries.empty() || data.validation_queries.empty()) {
        throw DataError("the split needs at least one train and one validation query");
    }
    TrainOptions train_opts = train_options(config);
    train_opts.on_iteration = [](const std::string& line) { spdlog::info("{}", line); };
    const TrainResult result = train(config.model, train_opts, data);
    out << fmt::format("best iteration {} val_err{} {:.6f}\n", result.state.best_iteration, config.k,
                       result.state.best_val_err);
    out << fmt::format("wrote {}\n", (config.output_dir / "best.pacrr").string());
    return kExitOk;
}

int cmd_rerank(const CommandOptions& options, std::ostream& out) {
    const RunConfig& config = options.config;
    const auto filter = query_filter(options);
    const Checkpoint model = load_params(checkpoint_path(options));
    const Dataset data = load_dataset(config, {.run = true}, model.config.l_q);
    const ScoredRuns scored = score_runs(model, data, filter);

    std::vector<RunRanking> before;
    std::vector<RunRanking> after;
    for (std::size_t i = 0; i < scored.runs.size(); ++i) {
        std::map<std::string, double> constant;
        for (const auto& [doc_id, score] : scored.scores[i]) {
            constant.emplace(doc_id, 0.0);
        }
        // Same documents in their original order, so both sides see one pool.
        before.push_back(rerank_run(scored.runs[i], constant, data.qrels));
        after.push_back(rerank_run(scored.runs[i], scored.scores[i], data.qrels));
    }
    const MetricReport base = evaluate_runs(before, data.qrels, config.k, config.g_max);
    const MetricReport model_report = evaluate_runs(after, data.qrels, config.k, config.g_max);

    std::filesystem::create_directories(config.output_dir);
    save_run(after, config.output_dir / "rerank.run", "pacrr");
    write_text(config.output_dir / "metrics_before.jsonl", metrics_jsonl(base));
    write_text(config.output_dir / "metrics_after.jsonl", metrics_jsonl(model_report));
    out << fmt::format("queries {} skipped_documents {}\n", after.size(), scored.missing);
    out << fmt::format("ERR@{} before {:.6f} after {:.6f}\n", config.k, base.mean_err, model_report.mean_err);
    out << fmt::format("nDCG@{} before {:.6f} after {:.6f}\n", config.k, base.mean_ndcg, model_report.mean_ndcg);
    return kExitOk;
}

int cmd_score(const CommandOptions& options, std::ostream& out) {
    const RunConfig& config = options.config;
    const auto filter = query_filter(options);
    const Checkpoint model = load_params(checkpoint_path(options));
    const Dataset data = load_dataset(config, {.run = true}, model.config.l_q);
    const ScoredRuns scored = score_runs(model, data, filter);

    std::string text;
    std::size_t count = 0;
    for (std::size_t i = 0; i < scored.runs.size(); ++i) {
        for (const auto& entry : scored.runs[i].entries) {
            const auto it = scored.scores[i].find(entry.doc_id);
            if (it != scored.scores[i].end()) {
                text += fmt::format("{}\t{}\t{:.9g}\n", scored.runs[i].query_id, entry.doc_id, it->second);
                ++count;
            }
        }
    }
    write_text(config.output_dir / "scores.tsv", text);
    out << fmt::format("scored {} documents, skipped {}\n", count, scored.missing);
    return kExitOk;
}

int cmd_eval(const CommandOptions& options, std::ostream& out) {
    const RunConfig& config = options.config;
    const auto filter = query_filter(options);
    const auto& run_path = require_path(options.run.empty() ? config.run : options.run, "run");
    require_path(config.qrels, "qrels");
    const JudgmentSet qrels = load_qrels(config.qrels, parse_grade_map(config.grade_map));
    std::vector<RunRanking> runs;
    for (auto& run : load_run(run_path)) {
        if (admitted(filter, run.query_id)) {
            runs.push_back(std::move(run));
        }
    }
    const MetricReport report = evaluate_runs(runs, qrels, config.k, config.g_max);
    write_text(config.output_dir / "metrics.jsonl", metrics_jsonl(report));
    out << fmt::format("queries {} ERR@{} {:.6f} nDCG@{} {:.6f}\n", report.per_query.size(), config.k,
                       report.mean_err, config.k, report.mean_ndcg);
    return kExitOk;
}

int cmd_pairacc(const CommandOptions& options, std::ostream& out) {
    const RunConfig& config = options.config;
    const auto filter = query_filter(options);
    const Checkpoint model = load_params(checkpoint_path(options));
    const Dataset data = load_dataset(config, {}, model.config.l_q);

    FeatureStore features(data, model.config);
    ScoreTable scores;
    std::size_t missing = 0;
    for (const auto& [query_id, docs] : data.qrels.by_query()) {
        if (!admitted(filter, query_id)) {
            continue;
        }
        for (const auto& [doc_id, grade] : docs) {
            if (!features.prepare(query_id, doc_id)) {
                ++missing;
                continue;
            }
            scores[query_id][doc_id] =
                score(model.config, model.params, features.input(query_id, doc_id), features.idf(query_id));
        }
    }
    if (missing > 0) {
        spdlog::warn("{} judged documents or queries are missing and were skipped", missing);
    }
    const nlohmann::json report = to_json(pair_accuracy(scores, data.qrels));
    write_text(config.output_dir / "pairacc.json", report.dump(2) + "\n");
    out << report.dump(2) << '\n';
    return kExitOk;
}

int cmd_gradcheck(const CommandOptions& options, std::ostream& out) {
    constexpr double kTolerance = 1e-4;
    const RunConfig& config = options.config;
    const auto results = run_gradient_checks(config.model, config.model.seed);
    nlohmann::json report = nlohmann::json::array();
    bool ok = true;
    for (const auto& r : results) {
        ok = ok && r.passed(kTolerance);
        report.push_back({{"name", r.name},
                          {"max_relative_error", r.max_relative_error},
                          {"checked", r.checked},
                          {"excluded", r.excluded},
                          {"passed", r.passed(kTolerance)}});
        out << fmt::format("{:<24} {:>10.3e} checked {:>6} excluded {:>4} {}\n", r.name, r.max_relative_error,
                           r.checked, r.excluded, r.passed(kTolerance) ? "ok" : "FAIL");
    }
    write_text(config.output_dir / "gradcheck.json", report.dump(2) + "\n");
    return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace pacrr
