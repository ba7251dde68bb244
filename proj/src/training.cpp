#include "pacrr/training.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "pacrr/error.hpp"

namespace pacrr {

RelevanceGroups build_groups(const JudgmentSet& qrels, std::span<const std::string> query_ids) {
    RelevanceGroups groups;
    const std::set<std::string> ordered(query_ids.begin(), query_ids.end());
    for (const auto& query_id : ordered) {
        QueryGroups query;
        for (const auto& [doc_id, grade] : qrels.for_query(query_id)) {
            if (grade > 1) {
                query.highly_relevant.push_back(doc_id);
                groups.highly_relevant.emplace_back(query_id, doc_id);
            } else if (grade == 1) {
                query.relevant.push_back(doc_id);
                groups.relevant.emplace_back(query_id, doc_id);
            } else {
                query.non_relevant.push_back(doc_id);
            }
        }
        groups.per_query.emplace(query_id, std::move(query));
    }
    return groups;
}

Triple sample_triple(Rng& rng, const RelevanceGroups& groups) {
    const std::size_t highly = groups.highly_relevant.size();
    const std::size_t relevant = groups.relevant.size();
    if (highly + relevant == 0) {
        throw DataError("no relevant training documents to sample positives from");
    }
    const bool from_highly = uniform_index(rng, highly + relevant) < highly;
    const auto& positives = from_highly ? groups.highly_relevant : groups.relevant;
    for (std::size_t attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
        const auto& [query_id, pos_doc] = positives[uniform_index(rng, positives.size())];
        const QueryGroups& query = groups.per_query.at(query_id);
        const auto& negatives = from_highly ? query.relevant : query.non_relevant;
        if (negatives.empty()) {
            continue;
        }
        return Triple{query_id, pos_doc, negatives[uniform_index(rng, negatives.size())]};
    }
    throw DataError(fmt::format("no valid training triple after {} attempts; every {} positive lacks a negative",
                                kMaxSampleAttempts, from_highly ? "highly relevant" : "relevant"));
}

FeatureStore::FeatureStore(const Dataset& data, const PacrrConfig& config)
    : embeddings_(data.embeddings), config_(config), idf_table_(compute_idf(data.corpus)) {
    config_.validate();
    for (const auto& doc : data.corpus) {
        docs_.emplace(doc.doc_id, &doc);
    }
    for (Query query : data.queries) {
        truncate_query(query, config_.l_q);
        query_idf_.emplace(query.query_id, idf_table_.for_tokens(query.tokens));
        queries_.emplace(query.query_id, std::move(query));
    }
}

bool FeatureStore::prepare(const std::string& query_id, const std::string& doc_id) {
    auto key = std::make_pair(query_id, doc_id);
    if (inputs_.contains(key)) {
        return true;
    }
    const auto query = queries_.find(query_id);
    const auto doc = docs_.find(doc_id);
    if (query == queries_.end() || doc == docs_.end()) {
        return false;
    }
    const auto sim = build_sim_matrix(query->second, *doc->second, embeddings_);
    inputs_.emplace(std::move(key), distill(sim, config_.mode, config_.l_g, config_.l_q, config_.l_d));
    return true;
}

bool FeatureStore::contains(const std::string& query_id, const std::string& doc_id) const {
    return inputs_.contains(std::make_pair(query_id, doc_id));
}

const DistilledInput& FeatureStore::input(const std::string& query_id, const std::string& doc_id) const {
    const auto it = inputs_.find(std::make_pair(query_id, doc_id));
    if (it == inputs_.end()) {
        throw std::out_of_range(fmt::format("no prepared input for ({}, {})", query_id, doc_id));
    }
    return it->second;
}

std::span<const double> FeatureStore::idf(const std::string& query_id) const {
    return query_idf_.at(query_id);
}

double train_batch(const PacrrConfig& config, PacrrParams<float>& params, const FeatureStore& features,
                   std::span<const Triple> batch) {
    if (batch.empty()) {
        throw std::invalid_argument("empty training batch");
    }
    const float scale = 1.0f / static_cast<float>(batch.size());
    double total_loss = 0.0;
    for (const auto& triple : batch) {
        const auto idf = features.idf(triple.query_id);
        const auto pos = score_forward(config, params, features.input(triple.query_id, triple.pos_doc_id), idf);
        const auto neg = score_forward(config, params, features.input(triple.query_id, triple.neg_doc_id), idf);
        total_loss += static_cast<double>(hinge_loss(pos.rel, neg.rel));
        const auto [d_pos, d_neg] = hinge_loss_backward(pos.rel, neg.rel);
        accumulate_gradients(config, params, pos, d_pos * scale);
        accumulate_gradients(config, params, neg, d_neg * scale);
    }
    sgd_step<float>(params.groups, static_cast<float>(config.learning_rate));
    return total_loss / static_cast<double>(batch.size());
}

std::map<std::string, double> score_run(const PacrrConfig& config, const PacrrParams<float>& params,
                                        const FeatureStore& features, const RunRanking& run) {
    std::map<std::string, double> scores;
    for (const auto& entry : run.entries) {
        if (features.contains(run.query_id, entry.doc_id)) {
            scores[entry.doc_id] =
                score(config, params, features.input(run.query_id, entry.doc_id), features.idf(run.query_id));
        }
    }
    return scores;
}

std::string to_jsonl(const IterationLog& log, std::size_t k) {
    return nlohmann::json{{"iteration", log.iteration},
                          {"mean_loss", log.mean_loss},
                          {fmt::format("val_err{}", k), log.val_err},
                          {fmt::format("val_ndcg{}", k), log.val_ndcg},
                          {"checkpoint_path", log.checkpoint_path}}
        .dump();
}

std::size_t best_iteration(std::span<const IterationLog> log) {
    std::size_t best = 0;
    double best_err = 0.0;
    for (const auto& entry : log) {
        if (best == 0 || entry.val_err > best_err) {
            best = entry.iteration;
            best_err = entry.val_err;
        }
    }
    return best;
}

namespace {

JudgmentSet judged_in_corpus(const Dataset& data, std::span<const std::string> query_ids, FeatureStore& features) {
    JudgmentSet usable;
    std::size_t missing = 0;
    for (const auto& query_id : std::set<std::string>(query_ids.begin(), query_ids.end())) {
        for (const auto& [doc_id, grade] : data.qrels.for_query(query_id)) {
            if (features.prepare(query_id, doc_id)) {
                usable.add(query_id, doc_id, grade);
            } else {
                ++missing;
            }
        }
    }
    if (missing > 0) {
        spdlog::warn("{} judged training documents are missing from the corpus and were skipped", missing);
    }
    return usable;
}

std::vector<RunRanking> validation_runs(const Dataset& data, FeatureStore& features) {
    const std::set<std::string> wanted(data.validation_queries.begin(), data.validation_queries.end());
    std::vector<RunRanking> runs;
    std::size_t missing = 0;
    for (const auto& run : data.runs) {
        if (!wanted.contains(run.query_id)) {
            continue;
        }
        for (const auto& entry : run.entries) {
            missing += features.prepare(run.query_id, entry.doc_id) ? 0 : 1;
        }
        runs.push_back(run);
    }
    if (missing > 0) {
        spdlog::warn("{} validation run documents are missing from the corpus and were skipped", missing);
    }
    return runs;
}

MetricReport validate(const PacrrConfig& config, const PacrrParams<float>& params, const FeatureStore& features,
                      std::span<const RunRanking> runs, const JudgmentSet& qrels, const TrainOptions& options) {
    std::vector<RunRanking> reranked;
    reranked.reserve(runs.size());
    for (const auto& run : runs) {
        reranked.push_back(rerank_run(run, score_run(config, params, features, run), qrels));
    }
    return evaluate_runs(reranked, qrels, options.k, options.g_max);
}

void check_options(const TrainOptions& options) {
    if (options.iterations == 0 || options.batches_per_iteration == 0 || options.batch_size == 0) {
        throw ConfigError("iterations, batches_per_iteration and batch_size must all be at least 1");
    }
}

}  // namespace

TrainResult train(const PacrrConfig& config, const TrainOptions& options, const Dataset& data) {
    config.validate();
    check_options(options);
    FeatureStore features(data, config);
    const JudgmentSet usable = judged_in_corpus(data, data.train_queries, features);
    const RelevanceGroups groups = build_groups(usable, data.train_queries);
    const std::vector<RunRanking> runs = validation_runs(data, features);
    if (runs.empty()) {
        throw DataError("no validation run covers the validation queries");
    }

    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir / "checkpoints");
    }
    std::ofstream log_file;
    if (!options.out_dir.empty()) {
        log_file.open(options.out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
        if (!log_file) {
            throw DataError(fmt::format("cannot write {}", (options.out_dir / "train_log.jsonl").string()));
        }
    }

    Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    TrainResult result{{}, init_params<float>(config)};
    PacrrParams<float> params = result.best_params;
    std::vector<Triple> batch(options.batch_size);

    for (std::size_t iteration = 1; iteration <= options.iterations; ++iteration) {
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < options.batches_per_iteration; ++b) {
            for (auto& triple : batch) {
                triple = sample_triple(rng, groups);
            }
            loss_sum += train_batch(config, params, features, batch);
        }

        IterationLog entry;
        entry.iteration = iteration;
        entry.mean_loss = loss_sum / static_cast<double>(options.batches_per_iteration);
        const MetricReport report = validate(config, params, features, runs, data.qrels, options);
        entry.val_err = report.mean_err;
        entry.val_ndcg = report.mean_ndcg;
        if (!options.out_dir.empty()) {
            entry.checkpoint_path = fmt::format("checkpoints/iter_{:04d}.pacrr", iteration);
            save_params(params, config, options.out_dir / entry.checkpoint_path);
        }

        auto& state = result.state;
        state.iteration = iteration;
        if (entry.val_err > state.best_val_err) {
            state.best_val_err = entry.val_err;
            state.best_iteration = iteration;
            state.best_checkpoint_path = entry.checkpoint_path;
            result.best_params = params;
        }
        const std::string line = to_jsonl(entry, options.k);
        if (log_file.is_open()) {
            log_file << line << '\n';
            log_file.flush();
        }
        if (options.on_iteration) {
            options.on_iteration(line);
        }
        state.log.push_back(std::move(entry));
    }

    std::ostringstream rng_state;
    rng_state << rng;
    result.state.rng_state = rng_state.str();
    if (!options.out_dir.empty()) {
        save_params(result.best_params, config, options.out_dir / "best.pacrr");
    }
    return result;
}

std::vector<PacrrConfig> default_grid(DistillMode mode, std::uint64_t seed) {
    std::vector<std::size_t> lengths{256, 384, 512, 640, 768};
    if (mode == DistillMode::FirstK) {
        lengths = {768};
    }
    std::vector<PacrrConfig> grid;
    for (const std::size_t l_d : lengths) {
        for (std::size_t n_s = 1; n_s <= 4; ++n_s) {
            for (std::size_t l_g = 2; l_g <= 4; ++l_g) {
                PacrrConfig config;
                config.l_d = l_d;
                config.n_s = n_s;
                config.l_g = l_g;
                config.n_f = 32;
                config.mode = mode;
                config.seed = seed;
                grid.push_back(config);
            }
        }
    }
    return grid;
}

SweepResult sweep(std::span<const PacrrConfig> grid, const TrainOptions& options, const Dataset& data) {
    if (grid.empty()) {
        throw ConfigError("hyper-parameter grid is empty");
    }
    SweepResult best;
    std::size_t best_size = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        TrainOptions point_options = options;
        if (!options.out_dir.empty()) {
            point_options.out_dir = options.out_dir / fmt::format("grid_{:03d}", i);
        }
        auto result = train(grid[i], point_options, data);
        const double err = result.state.best_val_err;
        const std::size_t size = result.best_params.parameter_count();
        best.val_err.push_back(err);
        const bool better = i == 0 || err > best.val_err[best.best_index] ||
                            (err == best.val_err[best.best_index] && size < best_size);
        if (better) {
            best.best_index = i;
            best.config = grid[i];
            best.params = std::move(result.best_params);
            best_size = size;
        }
    }
    return best;
}

}  // namespace pacrr
