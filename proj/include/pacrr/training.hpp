#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pacrr/corpus.hpp"
#include "pacrr/eval.hpp"
#include "pacrr/model.hpp"
#include "pacrr/rng.hpp"

namespace pacrr {

struct QueryGroups {
    std::vector<std::string> highly_relevant;  // HRel, Key, Nav
    std::vector<std::string> relevant;         // Rel
    std::vector<std::string> non_relevant;     // NRel, Junk
};

struct RelevanceGroups {
    std::map<std::string, QueryGroups> per_query;
    // (query_id, doc_id) across all training queries, in query then doc order.
    std::vector<std::pair<std::string, std::string>> highly_relevant;
    std::vector<std::pair<std::string, std::string>> relevant;
};

RelevanceGroups build_groups(const JudgmentSet& qrels, std::span<const std::string> query_ids);

struct Triple {
    std::string query_id;
    std::string pos_doc_id;
    std::string neg_doc_id;

    bool operator==(const Triple&) const = default;
};

inline constexpr std::size_t kMaxSampleAttempts = 1000;

/// Picks the highly-relevant or relevant group with probability proportional
/// to its size, a positive uniformly from that group, and a negative from the
/// positive's query: a Rel document for a highly relevant positive, otherwise
/// a non-relevant one. Positives whose query lacks such negatives are redrawn;
/// throws DataError after kMaxSampleAttempts consecutive rejections.
Triple sample_triple(Rng& rng, const RelevanceGroups& groups);

/// Everything training and scoring read: documents, queries, embeddings, idf.
struct Dataset {
    std::vector<TokenizedDocument> corpus;
    std::vector<Query> queries;
    EmbeddingTable embeddings;
    JudgmentSet qrels;
    std::vector<RunRanking> runs;
    std::vector<std::string> train_queries;
    std::vector<std::string> validation_queries;
};

/// Distilled inputs and idf vectors for (query, document) pairs under one config.
/// Inputs are computed up front by prepare(); lookups are read-only.
class FeatureStore {
  public:
    FeatureStore(const Dataset& data, const PacrrConfig& config);

    /// Returns false when the query or document is unknown.
    bool prepare(const std::string& query_id, const std::string& doc_id);

    bool contains(const std::string& query_id, const std::string& doc_id) const;
    const DistilledInput& input(const std::string& query_id, const std::string& doc_id) const;
    std::span<const double> idf(const std::string& query_id) const;

  private:
    const EmbeddingTable& embeddings_;
    PacrrConfig config_;
    IdfTable idf_table_;
    std::map<std::string, Query> queries_;  // truncated to l_q
    std::map<std::string, const TokenizedDocument*> docs_;
    std::map<std::string, std::vector<double>> query_idf_;
    std::map<std::pair<std::string, std::string>, DistilledInput> inputs_;
};

/// Mean hinge loss of the batch before the update. Backpropagates the mean and
/// applies one SGD step.
double train_batch(const PacrrConfig& config, PacrrParams<float>& params, const FeatureStore& features,
                   std::span<const Triple> batch);

/// Scores every run document present in the feature store.
std::map<std::string, double> score_run(const PacrrConfig& config, const PacrrParams<float>& params,
                                        const FeatureStore& features, const RunRanking& run);

struct TrainOptions {
    std::size_t iterations = 150;
    std::size_t batches_per_iteration = 64;
    std::size_t batch_size = 32;
    std::size_t k = kDefaultCutoff;
    int g_max = kDefaultMaxGrade;
    /// When set, every iteration's checkpoint, best.pacrr and train_log.jsonl go here.
    std::filesystem::path out_dir;
    /// Called after each iteration with its log line.
    std::function<void(const std::string&)> on_iteration;
};

struct IterationLog {
    std::size_t iteration = 0;
    double mean_loss = 0.0;
    double val_err = 0.0;
    double val_ndcg = 0.0;
    std::string checkpoint_path;  // relative to out_dir, empty when not saved
};

std::string to_jsonl(const IterationLog& log, std::size_t k);

/// 1-based iteration with the highest val_err, earliest on ties; 0 when empty.
std::size_t best_iteration(std::span<const IterationLog> log);

struct TrainState {
    std::size_t iteration = 0;
    double best_val_err = -1.0;
    std::size_t best_iteration = 0;
    std::string best_checkpoint_path;
    std::vector<IterationLog> log;
    std::string rng_state;
};

struct TrainResult {
    TrainState state;
    PacrrParams<float> best_params;
};

/// Iterations of mini-batch SGD on sampled triples; after each iteration the
/// validation runs are re-ranked and the parameters with the highest mean
/// ERR@k (earliest on ties) are kept.
TrainResult train(const PacrrConfig& config, const TrainOptions& options, const Dataset& data);

/// Hyper-parameter grid l_d x n_s x l_g with n_f = 32; firstk pins l_d = 768.
std::vector<PacrrConfig> default_grid(DistillMode mode, std::uint64_t seed = 1);

struct SweepResult {
    std::size_t best_index = 0;
    PacrrConfig config;
    PacrrParams<float> params;
    std::vector<double> val_err;  // best validation ERR per grid point
};

/// Trains every grid point; picks the highest validation ERR, then fewer
/// parameters, then earlier grid position.
SweepResult sweep(std::span<const PacrrConfig> grid, const TrainOptions& options, const Dataset& data);

}  // namespace pacrr
