#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pacrr/corpus.hpp"

namespace pacrr {

/// The four-level scale judgments are merged onto for pair accuracy.
enum class MergedLabel : int { NRel = 0, Rel = 1, HRel = 2, Nav = 3 };

const char* to_string(MergedLabel label);

/// Nav -> Nav; Key, HRel -> HRel; Rel -> Rel; NRel, Junk -> NRel.
/// Throws DataError for a non-canonical grade.
MergedLabel merge_grades(int grade);

inline constexpr int kDefaultMaxGrade = 4;
inline constexpr std::size_t kDefaultCutoff = 20;

/// Expected reciprocal rank over the first k grades, gains (2^g - 1) / 2^g_max.
/// Negative grades count as 0.
double err_at_k(std::span<const int> ranked_grades, std::size_t k, int g_max = kDefaultMaxGrade);

/// nDCG@k with gain 2^g - 1 and log2(r + 1) discount; the ideal list is built
/// from every judged grade of the query. 0 when the ideal DCG is 0.
double ndcg_at_k(std::span<const int> ranked_grades, std::span<const int> judged_grades, std::size_t k);

/// Judged documents of the run that also carry a score, sorted by score
/// descending (ties keep the original rank) and renumbered from 1.
RunRanking rerank_run(const RunRanking& run, const std::map<std::string, double>& scores, const JudgmentSet& qrels);

struct QueryMetrics {
    std::string query_id;
    double err = 0.0;
    double ndcg = 0.0;
};

struct MetricReport {
    std::size_t k = kDefaultCutoff;
    std::vector<QueryMetrics> per_query;
    double mean_err = 0.0;
    double mean_ndcg = 0.0;
};

/// Evaluates each ranking against qrels; unjudged documents count as grade 0.
MetricReport evaluate_runs(std::span<const RunRanking> runs, const JudgmentSet& qrels,
                           std::size_t k = kDefaultCutoff, int g_max = kDefaultMaxGrade);

/// Line-delimited JSON: one {"query_id", "err<k>", "ndcg<k>"} per query, then
/// an aggregate record with query_id "all".
std::string metrics_jsonl(const MetricReport& report);

/// Scores keyed by query_id, then doc_id.
using ScoreTable = std::map<std::string, std::map<std::string, double>>;

struct LabelPairStats {
    MergedLabel higher;
    MergedLabel lower;
    std::size_t pairs = 0;
    std::size_t correct = 0;
    std::size_t queries = 0;
    std::optional<double> accuracy;  // empty when no pair of this type exists
    double volume = 0.0;
};

struct PairAccuracyReport {
    // Ordered Nav-HRel, Nav-Rel, Nav-NRel, HRel-Rel, HRel-NRel, Rel-NRel.
    std::array<LabelPairStats, 6> pairs;
    std::size_t total_pairs = 0;
    double weighted_accuracy = 0.0;

    const LabelPairStats& get(MergedLabel higher, MergedLabel lower) const;
};

/// Per query, every pair of scored judged documents whose merged labels differ
/// counts as correct when the higher-labelled one scores strictly higher.
PairAccuracyReport pair_accuracy(const ScoreTable& scores, const JudgmentSet& qrels);

nlohmann::json to_json(const PairAccuracyReport& report);

}  // namespace pacrr
