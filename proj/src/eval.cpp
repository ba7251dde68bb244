#include "pacrr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pacrr/error.hpp"

namespace pacrr {

const char* to_string(MergedLabel label) {
    switch (label) {
        case MergedLabel::Nav:
            return "Nav";
        case MergedLabel::HRel:
            return "HRel";
        case MergedLabel::Rel:
            return "Rel";
        case MergedLabel::NRel:
            return "NRel";
    }
    return "?";
}

MergedLabel merge_grades(int grade) {
    switch (grade) {
        case 4:
            return MergedLabel::Nav;
        case 3:
        case 2:
            return MergedLabel::HRel;
        case 1:
            return MergedLabel::Rel;
        case 0:
        case -2:
            return MergedLabel::NRel;
        default:
            throw DataError(fmt::format("cannot merge non-canonical grade {}", grade));
    }
}

double err_at_k(std::span<const int> ranked_grades, std::size_t k, int g_max) {
    if (g_max < 1) {
        throw std::invalid_argument("g_max must be at least 1");
    }
    const double denominator = std::ldexp(1.0, g_max);
    double err = 0.0;
    double not_stopped = 1.0;
    const std::size_t depth = std::min(k, ranked_grades.size());
    for (std::size_t r = 0; r < depth; ++r) {
        const int grade = std::max(ranked_grades[r], 0);
        const double stop = (std::ldexp(1.0, grade) - 1.0) / denominator;
        err += not_stopped * stop / static_cast<double>(r + 1);
        not_stopped *= 1.0 - stop;
    }
    return err;
}

namespace {

double dcg(std::span<const int> grades, std::size_t k) {
    double sum = 0.0;
    const std::size_t depth = std::min(k, grades.size());
    for (std::size_t r = 0; r < depth; ++r) {
        const int grade = std::max(grades[r], 0);
        sum += (std::ldexp(1.0, grade) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
    }
    return sum;
}

}  // namespace

double ndcg_at_k(std::span<const int> ranked_grades, std::span<const int> judged_grades, std::size_t k) {
    std::vector<int> ideal(judged_grades.begin(), judged_grades.end());
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double ideal_dcg = dcg(ideal, k);
    if (ideal_dcg == 0.0) {
        return 0.0;
    }
    return dcg(ranked_grades, k) / ideal_dcg;
}

RunRanking rerank_run(const RunRanking& run, const std::map<std::string, double>& scores, const JudgmentSet& qrels) {
    struct Candidate {
        const RunEntry* entry;
        double score;
    };
    std::vector<Candidate> candidates;
    for (const auto& entry : run.entries) {
        const auto score = scores.find(entry.doc_id);
        if (score == scores.end() || !qrels.grade(run.query_id, entry.doc_id)) {
            continue;
        }
        candidates.push_back({&entry, score->second});
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.entry->original_rank < b.entry->original_rank;
    });
    RunRanking out{run.query_id, {}};
    out.entries.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out.entries.push_back(RunEntry{candidates[i].entry->doc_id, static_cast<int>(i + 1), candidates[i].score});
    }
    return out;
}

MetricReport evaluate_runs(std::span<const RunRanking> runs, const JudgmentSet& qrels, std::size_t k, int g_max) {
    MetricReport report;
    report.k = k;
    for (const auto& run : runs) {
        std::vector<int> ranked;
        ranked.reserve(run.entries.size());
        for (const auto& entry : run.entries) {
            ranked.push_back(qrels.grade(run.query_id, entry.doc_id).value_or(0));
        }
        std::vector<int> judged;
        for (const auto& [doc, grade] : qrels.for_query(run.query_id)) {
            judged.push_back(grade);
        }
        report.per_query.push_back({run.query_id, err_at_k(ranked, k, g_max), ndcg_at_k(ranked, judged, k)});
    }
    if (!report.per_query.empty()) {
        const double n = static_cast<double>(report.per_query.size());
        for (const auto& q : report.per_query) {
            report.mean_err += q.err;
            report.mean_ndcg += q.ndcg;
        }
        report.mean_err /= n;
        report.mean_ndcg /= n;
    }
    return report;
}

std::string metrics_jsonl(const MetricReport& report) {
    const std::string err_key = fmt::format("err{}", report.k);
    const std::string ndcg_key = fmt::format("ndcg{}", report.k);
    std::string out;
    for (const auto& q : report.per_query) {
        out += nlohmann::json{{"query_id", q.query_id}, {err_key, q.err}, {ndcg_key, q.ndcg}}.dump() + "\n";
    }
    out += nlohmann::json{{"query_id", "all"},
                          {"queries", report.per_query.size()},
                          {err_key, report.mean_err},
                          {ndcg_key, report.mean_ndcg}}
               .dump() +
           "\n";
    return out;
}

namespace {

constexpr std::array<std::pair<MergedLabel, MergedLabel>, 6> kLabelPairs{{
    {MergedLabel::Nav, MergedLabel::HRel},
    {MergedLabel::Nav, MergedLabel::Rel},
    {MergedLabel::Nav, MergedLabel::NRel},
    {MergedLabel::HRel, MergedLabel::Rel},
    {MergedLabel::HRel, MergedLabel::NRel},
    {MergedLabel::Rel, MergedLabel::NRel},
}};

std::size_t pair_slot(MergedLabel higher, MergedLabel lower) {
    for (std::size_t i = 0; i < kLabelPairs.size(); ++i) {
        if (kLabelPairs[i].first == higher && kLabelPairs[i].second == lower) {
            return i;
        }
    }
    throw std::invalid_argument("label pair must have distinct labels, higher first");
}

}  // namespace

const LabelPairStats& PairAccuracyReport::get(MergedLabel higher, MergedLabel lower) const {
    return pairs[pair_slot(higher, lower)];
}

PairAccuracyReport pair_accuracy(const ScoreTable& scores, const JudgmentSet& qrels) {
    PairAccuracyReport report;
    for (std::size_t i = 0; i < kLabelPairs.size(); ++i) {
        report.pairs[i].higher = kLabelPairs[i].first;
        report.pairs[i].lower = kLabelPairs[i].second;
    }
    for (const auto& [query_id, judged] : qrels.by_query()) {
        const auto query_scores = scores.find(query_id);
        if (query_scores == scores.end()) {
            continue;
        }
        struct Doc {
            MergedLabel label;
            double score;
        };
        std::vector<Doc> docs;
        for (const auto& [doc_id, grade] : judged) {
            const auto score = query_scores->second.find(doc_id);
            if (score != query_scores->second.end()) {
                docs.push_back({merge_grades(grade), score->second});
            }
        }
        std::array<bool, 6> seen{};
        for (std::size_t a = 0; a < docs.size(); ++a) {
            for (std::size_t b = a + 1; b < docs.size(); ++b) {
                if (docs[a].label == docs[b].label) {
                    continue;
                }
                const bool a_higher = docs[a].label > docs[b].label;
                const Doc& high = a_higher ? docs[a] : docs[b];
                const Doc& low = a_higher ? docs[b] : docs[a];
                const std::size_t slot = pair_slot(high.label, low.label);
                auto& stats = report.pairs[slot];
                ++stats.pairs;
                if (high.score > low.score) {
                    ++stats.correct;
                }
                seen[slot] = true;
            }
        }
        for (std::size_t i = 0; i < seen.size(); ++i) {
            report.pairs[i].queries += seen[i] ? 1 : 0;
        }
    }
    for (const auto& stats : report.pairs) {
        report.total_pairs += stats.pairs;
    }
    for (auto& stats : report.pairs) {
        if (stats.pairs > 0) {
            stats.accuracy = static_cast<double>(stats.correct) / static_cast<double>(stats.pairs);
            stats.volume = static_cast<double>(stats.pairs) / static_cast<double>(report.total_pairs);
            report.weighted_accuracy += *stats.accuracy * stats.volume;
        }
    }
    return report;
}

nlohmann::json to_json(const PairAccuracyReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& stats : report.pairs) {
        rows.push_back({{"label_pair", fmt::format("{}-{}", to_string(stats.higher), to_string(stats.lower))},
                        {"accuracy", stats.accuracy ? nlohmann::json(*stats.accuracy) : nlohmann::json(nullptr)},
                        {"volume", stats.volume},
                        {"pairs", stats.pairs},
                        {"correct", stats.correct},
                        {"queries", stats.queries}});
    }
    return {{"pairs", rows}, {"total_pairs", report.total_pairs}, {"weighted_average", report.weighted_accuracy}};
}

}  // namespace pacrr
