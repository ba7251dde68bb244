#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "pacrr/error.hpp"
#include "pacrr/eval.hpp"
#include "pacrr/rng.hpp"

using namespace pacrr;

TEST(MergeGrades, Mapping) {
    EXPECT_EQ(merge_grades(4), MergedLabel::Nav);
    EXPECT_EQ(merge_grades(3), MergedLabel::HRel);
    EXPECT_EQ(merge_grades(2), MergedLabel::HRel);
    EXPECT_EQ(merge_grades(1), MergedLabel::Rel);
    EXPECT_EQ(merge_grades(0), MergedLabel::NRel);
    EXPECT_EQ(merge_grades(-2), MergedLabel::NRel);
    EXPECT_THROW(merge_grades(7), DataError);
}

TEST(Err, HandValues) {
    EXPECT_EQ(err_at_k(std::vector{0, 0, 0}, 20), 0.0);
    EXPECT_NEAR(err_at_k(std::vector{4}, 20), 0.9375, 1e-12);
    EXPECT_NEAR(err_at_k(std::vector{4, 1}, 20), 0.939453125, 1e-12);
    EXPECT_EQ(err_at_k(std::vector{0, 4}, 1), 0.0);
    EXPECT_EQ(err_at_k(std::vector{-2, 0}, 20), 0.0);
}

TEST(Err, MatchesCascadeOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<int> grades(uniform_index(rng, 30));
        for (auto& g : grades) {
            g = static_cast<int>(uniform_index(rng, 5));
        }
        const std::size_t k = 1 + uniform_index(rng, 25);
        EXPECT_NEAR(err_at_k(grades, k), oracle::cascade_err(grades, k, 4), 1e-12);
    }
}

TEST(Err, RangeAndMonotoneUnderSwaps) {
    std::vector<int> grades{0, 1, 2, 4, 3, 0};
    std::sort(grades.begin(), grades.end());
    do {
        const double base = err_at_k(grades, 20);
        EXPECT_GE(base, 0.0);
        EXPECT_LT(base, 1.0);
        for (std::size_t i = 0; i < grades.size(); ++i) {
            for (std::size_t j = i + 1; j < grades.size(); ++j) {
                if (grades[j] > grades[i]) {
                    auto swapped = grades;
                    std::swap(swapped[i], swapped[j]);
                    EXPECT_GE(err_at_k(swapped, 20), base - 1e-15);
                }
            }
        }
    } while (std::next_permutation(grades.begin(), grades.end()));
}

TEST(Ndcg, HandValues) {
    EXPECT_NEAR(ndcg_at_k(std::vector{0, 1}, std::vector{1, 0}, 20), 1.0 / std::log2(3.0), 1e-12);
    EXPECT_NEAR(ndcg_at_k(std::vector{0, 1}, std::vector{1, 0}, 20), 0.63093, 1e-5);
    EXPECT_EQ(ndcg_at_k(std::vector{0, 0}, std::vector{0, 0}, 20), 0.0);
    EXPECT_EQ(ndcg_at_k(std::vector{2, 1, 0}, std::vector{0, 1, 2}, 20), 1.0);
}

TEST(Ndcg, IdealOrderingIsOne) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> judged(1 + uniform_index(rng, 30));
        for (auto& g : judged) {
            g = static_cast<int>(uniform_index(rng, 5));
        }
        judged[0] = std::max(judged[0], 1);
        auto ideal = judged;
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        EXPECT_NEAR(ndcg_at_k(ideal, judged, 20), 1.0, 1e-12);
        std::shuffle(ideal.begin(), ideal.end(), rng);
        const double value = ndcg_at_k(ideal, judged, 20);
        EXPECT_GE(value, 0.0);
        EXPECT_LE(value, 1.0 + 1e-12);
    }
}

namespace {

RunRanking run_of(std::vector<std::string> docs) {
    RunRanking run{"q", {}};
    for (std::size_t i = 0; i < docs.size(); ++i) {
        run.entries.push_back({docs[i], static_cast<int>(i + 1), 0.0});
    }
    return run;
}

std::vector<std::string> ids(const RunRanking& run) {
    std::vector<std::string> out;
    for (const auto& e : run.entries) {
        out.push_back(e.doc_id);
    }
    return out;
}

}  // namespace

TEST(Rerank, ReverseScoresReverseOrder) {
    JudgmentSet qrels;
    for (const auto* d : {"a", "b", "c", "d"}) {
        qrels.add("q", d, 1);
    }
    const auto run = run_of({"a", "b", "c", "d"});
    const auto out = rerank_run(run, {{"a", 1.0}, {"b", 2.0}, {"c", 3.0}, {"d", 4.0}}, qrels);
    EXPECT_EQ(ids(out), (std::vector<std::string>{"d", "c", "b", "a"}));
    EXPECT_EQ(out.entries[0].original_rank, 1);
    const auto tied = rerank_run(run, {{"a", 0.0}, {"b", 0.0}, {"c", 0.0}, {"d", 0.0}}, qrels);
    EXPECT_EQ(ids(tied), ids(run));
}

TEST(Rerank, UnjudgedDocumentsDropped) {
    JudgmentSet qrels;
    qrels.add("q", "a", 0);
    qrels.add("q", "c", 2);
    const auto out = rerank_run(run_of({"a", "b", "c"}), {{"a", 0.5}, {"b", 0.9}, {"c", 0.1}}, qrels);
    EXPECT_EQ(ids(out), (std::vector<std::string>{"a", "c"}));
}

TEST(Rerank, OutputIsPermutationOfJudgedScored) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        JudgmentSet qrels;
        std::map<std::string, double> scores;
        std::vector<std::string> docs;
        std::vector<std::string> expected;
        for (int d = 0; d < 15; ++d) {
            const std::string id = "d" + std::to_string(d);
            docs.push_back(id);
            const bool judged = uniform_unit(rng) < 0.7;
            const bool scored = uniform_unit(rng) < 0.8;
            if (judged) {
                qrels.add("q", id, static_cast<int>(uniform_index(rng, 3)));
            }
            if (scored) {
                scores[id] = static_cast<double>(uniform_index(rng, 4));
            }
            if (judged && scored) {
                expected.push_back(id);
            }
        }
        auto got = ids(rerank_run(run_of(docs), scores, qrels));
        std::sort(got.begin(), got.end());
        std::sort(expected.begin(), expected.end());
        EXPECT_EQ(got, expected);
    }
}

TEST(Metrics, ReportAndJsonl) {
    JudgmentSet qrels;
    qrels.add("q", "a", 4);
    qrels.add("q", "b", 0);
    const std::vector<RunRanking> runs{run_of({"a", "b"})};
    const auto report = evaluate_runs(runs, qrels, 20, 4);
    EXPECT_NEAR(report.mean_err, 0.9375, 1e-12);
    EXPECT_EQ(report.mean_ndcg, 1.0);
    const auto text = metrics_jsonl(report);
    const auto last = nlohmann::json::parse(text.substr(text.find('\n') + 1));
    EXPECT_EQ(last["query_id"], "all");
    EXPECT_NEAR(last["err20"].get<double>(), 0.9375, 1e-12);
}

TEST(PairAccuracy, HandExample) {
    JudgmentSet qrels;
    qrels.add("q", "a", 4);
    qrels.add("q", "b", 1);
    qrels.add("q", "c", 0);
    const ScoreTable scores{{"q", {{"a", 3.0}, {"b", 1.0}, {"c", 2.0}}}};
    const auto report = pair_accuracy(scores, qrels);
    EXPECT_EQ(report.get(MergedLabel::Nav, MergedLabel::Rel).accuracy, 1.0);
    EXPECT_EQ(report.get(MergedLabel::Nav, MergedLabel::NRel).accuracy, 1.0);
    EXPECT_EQ(report.get(MergedLabel::Rel, MergedLabel::NRel).accuracy, 0.0);
    EXPECT_FALSE(report.get(MergedLabel::HRel, MergedLabel::Rel).accuracy.has_value());
    EXPECT_EQ(report.total_pairs, 3u);
    EXPECT_NEAR(report.weighted_accuracy, 2.0 / 3.0, 1e-12);
}

TEST(PairAccuracy, PerfectNegatedAndVolumes) {
    Rng rng(4);
    JudgmentSet qrels;
    ScoreTable perfect;
    ScoreTable negated;
    ScoreTable noisy;
    for (int q = 0; q < 5; ++q) {
        const std::string qid = "q" + std::to_string(q);
        for (int d = 0; d < 12; ++d) {
            const std::string id = "d" + std::to_string(d);
            const int grade = std::vector{-2, 0, 1, 2, 3, 4}[uniform_index(rng, 6)];
            qrels.add(qid, id, grade);
            const double rank = static_cast<double>(merge_grades(grade));
            perfect[qid][id] = rank;
            negated[qid][id] = -rank;
            noisy[qid][id] = uniform_unit(rng);
        }
    }
    const auto good = pair_accuracy(perfect, qrels);
    const auto bad = pair_accuracy(negated, qrels);
    double volume = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        if (good.pairs[i].pairs > 0) {
            EXPECT_EQ(good.pairs[i].accuracy, 1.0);
            EXPECT_EQ(bad.pairs[i].accuracy, 0.0);
        }
        volume += good.pairs[i].volume;
        weighted += good.pairs[i].accuracy.value_or(0.0) * good.pairs[i].volume;
    }
    EXPECT_NEAR(volume, 1.0, 1e-12);
    EXPECT_NEAR(weighted, good.weighted_accuracy, 1e-12);

    ScoreTable flipped = noisy;
    for (auto& [q, docs] : flipped) {
        for (auto& [d, s] : docs) {
            s = -s;
        }
    }
    const auto a = pair_accuracy(noisy, qrels);
    const auto b = pair_accuracy(flipped, qrels);
    for (std::size_t i = 0; i < 6; ++i) {
        if (a.pairs[i].pairs > 0) {
            EXPECT_NEAR(*a.pairs[i].accuracy + *b.pairs[i].accuracy, 1.0, 1e-12);
        }
    }
}

TEST(PairAccuracy, TiesCountAsIncorrect) {
    JudgmentSet qrels;
    qrels.add("q", "a", 1);
    qrels.add("q", "b", 0);
    const ScoreTable scores{{"q", {{"a", 0.5}, {"b", 0.5}}}};
    const ScoreTable negated{{"q", {{"a", -0.5}, {"b", -0.5}}}};
    EXPECT_LE(*pair_accuracy(scores, qrels).get(MergedLabel::Rel, MergedLabel::NRel).accuracy +
                  *pair_accuracy(negated, qrels).get(MergedLabel::Rel, MergedLabel::NRel).accuracy,
              1.0);
    const auto json = to_json(pair_accuracy(scores, qrels));
    EXPECT_TRUE(json.contains("weighted_average"));
}
