#include <map>

#include <gtest/gtest.h>

#include "pacrr/error.hpp"
#include "pacrr/synth.hpp"
#include "temp_dir.hpp"

using namespace pacrr;
using pacrr::testing::read_file;
using pacrr::testing::TempDir;

TEST(PlantedGrade, Rules) {
    const std::vector<std::string> query{"a", "b", "c"};
    EXPECT_EQ(planted_grade(query, std::vector<std::string>{"x", "a", "b", "y"}), 2);
    EXPECT_EQ(planted_grade(query, std::vector<std::string>{"b", "c"}), 2);
    EXPECT_EQ(planted_grade(query, std::vector<std::string>{"b", "a"}), 1);  // wrong order
    EXPECT_EQ(planted_grade(query, std::vector<std::string>{"a", "x", "c"}), 1);
    EXPECT_EQ(planted_grade(query, std::vector<std::string>{"a", "x", "a"}), 0);
    EXPECT_EQ(planted_grade(query, std::vector<std::string>{}), 0);
    EXPECT_EQ(unigram_overlap(query, std::vector<std::string>{"a", "x", "a", "c"}), 3u);
}

TEST(Synth, GeneratedJudgmentsFollowRule) {
    SynthOptions options;
    options.docs = 200;
    const auto data = generate_synthetic(options);
    EXPECT_EQ(data.corpus.size(), 200u);
    EXPECT_EQ(data.queries.size(), 40u);
    EXPECT_EQ(data.train_ids.size(), 30u);
    EXPECT_EQ(data.validation_ids.size(), 10u);
    std::map<std::string, const Query*> queries;
    for (const auto& q : data.queries) {
        EXPECT_GE(q.tokens.size(), 2u);
        EXPECT_LE(q.tokens.size(), 4u);
        queries[q.query_id] = &q;
    }
    std::size_t judged = 0;
    for (const auto& [qid, docs] : data.qrels.by_query()) {
        for (const auto& [doc_id, grade] : docs) {
            const auto doc = std::find_if(data.corpus.begin(), data.corpus.end(),
                                          [&](const auto& d) { return d.doc_id == doc_id; });
            ASSERT_NE(doc, data.corpus.end());
            EXPECT_EQ(planted_grade(queries[qid]->tokens, doc->tokens), grade);
            ++judged;
        }
    }
    EXPECT_EQ(judged, 200u);
    for (const auto& token_vec : data.embeddings.vectors()) {
        double norm = 0.0;
        for (const double v : token_vec.second) {
            norm += v * v;
        }
        EXPECT_NEAR(norm, 1.0, 1e-12);
    }
}

TEST(Synth, BaselineRanksByOverlap) {
    const auto data = generate_synthetic(SynthOptions{});
    std::map<std::string, std::size_t> overlap;
    for (const auto& run : data.baseline) {
        double previous = 1e9;
        for (const auto& entry : run.entries) {
            EXPECT_LE(entry.original_score, previous);
            previous = entry.original_score;
        }
    }
}

TEST(Synth, GradeSharesMatchConfiguration) {
    SynthOptions options;
    options.docs = 10000;
    options.vocab_size = 5000;
    const auto data = generate_synthetic(options);
    std::map<int, double> counts;
    for (const auto& [qid, docs] : data.qrels.by_query()) {
        for (const auto& [doc_id, grade] : docs) {
            counts[grade] += 1.0;
        }
    }
    EXPECT_NEAR(counts[2] / 10000.0, options.hrel_share, 0.05);
    EXPECT_NEAR(counts[1] / 10000.0, options.rel_share, 0.05);
    EXPECT_NEAR(counts[0] / 10000.0, 1.0 - options.hrel_share - options.rel_share, 0.05);
}

TEST(Synth, FixedSeedWritesIdenticalFiles) {
    TempDir a;
    TempDir b;
    SynthOptions options;
    options.docs = 100;
    write_synthetic(generate_synthetic(options), a.path());
    write_synthetic(generate_synthetic(options), b.path());
    for (const auto* name : {"corpus.jsonl", "queries.jsonl", "qrels.txt", "run.txt", "embeddings.txt", "split.txt"}) {
        EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
        EXPECT_FALSE(read_file(a / name).empty()) << name;
    }
    options.seed = 2;
    write_synthetic(generate_synthetic(options), b.path());
    EXPECT_NE(read_file(a / "corpus.jsonl"), read_file(b / "corpus.jsonl"));
}

TEST(Synth, InvalidOptions) {
    SynthOptions options;
    options.min_doc_len = 5;
    EXPECT_THROW(generate_synthetic(options), ConfigError);
    options = SynthOptions{};
    options.rel_share = 0.9;
    EXPECT_THROW(generate_synthetic(options), ConfigError);
}
