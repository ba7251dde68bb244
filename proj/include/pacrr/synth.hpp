#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pacrr/corpus.hpp"

namespace pacrr {

struct SynthOptions {
    std::uint64_t seed = 1;
    std::size_t docs = 500;
    std::size_t train_queries = 30;
    std::size_t validation_queries = 10;
    std::size_t test_queries = 0;
    std::size_t vocab_size = 2000;
    std::size_t dim = 50;
    std::size_t min_doc_len = 30;
    std::size_t max_doc_len = 80;
    // Target shares of planted grades 1 and 2; grade 0 takes the rest.
    double rel_share = 0.3;
    double hrel_share = 0.2;

    void validate() const;
};

struct SyntheticData {
    std::vector<TokenizedDocument> corpus;
    std::vector<Query> queries;
    JudgmentSet qrels;
    std::vector<RunRanking> baseline;  // ranked by unigram overlap count
    EmbeddingTable embeddings;
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    std::vector<std::string> test_ids;
};

/// Grade 2 when two consecutive query terms appear contiguously and in order,
/// grade 1 when at least two distinct query terms occur otherwise, else 0.
int planted_grade(std::span<const std::string> query, std::span<const std::string> doc);

/// Number of document tokens that are query terms.
std::size_t unigram_overlap(std::span<const std::string> query, std::span<const std::string> doc);

/// Vocabulary of random unit-norm embeddings, 2-4 term queries with disjoint
/// terms, and documents assigned round-robin to queries with planted relevance.
/// Background text never contains query terms. Each query's documents are
/// judged by planted_grade; the baseline run ranks them by unigram overlap
/// (ties by doc id).
SyntheticData generate_synthetic(const SynthOptions& options);

/// Writes corpus.jsonl, queries.jsonl, qrels.txt, run.txt, embeddings.txt and
/// split.txt into dir.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace pacrr
