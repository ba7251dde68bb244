#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pacrr {

struct TokenizedDocument {
    std::string doc_id;
    std::vector<std::string> tokens;

    bool operator==(const TokenizedDocument&) const = default;
};

struct Query {
    std::string query_id;
    std::vector<std::string> tokens;

    bool operator==(const Query&) const = default;
};

/// Canonical relevance grades shared by all judgment files.
enum class Grade : int { Junk = -2, NRel = 0, Rel = 1, HRel = 2, Key = 3, Nav = 4 };

bool is_canonical_grade(int grade);

/// Graded judgments keyed by (query_id, doc_id).
class JudgmentSet {
  public:
    /// Throws DataError on a duplicate (query, doc) pair or a non-canonical grade.
    void add(const std::string& query_id, const std::string& doc_id, int grade);

    std::optional<int> grade(const std::string& query_id, const std::string& doc_id) const;

    /// All judgments of one query, doc_id ordered. Empty when the query is unjudged.
    const std::map<std::string, int>& for_query(const std::string& query_id) const;

    const std::map<std::string, std::map<std::string, int>>& by_query() const { return entries_; }

    std::size_t size() const { return size_; }

    bool operator==(const JudgmentSet&) const = default;

  private:
    std::map<std::string, std::map<std::string, int>> entries_;
    std::size_t size_ = 0;
};

struct RunEntry {
    std::string doc_id;
    int original_rank = 0;
    double original_score = 0.0;

    bool operator==(const RunEntry&) const = default;
};

struct RunRanking {
    std::string query_id;
    std::vector<RunEntry> entries;

    bool operator==(const RunRanking&) const = default;
};

class EmbeddingTable {
  public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }

    /// Inserts or replaces a vector. Throws DataError when its length differs from dim().
    void insert(const std::string& token, std::vector<double> vector);

    /// nullptr when the token has no embedding.
    const std::vector<double>* find(const std::string& token) const;

    const std::unordered_map<std::string, std::vector<double>>& vectors() const { return vectors_; }

    bool operator==(const EmbeddingTable&) const = default;

  private:
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Smoothed inverse document frequency, idf(t) = ln((N + 1) / (df(t) + 1)).
class IdfTable {
  public:
    IdfTable(std::size_t doc_count, std::unordered_map<std::string, std::size_t> df);

    std::size_t doc_count() const { return doc_count_; }
    std::size_t df(const std::string& token) const;

    /// Tokens unseen in the corpus get ln(N + 1).
    double idf(const std::string& token) const;

    std::vector<double> for_tokens(std::span<const std::string> tokens) const;

  private:
    std::size_t doc_count_;
    std::unordered_map<std::string, std::size_t> df_;
};

/// Maps raw judgment labels onto canonical grades.
using GradeMap = std::map<int, int>;

GradeMap identity_grade_map();

/// Parses "raw:canonical" pairs separated by commas, e.g. "0:0,1:1,-2:-2".
GradeMap parse_grade_map(const std::string& text);

std::vector<TokenizedDocument> load_corpus(const std::filesystem::path& path);

/// Queries longer than max_query_len are truncated with a warning (0 disables truncation).
std::vector<Query> load_queries(const std::filesystem::path& path, std::size_t max_query_len = 0);

JudgmentSet load_qrels(const std::filesystem::path& path, const GradeMap& grade_map = identity_grade_map());

/// Runs in file order of first appearance, entries sorted by rank.
std::vector<RunRanking> load_run(const std::filesystem::path& path);

EmbeddingTable load_embeddings(const std::filesystem::path& path);

IdfTable compute_idf(std::span<const TokenizedDocument> corpus);

void save_corpus(std::span<const TokenizedDocument> corpus, const std::filesystem::path& path);
void save_queries(std::span<const Query> queries, const std::filesystem::path& path);
void save_qrels(const JudgmentSet& qrels, const std::filesystem::path& path);
void save_run(std::span<const RunRanking> runs, const std::filesystem::path& path,
              const std::string& tag = "pacrr");
/// Writes a "count dim" header followed by one row per token, tokens sorted.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

/// Truncates a query to its first max_len tokens. Returns true when it was cut.
bool truncate_query(Query& query, std::size_t max_len);

}  // namespace pacrr
