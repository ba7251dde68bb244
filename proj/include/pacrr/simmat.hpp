#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pacrr/corpus.hpp"

namespace pacrr {

/// Dense row-major matrix of doubles used for similarity grids.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

struct SimilarityMatrix {
    std::string query_id;
    std::string doc_id;
    Matrix values;  // |q| x |d|
};

enum class DistillMode { FirstK, KWindow };

const char* to_string(DistillMode mode);
/// Accepts "firstk" or "kwindow"; throws ConfigError otherwise.
DistillMode parse_distill_mode(const std::string& text);

/// Fixed-size model input. per_n[n - 1] is the l_q x l_d matrix for n-gram size n.
struct DistilledInput {
    std::string query_id;
    std::string doc_id;
    DistillMode mode = DistillMode::FirstK;
    std::vector<Matrix> per_n;
    std::size_t query_len = 0;

    const Matrix& for_ngram(std::size_t n) const { return per_n.at(n - 1); }
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

/// sim_ij = cosine(e(q_i), e(d_j)). Identical tokens score exactly 1; a missing
/// embedding on either side scores 0.
SimilarityMatrix build_sim_matrix(const Query& query, const TokenizedDocument& doc, const EmbeddingTable& emb);

/// Keeps the first l_d document columns and zero-pads to l_q x l_d.
/// Throws std::invalid_argument when l_q < |q|.
Matrix distill_firstk(const Matrix& sim, std::size_t l_q, std::size_t l_d);

/// Selects the floor(l_d / n) disjoint n-term windows (aligned at multiples of n)
/// with the highest mean column-max similarity, keeps them in document order
/// and zero-pads to l_q x l_d. Throws std::invalid_argument when n > l_d or l_q < |q|.
Matrix distill_kwindow(const Matrix& sim, std::size_t n, std::size_t l_q, std::size_t l_d);

/// Window start positions (document columns) chosen by distill_kwindow, ascending.
std::vector<std::size_t> kwindow_selection(const Matrix& sim, std::size_t n, std::size_t l_d);

/// Builds per_n for n = 1..l_g under the given mode.
DistilledInput distill(const SimilarityMatrix& sim, DistillMode mode, std::size_t l_g, std::size_t l_q,
                       std::size_t l_d);

}  // namespace pacrr
