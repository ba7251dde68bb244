#include "pacrr/simmat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "pacrr/error.hpp"

namespace pacrr {

const char* to_string(DistillMode mode) {
    return mode == DistillMode::FirstK ? "firstk" : "kwindow";
}

DistillMode parse_distill_mode(const std::string& text) {
    if (text == "firstk") {
        return DistillMode::FirstK;
    }
    if (text == "kwindow") {
        return DistillMode::KWindow;
    }
    throw ConfigError(fmt::format("unknown distillation mode '{}' (expected firstk or kwindow)", text));
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        return 0.0;
    }
    return std::clamp(dot / (std::sqrt(norm_a) * std::sqrt(norm_b)), -1.0, 1.0);
}

SimilarityMatrix build_sim_matrix(const Query& query, const TokenizedDocument& doc, const EmbeddingTable& emb) {
    SimilarityMatrix sim{query.query_id, doc.doc_id, Matrix(query.tokens.size(), doc.tokens.size())};
    std::vector<const std::vector<double>*> doc_vectors;
    doc_vectors.reserve(doc.tokens.size());
    for (const auto& token : doc.tokens) {
        doc_vectors.push_back(emb.find(token));
    }
    for (std::size_t i = 0; i < query.tokens.size(); ++i) {
        const auto* q = emb.find(query.tokens[i]);
        for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
            if (query.tokens[i] == doc.tokens[j]) {
                sim.values.at(i, j) = 1.0;
            } else if (q != nullptr && doc_vectors[j] != nullptr) {
                sim.values.at(i, j) = cosine(*q, *doc_vectors[j]);
            }
        }
    }
    return sim;
}

namespace {

void check_query_fits(const Matrix& sim, std::size_t l_q) {
    if (l_q < sim.rows) {
        throw std::invalid_argument(
            fmt::format("query has {} terms but l_q = {}; truncate the query first", sim.rows, l_q));
    }
}

}  // namespace

Matrix distill_firstk(const Matrix& sim, std::size_t l_q, std::size_t l_d) {
    check_query_fits(sim, l_q);
    Matrix out(l_q, l_d);
    const std::size_t keep = std::min(sim.cols, l_d);
    for (std::size_t i = 0; i < sim.rows; ++i) {
        std::copy_n(sim.values.begin() + static_cast<std::ptrdiff_t>(i * sim.cols), keep,
                    out.values.begin() + static_cast<std::ptrdiff_t>(i * l_d));
    }
    return out;
}

std::vector<std::size_t> kwindow_selection(const Matrix& sim, std::size_t n, std::size_t l_d) {
    if (n == 0 || n > l_d) {
        throw std::invalid_argument(fmt::format("window length {} must be in [1, l_d = {}]", n, l_d));
    }
    std::vector<double> column_max(sim.cols, 0.0);
    for (std::size_t j = 0; j < sim.cols; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sim.rows; ++i) {
            best = std::max(best, sim.at(i, j));
        }
        column_max[j] = sim.rows == 0 ? 0.0 : best;
    }

    const std::size_t window_count = (sim.cols + n - 1) / n;
    std::vector<double> scores(window_count, 0.0);
    for (std::size_t w = 0; w < window_count; ++w) {
        double sum = 0.0;
        for (std::size_t j = w * n; j < std::min(sim.cols, (w + 1) * n); ++j) {
            sum += column_max[j];
        }
        scores[w] = sum / static_cast<double>(n);
    }

    std::vector<std::size_t> order(window_count);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t keep = std::min(l_d / n, window_count);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    for (auto& w : order) {
        w *= n;
    }
    return order;
}

Matrix distill_kwindow(const Matrix& sim, std::size_t n, std::size_t l_q, std::size_t l_d) {
    check_query_fits(sim, l_q);
    const auto starts = kwindow_selection(sim, n, l_d);
    Matrix out(l_q, l_d);
    std::size_t col = 0;
    for (const std::size_t start : starts) {
        for (std::size_t offset = 0; offset < n; ++offset, ++col) {
            const std::size_t source = start + offset;
            if (source >= sim.cols) {
                continue;
            }
            for (std::size_t i = 0; i < sim.rows; ++i) {
                out.at(i, col) = sim.at(i, source);
            }
        }
    }
    return out;
}

DistilledInput distill(const SimilarityMatrix& sim, DistillMode mode, std::size_t l_g, std::size_t l_q,
                       std::size_t l_d) {
    DistilledInput input{sim.query_id, sim.doc_id, mode, {}, sim.values.rows};
    input.per_n.reserve(l_g);
    if (mode == DistillMode::FirstK) {
        const Matrix shared = distill_firstk(sim.values, l_q, l_d);
        input.per_n.assign(l_g, shared);
    } else {
        for (std::size_t n = 1; n <= l_g; ++n) {
            input.per_n.push_back(distill_kwindow(sim.values, n, l_q, l_d));
        }
    }
    return input;
}

}  // namespace pacrr
