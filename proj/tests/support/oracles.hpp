#pragma once

// Independent reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "pacrr/simmat.hpp"

namespace pacrr::oracle {

inline double window_score(const Matrix& sim, std::size_t start, std::size_t n) {
    double total = 0.0;
    for (std::size_t j = start; j < start + n; ++j) {
        if (j >= sim.cols || sim.rows == 0) {
            continue;  // padding column scores 0
        }
        double best = sim.at(0, j);
        for (std::size_t i = 1; i < sim.rows; ++i) {
            best = std::max(best, sim.at(i, j));
        }
        total += best;
    }
    return total / static_cast<double>(n);
}

// Enumerates every k-subset of aligned windows. Prefers the subset whose
// scores, sorted descending, are lexicographically largest; among equals the
// lexicographically smallest set of positions.
inline std::vector<std::size_t> brute_force_selection(const Matrix& sim, std::size_t n, std::size_t l_d) {
    const std::size_t windows = (sim.cols + n - 1) / n;
    std::vector<double> scores(windows);
    for (std::size_t w = 0; w < windows; ++w) {
        scores[w] = window_score(sim, w * n, n);
    }
    const std::size_t k = std::min(l_d / n, windows);

    std::vector<std::size_t> best;
    std::vector<double> best_key;
    bool found = false;
    std::vector<std::size_t> current;
    std::function<void(std::size_t)> recurse = [&](std::size_t next) {
        if (current.size() == k) {
            std::vector<double> key;
            for (const auto w : current) {
                key.push_back(scores[w]);
            }
            std::sort(key.begin(), key.end(), std::greater<>());
            // current is generated in lexicographic order, so only strictly better keys replace.
            if (!found || key > best_key) {
                found = true;
                best = current;
                best_key = key;
            }
            return;
        }
        for (std::size_t w = next; w + (k - current.size()) <= windows; ++w) {
            current.push_back(w);
            recurse(w + 1);
            current.pop_back();
        }
    };
    recurse(0);
    for (auto& w : best) {
        w *= n;
    }
    return best;
}

inline Matrix brute_force_kwindow(const Matrix& sim, std::size_t n, std::size_t l_q, std::size_t l_d) {
    Matrix out(l_q, l_d);
    std::size_t col = 0;
    for (const auto start : brute_force_selection(sim, n, l_d)) {
        for (std::size_t j = start; j < start + n; ++j, ++col) {
            for (std::size_t i = 0; i < sim.rows && j < sim.cols; ++i) {
                out.at(i, col) = sim.at(i, j);
            }
        }
    }
    return out;
}

// Top n_s of a row by full sort, zero padded.
inline std::vector<double> sorted_top(std::vector<double> row, std::size_t n_s) {
    std::sort(row.begin(), row.end(), std::greater<>());
    row.resize(n_s, 0.0);
    return row;
}

// Cascade model: P(stop at r) = R_r * prod_{i<r} (1 - R_i), utility 1/r.
inline double cascade_err(const std::vector<int>& grades, std::size_t k, int g_max) {
    double err = 0.0;
    for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) {
        double reach = 1.0;
        for (std::size_t i = 0; i < r; ++i) {
            reach *= 1.0 - (std::pow(2.0, std::max(grades[i], 0)) - 1.0) / std::pow(2.0, g_max);
        }
        const double stop = (std::pow(2.0, std::max(grades[r], 0)) - 1.0) / std::pow(2.0, g_max);
        err += reach * stop / static_cast<double>(r + 1);
    }
    return err;
}

}  // namespace pacrr::oracle
