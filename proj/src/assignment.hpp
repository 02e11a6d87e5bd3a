#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace actdet::detail {

/// Maximum-weight bipartite matching over a dense weight matrix. Entries that
/// are not positive mean "no edge". Returns, per row, the matched column or -1.
/// Hungarian method (shortest augmenting paths with potentials), O(r^2 c) for
/// r rows <= c columns; the matrix is transposed internally otherwise.
inline std::vector<long> max_weight_matching(const std::vector<std::vector<double>>& weight) {
    const std::size_t rows = weight.size();
    const std::size_t cols = rows == 0 ? 0 : weight.front().size();
    std::vector<long> result(rows, -1);
    if (rows == 0 || cols == 0) {
        return result;
    }
    const bool transpose = rows > cols;
    const std::size_t n = transpose ? cols : rows;  // n <= m
    const std::size_t m = transpose ? rows : cols;
    auto cost = [&](std::size_t i, std::size_t j) {
        const double w = transpose ? weight[j][i] : weight[i][j];
        return w > 0.0 ? -w : 0.0;
    };
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based arrays; p[j] is the row assigned to column j.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        const std::size_t i = p[j] - 1;
        const std::size_t c = j - 1;
        const double w = transpose ? weight[c][i] : weight[i][c];
        if (w <= 0.0) continue;
        if (transpose) {
            result[c] = static_cast<long>(i);
        } else {
            result[i] = static_cast<long>(c);
        }
    }
    return result;
}

}  // namespace actdet::detail
