#pragma once

#include <utility>

namespace surfcdm {

template <typename T, typename Pred>
std::vector<std::size_t> label_components(const Grid<T>& grid, Pred member, Grid<int>& labels) {
    labels = Grid<int>(grid.width(), grid.height(), 0);
    std::vector<std::size_t> sizes;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            if (labels(x, y) != 0 || !member(grid(x, y))) continue;
            const int label = static_cast<int>(sizes.size()) + 1;
            std::size_t count = 0;
            stack.assign(1, {x, y});
            labels(x, y) = label;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                ++count;
                constexpr int dx[4] = {1, -1, 0, 0};
                constexpr int dy[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int nx = cx + dx[k];
                    const int ny = cy + dy[k];
                    if (!grid.contains(nx, ny) || labels(nx, ny) != 0 || !member(grid(nx, ny))) continue;
                    labels(nx, ny) = label;
                    stack.emplace_back(nx, ny);
                }
            }
            sizes.push_back(count);
        }
    }
    return sizes;
}

}  // namespace surfcdm
