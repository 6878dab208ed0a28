#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "surfcdm/errors.hpp"

namespace surfcdm {

/// Dense row-major 2-D grid. (x, y) addresses column x of row y.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    std::span<T> row(int y) {
        return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
    }
    std::span<const T> row(int y) const {
        return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
    }

    std::vector<T>& values() noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    bool same_shape(const Grid& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Intensities in [0, 1]; width A, height B.
using CartesianImage = Grid<float>;
/// Labels in {0, 1}; width A, height B.
using CartesianMask = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw Error(ErrorKind::ShapeMismatch, what);
    }
}

std::size_t foreground_count(const CartesianMask& mask);

/// Number of 4-connected foreground components.
int count_components(const CartesianMask& mask);

/// Label 4-connected components of pixels where `member` is true. Returns the
/// label grid (0 = not a member, 1..n) and the size of each component.
template <typename T, typename Pred>
std::vector<std::size_t> label_components(const Grid<T>& grid, Pred member, Grid<int>& labels);

}  // namespace surfcdm

#include "surfcdm/grid_impl.hpp"
