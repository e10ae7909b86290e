#include "reasonbreak/tiling/tiling.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace reasonbreak {

namespace {

// |W/H - m/n| compared without floating point: |W*n - m*H| / (H*n).
// a1/b1 < a2/b2  <=>  a1*b2 < a2*b1 (all non-negative).
struct Ratio {
    int64_t num, den;
};

inline int cmp_ratio(Ratio a, Ratio b) {
    __int128 lhs = static_cast<__int128>(a.num) * b.den;
    __int128 rhs = static_cast<__int128>(b.num) * a.den;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

}  // namespace

GridSpec plan_grid(int width, int height, int n_max, int block_side) {
    if (width < 1 || height < 1 || n_max < 1)
        throw std::invalid_argument("plan_grid: width, height and n_max must be positive");
    if (block_side < 16 || block_side % 16 != 0)
        throw std::invalid_argument("plan_grid: block_side must be a positive multiple of 16");

    int best_m = 1, best_n = 1;
    Ratio best_err{std::abs(static_cast<int64_t>(width) - height), static_cast<int64_t>(height)};
    for (int m = 1; m <= n_max; ++m) {
        for (int n = 1; static_cast<int64_t>(m) * n <= n_max; ++n) {
            Ratio err{std::abs(static_cast<int64_t>(width) * n - static_cast<int64_t>(m) * height),
                      static_cast<int64_t>(height) * n};
            int c = cmp_ratio(err, best_err);
            bool better = c < 0;
            if (c == 0) {
                int64_t area = static_cast<int64_t>(m) * n;
                int64_t best_area = static_cast<int64_t>(best_m) * best_n;
                better = area > best_area || (area == best_area && m < best_m);
            }
            if (better) {
                best_m = m;
                best_n = n;
                best_err = err;
            }
        }
    }
    return GridSpec{best_m, best_n, block_side};
}

BlockSet decompose(const ImageBuffer& image, const GridSpec& grid) {
    if (grid.m < 1 || grid.n < 1 || grid.block_side < 1)
        throw std::invalid_argument("decompose: invalid grid");
    const int canvas_w = grid.m * grid.block_side;
    const int canvas_h = grid.n * grid.block_side;
    ImageBuffer canvas = resample_bilinear(image, canvas_h, canvas_w);

    BlockSet set;
    set.grid = grid;
    set.source_width = image.width;
    set.source_height = image.height;
    set.blocks.reserve(static_cast<size_t>(grid.m) * grid.n);
    for (int row = 0; row < grid.n; ++row) {
        for (int col = 0; col < grid.m; ++col) {
            ImageBuffer block(grid.block_side, grid.block_side);
            const int y0 = row * grid.block_side;
            const int x0 = col * grid.block_side;
            for (int y = 0; y < grid.block_side; ++y)
                for (int x = 0; x < grid.block_side; ++x)
                    for (int c = 0; c < 3; ++c)
                        block.at(y, x, c) = canvas.at(y0 + y, x0 + x, c);
            set.blocks.push_back(std::move(block));
        }
    }
    return set;
}

PerturbationField assemble_perturbation(const std::vector<PerturbationField>& block_deltas,
                                        const GridSpec& grid, int width, int height) {
    if (static_cast<int64_t>(block_deltas.size()) != static_cast<int64_t>(grid.m) * grid.n)
        throw std::invalid_argument("assemble_perturbation: delta count does not match grid");
    const int canvas_w = grid.m * grid.block_side;
    const int canvas_h = grid.n * grid.block_side;
    PerturbationField canvas(canvas_h, canvas_w);
    for (int row = 0; row < grid.n; ++row) {
        for (int col = 0; col < grid.m; ++col) {
            const PerturbationField& d = block_deltas[static_cast<size_t>(row) * grid.m + col];
            if (d.height != grid.block_side || d.width != grid.block_side)
                throw std::invalid_argument("assemble_perturbation: block delta has wrong side");
            const int y0 = row * grid.block_side;
            const int x0 = col * grid.block_side;
            for (int y = 0; y < grid.block_side; ++y)
                for (int x = 0; x < grid.block_side; ++x)
                    for (int c = 0; c < 3; ++c)
                        canvas.at(y0 + y, x0 + x, c) = d.at(y, x, c);
        }
    }
    return resample_nearest(canvas, height, width);
}

ImageBuffer apply_budget(const ImageBuffer& image, const PerturbationField& field, double epsilon) {
    if (!image.same_dims(field)) throw std::invalid_argument("apply_budget: dimension mismatch");
    if (epsilon <= 0.0) throw std::invalid_argument("apply_budget: epsilon must be positive");
    ImageBuffer out(image.height, image.width);
    for (size_t i = 0; i < image.data.size(); ++i) {
        double v = image.data[i] + field.data[i];
        v = std::clamp(v, image.data[i] - epsilon, image.data[i] + epsilon);
        out.data[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

}  // namespace reasonbreak
