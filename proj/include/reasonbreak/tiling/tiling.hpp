#pragma once

#include <vector>

#include "reasonbreak/core/image.hpp"

namespace reasonbreak {

/// m columns by n rows, blocks resampled to block_side x block_side.
struct GridSpec {
    int m = 1;          // columns, tracks width
    int n = 1;          // rows, tracks height
    int block_side = 224;
};

struct BlockSet {
    std::vector<ImageBuffer> blocks;  // row-major, left-to-right then top-to-bottom
    GridSpec grid;
    int source_width = 0;
    int source_height = 0;
};

// Chooses the (m, n) grid whose aspect ratio m/n is closest to width/height
// subject to m*n <= n_max. Ties: largest m*n first, then smallest m.
// Ratio comparison is exact integer arithmetic.
GridSpec plan_grid(int width, int height, int n_max, int block_side = 224);

BlockSet decompose(const ImageBuffer& image, const GridSpec& grid);

// Tiles block-resolution deltas onto the grid canvas, then nearest-neighbor
// resamples to width x height.
PerturbationField assemble_perturbation(const std::vector<PerturbationField>& block_deltas,
                                        const GridSpec& grid, int width, int height);

// clip(image + field, image - eps, image + eps), then clip to [0,1].
ImageBuffer apply_budget(const ImageBuffer& image, const PerturbationField& field, double epsilon);

}  // namespace reasonbreak
