#include "scratch/raster.hpp"

#include <cmath>

namespace scratch {
namespace {

// Basis rows over the fixed parameter grid, shared by every rasterization:
// b0 = (1-t)^2, b1 = 2(1-t)t, b2 = t^2.
struct BasisGrid {
    Eigen::ArrayXd t, b0, b1, b2;
    BasisGrid() {
        t = Eigen::ArrayXd::LinSpaced(kRasterSamples, 0.0, 1.0);
        b0 = (1.0 - t).square();
        b1 = 2.0 * (1.0 - t) * t;
        b2 = t.square();
    }
};

const BasisGrid& grid() {
    static const BasisGrid g;
    return g;
}

inline int round_clamp(double v, Index limit) {
    double r = std::floor(v + 0.5);  // half-up
    if (r < 0.0) return 0;
    if (r > static_cast<double>(limit - 1)) return static_cast<int>(limit - 1);
    return static_cast<int>(r);
}

}  // namespace

std::vector<PixelCoord> rasterize_pixels(const ScratchShape& shape, Index h, Index w) {
    const auto& g = grid();
    Eigen::ArrayXd px(kRasterSamples), py(kRasterSamples);
    if (const auto* line = std::get_if<LineShape>(&shape)) {
        px = line->p0.x + g.t * (line->p1.x - line->p0.x);
        py = line->p0.y + g.t * (line->p1.y - line->p0.y);
    } else {
        const auto& bz = std::get<BezierShape>(shape);
        // Denominator is >= min(1, W)/2 ... strictly positive for W >= 0
        // since (1-t)^2 + t^2 > 0 on [0,1].
        Eigen::ArrayXd den = g.b0 + bz.w * g.b1 + g.b2;
        px = (g.b0 * bz.p0.x + bz.w * g.b1 * bz.p1.x + g.b2 * bz.p2.x) / den;
        py = (g.b0 * bz.p0.y + bz.w * g.b1 * bz.p1.y + g.b2 * bz.p2.y) / den;
    }

    std::vector<PixelCoord> out;
    std::vector<char> seen(static_cast<size_t>(h * w), 0);
    int last_col = -1, last_row = -1;
    for (int i = 0; i < kRasterSamples; ++i) {
        int col = round_clamp(px[i], w);
        int row = round_clamp(py[i], h);
        if (col == last_col && row == last_row) continue;
        last_col = col;
        last_row = row;
        char& flag = seen[static_cast<size_t>(row) * w + col];
        if (!flag) {
            flag = 1;
            out.push_back({col, row});
        }
    }
    return out;
}

Mask rasterize(const ScratchShape& shape, Index h, Index w) {
    return pixels_to_mask(rasterize_pixels(shape, h, w), h, w);
}

Mask pixels_to_mask(const std::vector<PixelCoord>& pixels, Index h, Index w) {
    Mask m = Mask::Constant(h, w, false);
    for (const auto& p : pixels) m(p.row, p.col) = true;
    return m;
}

double coverage(const std::vector<Mask>& masks, Index h, Index w) {
    if (masks.empty()) return 0.0;
    Mask u = Mask::Constant(h, w, false);
    for (const auto& m : masks) {
        if (m.rows() != h || m.cols() != w)
            throw DimensionError("mask dimensions disagree with canvas");
        u = u || m;
    }
    return 100.0 * static_cast<double>(u.count()) / static_cast<double>(h * w);
}

}  // namespace scratch
