#include "scratch/encoding.hpp"

namespace scratch {
namespace {

constexpr double kBezierWeightMax = 7.0;

void check_entry(double v, double lo, double hi, Index index) {
    if (v < lo || v > hi)
        throw ValueError("candidate entry " + std::to_string(index) + " = " +
                         std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
}

}  // namespace

Index genome_stride(ShapeKind kind) {
    return kind == ShapeKind::bezier ? 10 : 7;
}

std::vector<Scratch> decode_candidate(const Vector& v, ShapeKind kind, int count, Index h,
                                      Index w, Domain domain) {
    const Index stride = genome_stride(kind);
    if (count < 1) throw ValueError("scratch count must be at least 1");
    if (v.size() != stride * count)
        throw DimensionError("candidate has length " + std::to_string(v.size()) +
                             ", expected " + std::to_string(stride * count));

    const bool image = domain == Domain::image;
    std::vector<Scratch> out;
    out.reserve(count);
    for (int s = 0; s < count; ++s) {
        const Index base = s * stride;
        if (image) {
            for (Index k = 0; k < stride; ++k) {
                const Index field = k % stride;
                double lo = 0.0, hi;
                if (kind == ShapeKind::bezier) {
                    hi = field < 6 ? (field % 2 == 0 ? double(w) : double(h))
                                   : (field == 6 ? kBezierWeightMax : 1.0);
                } else {
                    hi = field < 4 ? (field % 2 == 0 ? double(w) : double(h)) : 1.0;
                }
                check_entry(v[base + k], lo, hi, base + k);
            }
        }
        Scratch scr;
        if (kind == ShapeKind::bezier) {
            BezierShape bz;
            bz.p0 = {v[base + 0], v[base + 1]};
            bz.p1 = {v[base + 2], v[base + 3]};
            bz.p2 = {v[base + 4], v[base + 5]};
            bz.w = v[base + 6];
            scr.shape = bz;
            scr.color = {v[base + 7], v[base + 8], v[base + 9]};
        } else {
            LineShape ln;
            ln.p0 = {v[base + 0], v[base + 1]};
            ln.p1 = {v[base + 2], v[base + 3]};
            scr.shape = ln;
            scr.color = {v[base + 4], v[base + 5], v[base + 6]};
        }
        out.push_back(scr);
    }
    return out;
}

Vector encode_candidate(const std::vector<Scratch>& scratches, ShapeKind kind) {
    const Index stride = genome_stride(kind);
    Vector v(stride * static_cast<Index>(scratches.size()));
    Index base = 0;
    for (const auto& scr : scratches) {
        if (kind == ShapeKind::bezier) {
            const auto& bz = std::get<BezierShape>(scr.shape);
            v[base + 0] = bz.p0.x;
            v[base + 1] = bz.p0.y;
            v[base + 2] = bz.p1.x;
            v[base + 3] = bz.p1.y;
            v[base + 4] = bz.p2.x;
            v[base + 5] = bz.p2.y;
            v[base + 6] = bz.w;
            v[base + 7] = scr.color[0];
            v[base + 8] = scr.color[1];
            v[base + 9] = scr.color[2];
        } else {
            const auto& ln = std::get<LineShape>(scr.shape);
            v[base + 0] = ln.p0.x;
            v[base + 1] = ln.p0.y;
            v[base + 2] = ln.p1.x;
            v[base + 3] = ln.p1.y;
            v[base + 4] = scr.color[0];
            v[base + 5] = scr.color[1];
            v[base + 6] = scr.color[2];
        }
        base += stride;
    }
    return v;
}

es::Bounds encoding_bounds(ShapeKind kind, int count, Index h, Index w, Domain domain,
                           double network_color_limit) {
    if (count < 1) throw ValueError("scratch count must be at least 1");
    const Index stride = genome_stride(kind);
    const double color_lo = domain == Domain::image ? 0.0 : -network_color_limit;
    const double color_hi = domain == Domain::image ? 1.0 : network_color_limit;

    Vector lower(stride * count), upper(stride * count);
    for (int s = 0; s < count; ++s) {
        const Index base = s * stride;
        const Index coords = kind == ShapeKind::bezier ? 6 : 4;
        for (Index k = 0; k < coords; ++k) {
            lower[base + k] = 0.0;
            upper[base + k] = k % 2 == 0 ? double(w) : double(h);
        }
        Index k = coords;
        if (kind == ShapeKind::bezier) {
            lower[base + k] = 0.0;
            upper[base + k] = kBezierWeightMax;
            ++k;
        }
        for (; k < stride; ++k) {
            lower[base + k] = color_lo;
            upper[base + k] = color_hi;
        }
    }
    return {std::move(lower), std::move(upper)};
}

}  // namespace scratch
