#include "scratch/compose.hpp"

#include <string>

namespace scratch {
namespace {

void check_image_domain_color(const std::array<double, 3>& color) {
    for (double c : color)
        if (c < 0.0 || c > 1.0)
            throw ValueError("image-domain scratch color " + std::to_string(c) +
                             " outside [0,1]");
}

void clip_unit(Image& img) {
    for (auto& p : img.plane) p = p.max(0.0).min(1.0);
}

}  // namespace

Image apply_scratches(const Image& x, const std::vector<Scratch>& scratches, Domain domain) {
    Image out = x;
    for (const auto& s : scratches) {
        if (domain == Domain::image) check_image_domain_color(s.color);
        for (const auto& px : rasterize_pixels(s.shape, x.height, x.width))
            for (int ch = 0; ch < 3; ++ch) out.plane[ch](px.row, px.col) = s.color[ch];
    }
    if (domain == Domain::image) clip_unit(out);
    return out;
}

Image apply_pixel_field(const Image& x, const PixelField& field, Domain domain) {
    if (field.pixels.size() != field.colors.size())
        throw DimensionError("pixel field has " + std::to_string(field.pixels.size()) +
                             " pixels but " + std::to_string(field.colors.size()) + " colors");
    Image out = x;
    std::vector<char> seen(static_cast<size_t>(x.height * x.width), 0);
    for (size_t i = 0; i < field.pixels.size(); ++i) {
        const auto& px = field.pixels[i];
        if (px.row < 0 || px.row >= x.height || px.col < 0 || px.col >= x.width)
            throw DimensionError("pixel field coordinate outside the image");
        char& flag = seen[static_cast<size_t>(px.row) * x.width + px.col];
        if (flag) throw ValueError("pixel field lists a coordinate twice");
        flag = 1;
        if (domain == Domain::image) check_image_domain_color(field.colors[i]);
        for (int ch = 0; ch < 3; ++ch) out.plane[ch](px.row, px.col) = field.colors[i][ch];
    }
    if (domain == Domain::image) clip_unit(out);
    return out;
}

std::vector<Mask> scratch_masks(const std::vector<Scratch>& scratches, Index h, Index w) {
    std::vector<Mask> masks;
    masks.reserve(scratches.size());
    for (const auto& s : scratches) masks.push_back(rasterize(s.shape, h, w));
    return masks;
}

}  // namespace scratch
