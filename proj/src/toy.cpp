#include "scratch/toy.hpp"

#include <cmath>

namespace scratch::toy {
namespace {

constexpr double kAmplitude = 0.35;
constexpr double kNoise = 0.08;

}  // namespace

Image toy_image(int cls, std::uint64_t seed) {
    if (cls < 0 || cls >= kClasses) throw ValueError("toy class must be 0, 1, or 2");
    Rng rng(seed);
    Image img(kHeight, kWidth);

    Eigen::ArrayXXd value(kHeight, kWidth);
    if (cls == 0 || cls == 1) {
        double freq = 0.8 + 0.6 * rng.uniform();
        double phase = 2.0 * M_PI * rng.uniform();
        for (Index r = 0; r < kHeight; ++r)
            for (Index c = 0; c < kWidth; ++c) {
                double coord = cls == 0 ? double(r) : double(c);
                value(r, c) = 0.5 + kAmplitude * std::sin(freq * coord + phase);
            }
    } else {
        double cx = 3.0 + 10.0 * rng.uniform();
        double cy = 3.0 + 10.0 * rng.uniform();
        double spread = 2.5 + 2.0 * rng.uniform();
        for (Index r = 0; r < kHeight; ++r)
            for (Index c = 0; c < kWidth; ++c) {
                double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                value(r, c) = 0.5 - kAmplitude +
                              2.0 * kAmplitude * std::exp(-d2 / (2.0 * spread * spread));
            }
    }

    for (int ch = 0; ch < 3; ++ch) {
        double tint = 0.7 + 0.3 * rng.uniform();
        img.plane[ch] = value * tint;
    }
    for (Index r = 0; r < kHeight; ++r)
        for (Index c = 0; c < kWidth; ++c)
            for (int ch = 0; ch < 3; ++ch)
                img.plane[ch](r, c) += rng.uniform(-kNoise, kNoise);
    for (auto& p : img.plane) p = p.max(0.0).min(1.0);
    return img;
}

std::vector<LabeledImage> toy_dataset(int count, std::uint64_t seed_base) {
    std::vector<LabeledImage> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back({toy_image(i % kClasses, seed_base + i), i % kClasses});
    return out;
}

}  // namespace scratch::toy
