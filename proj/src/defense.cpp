#include "scratch/defense.hpp"

#include <algorithm>
#include <cmath>

namespace scratch {
namespace {

using Block = Eigen::Matrix<double, 8, 8>;

const Block& luminance_table() {
    static const Block t = (Block() <<
        16, 11, 10, 16, 24, 40, 51, 61,
        12, 12, 14, 19, 26, 58, 60, 55,
        14, 13, 16, 24, 40, 57, 69, 56,
        14, 17, 22, 29, 51, 87, 80, 62,
        18, 22, 37, 56, 68, 109, 103, 77,
        24, 35, 55, 64, 81, 104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101,
        72, 92, 95, 98, 112, 100, 103, 99).finished();
    return t;
}

const Block& chrominance_table() {
    static const Block t = (Block() <<
        17, 18, 24, 47, 99, 99, 99, 99,
        18, 21, 26, 66, 99, 99, 99, 99,
        24, 26, 56, 99, 99, 99, 99, 99,
        47, 66, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99).finished();
    return t;
}

// Orthonormal type-II DCT matrix; forward transform is M * block * M^T.
const Block& dct_matrix() {
    static const Block m = [] {
        Block out;
        for (int u = 0; u < 8; ++u) {
            double cu = u == 0 ? std::sqrt(0.5) : 1.0;
            for (int x = 0; x < 8; ++x)
                out(u, x) = 0.5 * cu * std::cos((2 * x + 1) * u * M_PI / 16.0);
        }
        return out;
    }();
    return m;
}

Block scale_table(const Block& table, int quality) {
    double scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
    Block out;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            out(i, j) = std::clamp(std::floor((table(i, j) * scale + 50.0) / 100.0), 1.0, 255.0);
    return out;
}

Eigen::ArrayXXd roundtrip_channel(const Eigen::ArrayXXd& ch, const Block& table) {
    const Index h = ch.rows(), w = ch.cols();
    const Index hp = (h + 7) / 8 * 8, wp = (w + 7) / 8 * 8;
    Eigen::ArrayXXd padded(hp, wp);
    for (Index r = 0; r < hp; ++r)
        for (Index c = 0; c < wp; ++c)
            padded(r, c) = ch(std::min(r, h - 1), std::min(c, w - 1));

    const Block& m = dct_matrix();
    for (Index br = 0; br < hp; br += 8)
        for (Index bc = 0; bc < wp; bc += 8) {
            Block blk = padded.block(br, bc, 8, 8).matrix().array() - 128.0;
            Block coef = m * blk * m.transpose();
            Block quantized = (coef.array() / table.array()).round() * table.array();
            padded.block(br, bc, 8, 8) =
                ((m.transpose() * quantized * m).array() + 128.0);
        }
    return padded.topLeftCorner(h, w);
}

}  // namespace

std::string DefenseSpec::name() const {
    switch (kind) {
        case DefenseKind::clip: return "clip";
        case DefenseKind::median: return "median";
        case DefenseKind::jpeg: return "jpeg-q" + std::to_string(jpeg_quality);
    }
    return "?";
}

DefenseSpec parse_defense(const std::string& name, int quality) {
    DefenseSpec spec;
    if (name == "clip") spec.kind = DefenseKind::clip;
    else if (name == "median") spec.kind = DefenseKind::median;
    else if (name == "jpeg") {
        spec.kind = DefenseKind::jpeg;
        spec.jpeg_quality = quality;
    } else {
        throw ValueError("unknown defense '" + name + "' (expected clip, median, or jpeg)");
    }
    spec.validate();
    return spec;
}

Image clip_image(const Image& x) {
    Image out = x;
    for (auto& p : out.plane) p = p.max(0.0).min(1.0);
    return out;
}

Image median_filter(const Image& x) {
    if (x.height < 3 || x.width < 3)
        throw DimensionError("median filter needs an image of at least 3x3 pixels");
    Image out(x.height, x.width);
    for (int ch = 0; ch < 3; ++ch) {
        const auto& p = x.plane[ch];
        for (Index r = 0; r < x.height; ++r)
            for (Index c = 0; c < x.width; ++c) {
                double window[9];
                int k = 0;
                for (Index dr = -1; dr <= 1; ++dr)
                    for (Index dc = -1; dc <= 1; ++dc) {
                        Index rr = std::clamp<Index>(r + dr, 0, x.height - 1);
                        Index cc = std::clamp<Index>(c + dc, 0, x.width - 1);
                        window[k++] = p(rr, cc);
                    }
                std::nth_element(window, window + 4, window + 9);
                out.plane[ch](r, c) = window[4];  // 5th order statistic
            }
    }
    return out;
}

std::pair<Block, Block> jpeg_quant_tables(int quality) {
    if (quality < 1 || quality > 100) throw ValueError("JPEG quality must lie in [1,100]");
    return {scale_table(luminance_table(), quality),
            scale_table(chrominance_table(), quality)};
}

Image jpeg_roundtrip(const Image& x, int quality) {
    auto [lum, chroma] = jpeg_quant_tables(quality);

    const Eigen::ArrayXXd r = x.plane[0] * 255.0;
    const Eigen::ArrayXXd g = x.plane[1] * 255.0;
    const Eigen::ArrayXXd b = x.plane[2] * 255.0;
    Eigen::ArrayXXd y = 0.299 * r + 0.587 * g + 0.114 * b;
    Eigen::ArrayXXd cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
    Eigen::ArrayXXd cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;

    y = roundtrip_channel(y, lum);
    cb = roundtrip_channel(cb, chroma);
    cr = roundtrip_channel(cr, chroma);

    Image out(x.height, x.width);
    out.plane[0] = (y + 1.402 * (cr - 128.0)) / 255.0;
    out.plane[1] = (y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0)) / 255.0;
    out.plane[2] = (y + 1.772 * (cb - 128.0)) / 255.0;
    return clip_image(out);
}

Image apply_defense(const Image& x, const DefenseSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case DefenseKind::clip:
            return clip_image(x);
        case DefenseKind::median:
            return median_filter(clip_image(x));
        case DefenseKind::jpeg:
            return jpeg_roundtrip(clip_image(x), spec.jpeg_quality);
    }
    throw Error("unreachable defense kind");
}

RecoveryReport recovery_eval(const std::vector<std::pair<int, Image>>& adversarials,
                             const DefenseSpec& defense, const Classifier& classifier,
                             const std::vector<std::pair<int, Image>>& benign) {
    defense.validate();
    if (adversarials.empty()) throw ValueError("adversarial set is empty");

    RecoveryReport report;
    report.defense = defense;

    int recovered = 0, net_recovered = 0, img_recovered = 0;
    int index = 0;
    for (const auto& [label, adv] : adversarials) {
        ProbVector pre = classifier.predict_raw(adv);
        int pre_cls;
        pre.maxCoeff(&pre_cls);
        if (pre_cls == label) {
            ++report.rejected;  // not actually adversarial
            ++index;
            continue;
        }
        RecoveryOutcome rec;
        rec.index = index++;
        rec.original_label = label;
        rec.pre_defense_prediction = pre_cls;
        rec.image_domain = adv.in_unit_range();

        ProbVector post = classifier.predict_raw(apply_defense(adv, defense));
        int post_cls;
        post.maxCoeff(&post_cls);
        rec.post_defense_prediction = post_cls;
        rec.recovered = post_cls == label;

        ++report.evaluated;
        if (rec.image_domain) {
            ++report.image_domain_count;
            img_recovered += rec.recovered;
        } else {
            ++report.network_domain_count;
            net_recovered += rec.recovered;
        }
        recovered += rec.recovered;
        report.per_image.push_back(rec);
    }
    if (report.evaluated == 0)
        throw ValueError("no input in the adversarial set fools the classifier");

    report.recovery_rate = 100.0 * recovered / report.evaluated;
    if (report.network_domain_count > 0)
        report.network_domain_rate = 100.0 * net_recovered / report.network_domain_count;
    if (report.image_domain_count > 0)
        report.image_domain_rate = 100.0 * img_recovered / report.image_domain_count;

    if (!benign.empty()) {
        int correct = 0, correct_defended = 0;
        for (const auto& [label, img] : benign) {
            int cls;
            classifier.predict_raw(img).maxCoeff(&cls);
            correct += cls == label;
            classifier.predict_raw(apply_defense(img, defense)).maxCoeff(&cls);
            correct_defended += cls == label;
        }
        double base = 100.0 * correct / benign.size();
        report.clean_accuracy = 100.0 * correct_defended / benign.size();
        report.clean_accuracy_drop = base - report.clean_accuracy;
    }
    return report;
}

}  // namespace scratch
