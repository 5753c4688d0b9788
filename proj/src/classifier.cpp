#include "scratch/classifier.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace scratch {
namespace {

void append_u32(std::string& buf, std::uint32_t v) {
    char raw[4];
    raw[0] = static_cast<char>(v & 0xff);
    raw[1] = static_cast<char>((v >> 8) & 0xff);
    raw[2] = static_cast<char>((v >> 16) & 0xff);
    raw[3] = static_cast<char>((v >> 24) & 0xff);
    buf.append(raw, 4);
}

void append_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    append_u32(buf, bits);
}

class Reader {
public:
    Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(data_[pos_ + i]);
        pos_ += 4;
        return v;
    }

    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    size_t position() const { return pos_; }

private:
    void need(size_t n) {
        if (pos_ + n > data_.size())
            throw Error("weight file " + path_ + " is truncated");
    }

    const std::string& data_;
    std::string path_;
    size_t pos_ = 0;
};

}  // namespace

BuiltinMlp::BuiltinMlp(std::vector<Layer> layers, std::vector<std::string> labels,
                       std::string identity)
    : layers_(std::move(layers)), labels_(std::move(labels)), identity_(std::move(identity)) {
    if (layers_.empty()) throw ValueError("classifier needs at least one layer");
    for (size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.bias.size() != l.weight.rows())
            throw DimensionError("layer " + std::to_string(i) + " bias length " +
                                 std::to_string(l.bias.size()) + " != weight rows " +
                                 std::to_string(l.weight.rows()));
        if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
            throw DimensionError("layer " + std::to_string(i) + " expects " +
                                 std::to_string(l.weight.cols()) + " inputs but layer " +
                                 std::to_string(i - 1) + " produces " +
                                 std::to_string(layers_[i - 1].weight.rows()));
    }
    if (layers_.back().weight.rows() < 2)
        throw ValueError("classifier needs at least 2 output classes");
    if (labels_.empty())
        for (int i = 0; i < layers_.back().weight.rows(); ++i)
            labels_.push_back("class_" + std::to_string(i));
}

ProbVector BuiltinMlp::predict_flat(const Vector& features) const {
    if (features.size() != input_dimension())
        throw DimensionError("input has " + std::to_string(features.size()) +
                             " features, model expects " + std::to_string(input_dimension()));
    Vector h = features;
    for (size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].weight * h + layers_[i].bias;
        if (i + 1 < layers_.size()) h = h.cwiseMax(0.0);
    }
    // shifted softmax
    h.array() -= h.maxCoeff();
    Vector e = h.array().exp();
    return e / e.sum();
}

ProbVector BuiltinMlp::predict_raw(const Image& x) const {
    return predict_flat(x.flatten());
}

ProbVector predict(const Classifier& c, QueryLedger& ledger, const Image& x) {
    ledger.consume();
    try {
        return c.predict_raw(x);
    } catch (...) {
        ledger.refund();  // the query never reached a decision
        throw;
    }
}

CaptionResult caption_predict(const Classifier& c, QueryLedger& ledger, const Image& x) {
    ledger.consume();
    try {
        return c.caption_raw(x);
    } catch (...) {
        ledger.refund();
        throw;
    }
}

void save_builtin(const BuiltinMlp& model, const std::string& path) {
    std::string buf = "SCR1";
    append_u32(buf, static_cast<std::uint32_t>(model.layers().size()));
    for (const auto& l : model.layers()) {
        append_u32(buf, static_cast<std::uint32_t>(l.weight.rows()));
        append_u32(buf, static_cast<std::uint32_t>(l.weight.cols()));
    }
    for (const auto& l : model.layers()) {
        for (Index r = 0; r < l.weight.rows(); ++r)
            for (Index c = 0; c < l.weight.cols(); ++c)
                append_f32(buf, static_cast<float>(l.weight(r, c)));
        for (Index r = 0; r < l.bias.size(); ++r) append_f32(buf, static_cast<float>(l.bias[r]));
    }
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    append_u32(buf, crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write weight file " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::shared_ptr<BuiltinMlp> load_builtin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open weight file " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (data.size() < 8 || data.compare(0, 4, "SCR1") != 0)
        throw Error("weight file " + path + " lacks the SCR1 magic");

    std::uint32_t stored_crc = 0;
    for (int i = 3; i >= 0; --i)
        stored_crc = (stored_crc << 8) | static_cast<unsigned char>(data[data.size() - 4 + i]);
    std::uint32_t actual_crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size() - 4)));
    if (stored_crc != actual_crc)
        throw Error("weight file " + path + " failed its checksum");

    Reader r(data, path);
    r.u32();  // magic, already verified
    std::uint32_t layer_count = r.u32();
    if (layer_count == 0 || layer_count > 64)
        throw Error("weight file " + path + " declares " + std::to_string(layer_count) +
                    " layers");

    std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        std::uint32_t rows = r.u32();
        std::uint32_t cols = r.u32();
        if (rows == 0 || cols == 0)
            throw Error("weight file " + path + " has an empty layer");
        if (i > 0 && cols != shapes.back().first)
            throw DimensionError("layer " + std::to_string(i) + " shape " +
                                 std::to_string(rows) + "x" + std::to_string(cols) +
                                 " does not chain onto previous output size " +
                                 std::to_string(shapes.back().first));
        shapes.emplace_back(rows, cols);
    }

    std::vector<BuiltinMlp::Layer> layers;
    for (auto [rows, cols] : shapes) {
        BuiltinMlp::Layer l;
        l.weight.resize(rows, cols);
        for (std::uint32_t rr = 0; rr < rows; ++rr)
            for (std::uint32_t cc = 0; cc < cols; ++cc) l.weight(rr, cc) = r.f32();
        l.bias.resize(rows);
        for (std::uint32_t rr = 0; rr < rows; ++rr) l.bias[rr] = r.f32();
        layers.push_back(std::move(l));
    }
    if (r.position() != data.size() - 4)
        throw Error("weight file " + path + " has trailing bytes");

    return std::make_shared<BuiltinMlp>(std::move(layers), std::vector<std::string>{},
                                        "scr1:" + std::to_string(actual_crc));
}

}  // namespace scratch
