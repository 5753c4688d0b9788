#include "scratch/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scratch {
namespace {

// Skips PPM whitespace and '#' comment lines, then reads one ASCII integer.
long read_header_int(std::istringstream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw Error("malformed PPM header in " + path);
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    if (c != EOF) in.unget();
    return v;
}

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& data, size_t pos) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(data[pos + i]);
    return v;
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + path);
}

Image load_ppm(const std::string& path) {
    std::string data = read_file(path);
    std::istringstream in(data);
    char m0 = static_cast<char>(in.get());
    char m1 = static_cast<char>(in.get());
    if (m0 != 'P' || m1 != '6') throw Error(path + " is not a binary PPM (P6)");

    long w = read_header_int(in, path);
    long h = read_header_int(in, path);
    long maxval = read_header_int(in, path);
    if (maxval != 255) throw Error(path + " has maxval " + std::to_string(maxval) +
                                   "; only 255 is supported");
    in.get();  // single whitespace byte before the raster

    const size_t need = static_cast<size_t>(w) * h * 3;
    size_t offset = static_cast<size_t>(in.tellg());
    if (data.size() - offset < need) throw Error(path + " raster is truncated");

    Image img(h, w);
    size_t k = offset;
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c)
            for (int ch = 0; ch < 3; ++ch)
                img.plane[ch](r, c) = static_cast<unsigned char>(data[k++]) / 255.0;
    return img;
}

void save_ppm(const Image& img, const std::string& path) {
    if (!img.in_unit_range())
        throw ValueError("image has pixels outside [0,1]; save it as .scrt instead");
    std::string buf = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    buf.reserve(buf.size() + static_cast<size_t>(img.pixel_count()) * 3);
    for (Index r = 0; r < img.height; ++r)
        for (Index c = 0; c < img.width; ++c)
            for (int ch = 0; ch < 3; ++ch)
                buf.push_back(static_cast<char>(
                    static_cast<unsigned char>(std::floor(img.plane[ch](r, c) * 255.0 + 0.5))));
    write_file(path, buf);
}

std::string encode_scrt(const Image& img) {
    std::string buf = "SCRT";
    append_u32(buf, static_cast<std::uint32_t>(img.height));
    append_u32(buf, static_cast<std::uint32_t>(img.width));
    append_u32(buf, 3);
    for (Index r = 0; r < img.height; ++r)
        for (Index c = 0; c < img.width; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                float v = static_cast<float>(img.plane[ch](r, c));
                std::uint32_t bits;
                std::memcpy(&bits, &v, 4);
                append_u32(buf, bits);
            }
    return buf;
}

Image decode_scrt(const std::string& bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 4, "SCRT") != 0)
        throw Error("payload lacks the SCRT magic");
    std::uint32_t h = read_u32(bytes, 4);
    std::uint32_t w = read_u32(bytes, 8);
    std::uint32_t c = read_u32(bytes, 12);
    if (c != 3) throw Error("SCRT payload has " + std::to_string(c) + " channels, expected 3");
    size_t need = 16 + static_cast<size_t>(h) * w * 3 * 4;
    if (bytes.size() != need) throw Error("SCRT payload has wrong length");

    Image img(h, w);
    size_t pos = 16;
    for (std::uint32_t r = 0; r < h; ++r)
        for (std::uint32_t cc = 0; cc < w; ++cc)
            for (int ch = 0; ch < 3; ++ch) {
                std::uint32_t bits = read_u32(bytes, pos);
                pos += 4;
                float v;
                std::memcpy(&v, &bits, 4);
                img.plane[ch](r, cc) = v;
            }
    return img;
}

Image load_scrt(const std::string& path) { return decode_scrt(read_file(path)); }

void save_scrt(const Image& img, const std::string& path) {
    write_file(path, encode_scrt(img));
}

Image load_image(const std::string& path) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".scrt") == 0)
        return load_scrt(path);
    return load_ppm(path);
}

void save_image(const Image& img, const std::string& path) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".scrt") == 0)
        save_scrt(img, path);
    else
        save_ppm(img, path);
}

}  // namespace scratch
