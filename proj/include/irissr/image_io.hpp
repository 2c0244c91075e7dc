#pragma once

// Netpbm I/O. Reads P2/P5 (gray) and P3/P6 (color, converted to BT.601 luma)
// at 8 or 16 bits; writes 8-bit binary PGM.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "irissr/error.hpp"
#include "irissr/raster.hpp"

namespace irissr {

namespace detail {

inline void skip_pnm_space(std::istream& in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c != EOF && std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

inline long read_pnm_int(std::istream& in, const std::string& where) {
    skip_pnm_space(in);
    long v = -1;
    in >> v;
    require(static_cast<bool>(in) && v >= 0, ErrorKind::Parse, where + ": malformed header");
    return v;
}

} // namespace detail

inline Image decode_pnm(std::istream& in, const std::string& where = "<stream>") {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    require(in.gcount() == 2 && magic[0] == 'P', ErrorKind::Parse, where + ": not a PNM file");
    const char kind = magic[1];
    require(kind == '2' || kind == '3' || kind == '5' || kind == '6', ErrorKind::Parse,
            where + ": unsupported PNM variant P" + std::string(1, kind));
    const bool color = kind == '3' || kind == '6';
    const bool binary = kind == '5' || kind == '6';

    const long w = detail::read_pnm_int(in, where);
    const long h = detail::read_pnm_int(in, where);
    const long maxval = detail::read_pnm_int(in, where);
    require(w >= 1 && h >= 1 && w <= 1 << 16 && h <= 1 << 16, ErrorKind::Parse,
            where + ": bad dimensions");
    require(maxval >= 1 && maxval <= 65535, ErrorKind::Parse, where + ": bad maxval");
    const int channels = color ? 3 : 1;
    const std::size_t count = static_cast<std::size_t>(w * h) * channels;

    std::vector<double> raw(count);
    if (binary) {
        in.get(); // single whitespace byte after maxval
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> buf(count * bytes);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        require(static_cast<std::size_t>(in.gcount()) == buf.size(), ErrorKind::Parse,
                where + ": truncated pixel data");
        for (std::size_t i = 0; i < count; ++i)
            raw[i] = bytes == 1 ? buf[i] : (buf[2 * i] << 8 | buf[2 * i + 1]);
    } else {
        for (std::size_t i = 0; i < count; ++i) raw[i] = static_cast<double>(detail::read_pnm_int(in, where));
    }

    Image img(static_cast<int>(w), static_cast<int>(h));
    auto px = img.pixels();
    const auto scale = static_cast<double>(maxval);
    for (std::size_t i = 0; i < px.size(); ++i) {
        double v = color ? 0.299 * raw[3 * i] + 0.587 * raw[3 * i + 1] + 0.114 * raw[3 * i + 2]
                         : raw[i];
        px[i] = std::clamp(v / scale, 0.0, 1.0);
    }
    return img;
}

inline Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::MissingInput, "cannot open image " + path.string());
    return decode_pnm(in, path.string());
}

inline unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline std::string encode_pgm(const Image& img) {
    std::ostringstream out;
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::string body(img.size(), '\0');
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) body[i] = static_cast<char>(to_byte(px[i]));
    out << body;
    return out.str();
}

inline void write_pgm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    const std::string data = encode_pgm(img);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

/// 8-bit quantization as applied by a PGM round trip.
inline Image quantize8(Image img) {
    for (double& v : img.pixels()) v = to_byte(v) / 255.0;
    return img;
}

} // namespace irissr
