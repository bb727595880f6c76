#pragma once
// Binary Netpbm (P5/P6) reader and writer. Everything the pipeline stores on
// disk as pixels goes through here, bit-exactly: P6 RGB, P5 8-bit (label
// masks), P5 16-bit big-endian samples (height images).

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "terratwin/errors.hpp"
#include "terratwin/grid.hpp"

namespace terratwin::io {

enum class PnmFormat { P5_8, P5_16, P6 };

struct ImageFile {
    PnmFormat format = PnmFormat::P6;
    int width = 0;
    int height = 0;
    int maxval = 255;
    std::vector<std::uint8_t> payload; // raw samples, 16-bit most significant byte first

    std::size_t expected_payload_size() const noexcept {
        const std::size_t channels = format == PnmFormat::P6 ? 3 : 1;
        const std::size_t bytes = format == PnmFormat::P5_16 ? 2 : 1;
        return static_cast<std::size_t>(width) * height * channels * bytes;
    }
};

namespace detail {
inline std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open " + path.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

inline bool is_pnm_space(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}
} // namespace detail

inline ImageFile parse_netpbm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2)
        throw parse_error("file too short for netpbm magic", 0);
    const char m0 = static_cast<char>(bytes[0]);
    const char m1 = static_cast<char>(bytes[1]);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw parse_error("bad netpbm magic (want P5 or P6)", 0);
    const bool is_p6 = m1 == '6';

    std::size_t pos = 2;
    auto skip_separators = [&] {
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            } else if (detail::is_pnm_space(c)) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&](const char* what) {
        skip_separators();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
            throw parse_error(std::string("expected ") + what + " in netpbm header", pos);
        long value = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            value = value * 10 + (bytes[pos] - '0');
            if (value > 1'000'000'000L)
                throw parse_error(std::string(what) + " out of range", pos);
            ++pos;
        }
        return static_cast<int>(value);
    };

    ImageFile img;
    img.width = read_int("width");
    img.height = read_int("height");
    img.maxval = read_int("maxval");
    if (img.maxval != 255 && img.maxval != 65535)
        throw parse_error("unsupported maxval " + std::to_string(img.maxval) +
                              " (want 255 or 65535)",
                          pos);
    if (is_p6 && img.maxval != 255)
        throw parse_error("P6 payload must have maxval 255", pos);
    img.format = is_p6 ? PnmFormat::P6
                       : (img.maxval == 255 ? PnmFormat::P5_8 : PnmFormat::P5_16);

    if (pos >= bytes.size() || !detail::is_pnm_space(static_cast<char>(bytes[pos])))
        throw parse_error("expected single whitespace before payload", pos);
    ++pos;

    const std::size_t want = img.expected_payload_size();
    const std::size_t have = bytes.size() - pos;
    if (have < want)
        throw parse_error("truncated payload: expected " + std::to_string(want) +
                              " bytes, found " + std::to_string(have),
                          pos);
    img.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + want));
    return img;
}

inline ImageFile read_netpbm(const std::filesystem::path& path) {
    return parse_netpbm(detail::slurp(path));
}

inline std::vector<std::uint8_t> serialize_netpbm(const ImageFile& img) {
    if (img.payload.size() != img.expected_payload_size())
        throw argument_error("netpbm payload size does not match dimensions");
    std::string header;
    header += img.format == PnmFormat::P6 ? "P6" : "P5";
    header += "\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
              std::to_string(img.maxval) + "\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), img.payload.begin(), img.payload.end());
    return bytes;
}

// Atomic write: temp file in the same directory, then rename.
inline void write_bytes_atomic(const std::filesystem::path& path,
                               const std::vector<std::uint8_t>& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw io_error("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw io_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_netpbm(const std::filesystem::path& path, const ImageFile& img) {
    write_bytes_atomic(path, serialize_netpbm(img));
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_bytes_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// --- Grid conversions ---

inline ImageFile to_pnm(const TerrainImage& img) {
    ImageFile out;
    out.format = PnmFormat::P6;
    out.width = img.width();
    out.height = img.height();
    out.maxval = 255;
    out.payload.resize(out.expected_payload_size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        out.payload[i * 3 + 0] = img[i].r;
        out.payload[i * 3 + 1] = img[i].g;
        out.payload[i * 3 + 2] = img[i].b;
    }
    return out;
}

inline TerrainImage rgb_from_pnm(const ImageFile& img) {
    if (img.format != PnmFormat::P6)
        throw argument_error("expected P6 image");
    TerrainImage out(img.width, img.height);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = Rgb{img.payload[i * 3 + 0], img.payload[i * 3 + 1], img.payload[i * 3 + 2]};
    return out;
}

inline ImageFile to_pnm(const Grid<std::uint8_t>& gray) {
    ImageFile out;
    out.format = PnmFormat::P5_8;
    out.width = gray.width();
    out.height = gray.height();
    out.maxval = 255;
    out.payload.assign(gray.cells().begin(), gray.cells().end());
    return out;
}

inline Grid<std::uint8_t> gray8_from_pnm(const ImageFile& img) {
    if (img.format != PnmFormat::P5_8)
        throw argument_error("expected 8-bit P5 image");
    Grid<std::uint8_t> out(img.width, img.height);
    std::copy(img.payload.begin(), img.payload.end(), out.cells().begin());
    return out;
}

inline ImageFile to_pnm(const Grid<std::uint16_t>& gray) {
    ImageFile out;
    out.format = PnmFormat::P5_16;
    out.width = gray.width();
    out.height = gray.height();
    out.maxval = 65535;
    out.payload.resize(out.expected_payload_size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        out.payload[i * 2 + 0] = static_cast<std::uint8_t>(gray[i] >> 8);
        out.payload[i * 2 + 1] = static_cast<std::uint8_t>(gray[i] & 0xff);
    }
    return out;
}

inline Grid<std::uint16_t> gray16_from_pnm(const ImageFile& img) {
    if (img.format != PnmFormat::P5_16)
        throw argument_error("expected 16-bit P5 image");
    Grid<std::uint16_t> out(img.width, img.height);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint16_t>((img.payload[i * 2] << 8) | img.payload[i * 2 + 1]);
    return out;
}

} // namespace terratwin::io
