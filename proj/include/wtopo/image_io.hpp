#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "wtopo/errors.hpp"
#include "wtopo/grid.hpp"

namespace wtopo {

enum class FieldFormat { pgm, png, raw_f32 };

inline FieldFormat format_from_path(const std::string& path) {
    auto ends_with = [&](const char* suf) {
        const size_t n = std::strlen(suf);
        return path.size() >= n &&
               std::equal(path.end() - static_cast<long>(n), path.end(), suf,
                          [](char a, char b) { return std::tolower(a) == b; });
    };
    if (ends_with(".pgm")) return FieldFormat::pgm;
    if (ends_with(".png")) return FieldFormat::png;
    if (ends_with(".twsf")) return FieldFormat::raw_f32;
    throw io_error("unrecognized field extension (want .pgm, .png or .twsf): " + path);
}

namespace detail {

inline int pnm_next_token(std::istream& in) {
    // Skips whitespace and '#' comments, returns the next integer.
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    in >> value;
    if (!in) throw io_error("malformed PGM header");
    return value;
}

inline ScalarField bytes_to_field(const std::vector<unsigned char>& bytes, int w, int h) {
    ScalarField f(w, h);
    for (int i = 0; i < w * h; ++i)
        f[i] = static_cast<double>(bytes[static_cast<size_t>(i)]) / 255.0;
    return f;
}

inline std::vector<unsigned char> field_to_bytes(const ScalarField& f) {
    std::vector<unsigned char> bytes(static_cast<size_t>(f.size()));
    for (int i = 0; i < f.size(); ++i) {
        const double v = std::clamp(f[i], 0.0, 1.0);
        bytes[static_cast<size_t>(i)] =
            static_cast<unsigned char>(std::lround(v * 255.0));
    }
    return bytes;
}

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

} // namespace detail

inline ScalarField load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '5') throw io_error("not a P5 PGM: " + path);
    const int w = detail::pnm_next_token(in);
    const int h = detail::pnm_next_token(in);
    const int maxval = detail::pnm_next_token(in);
    if (w <= 0 || h <= 0) throw io_error("bad PGM dimensions in " + path);
    if (maxval != 255) throw io_error("PGM maxval must be 255 in " + path);
    in.get(); // single whitespace byte after the header
    std::vector<unsigned char> bytes(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw io_error("PGM pixel data truncated in " + path);
    return detail::bytes_to_field(bytes, w, h);
}

inline void save_pgm(const ScalarField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << "P5\n" << f.width << " " << f.height << "\n255\n";
    auto bytes = detail::field_to_bytes(f);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("short write to " + path);
}

// 8-bit grayscale PNG; color inputs are reduced to Rec.601 luminance.
inline ScalarField load_png(const std::string& path) {
    detail::PngReadCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "rb");
    if (!ctx.fp) throw io_error("cannot open " + path);
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8))
        throw io_error("not a PNG: " + path);
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) throw io_error("libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io_error("libpng failed reading " + path);
    png_init_io(ctx.png, ctx.fp);
    png_set_sig_bytes(ctx.png, 8);
    png_read_info(ctx.png, ctx.info);

    const int w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
    const int h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
    const png_byte color = png_get_color_type(ctx.png, ctx.info);
    const png_byte depth = png_get_bit_depth(ctx.png, ctx.info);

    if (depth == 16) png_set_strip_16(ctx.png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    const int channels = static_cast<int>(png_get_channels(ctx.png, ctx.info));
    std::vector<unsigned char> row(static_cast<size_t>(w) * channels);
    ScalarField f(w, h);
    for (int r = 0; r < h; ++r) {
        png_read_row(ctx.png, row.data(), nullptr);
        for (int c = 0; c < w; ++c) {
            double v;
            if (channels >= 3) {
                const double rr = row[static_cast<size_t>(c) * channels + 0];
                const double gg = row[static_cast<size_t>(c) * channels + 1];
                const double bb = row[static_cast<size_t>(c) * channels + 2];
                v = 0.299 * rr + 0.587 * gg + 0.114 * bb;
            } else {
                v = row[static_cast<size_t>(c) * channels];
            }
            f.at(r, c) = v / 255.0;
        }
    }
    return f;
}

inline void save_png(const ScalarField& f, const std::string& path) {
    detail::PngWriteCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "wb");
    if (!ctx.fp) throw io_error("cannot write " + path);
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) throw io_error("libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io_error("libpng failed writing " + path);
    png_init_io(ctx.png, ctx.fp);
    png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(f.width),
                 static_cast<png_uint_32>(f.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);
    auto bytes = detail::field_to_bytes(f);
    for (int r = 0; r < f.height; ++r)
        png_write_row(ctx.png, bytes.data() + static_cast<size_t>(r) * f.width);
    png_write_end(ctx.png, nullptr);
}

// raw-f32: 16-byte header (magic "TWSF", u32 W, u32 H, u32 reserved), then
// W*H little-endian float32, row-major.
inline ScalarField load_raw_f32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    char magic[4];
    std::uint32_t w = 0, h = 0, reserved = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&reserved), 4);
    if (!in || std::memcmp(magic, "TWSF", 4) != 0)
        throw io_error("malformed TWSF header in " + path);
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
        throw io_error("bad TWSF dimensions in " + path);
    std::vector<float> data(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(data.size() * sizeof(float)))
        throw io_error("TWSF pixel data truncated in " + path);
    ScalarField f(static_cast<int>(w), static_cast<int>(h));
    for (size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i]))
            throw io_error("non-finite value in " + path);
        f[static_cast<int>(i)] = static_cast<double>(data[i]);
    }
    return f;
}

inline void save_raw_f32(const ScalarField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    const std::uint32_t w = static_cast<std::uint32_t>(f.width);
    const std::uint32_t h = static_cast<std::uint32_t>(f.height);
    const std::uint32_t reserved = 0;
    out.write("TWSF", 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&reserved), 4);
    std::vector<float> data(static_cast<size_t>(f.size()));
    for (int i = 0; i < f.size(); ++i) data[static_cast<size_t>(i)] = static_cast<float>(f[i]);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw io_error("short write to " + path);
}

inline ScalarField load_field(const std::string& path, FieldFormat format) {
    switch (format) {
        case FieldFormat::pgm: return load_pgm(path);
        case FieldFormat::png: return load_png(path);
        case FieldFormat::raw_f32: return load_raw_f32(path);
    }
    throw io_error("unknown field format");
}

inline ScalarField load_field(const std::string& path) {
    return load_field(path, format_from_path(path));
}

inline void save_field(const ScalarField& f, const std::string& path, FieldFormat format) {
    if (!f.all_finite()) throw invariant_error("save_field: non-finite field");
    switch (format) {
        case FieldFormat::pgm: save_pgm(f, path); return;
        case FieldFormat::png: save_png(f, path); return;
        case FieldFormat::raw_f32: save_raw_f32(f, path); return;
    }
    throw io_error("unknown field format");
}

inline void save_field(const ScalarField& f, const std::string& path) {
    save_field(f, path, format_from_path(path));
}

} // namespace wtopo
